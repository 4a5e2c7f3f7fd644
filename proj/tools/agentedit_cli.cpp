#include "agentedit/cli.hpp"

int main(int argc, char** argv)
{
    return agentedit::cli::cli_dispatch(argc, argv);
}
