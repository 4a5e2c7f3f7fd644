#pragma once

#include "agentedit/agentedit.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

namespace testing_support {

inline std::filesystem::path fixture(const std::string& name)
{
    return std::filesystem::path(AGENTEDIT_SOURCE_DIR) / "tests" / "fixtures" / name;
}

inline std::filesystem::path sample(const std::string& name)
{
    return std::filesystem::path(AGENTEDIT_SOURCE_DIR) / "samples" / name;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& file)
{
    std::ifstream in(file);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

inline std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& file)
{
    std::vector<nlohmann::json> out;
    for (const auto& l : read_lines(file)) out.push_back(nlohmann::json::parse(l));
    return out;
}

// Records requested delays instead of sleeping.
struct RecordingSleeper {
    std::shared_ptr<std::vector<long long>> delays = std::make_shared<std::vector<long long>>();
    std::shared_ptr<std::mutex> mutex = std::make_shared<std::mutex>();

    agentedit::Sleeper fn() const
    {
        return [d = delays, m = mutex](std::chrono::milliseconds ms) {
            std::lock_guard lock(*m);
            d->push_back(ms.count());
        };
    }
};

inline agentedit::Sleeper no_sleep()
{
    return [](std::chrono::milliseconds) {};
}

inline agentedit::EditRequest make_request(std::string instruction = "edit this", int refs = 0,
                                           int frames = 81, int height = 48, int width = 64)
{
    agentedit::EditRequest r;
    r.source_video = {"videos/test.mp4", frames, height, width, 24.0};
    r.raw_instruction = std::move(instruction);
    for (int i = 0; i < refs; ++i) {
        r.user_references.push_back(
            agentedit::make_local_ref("user://ref" + std::to_string(i), agentedit::Image(8, 8, static_cast<std::uint8_t>(10 * i))));
    }
    return r;
}

} // namespace testing_support

#define EXPECT_AGENTEDIT_ERROR(stmt, expected_code)                                                   \
    do {                                                                                              \
        try {                                                                                         \
            stmt;                                                                                     \
            ADD_FAILURE() << "expected " << agentedit::error_name(expected_code) << ", nothing thrown"; \
        } catch (const agentedit::Error& e_) {                                                        \
            EXPECT_EQ(e_.code(), expected_code) << e_.what();                                         \
        }                                                                                             \
    } while (0)
