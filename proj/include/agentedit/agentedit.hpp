#pragma once

#include "agentedit/error.hpp"
#include "agentedit/digest.hpp"
#include "agentedit/text.hpp"
#include "agentedit/media.hpp"
#include "agentedit/plan_schema.hpp"
#include "agentedit/endpoints.hpp"
#include "agentedit/tool_exec.hpp"
#include "agentedit/conditioning_math.hpp"
#include "agentedit/training_objectives.hpp"
#include "agentedit/dataset_builder.hpp"
#include "agentedit/bench_harness.hpp"
#include "agentedit/parallel.hpp"
#include "agentedit/bench_runner.hpp"
#include "agentedit/mock_endpoints.hpp"
#include "agentedit/http_endpoints.hpp"
#include "agentedit/runtime.hpp"
#include "agentedit/selftest.hpp"
