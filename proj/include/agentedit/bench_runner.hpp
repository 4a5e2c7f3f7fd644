#pragma once

#include "agentedit/bench_harness.hpp"
#include "agentedit/endpoints.hpp"
#include "agentedit/error.hpp"
#include "agentedit/media.hpp"
#include "agentedit/parallel.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <string>
#include <vector>

namespace agentedit::bench {

struct FrameJudgement {
    int frame_index = 0;
    std::string raw_text; // last reply received for this frame
    JudgeScorecard card;
    int judge_calls = 0;
};

struct CaseJudgement {
    BenchCase bench_case;
    std::array<FrameJudgement, 3> frames;
    CaseScore score;
};

struct JudgeOptions {
    RetryPolicy retry;
    Sleeper sleeper = real_sleeper();
    int parse_retries = 1;
    std::size_t parallel = 1;
};

inline ChatRequest judge_request(const BenchCase& c, const std::string& prompt, int index, const FrameSource& frames)
{
    const int src_index = std::min(index, c.source_video.frames - 1);
    ChatRequest req;
    req.temperature = 0.0;
    ChatMessage msg;
    msg.parts.push_back(ChatPart::make_text(prompt));
    msg.parts.push_back(ChatPart::make_text("BEFORE frame:"));
    msg.parts.push_back(ChatPart::make_image(make_local_ref(c.source_video.path + "#" + std::to_string(src_index),
                                                            frames.frame(c.source_video, src_index))));
    msg.parts.push_back(ChatPart::make_text("AFTER frame:"));
    msg.parts.push_back(ChatPart::make_image(make_local_ref(c.edited_video.path + "#" + std::to_string(index),
                                                            frames.frame(c.edited_video, index))));
    req.messages.push_back(std::move(msg));
    return req;
}

// One independent judge call per sampled frame; a reply that fails to parse
// is re-requested once before the case fails.
inline CaseJudgement judge_case(const BenchCase& c, ChatClient& judge, const FrameSource& frames,
                                const JudgeOptions& options = {})
{
    const auto indices = sample_judge_frames(c.edited_video.frames);
    const auto prompt = render_judge_prompt(c);
    const auto variant = c.variant();

    CaseJudgement out;
    out.bench_case = c;
    for (std::size_t k = 0; k < indices.size(); ++k) {
        auto& fj = out.frames[k];
        fj.frame_index = indices[k];
        const auto req = judge_request(c, prompt, indices[k], frames);
        for (int attempt = 0;; ++attempt) {
            fj.raw_text = with_retry(options.retry, options.sleeper, [&] { return judge.complete(req); }).value;
            ++fj.judge_calls;
            try {
                fj.card = parse_judge_response(fj.raw_text, variant);
                break;
            } catch (const Error& e) {
                if (attempt >= options.parse_retries) {
                    fail(ErrorCode::JudgeFailed, "case " + c.case_id + " frame " + std::to_string(indices[k]) + ": " +
                                                     e.what());
                }
            }
        }
    }
    std::array<JudgeScorecard, 3> cards{out.frames[0].card, out.frames[1].card, out.frames[2].card};
    out.score = score_case(cards, variant);
    return out;
}

inline std::vector<CaseJudgement> judge_manifest(const std::vector<BenchCase>& cases, ChatClient& judge,
                                                 const FrameSource& frames, const JudgeOptions& options = {})
{
    return parallel_map<CaseJudgement>(cases.size(), options.parallel,
                                       [&](std::size_t i) { return judge_case(cases[i], judge, frames, options); });
}

inline BenchmarkReport report_from_judgements(const std::vector<CaseJudgement>& judged)
{
    std::vector<ScoredCase> scored;
    scored.reserve(judged.size());
    for (const auto& j : judged) scored.push_back({j.bench_case, j.score});
    return aggregate_benchmark(std::move(scored));
}

// Persisted per-case row: parsed scores next to the raw judge text.
inline nlohmann::ordered_json judgement_to_json(const CaseJudgement& j)
{
    nlohmann::ordered_json doc;
    doc["case"] = case_to_json(j.bench_case);
    auto frames = nlohmann::ordered_json::array();
    for (const auto& f : j.frames) {
        auto axes = nlohmann::ordered_json::array();
        for (const auto& a : f.card.axes) {
            axes.push_back({{"axis", a.axis}, {"score", a.score}, {"justification", a.justification}});
        }
        frames.push_back({{"frame_index", f.frame_index},
                          {"judge_calls", f.judge_calls},
                          {"raw", f.raw_text},
                          {"axes", axes},
                          {"total", f.card.total}});
    }
    doc["frames"] = frames;
    doc["per_axis_mean"] = j.score.per_axis_mean;
    doc["total"] = j.score.total;
    doc["native_max"] = j.score.native_max;
    doc["percentage"] = j.score.percentage;
    return doc;
}

// Re-derives a case score from a persisted row by re-parsing the raw texts.
inline ScoredCase scored_case_from_json(const nlohmann::json& doc)
{
    auto c = case_from_json(doc.at("case"));
    std::vector<JudgeScorecard> cards;
    for (const auto& f : doc.at("frames")) cards.push_back(parse_judge_response(f.at("raw").get<std::string>(), c.variant()));
    return {c, score_case(cards, c.variant())};
}

} // namespace agentedit::bench
