#pragma once

#include "agentedit/error.hpp"
#include "agentedit/media.hpp"
#include "agentedit/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace agentedit::bench {

enum class EditType { IpObjectReplace, IpObjectAdd, IpBackgroundChange, Reasoning, Removal };

inline constexpr std::array<std::pair<EditType, std::string_view>, 5> edit_types{{
    {EditType::IpObjectReplace, "ip_object_replace"},
    {EditType::IpObjectAdd, "ip_object_add"},
    {EditType::IpBackgroundChange, "ip_background_change"},
    {EditType::Reasoning, "reasoning"},
    {EditType::Removal, "removal"},
}};

inline std::string edit_type_name(EditType t)
{
    for (const auto& [k, n] : edit_types) {
        if (k == t) return std::string(n);
    }
    return {};
}

inline EditType parse_edit_type(std::string_view name)
{
    for (const auto& [k, n] : edit_types) {
        if (n == name) return k;
    }
    fail(ErrorCode::MalformedDocument, "unknown edit type " + std::string(name));
}

inline bool is_ip(EditType t) noexcept
{
    return t == EditType::IpObjectReplace || t == EditType::IpObjectAdd || t == EditType::IpBackgroundChange;
}

enum class RubricVariant { FiveAxis, SevenAxis };

inline RubricVariant variant_for(EditType t) noexcept
{
    return is_ip(t) ? RubricVariant::SevenAxis : RubricVariant::FiveAxis;
}

inline constexpr std::array<std::string_view, 7> axis_labels{
    "Instruction Following", "Edit Region Localization", "Source Preservation", "Visual Quality",
    "Temporal Consistency",  "IP Presence",              "IP Identity Match",
};

constexpr std::size_t axis_count(RubricVariant v) noexcept { return v == RubricVariant::SevenAxis ? 7 : 5; }
constexpr int native_max(RubricVariant v) noexcept { return 3 * static_cast<int>(axis_count(v)); }

struct BenchCase {
    std::string case_id;
    EditType edit_type = EditType::Reasoning;
    std::string prompt;
    std::optional<std::string> target_entity;
    std::optional<std::string> edit_region;
    VideoHandle source_video;
    VideoHandle edited_video;

    RubricVariant variant() const noexcept { return variant_for(edit_type); }
};

// Three judged frames per clip: 0, n/3 and 2n/3 (floored).
inline std::array<int, 3> sample_judge_frames(int n)
{
    if (n < 3) fail(ErrorCode::TooFewFrames, "clip has " + std::to_string(n) + " frame(s), need at least 3");
    return {0, n / 3, (2 * n) / 3};
}

// Judge prompt bodies.
inline constexpr std::string_view seven_axis_template =
    "You are a meticulous video editing quality evaluator. Compare the BEFORE frame and the AFTER frame "
    "against the editing instruction and a named target entity, and score the edit on seven axes.\n"
    "\n"
    "Editing instruction: {prompt}\n"
    "Target entity:       {target_entity}\n"
    "Edit region:         {edit_region}\n"
    "\n"
    "For each axis, return an integer from 0 (worst) to 3 (best) with a brief justification. Do not exceed 3.\n"
    "\n"
    "1. Instruction Following (0--3). Was the requested edit performed in the named region with the named "
    "target?\n"
    "  3: requested edit performed correctly in the right region.\n"
    "  2: edit performed but with a minor inaccuracy or omission.\n"
    "  1: edit partially performed or applied to the wrong region.\n"
    "  0: instruction ignored, or the opposite was done.\n"
    "2. Edit Region Localization (0--3). Was the change confined to the specified region?\n"
    "3. Source Preservation (0--3). Are subject motion, geometry and lighting outside the edit region "
    "preserved?\n"
    "4. Visual Quality (0--3). Realism, seamless integration, lighting and shadow match, scale and "
    "perspective.\n"
    "5. Temporal Consistency (0--3). Inferred from the AFTER frame, would the edited entity remain stable "
    "across the clip without ghosting or pop-in?\n"
    "6. IP Presence (0--3). Is the named entity actually visible and recognizable in roughly the right "
    "region?\n"
    "7. IP Identity Match (0--3). Does the visible entity match the specific real-world identity, brand "
    "colors, logo, and signature shape? You may rely only on your internal world knowledge of the brand or "
    "product.\n"
    "\n"
    "Return your evaluation in exactly this format:\n"
    "Instruction Following: [score] - [one-sentence justification]\n"
    "Edit Region Localization: [score] - [one-sentence justification]\n"
    "Source Preservation: [score] - [one-sentence justification]\n"
    "Visual Quality: [score] - [one-sentence justification]\n"
    "Temporal Consistency: [score] - [one-sentence justification]\n"
    "IP Presence: [score] - [one-sentence justification]\n"
    "IP Identity Match: [score] - [one-sentence justification]\n"
    "Total: [sum of the seven scores]";

inline constexpr std::string_view five_axis_head =
    "You are a meticulous video editing quality evaluator. Compare the BEFORE frame and the AFTER frame "
    "against the editing instruction, and score the edit on five axes.\n"
    "\n"
    "Editing instruction: {prompt}\n"
    "\n"
    "For each axis, return an integer from 0 (worst) to 3 (best) with a brief justification. Do not exceed 3.\n"
    "\n"
    "1. Instruction Following (0--3). Was the requested edit performed?\n"
    "  3: edit performed correctly.\n"
    "  2: edit performed with a minor inaccuracy.\n"
    "  1: edit partially performed or applied to the wrong region.\n"
    "  0: instruction ignored, or the opposite was done.\n";

inline constexpr std::string_view removal_clause =
    "  Removal-only clause: if the model replaced the target with a new object instead of removing it, give "
    "at most 1.\n";

inline constexpr std::string_view five_axis_tail =
    "2. Edit Region Localization (0--3). Was the change confined to the specified region or, for global edits, "
    "to the implied scope?\n"
    "3. Source Preservation (0--3). Are subject motion, geometry and lighting outside the edit region "
    "preserved?\n"
    "4. Visual Quality (0--3). Realism, seamless integration, lighting and shadow match, scale and "
    "perspective.\n"
    "5. Temporal Consistency (0--3). Inferred from the AFTER frame, would the result remain stable across the "
    "clip?\n"
    "\n"
    "Return your evaluation in exactly this format:\n"
    "Instruction Following: [score] - [one-sentence justification]\n"
    "Edit Region Localization: [score] - [one-sentence justification]\n"
    "Source Preservation: [score] - [one-sentence justification]\n"
    "Visual Quality: [score] - [one-sentence justification]\n"
    "Temporal Consistency: [score] - [one-sentence justification]\n"
    "Total: [sum of the five scores]";

namespace detail {

// Single pass, so placeholder-looking text inside a value is left alone.
inline std::string substitute(std::string_view tmpl, const std::map<std::string, std::string>& values)
{
    std::string out;
    out.reserve(tmpl.size() + 256);
    for (std::size_t i = 0; i < tmpl.size();) {
        if (tmpl[i] == '{') {
            auto close = tmpl.find('}', i);
            if (close != std::string_view::npos) {
                auto it = values.find(std::string(tmpl.substr(i + 1, close - i - 1)));
                if (it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += tmpl[i++];
    }
    return out;
}

} // namespace detail

inline std::string render_judge_prompt(const BenchCase& c)
{
    if (is_ip(c.edit_type)) {
        if (!c.target_entity || !c.edit_region || text::is_blank(*c.target_entity) || text::is_blank(*c.edit_region)) {
            fail(ErrorCode::MissingEntityFields, "IP case " + c.case_id + " needs target_entity and edit_region");
        }
        return detail::substitute(seven_axis_template, {{"prompt", c.prompt},
                                                        {"target_entity", *c.target_entity},
                                                        {"edit_region", *c.edit_region}});
    }
    std::string tmpl(five_axis_head);
    if (c.edit_type == EditType::Removal) tmpl += removal_clause;
    tmpl += five_axis_tail;
    return detail::substitute(tmpl, {{"prompt", c.prompt}});
}

struct AxisScore {
    std::string axis;
    int score = 0;
    std::string justification;

    friend bool operator==(const AxisScore&, const AxisScore&) = default;
};

struct JudgeScorecard {
    RubricVariant variant = RubricVariant::FiveAxis;
    std::vector<AxisScore> axes;
    int total = 0;

    friend bool operator==(const JudgeScorecard&, const JudgeScorecard&) = default;
};

namespace detail {

inline std::optional<int> leading_int(std::string_view s, std::string_view& rest)
{
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr == s.data()) return std::nullopt;
    rest = s.substr(static_cast<std::size_t>(ptr - s.data()));
    return value;
}

} // namespace detail

// Strict reader for the "Axis: score - justification" format. Blank lines are
// skipped; anything else that is not an expected axis or the Total line is an error.
inline JudgeScorecard parse_judge_response(std::string_view response, RubricVariant variant)
{
    const std::size_t expected = axis_count(variant);
    JudgeScorecard card;
    card.variant = variant;
    std::optional<int> total;

    for (const auto& raw : text::split_lines(response)) {
        const auto line = text::trim(raw);
        if (line.empty()) continue;
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) fail(ErrorCode::UnparseableLine, std::string(line));
        const auto name = text::trim(line.substr(0, colon));
        const auto value = text::trim(line.substr(colon + 1));

        std::string_view rest;
        if (name == "Total") {
            if (total) fail(ErrorCode::UnparseableLine, "duplicate Total line");
            if (card.axes.size() != expected) {
                fail(ErrorCode::MissingAxis, std::string(axis_labels[card.axes.size()]));
            }
            auto v = detail::leading_int(value, rest);
            if (!v || !text::trim(rest).empty()) fail(ErrorCode::UnparseableLine, std::string(line));
            total = *v;
            continue;
        }
        if (total || card.axes.size() >= expected) fail(ErrorCode::UnparseableLine, std::string(line));
        const auto want = axis_labels[card.axes.size()];
        if (name != want) {
            // a known axis out of place means the expected one was skipped
            auto known = std::find(axis_labels.begin(), axis_labels.begin() + static_cast<long>(expected), name);
            if (known != axis_labels.begin() + static_cast<long>(expected)) {
                fail(ErrorCode::MissingAxis, std::string(want));
            }
            fail(ErrorCode::UnparseableLine, std::string(line));
        }
        auto score = detail::leading_int(value, rest);
        if (!score) fail(ErrorCode::UnparseableLine, std::string(line));
        if (*score < 0 || *score > 3) {
            fail(ErrorCode::ScoreOutOfRange, std::string(want) + " scored " + std::to_string(*score));
        }
        rest = text::trim(rest);
        if (!rest.empty()) {
            if (rest.front() != '-') fail(ErrorCode::UnparseableLine, std::string(line));
            rest = text::trim(rest.substr(1));
        }
        card.axes.push_back({std::string(want), *score, std::string(rest)});
    }

    if (card.axes.size() != expected) fail(ErrorCode::MissingAxis, std::string(axis_labels[card.axes.size()]));
    if (!total) fail(ErrorCode::MissingAxis, "Total");
    int sum = 0;
    for (const auto& a : card.axes) sum += a.score;
    if (sum != *total) {
        fail(ErrorCode::TotalMismatch, "Total " + std::to_string(*total) + " but axes sum to " + std::to_string(sum));
    }
    card.total = sum;
    return card;
}

inline std::string format_judge_response(const JudgeScorecard& card)
{
    std::string out;
    for (const auto& a : card.axes) {
        out += a.axis + ": " + std::to_string(a.score) + " - " + a.justification + "\n";
    }
    out += "Total: " + std::to_string(card.total);
    return out;
}

struct CaseScore {
    std::vector<double> per_axis_mean;
    double total = 0.0;
    int native_max = 15;
    double percentage = 0.0;
};

inline CaseScore score_case(std::span<const JudgeScorecard> cards, RubricVariant variant)
{
    if (cards.size() != 3) fail(ErrorCode::WrongCardinality, "expected 3 scorecards, got " + std::to_string(cards.size()));
    const std::size_t n = axis_count(variant);
    for (const auto& c : cards) {
        if (c.variant != variant || c.axes.size() != n) fail(ErrorCode::VariantMismatch, "scorecard variant differs");
    }
    CaseScore s;
    s.native_max = native_max(variant);
    s.per_axis_mean.assign(n, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
        double sum = 0.0;
        for (const auto& c : cards) sum += c.axes[a].score;
        s.per_axis_mean[a] = sum / 3.0;
        s.total += s.per_axis_mean[a];
    }
    s.percentage = 100.0 * s.total / s.native_max;
    return s;
}

struct ScoredCase {
    BenchCase bench_case;
    CaseScore score;
};

struct TypeSummary {
    std::size_t cases = 0;
    double mean_percentage = 0.0;
};

struct BenchmarkReport {
    std::map<std::string, TypeSummary> per_type;
    double overall = 0.0;
    std::vector<ScoredCase> cases; // sorted by case_id
};

// Each case's percentage is already normalized by its own ceiling, so the
// overall mean equals averaging after rescaling every case onto 0..21.
inline BenchmarkReport aggregate_benchmark(std::vector<ScoredCase> scores)
{
    if (scores.empty()) fail(ErrorCode::EmptyInput, "no scored cases");
    std::sort(scores.begin(), scores.end(), [](const ScoredCase& a, const ScoredCase& b) {
        return a.bench_case.case_id < b.bench_case.case_id;
    });
    BenchmarkReport report;
    std::map<std::string, double> sums;
    double overall = 0.0;
    for (const auto& s : scores) {
        const auto type = edit_type_name(s.bench_case.edit_type);
        sums[type] += s.score.percentage;
        report.per_type[type].cases += 1;
        overall += s.score.percentage;
    }
    for (auto& [type, summary] : report.per_type) {
        summary.mean_percentage = sums[type] / static_cast<double>(summary.cases);
    }
    report.overall = overall / static_cast<double>(scores.size());
    report.cases = std::move(scores);
    return report;
}

enum class OutputFramePolicy { SaveAll81, KeepFirst64, TemporalResizeToSource };

inline std::string policy_name(OutputFramePolicy p)
{
    switch (p) {
    case OutputFramePolicy::SaveAll81: return "save_all_81";
    case OutputFramePolicy::KeepFirst64: return "keep_first_64";
    case OutputFramePolicy::TemporalResizeToSource: return "temporal_resize_to_source";
    }
    return {};
}

struct InferencePreset {
    std::string benchmark_id;
    double lambda_txt = 2.0;
    double lambda_img = 1.0;
    int steps = 50;
    bool tools_search_enabled = false;
    bool tools_mask_enabled = false;
    OutputFramePolicy output_frame_policy = OutputFramePolicy::SaveAll81;

    bool two_pass_fallback() const noexcept { return lambda_img == 1.0; }
};

inline InferencePreset resolve_inference_preset(std::string_view benchmark_id)
{
    if (benchmark_id == "agentedit") {
        return {"agentedit", 2.0, 1.25, 50, true, true, OutputFramePolicy::SaveAll81};
    }
    if (benchmark_id == "editverse") {
        return {"editverse", 1.5, 1.0, 50, false, false, OutputFramePolicy::KeepFirst64};
    }
    if (benchmark_id == "openve") {
        return {"openve", 2.0, 1.0, 50, false, false, OutputFramePolicy::TemporalResizeToSource};
    }
    fail(ErrorCode::UnknownBenchmark, "unknown benchmark " + std::string(benchmark_id));
}

inline nlohmann::ordered_json preset_to_json(const InferencePreset& p)
{
    return {{"benchmark_id", p.benchmark_id},
            {"lambda_txt", p.lambda_txt},
            {"lambda_img", p.lambda_img},
            {"steps", p.steps},
            {"tools_search_enabled", p.tools_search_enabled},
            {"tools_mask_enabled", p.tools_mask_enabled},
            {"output_frame_policy", policy_name(p.output_frame_policy)}};
}

// The editor always denoises 81 frames; what is written out depends on the benchmark.
struct OutputFrameSpec {
    int denoised_frames = 81;
    int saved_frames = 81;
    bool temporal_resize = false;
};

inline OutputFrameSpec plan_output_frames(const InferencePreset& preset, int source_frame_count)
{
    if (source_frame_count < 1) fail(ErrorCode::InvalidRequest, "source must have at least one frame");
    switch (preset.output_frame_policy) {
    case OutputFramePolicy::SaveAll81: return {81, 81, false};
    case OutputFramePolicy::KeepFirst64: return {81, 64, false};
    case OutputFramePolicy::TemporalResizeToSource: return {81, source_frame_count, true};
    }
    return {};
}

inline nlohmann::ordered_json report_to_json(const BenchmarkReport& report)
{
    nlohmann::ordered_json doc;
    doc["overall"] = report.overall;
    nlohmann::ordered_json types = nlohmann::ordered_json::object();
    for (const auto& [type, s] : report.per_type) {
        types[type] = {{"cases", s.cases}, {"mean_percentage", s.mean_percentage}};
    }
    doc["per_type"] = types;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& c : report.cases) {
        rows.push_back({{"case_id", c.bench_case.case_id},
                        {"edit_type", edit_type_name(c.bench_case.edit_type)},
                        {"per_axis_mean", c.score.per_axis_mean},
                        {"total", c.score.total},
                        {"native_max", c.score.native_max},
                        {"percentage", c.score.percentage}});
    }
    doc["cases"] = rows;
    return doc;
}

inline BenchCase case_from_json(const nlohmann::json& doc)
{
    BenchCase c;
    try {
        c.case_id = doc.at("case_id").get<std::string>();
        c.edit_type = parse_edit_type(doc.at("edit_type").get<std::string>());
        c.prompt = doc.at("prompt").get<std::string>();
        if (doc.contains("target_entity") && doc.at("target_entity").is_string()) {
            c.target_entity = doc.at("target_entity").get<std::string>();
        }
        if (doc.contains("edit_region") && doc.at("edit_region").is_string()) {
            c.edit_region = doc.at("edit_region").get<std::string>();
        }
        auto video = [&](const char* key) {
            const auto& v = doc.at(key);
            if (v.is_string()) {
                nlohmann::json h{{"path", v.get<std::string>()}};
                for (const char* k : {"frames", "height", "width", "fps"}) {
                    if (doc.contains(k)) h[k] = doc.at(k);
                }
                return video_from_json(h);
            }
            return video_from_json(v);
        };
        c.source_video = video("source_video");
        c.edited_video = video("edited_video");
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::MalformedDocument, std::string("bench case: ") + e.what());
    }
    if (is_ip(c.edit_type) && (!c.target_entity || !c.edit_region)) {
        fail(ErrorCode::MissingEntityFields, "IP case " + c.case_id + " needs target_entity and edit_region");
    }
    return c;
}

inline nlohmann::ordered_json case_to_json(const BenchCase& c)
{
    nlohmann::ordered_json doc;
    doc["case_id"] = c.case_id;
    doc["edit_type"] = edit_type_name(c.edit_type);
    doc["prompt"] = c.prompt;
    if (c.target_entity) doc["target_entity"] = *c.target_entity;
    if (c.edit_region) doc["edit_region"] = *c.edit_region;
    doc["source_video"] = video_to_json(c.source_video);
    doc["edited_video"] = video_to_json(c.edited_video);
    return doc;
}

} // namespace agentedit::bench
