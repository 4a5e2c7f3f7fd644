#pragma once

#include "agentedit/error.hpp"
#include "agentedit/plan_schema.hpp"
#include "agentedit/text.hpp"
#include "agentedit/tool_exec.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace agentedit::dataset {

inline constexpr int schema_version = 1;

// Planner supervision: the degraded user request in context, the clean plan as target.
struct PlanningSftRecord {
    EditRequest context;
    EditPlan target_plan;
    std::string degradation_style; // free-form tag, e.g. "colloquial"
};

inline PlanningSftRecord build_planning_record(const std::string& degraded_request, const EditRequest& context,
                                               const EditPlan& plan, std::string degradation_style = {})
{
    if (text::is_blank(degraded_request)) fail(ErrorCode::InvalidRequest, "degraded request is empty");
    PlanningSftRecord rec{context, plan, std::move(degradation_style)};
    rec.context.raw_instruction = degraded_request;
    rec.context.check();
    auto report = validate_plan(plan, rec.context);
    if (!report.valid) fail(ErrorCode::PlanInvalid, "target plan violates " + report.violations.front().rule);
    return rec;
}

struct SelectionRecord {
    std::string search_prompt;
    CandidateSet candidates;
    int answer_id = 1;

    std::string target_text() const { return "image_" + std::to_string(answer_id); }
};

inline SelectionRecord build_selection_record(const std::string& search_prompt, const CandidateSet& candidates,
                                              int answer_id)
{
    if (candidates.empty()) fail(ErrorCode::NoCandidates, "selection record needs candidates");
    if (answer_id < 1 || answer_id > static_cast<int>(candidates.candidates.size())) {
        fail(ErrorCode::IndexOutOfRange, "answer " + std::to_string(answer_id) + " of " +
                                             std::to_string(candidates.candidates.size()) + " candidates");
    }
    return {search_prompt, candidates, answer_id};
}

enum class BoundaryCategory {
    SourceEntityFalseTrigger,
    AmbiguousMask,
    FalseImageSearch,
    ConstraintLosingRewrite,
    TaskRouting,
};

inline constexpr std::array<std::pair<BoundaryCategory, std::string_view>, 5> boundary_categories{{
    {BoundaryCategory::SourceEntityFalseTrigger, "source_entity_false_trigger"},
    {BoundaryCategory::AmbiguousMask, "ambiguous_mask"},
    {BoundaryCategory::FalseImageSearch, "false_image_search"},
    {BoundaryCategory::ConstraintLosingRewrite, "constraint_losing_rewrite"},
    {BoundaryCategory::TaskRouting, "task_routing"},
}};

inline std::string category_name(BoundaryCategory c)
{
    for (const auto& [k, name] : boundary_categories) {
        if (k == c) return std::string(name);
    }
    return {};
}

inline BoundaryCategory parse_category(std::string_view name)
{
    for (const auto& [k, n] : boundary_categories) {
        if (n == name) return k;
    }
    fail(ErrorCode::MalformedDocument, "unknown boundary category " + std::string(name));
}

struct PreferencePair {
    EditRequest context;
    EditPlan chosen;
    EditPlan rejected;
    BoundaryCategory category = BoundaryCategory::FalseImageSearch;
};

// Names of the plan fields on which two plans differ.
inline std::vector<std::string> plan_field_diff(const EditPlan& a, const EditPlan& b)
{
    std::vector<std::string> out;
    if (a.refined_instruction != b.refined_instruction) out.emplace_back(plan_keys::instruction);
    if (a.task != b.task) out.emplace_back(plan_keys::subtask);
    if (a.image_search != b.image_search) out.emplace_back(plan_keys::image_search);
    if (a.mask_phrase != b.mask_phrase) out.emplace_back(plan_keys::mask);
    return out;
}

// The chosen plan is the seed; the rejected plan flips the one field the
// category is about, using the caller-supplied wrong value.
inline PreferencePair generate_preference_pair(const PlanningSftRecord& seed, BoundaryCategory category,
                                               const std::string& perturbation)
{
    if (text::is_blank(perturbation)) {
        fail(ErrorCode::CategoryInputMissing, category_name(category) + " needs a perturbation value");
    }
    auto report = validate_plan(seed.target_plan, seed.context);
    if (!report.valid) fail(ErrorCode::PlanInvalid, "seed plan violates " + report.violations.front().rule);

    PreferencePair pair{seed.context, seed.target_plan, seed.target_plan, category};
    EditPlan& bad = pair.rejected;
    switch (category) {
    case BoundaryCategory::SourceEntityFalseTrigger:
    case BoundaryCategory::FalseImageSearch:
        if (seed.target_plan.image_search) {
            fail(ErrorCode::InvalidPerturbation, category_name(category) + " needs a seed without image search");
        }
        bad.image_search = perturbation;
        break;
    case BoundaryCategory::AmbiguousMask:
        if (!seed.target_plan.mask_phrase) {
            fail(ErrorCode::InvalidPerturbation, "ambiguous_mask needs a seed with a mask phrase");
        }
        if (perturbation.size() >= seed.target_plan.mask_phrase->size()) {
            fail(ErrorCode::InvalidPerturbation, "vaguer mask phrase must be shorter than \"" +
                                                     *seed.target_plan.mask_phrase + "\"");
        }
        bad.mask_phrase = perturbation;
        break;
    case BoundaryCategory::ConstraintLosingRewrite:
        bad.refined_instruction = perturbation;
        break;
    case BoundaryCategory::TaskRouting: {
        auto label = normalize_task_label(perturbation);
        if (label.is_extension()) fail(ErrorCode::InvalidPerturbation, "unknown task label " + perturbation);
        bad.task = label;
        break;
    }
    }
    if (bad == pair.chosen) fail(ErrorCode::DegenerateRejection, "rejected plan equals chosen plan");
    return pair;
}

enum class EditCategory { StyleTransfer, GlobalSceneChange, LocalEdit };

inline EditCategory parse_edit_category(std::string_view name)
{
    if (name == "style_transfer") return EditCategory::StyleTransfer;
    if (name == "global_scene_change") return EditCategory::GlobalSceneChange;
    if (name == "local_edit") return EditCategory::LocalEdit;
    fail(ErrorCode::MalformedDocument, "unknown edit category " + std::string(name));
}

// One of the two edits applied to a shared source clip.
struct EditDescriptor {
    EditCategory category = EditCategory::LocalEdit;
    std::optional<std::string> target_object;
};

struct FilterDecision {
    bool keep = true;
    std::string reason; // both_style | both_global_scene | same_object

    friend bool operator==(const FilterDecision&, const FilterDecision&) = default;
};

// Pairs that would collapse into a single edit are dropped.
inline FilterDecision filter_combined_task_candidates(const EditDescriptor& a, const EditDescriptor& b)
{
    if (a.category == EditCategory::StyleTransfer && b.category == EditCategory::StyleTransfer) {
        return {false, "both_style"};
    }
    if (a.category == EditCategory::GlobalSceneChange && b.category == EditCategory::GlobalSceneChange) {
        return {false, "both_global_scene"};
    }
    if (a.target_object && b.target_object && *a.target_object == *b.target_object) {
        return {false, "same_object"};
    }
    return {true, ""};
}

inline constexpr std::array<std::string_view, 7> curation_axes{
    "source_quality",     "target_quality",    "edit_localization", "identity_preservation",
    "motion_consistency", "edit_authenticity", "prompt_alignment",
};

struct CurationVerdict {
    std::array<int, 7> axis_scores{};
    bool faithful = true;
    std::optional<std::string> rewrite;
    bool accept = true;
};

struct CurationOutcome {
    bool accepted = false;
    std::string instruction;

    friend bool operator==(const CurationOutcome&, const CurationOutcome&) = default;
};

inline CurationOutcome apply_curation_verdict(const CurationVerdict& verdict, const std::string& original_instruction)
{
    if (!verdict.accept) return {false, ""};
    if (verdict.faithful) return {true, original_instruction};
    if (!verdict.rewrite || text::is_blank(*verdict.rewrite)) {
        fail(ErrorCode::MissingRewrite, "unfaithful accepted sample carries no rewrite");
    }
    return {true, *verdict.rewrite};
}

// --- line-delimited corpus serialization ---

inline nlohmann::ordered_json to_json(const PlanningSftRecord& r)
{
    return {{"schema_version", schema_version},
            {"kind", "planning"},
            {"context", request_to_json(r.context)},
            {"degradation_style", r.degradation_style},
            {"plan", plan_to_json(r.target_plan)}};
}

inline nlohmann::ordered_json candidates_to_json(const CandidateSet& set)
{
    auto arr = nlohmann::ordered_json::array();
    for (const auto& c : set.candidates) {
        arr.push_back({{"id", c.id}, {"imageUrl", c.source_url}, {"title", c.title}});
    }
    return arr;
}

inline nlohmann::ordered_json to_json(const SelectionRecord& r)
{
    return {{"schema_version", schema_version},
            {"kind", "selection"},
            {"search_prompt", r.search_prompt},
            {"query", r.candidates.query},
            {"candidates", candidates_to_json(r.candidates)},
            {"answer_id", r.answer_id},
            {"target", "Selected: " + r.target_text()}};
}

inline nlohmann::ordered_json to_json(const PreferencePair& p)
{
    return {{"schema_version", schema_version},
            {"kind", "preference"},
            {"category", category_name(p.category)},
            {"context", request_to_json(p.context)},
            {"chosen", plan_to_json(p.chosen)},
            {"rejected", plan_to_json(p.rejected)}};
}

inline CandidateSet candidates_from_json(const std::string& query, const nlohmann::json& arr)
{
    CandidateSet set;
    set.query = query;
    int id = 1;
    for (const auto& c : arr) {
        Candidate cand;
        cand.id = id++;
        cand.source_url = c.at("imageUrl").get<std::string>();
        cand.image.uri = cand.source_url;
        cand.title = c.value("title", "");
        set.candidates.push_back(std::move(cand));
    }
    return set;
}

inline PlanningSftRecord planning_record_from_json(const nlohmann::json& doc)
{
    try {
        return build_planning_record(doc.at("degraded").get<std::string>(), request_from_json(doc.at("context")),
                                     plan_from_json(doc.at("plan")), doc.value("degradation_style", ""));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::MalformedDocument, std::string("planning input: ") + e.what());
    }
}

inline EditDescriptor descriptor_from_json(const nlohmann::json& doc)
{
    EditDescriptor d;
    d.category = parse_edit_category(doc.at("category").get<std::string>());
    if (doc.contains("object") && doc.at("object").is_string()) d.target_object = doc.at("object").get<std::string>();
    return d;
}

inline CurationVerdict verdict_from_json(const nlohmann::json& doc)
{
    CurationVerdict v;
    if (doc.contains("scores")) {
        for (std::size_t i = 0; i < curation_axes.size(); ++i) {
            v.axis_scores[i] = doc.at("scores").value(std::string(curation_axes[i]), 0);
        }
    }
    v.faithful = doc.at("faithful").get<bool>();
    v.accept = doc.at("accept").get<bool>();
    if (doc.contains("rewrite") && doc.at("rewrite").is_string()) v.rewrite = doc.at("rewrite").get<std::string>();
    return v;
}

// Dispatches one raw input line to the matching builder and returns the
// serialized output record.
inline nlohmann::ordered_json build_record(std::string_view kind, const nlohmann::json& in)
{
    try {
        if (kind == "planning") return to_json(planning_record_from_json(in));
        if (kind == "selection") {
            auto set = candidates_from_json(in.value("query", ""), in.at("candidates"));
            return to_json(build_selection_record(in.at("prompt").get<std::string>(), set, in.at("answer").get<int>()));
        }
        if (kind == "preference") {
            auto seed = planning_record_from_json(in.at("seed"));
            return to_json(generate_preference_pair(seed, parse_category(in.at("category").get<std::string>()),
                                                    in.value("input", "")));
        }
        if (kind == "combined_filter") {
            auto d = filter_combined_task_candidates(descriptor_from_json(in.at("a")), descriptor_from_json(in.at("b")));
            nlohmann::ordered_json out{{"schema_version", schema_version}, {"kind", "combined_filter"}};
            out["decision"] = d.keep ? "keep" : "discard";
            if (!d.keep) out["reason"] = d.reason;
            return out;
        }
        if (kind == "curation") {
            auto outcome = apply_curation_verdict(verdict_from_json(in.at("verdict")),
                                                  in.at("instruction").get<std::string>());
            nlohmann::ordered_json out{{"schema_version", schema_version}, {"kind", "curation"}};
            out["decision"] = outcome.accepted ? "accept" : "reject";
            if (outcome.accepted) out["instruction"] = outcome.instruction;
            return out;
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::MalformedDocument, std::string(kind) + " input: " + e.what());
    }
    fail(ErrorCode::UnknownSubcommand, "unknown dataset kind " + std::string(kind));
}

} // namespace agentedit::dataset
