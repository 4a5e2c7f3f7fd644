#pragma once

#include "agentedit/error.hpp"
#include "agentedit/media.hpp"
#include "agentedit/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace agentedit {

// What the user handed us: source clip, free-form request, optional references.
struct EditRequest {
    VideoHandle source_video;
    std::string raw_instruction;
    std::vector<ImageRef> user_references;

    void check() const
    {
        source_video.check();
        if (text::is_blank(raw_instruction)) fail(ErrorCode::InvalidRequest, "raw instruction is empty");
    }
};

inline nlohmann::ordered_json image_ref_to_json(const ImageRef& ref)
{
    return {{"uri", ref.uri}, {"height", ref.height}, {"width", ref.width}};
}

// A reference is either a bare uri or {"uri", "height", "width"}; local .ppm
// files are loaded so their pixels feed digests and composites.
inline ImageRef image_ref_from_json(const nlohmann::json& doc)
{
    ImageRef ref;
    if (doc.is_string()) {
        ref.uri = doc.get<std::string>();
    } else if (doc.is_object() && doc.contains("uri") && doc.at("uri").is_string()) {
        ref.uri = doc.at("uri").get<std::string>();
        ref.height = doc.value("height", 0);
        ref.width = doc.value("width", 0);
    } else {
        fail(ErrorCode::MalformedDocument, "image reference needs a uri");
    }
    std::error_code ec;
    if (ref.uri.ends_with(".ppm") && std::filesystem::is_regular_file(ref.uri, ec)) {
        ref = make_local_ref(ref.uri, read_ppm(ref.uri));
    }
    return ref;
}

inline nlohmann::ordered_json request_to_json(const EditRequest& request)
{
    auto refs = nlohmann::ordered_json::array();
    for (const auto& r : request.user_references) refs.push_back(image_ref_to_json(r));
    return {{"source_video", video_to_json(request.source_video)},
            {"instruction", request.raw_instruction},
            {"references", refs}};
}

inline EditRequest request_from_json(const nlohmann::json& doc)
{
    EditRequest req;
    try {
        req.source_video = video_from_json(doc.at("source_video"));
        req.raw_instruction = doc.at("instruction").get<std::string>();
        if (doc.contains("references")) {
            for (const auto& r : doc.at("references")) req.user_references.push_back(image_ref_from_json(r));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::MalformedDocument, std::string("request: ") + e.what());
    }
    req.check();
    return req;
}

class TaskLabel {
public:
    enum class Kind {
        AddObject,
        RemoveObject,
        ReplaceObject,
        ChangeBackground,
        GlobalStyle,
        ChangeColor,
        CombinedTasks,
        Extension,
    };

    static constexpr std::array<std::pair<Kind, std::string_view>, 7> vocabulary{{
        {Kind::AddObject, "add_object"},
        {Kind::RemoveObject, "remove_object"},
        {Kind::ReplaceObject, "replace_object"},
        {Kind::ChangeBackground, "change_background"},
        {Kind::GlobalStyle, "global_style"},
        {Kind::ChangeColor, "change_color"},
        {Kind::CombinedTasks, "combined_tasks"},
    }};

    TaskLabel() = default;
    TaskLabel(Kind kind) : kind_(kind) {}

    static TaskLabel extension(std::string raw)
    {
        TaskLabel t(Kind::Extension);
        t.raw_ = std::move(raw);
        return t;
    }

    Kind kind() const noexcept { return kind_; }
    bool is_extension() const noexcept { return kind_ == Kind::Extension; }

    // Web image search is only meaningful when the edit introduces new content.
    bool search_eligible() const noexcept
    {
        return kind_ == Kind::AddObject || kind_ == Kind::ReplaceObject || kind_ == Kind::ChangeBackground;
    }

    std::string str() const
    {
        if (kind_ == Kind::Extension) return raw_;
        for (const auto& [k, name] : vocabulary) {
            if (k == kind_) return std::string(name);
        }
        return {};
    }

    friend bool operator==(const TaskLabel&, const TaskLabel&) = default;

private:
    Kind kind_ = Kind::GlobalStyle;
    std::string raw_;
};

inline TaskLabel normalize_task_label(std::string_view raw)
{
    const std::string folded = text::to_lower(text::trim(raw));
    for (const auto& [kind, name] : TaskLabel::vocabulary) {
        if (folded == name) return TaskLabel(kind);
    }
    return TaskLabel::extension(std::string(raw));
}

// The four-field plan. An absent optional is the only encoding of "no tool".
struct EditPlan {
    std::string refined_instruction;
    TaskLabel task;
    std::optional<std::string> image_search;
    std::optional<std::string> mask_phrase;

    friend bool operator==(const EditPlan&, const EditPlan&) = default;
};

namespace plan_keys {
inline constexpr const char* instruction = "refined_text_instruction";
inline constexpr const char* subtask = "subtask";
inline constexpr const char* image_search = "image_search";
inline constexpr const char* mask = "mask";
} // namespace plan_keys

namespace detail {

inline std::string required_string(const nlohmann::json& doc, const char* key)
{
    if (!doc.contains(key)) fail(ErrorCode::MissingField, std::string("missing \"") + key + "\"");
    const auto& v = doc.at(key);
    if (!v.is_string()) fail(ErrorCode::MalformedDocument, std::string("\"") + key + "\" must be a string");
    auto s = v.get<std::string>();
    if (text::is_blank(s)) fail(ErrorCode::EmptyStringField, std::string("\"") + key + "\" is blank");
    return s;
}

// string -> present, false or missing -> absent.
inline std::optional<std::string> optional_string(const nlohmann::json& doc, const char* key)
{
    if (!doc.contains(key)) return std::nullopt;
    const auto& v = doc.at(key);
    if (v.is_boolean() && !v.get<bool>()) return std::nullopt;
    if (!v.is_string()) {
        fail(ErrorCode::MalformedDocument, std::string("\"") + key + "\" must be a string or false");
    }
    auto s = v.get<std::string>();
    if (text::is_blank(s)) fail(ErrorCode::EmptyStringField, std::string("\"") + key + "\" is blank");
    return s;
}

} // namespace detail

inline EditPlan plan_from_json(const nlohmann::json& doc)
{
    if (!doc.is_object()) fail(ErrorCode::MalformedDocument, "plan must be a JSON object");
    for (const auto& [key, _] : doc.items()) {
        if (key != plan_keys::instruction && key != plan_keys::subtask && key != plan_keys::image_search &&
            key != plan_keys::mask) {
            fail(ErrorCode::MalformedDocument, "unexpected key \"" + key + "\"");
        }
    }
    EditPlan plan;
    plan.refined_instruction = detail::required_string(doc, plan_keys::instruction);
    plan.task = normalize_task_label(detail::required_string(doc, plan_keys::subtask));
    plan.image_search = detail::optional_string(doc, plan_keys::image_search);
    plan.mask_phrase = detail::optional_string(doc, plan_keys::mask);
    return plan;
}

inline EditPlan parse_edit_plan(std::string_view document)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(document);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCode::MalformedDocument, e.what());
    }
    return plan_from_json(doc);
}

inline nlohmann::ordered_json plan_to_json(const EditPlan& plan)
{
    nlohmann::ordered_json doc;
    doc[plan_keys::instruction] = plan.refined_instruction;
    doc[plan_keys::subtask] = plan.task.str();
    doc[plan_keys::image_search] = plan.image_search ? nlohmann::ordered_json(*plan.image_search) : nlohmann::ordered_json(false);
    doc[plan_keys::mask] = plan.mask_phrase ? nlohmann::ordered_json(*plan.mask_phrase) : nlohmann::ordered_json(false);
    return doc;
}

// Canonical single-line wire form.
inline std::string serialize_edit_plan(const EditPlan& plan)
{
    return plan_to_json(plan).dump();
}

struct Violation {
    std::string rule;
    std::string reason;

    friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationReport {
    bool valid = true;
    std::vector<Violation> violations;
    std::vector<Violation> warnings;
};

struct ValidationOptions {
    // R3: only removal plans may carry a mask phrase.
    bool mask_requires_removal = true;
};

inline ValidationReport validate_plan(const EditPlan& plan, const EditRequest& request,
                                      const ValidationOptions& options = {})
{
    ValidationReport report;
    if (plan.image_search && !request.user_references.empty()) {
        report.violations.push_back({"R1", "image search requested although the user supplied " +
                                               std::to_string(request.user_references.size()) +
                                               " reference image(s)"});
    }
    if (plan.image_search && !plan.task.search_eligible()) {
        report.violations.push_back(
            {"R2", "image search is not allowed for task '" + plan.task.str() + "'"});
    }
    if (options.mask_requires_removal && plan.mask_phrase && plan.task.kind() != TaskLabel::Kind::RemoveObject) {
        report.violations.push_back(
            {"R3", "mask phrase is only allowed for remove_object, got '" + plan.task.str() + "'"});
    }
    if (plan.image_search && plan.mask_phrase) {
        report.warnings.push_back({"W1", "plan requests both image search and a mask"});
    }
    std::sort(report.violations.begin(), report.violations.end(),
              [](const Violation& a, const Violation& b) { return a.rule < b.rule; });
    report.valid = report.violations.empty();
    return report;
}

inline nlohmann::ordered_json report_to_json(const ValidationReport& report)
{
    nlohmann::ordered_json doc;
    doc["verdict"] = report.valid ? "valid" : "invalid";
    auto list = [](const std::vector<Violation>& vs) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& v : vs) arr.push_back({{"rule", v.rule}, {"reason", v.reason}});
        return arr;
    };
    doc["violations"] = list(report.violations);
    doc["warnings"] = list(report.warnings);
    return doc;
}

} // namespace agentedit
