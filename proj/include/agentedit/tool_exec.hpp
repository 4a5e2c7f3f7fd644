#pragma once

#include "agentedit/digest.hpp"
#include "agentedit/endpoints.hpp"
#include "agentedit/error.hpp"
#include "agentedit/media.hpp"
#include "agentedit/plan_schema.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <future>
#include <limits>
#include <optional>
#include <regex>
#include <string>
#include <vector>

namespace agentedit {

struct Candidate {
    int id = 0; // 1-based
    ImageRef image;
    std::string source_url;
    std::string title;
};

struct CandidateSet {
    std::string query;
    std::vector<Candidate> candidates;
    int attempts = 0; // 0 when no call was issued

    bool empty() const noexcept { return candidates.empty(); }
};

enum class Provenance { User, WebSearch, MaskComposite };

inline const char* provenance_name(Provenance p) noexcept
{
    switch (p) {
    case Provenance::User: return "user";
    case Provenance::WebSearch: return "web_search";
    case Provenance::MaskComposite: return "mask_composite";
    }
    return "user";
}

struct ReferenceImage {
    ImageRef image;
    Provenance provenance = Provenance::User;
    std::string origin_meta; // url or mask phrase
};

struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> bits; // row-major, 0/1

    bool at(int y, int x) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
};

struct ConditioningTuple {
    std::string refined_instruction;
    VideoHandle source_video;
    std::vector<ReferenceImage> references;
};

inline nlohmann::ordered_json tuple_to_json(const ConditioningTuple& tuple)
{
    nlohmann::ordered_json doc;
    doc["refined_instruction"] = tuple.refined_instruction;
    doc["source_video"] = video_to_json(tuple.source_video);
    auto refs = nlohmann::ordered_json::array();
    for (const auto& r : tuple.references) {
        refs.push_back({{"provenance", provenance_name(r.provenance)},
                        {"origin", r.origin_meta},
                        {"uri", r.image.uri},
                        {"height", r.image.height},
                        {"width", r.image.width},
                        {"digest", r.image.digest()}});
    }
    doc["references"] = refs;
    return doc;
}

inline std::string tuple_digest(const ConditioningTuple& tuple)
{
    return sha256_hex(tuple_to_json(tuple).dump());
}

// One endpoint interaction, in digest form so no payload or secret leaks.
struct ToolCall {
    std::string tool;
    std::string request_digest;
    std::string response_digest;
    long long latency_ms = 0;
    int attempts = 0;
    std::string note;
};

struct ToolConfig {
    int top_k = 4;
    RetryPolicy retry;
    Sleeper sleeper = real_sleeper();
    int grounding_frame = 0;
    std::uint8_t fill_value = 128;
    bool mask_requires_removal = true;
    bool concurrent = true;
};

struct ToolEndpoints {
    SearchClient* search = nullptr;
    ChatClient* selector = nullptr;
    GroundingClient* grounder = nullptr;
    const FrameSource* frames = nullptr;
};

namespace detail {

inline long long elapsed_ms(std::chrono::steady_clock::time_point since)
{
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - since).count();
}

inline void require(const void* endpoint, const char* role)
{
    if (!endpoint) fail(ErrorCode::RoleUnbound, std::string("no ") + role + " endpoint bound");
}

} // namespace detail

inline CandidateSet search_images(const std::optional<std::string>& query, SearchClient* endpoint, int top_k,
                                  const RetryPolicy& retry = {}, const Sleeper& sleeper = real_sleeper(),
                                  std::vector<ToolCall>* log = nullptr)
{
    CandidateSet set;
    if (!query) return set;
    detail::require(endpoint, "search");
    if (top_k < 1) fail(ErrorCode::InvalidConfig, "top_k must be positive");
    set.query = *query;

    const auto start = std::chrono::steady_clock::now();
    auto result = with_retry(retry, sleeper, [&] { return endpoint->search(*query, top_k); });
    set.attempts = result.attempts;

    nlohmann::ordered_json response = nlohmann::ordered_json::array();
    int id = 1;
    for (const auto& hit : result.value) {
        if (static_cast<int>(set.candidates.size()) >= top_k) break;
        Candidate c;
        c.id = id++;
        c.image.uri = hit.image_url;
        c.source_url = hit.image_url;
        c.title = hit.title;
        set.candidates.push_back(std::move(c));
        response.push_back({{"imageUrl", hit.image_url}, {"title", hit.title}});
    }
    if (log) {
        log->push_back({"search", short_digest(nlohmann::ordered_json{{"q", *query}, {"num", top_k}}.dump()),
                        short_digest(response.dump()), detail::elapsed_ms(start), result.attempts, ""});
    }
    return set;
}

// Accepts "Image N", "image_N" and "Selected: image_N"; first match wins.
inline std::optional<int> parse_selection(const std::string& response)
{
    static const std::regex pattern(R"((?:selected\s*:\s*)?image[ _]?(\d+))", std::regex::icase);
    std::smatch m;
    if (!std::regex_search(response, m, pattern)) return std::nullopt;
    try {
        return std::stoi(m[1].str());
    } catch (const std::out_of_range&) {
        return std::numeric_limits<int>::max();
    }
}

inline ChatRequest selection_request(const CandidateSet& candidates, const std::string& search_prompt)
{
    ChatRequest req;
    ChatMessage msg;
    msg.parts.push_back(ChatPart::make_text(
        "Search prompt: " + search_prompt +
        "\nPick the single candidate image that is visually grounded and consistent with every named-entity "
        "constraint in the search prompt. Answer with \"Selected: image_N\"."));
    for (const auto& c : candidates.candidates) {
        msg.parts.push_back(ChatPart::make_text("Image " + std::to_string(c.id) + ": " + c.title));
        msg.parts.push_back(ChatPart::make_image(c.image));
    }
    req.messages.push_back(std::move(msg));
    req.temperature = 0.0;
    return req;
}

inline ReferenceImage select_reference(const CandidateSet& candidates, const std::string& search_prompt,
                                       ChatClient* selector, const RetryPolicy& retry = {},
                                       const Sleeper& sleeper = real_sleeper(), std::vector<ToolCall>* log = nullptr)
{
    if (candidates.empty()) fail(ErrorCode::NoCandidates, "no candidates for \"" + candidates.query + "\"");
    detail::require(selector, "selector");

    const auto req = selection_request(candidates, search_prompt);
    const auto start = std::chrono::steady_clock::now();
    auto reply = with_retry(retry, sleeper, [&] { return selector->complete(req); });
    if (log) {
        log->push_back({"selector", short_digest(chat_request_summary(req).dump()), short_digest(reply.value),
                        detail::elapsed_ms(start), reply.attempts, ""});
    }

    auto id = parse_selection(reply.value);
    if (!id) fail(ErrorCode::UnparseableSelection, "selector replied \"" + reply.value + "\"");
    if (*id < 1 || *id > static_cast<int>(candidates.candidates.size())) {
        fail(ErrorCode::IndexOutOfRange, "selected image " + std::to_string(*id) + " of " +
                                             std::to_string(candidates.candidates.size()));
    }
    const auto& chosen = candidates.candidates[static_cast<std::size_t>(*id - 1)];
    return {chosen.image, Provenance::WebSearch, chosen.source_url};
}

// Wire format for segmentation replies:
//   {"detections": n, "height": H, "width": W,
//    "mask": {"encoding": "rle", "counts": [...]}}     runs alternate, starting with false
//    "mask": {"encoding": "raw", "data": "0101..."}    one char per pixel, row-major
inline GroundingResponse decode_grounding_payload(const nlohmann::json& doc)
{
    GroundingResponse out;
    try {
        out.detections = doc.at("detections").get<int>();
        if (out.detections == 0) return out;
        out.height = doc.at("height").get<int>();
        out.width = doc.at("width").get<int>();
        const auto& mask = doc.at("mask");
        const auto encoding = mask.at("encoding").get<std::string>();
        const auto expected = static_cast<std::size_t>(out.height) * static_cast<std::size_t>(out.width);
        out.bits.reserve(expected);
        if (encoding == "rle") {
            bool value = false;
            for (const auto& run : mask.at("counts")) {
                auto n = run.get<long long>();
                if (n < 0) fail(ErrorCode::MalformedDocument, "negative run length");
                if (out.bits.size() + static_cast<std::size_t>(n) > expected) {
                    fail(ErrorCode::DimensionMismatch, "rle runs exceed " + std::to_string(expected) + " pixels");
                }
                out.bits.insert(out.bits.end(), static_cast<std::size_t>(n), value);
                value = !value;
            }
        } else if (encoding == "raw") {
            for (char c : mask.at("data").get<std::string>()) {
                if (c != '0' && c != '1') fail(ErrorCode::MalformedDocument, "raw mask must be 0/1 characters");
                out.bits.push_back(c == '1');
            }
        } else {
            fail(ErrorCode::MalformedDocument, "unknown mask encoding " + encoding);
        }
        if (out.bits.size() != expected) {
            fail(ErrorCode::DimensionMismatch, "mask has " + std::to_string(out.bits.size()) + " pixels, header says " +
                                                   std::to_string(out.height) + "x" + std::to_string(out.width));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::MalformedDocument, std::string("grounding reply: ") + e.what());
    }
    return out;
}

inline std::optional<BinaryMask> ground_mask(const std::optional<std::string>& phrase, const Image& frame,
                                             GroundingClient* grounder, const RetryPolicy& retry = {},
                                             const Sleeper& sleeper = real_sleeper(),
                                             std::vector<ToolCall>* log = nullptr)
{
    if (!phrase) return std::nullopt;
    detail::require(grounder, "grounder");

    const auto start = std::chrono::steady_clock::now();
    auto reply = with_retry(retry, sleeper, [&] { return grounder->ground(*phrase, frame); });
    const auto& g = reply.value;
    if (log) {
        std::string bits(g.bits.begin(), g.bits.end());
        log->push_back({"grounder", short_digest(*phrase + "|" + frame.digest()),
                        short_digest(std::to_string(g.detections) + ":" + std::to_string(g.height) + "x" +
                                     std::to_string(g.width) + ":" + bits),
                        detail::elapsed_ms(start), reply.attempts, ""});
    }

    if (g.detections <= 0) fail(ErrorCode::NoTargetFound, "nothing grounded for \"" + *phrase + "\"");
    if (g.height != frame.height || g.width != frame.width ||
        g.bits.size() != static_cast<std::size_t>(frame.height) * frame.width) {
        fail(ErrorCode::DimensionMismatch, "mask " + std::to_string(g.height) + "x" + std::to_string(g.width) +
                                               " for frame " + std::to_string(frame.height) + "x" +
                                               std::to_string(frame.width));
    }
    BinaryMask mask{g.height, g.width, {}};
    mask.bits.assign(g.bits.begin(), g.bits.end());
    return mask;
}

inline ReferenceImage composite_masked_image(const BinaryMask& mask, const Image& frame,
                                             std::uint8_t fill_value = 128, const std::string& phrase = {})
{
    if (mask.height != frame.height || mask.width != frame.width) {
        fail(ErrorCode::DimensionMismatch, "mask and frame sizes differ");
    }
    Image out = frame;
    for (int y = 0; y < frame.height; ++y) {
        for (int x = 0; x < frame.width; ++x) {
            if (!mask.at(y, x)) continue;
            const auto o = out.offset(y, x);
            out.rgb[o] = out.rgb[o + 1] = out.rgb[o + 2] = fill_value;
        }
    }
    auto uri = "mask_composite://" + out.digest().substr(0, 16);
    return {make_local_ref(std::move(uri), std::move(out)), Provenance::MaskComposite, phrase};
}

inline std::string search_prompt_for(const EditPlan& plan)
{
    return *plan.image_search + " (for the edit: " + plan.refined_instruction + ")";
}

// Plan -> (y', V_src, R+). User references keep their order, then the selected
// search image, then the mask composite, regardless of which tool finished first.
inline ConditioningTuple construct_conditions(const EditPlan& plan, const EditRequest& request,
                                              const ToolEndpoints& tools, const ToolConfig& config = {},
                                              std::vector<ToolCall>* log = nullptr)
{
    ValidationOptions vopts;
    vopts.mask_requires_removal = config.mask_requires_removal;
    auto report = validate_plan(plan, request, vopts);
    if (!report.valid) {
        std::string rules;
        for (const auto& v : report.violations) rules += (rules.empty() ? "" : ",") + v.rule;
        fail(ErrorCode::PlanInvalid, "plan violates " + rules);
    }

    ConditioningTuple tuple;
    tuple.refined_instruction = plan.refined_instruction;
    tuple.source_video = request.source_video;
    for (const auto& ref : request.user_references) {
        tuple.references.push_back({ref, Provenance::User, ref.uri});
    }

    auto search_branch = [&](std::vector<ToolCall>* branch_log) -> std::optional<ReferenceImage> {
        if (!plan.image_search) return std::nullopt;
        auto set = search_images(plan.image_search, tools.search, config.top_k, config.retry, config.sleeper,
                                 branch_log);
        return select_reference(set, search_prompt_for(plan), tools.selector, config.retry, config.sleeper,
                                branch_log);
    };
    auto mask_branch = [&](std::vector<ToolCall>* branch_log) -> std::optional<ReferenceImage> {
        if (!plan.mask_phrase) return std::nullopt;
        if (!tools.frames) fail(ErrorCode::RoleUnbound, "no frame source bound");
        const int index = std::clamp(config.grounding_frame, 0, request.source_video.frames - 1);
        const Image frame = tools.frames->frame(request.source_video, index);
        auto mask = ground_mask(plan.mask_phrase, frame, tools.grounder, config.retry, config.sleeper, branch_log);
        return composite_masked_image(*mask, frame, config.fill_value, *plan.mask_phrase);
    };

    std::vector<ToolCall> search_log, mask_log;
    std::optional<ReferenceImage> searched, masked;
    if (config.concurrent && plan.image_search && plan.mask_phrase) {
        auto pending = std::async(std::launch::async, mask_branch, &mask_log);
        try {
            searched = search_branch(&search_log);
        } catch (...) {
            pending.wait();
            throw;
        }
        masked = pending.get();
    } else {
        searched = search_branch(&search_log);
        masked = mask_branch(&mask_log);
    }

    if (searched) tuple.references.push_back(std::move(*searched));
    if (masked) tuple.references.push_back(std::move(*masked));
    if (log) {
        log->insert(log->end(), search_log.begin(), search_log.end());
        log->insert(log->end(), mask_log.begin(), mask_log.end());
    }
    return tuple;
}

} // namespace agentedit
