#pragma once

#include "agentedit/bench_harness.hpp"
#include "agentedit/digest.hpp"
#include "agentedit/endpoints.hpp"
#include "agentedit/error.hpp"
#include "agentedit/http_endpoints.hpp"
#include "agentedit/mock_endpoints.hpp"
#include "agentedit/plan_schema.hpp"
#include "agentedit/tool_exec.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace agentedit {

enum class Role { Planner, Selector, Search, Grounder, Editor, Judge, Scorer };

inline constexpr std::array<std::pair<Role, std::string_view>, 7> roles{{
    {Role::Planner, "planner"},
    {Role::Selector, "selector"},
    {Role::Search, "search"},
    {Role::Grounder, "grounder"},
    {Role::Editor, "editor"},
    {Role::Judge, "judge"},
    {Role::Scorer, "scorer"},
}};

inline std::string role_name(Role r)
{
    for (const auto& [k, n] : roles) {
        if (k == r) return std::string(n);
    }
    return {};
}

inline Role parse_role(std::string_view name)
{
    for (const auto& [k, n] : roles) {
        if (n == name) return k;
    }
    fail(ErrorCode::InvalidConfig, "unknown role " + std::string(name));
}

struct EndpointConfig {
    Role role = Role::Planner;
    enum class Mode { Live, Mock } mode = Mode::Mock;
    std::string base_url;
    std::string auth_env; // name of the environment variable holding the secret
    std::string model;
    std::optional<std::filesystem::path> fixture;
};

struct RuntimeConfig {
    std::map<Role, EndpointConfig> endpoints;

    bool bound(Role r) const { return endpoints.contains(r); }
};

// {"endpoints": {"<role>": {"mode": "live"|"mock", "base_url", "auth_env", "model", "fixture"}}}
// Fixture paths are resolved against the config file's directory.
inline RuntimeConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {})
{
    RuntimeConfig cfg;
    if (!doc.contains("endpoints") || !doc.at("endpoints").is_object()) {
        fail(ErrorCode::ConfigMissing, "config needs an \"endpoints\" object");
    }
    for (const auto& [name, body] : doc.at("endpoints").items()) {
        EndpointConfig ep;
        ep.role = parse_role(name);
        const auto mode = body.value("mode", "mock");
        if (mode == "live") {
            ep.mode = EndpointConfig::Mode::Live;
        } else if (mode != "mock") {
            fail(ErrorCode::InvalidConfig, name + ": mode must be live or mock");
        }
        ep.base_url = body.value("base_url", "");
        ep.auth_env = body.value("auth_env", "");
        ep.model = body.value("model", "");
        if (body.contains("fixture")) ep.fixture = base_dir / body.at("fixture").get<std::string>();
        cfg.endpoints[ep.role] = std::move(ep);
    }
    return cfg;
}

inline RuntimeConfig load_config(const std::filesystem::path& file)
{
    return parse_config(mock::load_json_file(file), file.parent_path());
}

// Binds every role to its mock, reading <dir>/<role>.json when present.
inline RuntimeConfig mock_config(const std::filesystem::path& dir)
{
    RuntimeConfig cfg;
    for (const auto& [role, name] : roles) {
        EndpointConfig ep;
        ep.role = role;
        auto file = dir / (std::string(name) + ".json");
        std::error_code ec;
        if (std::filesystem::is_regular_file(file, ec)) ep.fixture = file;
        cfg.endpoints[role] = std::move(ep);
    }
    return cfg;
}

// Mock fixtures from --mock override the matching roles of a config file.
inline RuntimeConfig overlay(RuntimeConfig base, const RuntimeConfig& top)
{
    for (const auto& [role, ep] : top.endpoints) base.endpoints[role] = ep;
    return base;
}

inline std::string default_planner_reply(const ChatRequest& req)
{
    // Without a fixture the mock planner passes the request through untouched.
    auto text = req.joined_text();
    const std::string marker = "User request: ";
    auto pos = text.find(marker);
    std::string instruction = pos == std::string::npos ? text : text.substr(pos + marker.size());
    instruction = instruction.substr(0, instruction.find('\n'));
    EditPlan plan{instruction, TaskLabel(TaskLabel::Kind::GlobalStyle), std::nullopt, std::nullopt};
    return serialize_edit_plan(plan);
}

class EndpointRegistry {
public:
    EndpointRegistry() = default;

    explicit EndpointRegistry(const RuntimeConfig& cfg)
    {
        for (const auto& [role, ep] : cfg.endpoints) bind(ep);
    }

    ChatClient* chat(Role r) const
    {
        auto it = chats_.find(r);
        return it == chats_.end() ? nullptr : it->second.get();
    }
    SearchClient* search() const { return search_.get(); }
    GroundingClient* grounder() const { return grounder_.get(); }
    EditorClient* editor() const { return editor_.get(); }
    ScoringClient* scorer() const { return scorer_.get(); }

    void set_chat(Role r, std::unique_ptr<ChatClient> c) { chats_[r] = std::move(c); }
    void set_search(std::unique_ptr<SearchClient> c) { search_ = std::move(c); }
    void set_grounder(std::unique_ptr<GroundingClient> c) { grounder_ = std::move(c); }
    void set_editor(std::unique_ptr<EditorClient> c) { editor_ = std::move(c); }
    void set_scorer(std::unique_ptr<ScoringClient> c) { scorer_ = std::move(c); }

private:
    void bind(const EndpointConfig& ep)
    {
        if (ep.mode == EndpointConfig::Mode::Live) {
            bind_live(ep);
            return;
        }
        nlohmann::json fx = ep.fixture ? mock::load_json_file(*ep.fixture) : nlohmann::json::object();
        switch (ep.role) {
        case Role::Planner: set_chat(ep.role, mock::MockChatClient::from_json(fx, default_planner_reply)); break;
        case Role::Selector:
            set_chat(ep.role, mock::MockChatClient::from_json(fx, [](const ChatRequest&) { return std::string("Selected: image_1"); }));
            break;
        case Role::Judge: set_chat(ep.role, mock::MockChatClient::from_json(fx, mock::synthetic_judge_reply)); break;
        case Role::Search: set_search(mock::MockSearchClient::from_json(fx)); break;
        case Role::Grounder: set_grounder(mock::MockGroundingClient::from_json(fx)); break;
        case Role::Editor: set_editor(std::make_unique<mock::MockEditorClient>()); break;
        case Role::Scorer: set_scorer(mock::MockScoringClient::from_json(fx)); break;
        }
    }

    void bind_live(const EndpointConfig& ep)
    {
        http::ClientOptions opts;
        opts.base_url = ep.base_url;
        opts.model = ep.model;
        if (!ep.auth_env.empty()) {
            const char* secret = std::getenv(ep.auth_env.c_str());
            if (!secret) fail(ErrorCode::ConfigMissing, role_name(ep.role) + ": environment variable " + ep.auth_env + " is unset");
            opts.api_key = secret;
        }
        if (ep.role != Role::Search && opts.base_url.empty()) {
            fail(ErrorCode::ConfigMissing, role_name(ep.role) + ": live mode needs base_url");
        }
        switch (ep.role) {
        case Role::Planner:
        case Role::Selector:
        case Role::Judge: set_chat(ep.role, std::make_unique<http::OpenAiChatClient>(opts)); break;
        case Role::Search: set_search(std::make_unique<http::SerperSearchClient>(opts)); break;
        case Role::Grounder: set_grounder(std::make_unique<http::HttpGroundingClient>(opts)); break;
        case Role::Editor: set_editor(std::make_unique<http::HttpEditorClient>(opts)); break;
        case Role::Scorer: set_scorer(std::make_unique<http::HttpScoringClient>(opts)); break;
        }
    }

    std::map<Role, std::unique_ptr<ChatClient>> chats_;
    std::unique_ptr<SearchClient> search_;
    std::unique_ptr<GroundingClient> grounder_;
    std::unique_ptr<EditorClient> editor_;
    std::unique_ptr<ScoringClient> scorer_;
};

struct RunRecord {
    std::string run_id;
    std::string status; // completed | aborted
    nlohmann::ordered_json request;
    EditPlan plan;      // as emitted by the planner
    EditPlan effective; // after preset tool toggles
    ValidationReport validation;
    std::string tuple_digest;
    nlohmann::ordered_json tuple;
    std::vector<ToolCall> transcript;
    std::optional<bench::InferencePreset> preset;
    std::optional<VideoHandle> edited_video;
    std::string started_at;
    std::string finished_at;
};

inline std::string utc_timestamp()
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline nlohmann::ordered_json record_to_json(const RunRecord& r)
{
    nlohmann::ordered_json doc;
    doc["run_id"] = r.run_id;
    doc["status"] = r.status;
    doc["request"] = r.request;
    doc["plan"] = plan_to_json(r.plan);
    doc["effective_plan"] = plan_to_json(r.effective);
    doc["validation"] = report_to_json(r.validation);
    doc["tuple_digest"] = r.tuple_digest;
    doc["tuple"] = r.tuple;
    auto calls = nlohmann::ordered_json::array();
    for (const auto& c : r.transcript) {
        nlohmann::ordered_json e{{"tool", c.tool},
                                 {"request_digest", c.request_digest},
                                 {"response_digest", c.response_digest},
                                 {"latency_ms", c.latency_ms},
                                 {"attempts", c.attempts}};
        if (!c.note.empty()) e["note"] = c.note;
        calls.push_back(e);
    }
    doc["transcript"] = calls;
    doc["preset"] = r.preset ? bench::preset_to_json(*r.preset) : nlohmann::ordered_json(nullptr);
    doc["edited_video"] = r.edited_video ? video_to_json(*r.edited_video) : nlohmann::ordered_json(nullptr);
    doc["started_at"] = r.started_at;
    doc["finished_at"] = r.finished_at;
    return doc;
}

// Appends the record to <out>/runs/<run_id>.jsonl.
inline std::filesystem::path persist_record(const RunRecord& r, const std::filesystem::path& out_dir)
{
    const auto dir = out_dir / "runs";
    std::filesystem::create_directories(dir);
    const auto file = dir / (r.run_id + ".jsonl");
    std::ofstream out(file, std::ios::app);
    if (!out) fail(ErrorCode::IoError, "cannot write " + file.string());
    out << record_to_json(r).dump() << "\n";
    return file;
}

struct PipelineOptions {
    ToolConfig tools;
    const FrameSource* frames = nullptr; // defaults to DefaultFrameSource
    std::optional<std::filesystem::path> out_dir;
};

inline ChatRequest planner_request(const EditRequest& request, const FrameSource& frames)
{
    ChatRequest req;
    req.temperature = 0.0;
    ChatMessage msg;
    msg.parts.push_back(ChatPart::make_text(
        "You plan edits for a video editing model. From the user's request, the source frames and any reference "
        "images, reply with one JSON object with exactly these keys:\n"
        "  refined_text_instruction: the complete instruction the editor should follow\n"
        "  subtask: one of add_object, remove_object, replace_object, change_background, global_style, "
        "change_color, combined_tasks\n"
        "  image_search: a web image query for a named real-world entity or pattern, or false\n"
        "  mask: a phrase for the region to remove, or false\n"
        "image_search may only be set for add_object, replace_object or change_background, and must be false "
        "when the user attached reference images."));
    for (int idx : agent_frame_indices(request.source_video)) {
        msg.parts.push_back(ChatPart::make_image(
            make_local_ref(request.source_video.path + "#" + std::to_string(idx), frames.frame(request.source_video, idx))));
    }
    for (const auto& ref : request.user_references) msg.parts.push_back(ChatPart::make_image(ref));
    msg.parts.push_back(ChatPart::make_text("User reference images: " + std::to_string(request.user_references.size())));
    msg.parts.push_back(ChatPart::make_text("User request: " + request.raw_instruction));
    req.messages.push_back(std::move(msg));
    return req;
}

inline std::string run_id_for(const EditRequest& request, const std::optional<std::string>& benchmark_id)
{
    return short_digest(request_to_json(request).dump() + "|" + benchmark_id.value_or(""));
}

// plan -> validation -> tools -> tuple -> editor, recorded step by step.
inline RunRecord run_pipeline(const EditRequest& request, const std::optional<std::string>& benchmark_id,
                              const EndpointRegistry& registry, const PipelineOptions& options = {})
{
    request.check();
    DefaultFrameSource default_frames;
    const FrameSource& frames = options.frames ? *options.frames : default_frames;

    RunRecord rec;
    rec.started_at = utc_timestamp();
    rec.run_id = run_id_for(request, benchmark_id);
    rec.request = request_to_json(request);
    if (benchmark_id) rec.preset = bench::resolve_inference_preset(*benchmark_id);

    ChatClient* planner = registry.chat(Role::Planner);
    if (!planner) fail(ErrorCode::RoleUnbound, "planner role is not bound");
    if (!registry.editor()) fail(ErrorCode::RoleUnbound, "editor role is not bound");

    const auto preq = planner_request(request, frames);
    const auto started = std::chrono::steady_clock::now();
    auto reply = with_retry(options.tools.retry, options.tools.sleeper, [&] { return planner->complete(preq); });
    rec.transcript.push_back({"planner", short_digest(chat_request_summary(preq).dump()), short_digest(reply.value),
                              detail::elapsed_ms(started), reply.attempts, ""});
    rec.plan = parse_edit_plan(text::extract_json_object(reply.value));

    ValidationOptions vopts;
    vopts.mask_requires_removal = options.tools.mask_requires_removal;
    rec.validation = validate_plan(rec.plan, request, vopts);
    rec.effective = rec.plan;
    if (!rec.validation.valid) {
        rec.status = "aborted";
        rec.finished_at = utc_timestamp();
        if (options.out_dir) persist_record(rec, *options.out_dir);
        fail(ErrorCode::PlanInvalid, "plan violates " + rec.validation.violations.front().rule + ": " +
                                         rec.validation.violations.front().reason);
    }

    if (rec.preset && (!rec.preset->tools_search_enabled || !rec.preset->tools_mask_enabled)) {
        std::string dropped;
        if (!rec.preset->tools_search_enabled && rec.effective.image_search) {
            rec.effective.image_search.reset();
            dropped += " image_search";
        }
        if (!rec.preset->tools_mask_enabled && rec.effective.mask_phrase) {
            rec.effective.mask_phrase.reset();
            dropped += " mask";
        }
        rec.transcript.push_back({"preset", "", "", 0, 0,
                                  "tools disabled by preset " + rec.preset->benchmark_id +
                                      (dropped.empty() ? "" : " (dropped:" + dropped + ")")});
    }

    ToolEndpoints tools{registry.search(), registry.chat(Role::Selector), registry.grounder(), &frames};
    auto tuple = construct_conditions(rec.effective, request, tools, options.tools, &rec.transcript);
    rec.tuple = tuple_to_json(tuple);
    rec.tuple_digest = tuple_digest(tuple);

    const int out_frames = rec.preset ? bench::plan_output_frames(*rec.preset, request.source_video.frames).saved_frames
                                      : request.source_video.frames;
    const auto edit_start = std::chrono::steady_clock::now();
    rec.edited_video = registry.editor()->edit(rec.tuple, request.source_video, out_frames);
    rec.transcript.push_back({"editor", short_digest(rec.tuple.dump()), short_digest(video_to_json(*rec.edited_video).dump()),
                              detail::elapsed_ms(edit_start), 1, ""});

    rec.status = "completed";
    rec.finished_at = utc_timestamp();
    if (options.out_dir) persist_record(rec, *options.out_dir);
    return rec;
}

} // namespace agentedit
