#pragma once

// Deterministic offline stand-ins for every endpoint role. All of them count
// calls and can inject transport failures, so tests can assert exactly which
// requests went out.

#include "agentedit/bench_harness.hpp"
#include "agentedit/digest.hpp"
#include "agentedit/endpoints.hpp"
#include "agentedit/error.hpp"
#include "agentedit/tool_exec.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace agentedit::mock {

inline nlohmann::json load_json_file(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in) fail(ErrorCode::IoError, "cannot read " + file.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCode::MalformedDocument, file.string() + ": " + e.what());
    }
}

// Fails the first `remaining` calls with a TransportError.
class FaultInjector {
public:
    void fail_next(int n) { remaining_ = n; }

    void maybe_throw(const char* who)
    {
        if (remaining_.load() > 0 && remaining_.fetch_sub(1) > 0) {
            throw TransportError(std::string(who) + ": injected transport failure");
        }
    }

private:
    std::atomic<int> remaining_{0};
};

class MockChatClient : public ChatClient {
public:
    using Fallback = std::function<std::string(const ChatRequest&)>;

    struct Rule {
        std::string match; // substring of the request text or an image uri
        std::string response;
    };

    MockChatClient() = default;
    explicit MockChatClient(std::vector<Rule> rules, Fallback fallback = {})
        : rules_(std::move(rules)), fallback_(std::move(fallback))
    {
    }

    // {"rules": [{"match": "...", "response": "..."}], "default": "..."}
    static std::unique_ptr<MockChatClient> from_json(const nlohmann::json& doc, Fallback fallback = {})
    {
        std::vector<Rule> rules;
        if (doc.contains("rules")) {
            for (const auto& r : doc.at("rules")) {
                auto resp = r.at("response");
                rules.push_back({r.at("match").get<std::string>(), resp.is_string() ? resp.get<std::string>() : resp.dump()});
            }
        }
        if (doc.contains("default")) {
            auto d = doc.at("default");
            std::string text = d.is_string() ? d.get<std::string>() : d.dump();
            fallback = [text](const ChatRequest&) { return text; };
        }
        return std::make_unique<MockChatClient>(std::move(rules), std::move(fallback));
    }

    std::string complete(const ChatRequest& request) override
    {
        ++calls_;
        faults.maybe_throw("chat");
        {
            std::lock_guard lock(mutex_);
            requests_.push_back(request);
        }
        const auto text = request.joined_text();
        const auto uris = request.image_uris();
        for (const auto& r : rules_) {
            if (text.find(r.match) != std::string::npos) return r.response;
            for (const auto& u : uris) {
                if (u == r.match) return r.response;
            }
        }
        if (fallback_) return fallback_(request);
        fail(ErrorCode::ConfigMissing, "mock chat has no rule for request");
    }

    int calls() const noexcept { return calls_.load(); }

    std::vector<ChatRequest> requests() const
    {
        std::lock_guard lock(mutex_);
        return requests_;
    }

    FaultInjector faults;

private:
    std::vector<Rule> rules_;
    Fallback fallback_;
    std::atomic<int> calls_{0};
    mutable std::mutex mutex_;
    std::vector<ChatRequest> requests_;
};

// Stand-in judge: well-formed rubric replies whose scores are a hash of the
// request, so replays are stable and different frames score differently.
inline std::string synthetic_judge_reply(const ChatRequest& request)
{
    const auto text = request.joined_text();
    const bool seven = text.find("seven axes") != std::string::npos;
    std::string key = text;
    for (const auto& u : request.image_uris()) key += "|" + u;
    std::uint64_t h = fnv1a64(key);
    bench::JudgeScorecard card;
    card.variant = seven ? bench::RubricVariant::SevenAxis : bench::RubricVariant::FiveAxis;
    for (std::size_t a = 0; a < bench::axis_count(card.variant); ++a) {
        int s = static_cast<int>(1 + (h % 3)); // 1..3
        h = h / 3 + 0x9e3779b97f4a7c15ull * (a + 1);
        card.axes.push_back({std::string(bench::axis_labels[a]), s, "synthetic assessment"});
        card.total += s;
    }
    return bench::format_judge_response(card);
}

class MockSearchClient : public SearchClient {
public:
    MockSearchClient() = default;
    explicit MockSearchClient(std::map<std::string, std::vector<SearchHit>> fixtures, bool synthesize_missing = true)
        : fixtures_(std::move(fixtures)), synthesize_(synthesize_missing)
    {
    }

    // {"<query>": {"images": [{"imageUrl": ..., "title": ...}]}}
    static std::unique_ptr<MockSearchClient> from_json(const nlohmann::json& doc)
    {
        std::map<std::string, std::vector<SearchHit>> fx;
        for (const auto& [query, body] : doc.items()) {
            auto& hits = fx[query];
            for (const auto& img : body.at("images")) {
                hits.push_back({img.at("imageUrl").get<std::string>(), img.value("title", "")});
            }
        }
        return std::make_unique<MockSearchClient>(std::move(fx));
    }

    std::vector<SearchHit> search(const std::string& query, int top_k) override
    {
        ++calls_;
        faults.maybe_throw("search");
        if (auto it = fixtures_.find(query); it != fixtures_.end()) return it->second;
        std::vector<SearchHit> hits;
        if (!synthesize_) return hits;
        const auto slug = short_digest(query, 8);
        for (int i = 1; i <= top_k; ++i) {
            hits.push_back({"https://images.mock/" + slug + "/" + std::to_string(i) + ".jpg",
                            query + " #" + std::to_string(i)});
        }
        return hits;
    }

    int calls() const noexcept { return calls_.load(); }
    FaultInjector faults;

private:
    std::map<std::string, std::vector<SearchHit>> fixtures_;
    bool synthesize_ = true;
    std::atomic<int> calls_{0};
};

class MockGroundingClient : public GroundingClient {
public:
    MockGroundingClient() = default;
    explicit MockGroundingClient(std::map<std::string, nlohmann::json> fixtures) : fixtures_(std::move(fixtures)) {}

    // {"<phrase>": <segmentation reply>}; unknown phrases get a centered box.
    static std::unique_ptr<MockGroundingClient> from_json(const nlohmann::json& doc)
    {
        std::map<std::string, nlohmann::json> fx;
        for (const auto& [phrase, body] : doc.items()) fx[phrase] = body;
        return std::make_unique<MockGroundingClient>(std::move(fx));
    }

    GroundingResponse ground(const std::string& phrase, const Image& frame) override
    {
        ++calls_;
        faults.maybe_throw("grounder");
        if (auto it = fixtures_.find(phrase); it != fixtures_.end()) return decode_grounding_payload(it->second);
        GroundingResponse r;
        r.detections = 1;
        r.height = frame.height;
        r.width = frame.width;
        r.bits.assign(static_cast<std::size_t>(frame.height) * frame.width, false);
        for (int y = frame.height / 4; y < frame.height - frame.height / 4; ++y) {
            for (int x = frame.width / 4; x < frame.width - frame.width / 4; ++x) {
                r.bits[static_cast<std::size_t>(y) * frame.width + x] = true;
            }
        }
        return r;
    }

    int calls() const noexcept { return calls_.load(); }
    FaultInjector faults;

private:
    std::map<std::string, nlohmann::json> fixtures_;
    std::atomic<int> calls_{0};
};

// Returns the source clip unchanged.
class MockEditorClient : public EditorClient {
public:
    VideoHandle edit(const nlohmann::ordered_json&, const VideoHandle& source, int) override
    {
        ++calls_;
        return source;
    }

    int calls() const noexcept { return calls_.load(); }

private:
    std::atomic<int> calls_{0};
};

class MockScoringClient : public ScoringClient {
public:
    MockScoringClient() = default;
    explicit MockScoringClient(std::map<std::string, std::vector<double>> fixtures) : fixtures_(std::move(fixtures)) {}

    // {"<model>|<plan text>": [logprobs...]}
    static std::unique_ptr<MockScoringClient> from_json(const nlohmann::json& doc)
    {
        std::map<std::string, std::vector<double>> fx;
        for (const auto& [key, arr] : doc.items()) fx[key] = arr.get<std::vector<double>>();
        return std::make_unique<MockScoringClient>(std::move(fx));
    }

    std::vector<double> token_logprobs(const std::string& model, const std::string& context,
                                       const std::string& plan_text) override
    {
        ++calls_;
        if (auto it = fixtures_.find(model + "|" + plan_text); it != fixtures_.end()) return it->second;
        // one pseudo-token per 4 bytes, each with log-prob in [-2.01, -0.01]
        std::vector<double> out;
        const std::uint64_t seed = fnv1a64(model + "|" + context);
        for (std::size_t i = 0; i < plan_text.size(); i += 4) {
            const auto h = fnv1a64(plan_text.substr(i, 4)) ^ (seed + i);
            out.push_back(-0.01 - static_cast<double>(h % 2000) / 1000.0);
        }
        if (out.empty()) out.push_back(-0.01);
        return out;
    }

    int calls() const noexcept { return calls_.load(); }

private:
    std::map<std::string, std::vector<double>> fixtures_;
    std::atomic<int> calls_{0};
};

} // namespace agentedit::mock
