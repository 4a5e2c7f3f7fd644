#pragma once

#include "agentedit/error.hpp"
#include "agentedit/media.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

namespace agentedit {

// Thrown by endpoint clients for connection-level failures. Only these are
// retried; anything that reached the server and came back malformed is not.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ChatPart {
    enum class Kind { Text, Image };
    Kind kind = Kind::Text;
    std::string text;
    ImageRef image;

    static ChatPart make_text(std::string t)
    {
        ChatPart p;
        p.text = std::move(t);
        return p;
    }
    static ChatPart make_image(ImageRef ref)
    {
        ChatPart p;
        p.kind = Kind::Image;
        p.image = std::move(ref);
        return p;
    }
};

struct ChatMessage {
    std::string role = "user";
    std::vector<ChatPart> parts;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    double temperature = 0.0;

    // Text parts joined by newlines; used by mocks for matching.
    std::string joined_text() const
    {
        std::string out;
        for (const auto& m : messages) {
            for (const auto& p : m.parts) {
                if (p.kind == ChatPart::Kind::Text) {
                    if (!out.empty()) out += '\n';
                    out += p.text;
                }
            }
        }
        return out;
    }

    std::vector<std::string> image_uris() const
    {
        std::vector<std::string> out;
        for (const auto& m : messages) {
            for (const auto& p : m.parts) {
                if (p.kind == ChatPart::Kind::Image) out.push_back(p.image.uri);
            }
        }
        return out;
    }
};

// Digest-friendly form: images are reduced to uri + content hash.
inline nlohmann::ordered_json chat_request_summary(const ChatRequest& req)
{
    nlohmann::ordered_json doc;
    doc["temperature"] = req.temperature;
    auto msgs = nlohmann::ordered_json::array();
    for (const auto& m : req.messages) {
        auto parts = nlohmann::ordered_json::array();
        for (const auto& p : m.parts) {
            if (p.kind == ChatPart::Kind::Text) {
                parts.push_back({{"type", "text"}, {"text", p.text}});
            } else {
                parts.push_back({{"type", "image"}, {"uri", p.image.uri}, {"digest", p.image.digest()}});
            }
        }
        msgs.push_back({{"role", m.role}, {"content", parts}});
    }
    doc["messages"] = msgs;
    return doc;
}

class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual std::string complete(const ChatRequest& request) = 0;
};

struct SearchHit {
    std::string image_url;
    std::string title;
};

class SearchClient {
public:
    virtual ~SearchClient() = default;
    virtual std::vector<SearchHit> search(const std::string& query, int top_k) = 0;
};

struct GroundingResponse {
    int detections = 0;
    int height = 0;
    int width = 0;
    std::vector<bool> bits; // row-major
};

class GroundingClient {
public:
    virtual ~GroundingClient() = default;
    virtual GroundingResponse ground(const std::string& phrase, const Image& frame) = 0;
};

class EditorClient {
public:
    virtual ~EditorClient() = default;
    virtual VideoHandle edit(const nlohmann::ordered_json& tuple, const VideoHandle& source, int output_frames) = 0;
};

// Per-token log-probabilities of a plan text under a named model
// ("policy" or "reference").
class ScoringClient {
public:
    virtual ~ScoringClient() = default;
    virtual std::vector<double> token_logprobs(const std::string& model, const std::string& context,
                                               const std::string& plan_text) = 0;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds base_delay{500};
    double factor = 2.0;

    std::chrono::milliseconds delay_before(int attempt) const
    {
        // attempt is 1-based; no delay before the first try
        double ms = static_cast<double>(base_delay.count());
        for (int i = 2; i < attempt; ++i) ms *= factor;
        return std::chrono::milliseconds(static_cast<long long>(ms));
    }
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline Sleeper real_sleeper()
{
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

template <typename T>
struct Attempted {
    T value;
    int attempts = 1;
};

template <typename F>
auto with_retry(const RetryPolicy& policy, const Sleeper& sleep, F&& call)
    -> Attempted<std::invoke_result_t<F>>
{
    for (int attempt = 1;; ++attempt) {
        if (attempt > 1 && sleep) sleep(policy.delay_before(attempt));
        try {
            return {call(), attempt};
        } catch (const TransportError& e) {
            if (attempt >= policy.max_attempts) throw NetworkError(e.what(), attempt);
        }
    }
}

} // namespace agentedit
