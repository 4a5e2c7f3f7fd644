#pragma once

// Live endpoint clients over HTTP(S). Connection failures and 429/5xx replies
// surface as TransportError so the caller's retry policy applies; other
// non-2xx replies are final.

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

#include "agentedit/endpoints.hpp"
#include "agentedit/error.hpp"
#include "agentedit/media.hpp"
#include "agentedit/tool_exec.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <string>
#include <utility>
#include <vector>

namespace agentedit::http {

struct Target {
    std::string origin; // scheme://host[:port]
    std::string path;   // starts with '/'
};

inline Target split_url(const std::string& url)
{
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) fail(ErrorCode::InvalidConfig, "endpoint url needs a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

struct ClientOptions {
    std::string base_url;
    std::string api_key; // resolved secret, never logged
    std::string model;
    std::chrono::seconds timeout{60};
};

namespace detail {

inline nlohmann::json post_json(const ClientOptions& opts, const std::string& path_suffix, const nlohmann::json& body,
                                const httplib::Headers& headers)
{
    auto target = split_url(opts.base_url);
    httplib::Client client(target.origin);
    client.set_connection_timeout(opts.timeout);
    client.set_read_timeout(opts.timeout);
    client.set_write_timeout(opts.timeout);
    std::string path = target.path;
    if (!path_suffix.empty()) {
        if (path.back() == '/') path.pop_back();
        path += path_suffix;
    }
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) throw TransportError("POST " + target.origin + path + ": " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500) {
        throw TransportError("POST " + target.origin + path + ": HTTP " + std::to_string(res->status));
    }
    if (res->status < 200 || res->status >= 300) {
        throw NetworkError("POST " + target.origin + path + ": HTTP " + std::to_string(res->status), 1);
    }
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCode::MalformedDocument, "reply from " + target.origin + path + ": " + e.what());
    }
}

inline httplib::Headers bearer(const ClientOptions& opts)
{
    if (opts.api_key.empty()) return {};
    return {{"Authorization", "Bearer " + opts.api_key}};
}

} // namespace detail

// Serper-compatible image search: {"q": ...} in, {"images": [{imageUrl, title}]} out.
class SerperSearchClient : public SearchClient {
public:
    explicit SerperSearchClient(ClientOptions opts) : opts_(std::move(opts))
    {
        if (opts_.base_url.empty()) opts_.base_url = "https://google.serper.dev/images";
    }

    std::vector<SearchHit> search(const std::string& query, int top_k) override
    {
        httplib::Headers headers;
        if (!opts_.api_key.empty()) headers.emplace("X-API-KEY", opts_.api_key);
        auto doc = detail::post_json(opts_, "", {{"q", query}, {"num", top_k}}, headers);
        std::vector<SearchHit> hits;
        if (!doc.contains("images")) return hits;
        for (const auto& img : doc.at("images")) {
            if (!img.contains("imageUrl") || !img.at("imageUrl").is_string()) continue;
            hits.push_back({img.at("imageUrl").get<std::string>(),
                            img.contains("title") && img.at("title").is_string() ? img.at("title").get<std::string>() : ""});
        }
        return hits;
    }

private:
    ClientOptions opts_;
};

// OpenAI-style chat completions with interleaved text and image_url parts.
class OpenAiChatClient : public ChatClient {
public:
    explicit OpenAiChatClient(ClientOptions opts) : opts_(std::move(opts)) {}

    static nlohmann::json request_body(const ChatRequest& req, const std::string& model)
    {
        nlohmann::json messages = nlohmann::json::array();
        for (const auto& m : req.messages) {
            nlohmann::json content = nlohmann::json::array();
            for (const auto& p : m.parts) {
                if (p.kind == ChatPart::Kind::Text) {
                    content.push_back({{"type", "text"}, {"text", p.text}});
                } else {
                    const auto url = p.image.pixels ? png_data_url(*p.image.pixels) : p.image.uri;
                    content.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
                }
            }
            messages.push_back({{"role", m.role}, {"content", content}});
        }
        return {{"model", model}, {"temperature", req.temperature}, {"messages", messages}};
    }

    std::string complete(const ChatRequest& request) override
    {
        auto doc = detail::post_json(opts_, "/chat/completions", request_body(request, opts_.model),
                                     detail::bearer(opts_));
        try {
            return doc.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::MalformedDocument, std::string("chat reply: ") + e.what());
        }
    }

private:
    ClientOptions opts_;
};

// POST {base}/ground with the phrase and a PNG frame; reply per decode_grounding_payload.
class HttpGroundingClient : public GroundingClient {
public:
    explicit HttpGroundingClient(ClientOptions opts) : opts_(std::move(opts)) {}

    GroundingResponse ground(const std::string& phrase, const Image& frame) override
    {
        nlohmann::json body{{"phrase", phrase},
                            {"frame",
                             {{"height", frame.height},
                              {"width", frame.width},
                              {"encoding", "png_base64"},
                              {"data", base64_encode(encode_png(frame))}}}};
        return decode_grounding_payload(detail::post_json(opts_, "/ground", body, detail::bearer(opts_)));
    }

private:
    ClientOptions opts_;
};

class HttpEditorClient : public EditorClient {
public:
    explicit HttpEditorClient(ClientOptions opts) : opts_(std::move(opts)) {}

    VideoHandle edit(const nlohmann::ordered_json& tuple, const VideoHandle&, int output_frames) override
    {
        nlohmann::json body{{"tuple", nlohmann::json::parse(tuple.dump())}, {"output_frames", output_frames}};
        auto doc = detail::post_json(opts_, "/edit", body, detail::bearer(opts_));
        return video_from_json(doc.at("video"));
    }

private:
    ClientOptions opts_;
};

class HttpScoringClient : public ScoringClient {
public:
    explicit HttpScoringClient(ClientOptions opts) : opts_(std::move(opts)) {}

    std::vector<double> token_logprobs(const std::string& model, const std::string& context,
                                       const std::string& plan_text) override
    {
        auto doc = detail::post_json(opts_, "/logprobs", {{"model", model}, {"context", context}, {"plan", plan_text}},
                                     detail::bearer(opts_));
        return doc.at("token_logprobs").get<std::vector<double>>();
    }

private:
    ClientOptions opts_;
};

} // namespace agentedit::http
