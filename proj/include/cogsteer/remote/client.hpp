#pragma once

#include <array>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"
#include "json.hpp"

#include "cogsteer/bench/templates.hpp"
#include "cogsteer/core/error.hpp"
#include "cogsteer/core/hash.hpp"

namespace cogsteer {

struct EndpointConfig {
    std::string base_url;                     // scheme://host[:port]
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string token_env;                    // name of the variable holding the bearer token
    double timeout_s = 60.0;
    int max_parallel = 1;
    int backoff_ms = 1000;

    void validate() const {
        require(!model.empty(), "endpoint.model is empty");
        require(timeout_s > 0.0, "endpoint.timeout_s must be > 0");
        require(max_parallel >= 1, "endpoint.max_parallel must be >= 1");
        require(backoff_ms >= 0, "endpoint.backoff_ms must be >= 0");
    }
};

inline constexpr std::array<int, 3> kMaxTokenLadder = {512, 1024, 2048};

struct GenerationParams {
    double temperature = 0.0;
    double top_p = 1.0;
    int max_tokens = 512;
    bool use_system_prompt = true;
    std::string system_prompt = capability_system_prompt();

    void validate() const {
        require(temperature == 0.0, "profiling runs require temperature 0");
        require(top_p == 1.0, "profiling runs require top_p 1");
        bool on_ladder = false;
        for (int m : kMaxTokenLadder) {
            on_ladder = on_ladder || m == max_tokens;
        }
        require(on_ladder, "max_tokens must be one of 512, 1024, 2048");
    }
};

// Chat-completion request body; its compact dump is also the fixture key
// material, so the bearer token never enters it.
inline nlohmann::ordered_json request_body(const std::string & model, const std::string & prompt,
                                           const GenerationParams & params) {
    nlohmann::ordered_json j;
    j["model"] = model;
    j["messages"] = nlohmann::ordered_json::array();
    if (params.use_system_prompt) {
        j["messages"].push_back({{"role", "system"}, {"content", params.system_prompt}});
    }
    j["messages"].push_back({{"role", "user"}, {"content", prompt}});
    j["temperature"] = params.temperature;
    j["top_p"] = params.top_p;
    j["max_tokens"] = params.max_tokens;
    return j;
}

inline std::string fixture_key(const std::string & request_json) { return sha256_hex(request_json); }

enum class RemoteErrorKind { transport, auth, rate_limit, server, client, bad_response, cache_miss, exhausted };

inline std::string remote_error_kind_name(RemoteErrorKind k) {
    switch (k) {
    case RemoteErrorKind::transport: return "transport";
    case RemoteErrorKind::auth: return "auth";
    case RemoteErrorKind::rate_limit: return "rate_limit";
    case RemoteErrorKind::server: return "server";
    case RemoteErrorKind::client: return "client";
    case RemoteErrorKind::bad_response: return "bad_response";
    case RemoteErrorKind::cache_miss: return "cache_miss";
    case RemoteErrorKind::exhausted: return "exhausted";
    }
    return "?";
}

inline bool is_retriable(RemoteErrorKind k) {
    return k == RemoteErrorKind::transport || k == RemoteErrorKind::rate_limit || k == RemoteErrorKind::server ||
           k == RemoteErrorKind::bad_response;
}

struct Attempt {
    int round = 0;
    int max_tokens = 0;
    int status = 0;
    std::string outcome; // ok | truncated | parse_retry | error kind
    std::string detail;
};

inline std::string transcript_text(const std::vector<Attempt> & t) {
    std::string out;
    for (const auto & a : t) {
        out += "  round " + std::to_string(a.round) + " max_tokens=" + std::to_string(a.max_tokens) +
               " status=" + std::to_string(a.status) + " " + a.outcome + (a.detail.empty() ? "" : ": " + a.detail) +
               "\n";
    }
    return out;
}

class RemoteError : public Error {
public:
    RemoteError(RemoteErrorKind kind, const std::string & msg, std::vector<Attempt> transcript = {})
        : Error(remote_error_kind_name(kind) + " error: " + msg +
                (transcript.empty() ? "" : "\n" + transcript_text(transcript))),
          kind_(kind), transcript_(std::move(transcript)) {}

    RemoteErrorKind kind() const { return kind_; }
    bool retriable() const { return is_retriable(kind_); }
    const std::vector<Attempt> & transcript() const { return transcript_; }

private:
    RemoteErrorKind kind_;
    std::vector<Attempt> transcript_;
};

struct HttpResponse {
    int status = 0; // 0: no response
    std::string body;
    std::string error;
};

// Sends one request body; fixture sessions and tests substitute their own.
using Transport = std::function<HttpResponse(const EndpointConfig &, const std::string & body)>;

inline std::string bearer_token(const EndpointConfig & ep) {
    if (ep.token_env.empty()) {
        return {};
    }
    const char * v = std::getenv(ep.token_env.c_str());
    if (!v || !*v) {
        throw RemoteError(RemoteErrorKind::auth, "environment variable " + ep.token_env + " is not set");
    }
    return v;
}

inline HttpResponse http_post(const EndpointConfig & ep, const std::string & body) {
    const std::string token = bearer_token(ep);
    httplib::Client cli(ep.base_url);
    const auto secs = static_cast<time_t>(ep.timeout_s);
    const auto usecs = static_cast<time_t>((ep.timeout_s - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!token.empty()) {
        headers.emplace("Authorization", "Bearer " + token);
    }
    auto res = cli.Post(ep.path, headers, body, "application/json");
    if (!res) {
        return {0, {}, httplib::to_string(res.error())};
    }
    return {res->status, res->body, {}};
}

inline Transport http_transport() { return http_post; }

struct ChatReply {
    std::string content;
    std::string finish_reason;
};

inline ChatReply parse_chat_reply(const std::string & body) {
    try {
        const auto j = nlohmann::json::parse(body);
        const auto & choice = j.at("choices").at(0);
        ChatReply r;
        const auto & content = choice.at("message").at("content");
        r.content = content.is_null() ? std::string() : content.get<std::string>();
        if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
            r.finish_reason = choice["finish_reason"].get<std::string>();
        }
        return r;
    } catch (const nlohmann::json::exception & e) {
        throw RemoteError(RemoteErrorKind::bad_response, std::string("unreadable completion body: ") + e.what());
    }
}

inline RemoteErrorKind classify_status(int status) {
    if (status == 0) {
        return RemoteErrorKind::transport;
    }
    if (status == 401 || status == 403) {
        return RemoteErrorKind::auth;
    }
    if (status == 429) {
        return RemoteErrorKind::rate_limit;
    }
    if (status >= 500) {
        return RemoteErrorKind::server;
    }
    return RemoteErrorKind::client;
}

struct QueryResult {
    std::string text;
    int attempts = 0;
    int max_tokens = 0;
    bool truncated = false; // still truncated or unparseable after the last round
    std::vector<Attempt> transcript;
};

// Asks again when the reply was cut off at max_tokens or `needs_retry` says
// the text cannot be parsed yet. Those rounds climb the 512/1024/2048 ladder;
// retriable transport failures repeat the same rung. At most 3 rounds in all.
inline QueryResult query_with_retry(const EndpointConfig & endpoint, const std::string & prompt,
                                    const GenerationParams & params, const Transport & transport,
                                    const std::function<bool(const std::string &)> & needs_retry = {}) {
    endpoint.validate();
    params.validate();
    constexpr int max_rounds = 3;
    GenerationParams p = params;
    QueryResult q;
    bool got_reply = false;
    for (int round = 1; round <= max_rounds; ++round) {
        const std::string body = request_body(endpoint.model, prompt, p).dump();
        Attempt a{round, p.max_tokens, 0, "", ""};
        q.attempts = round;
        q.max_tokens = p.max_tokens;
        HttpResponse res;
        try {
            res = transport(endpoint, body);
        } catch (const RemoteError & e) {
            a.outcome = remote_error_kind_name(e.kind());
            a.detail = e.what();
            q.transcript.push_back(a);
            if (!e.retriable()) {
                throw RemoteError(e.kind(), "request failed", q.transcript);
            }
            continue;
        }
        a.status = res.status;
        if (res.status != 200) {
            const auto kind = classify_status(res.status);
            a.outcome = remote_error_kind_name(kind);
            a.detail = res.error.empty() ? res.body.substr(0, 200) : res.error;
            q.transcript.push_back(a);
            if (!is_retriable(kind)) {
                throw RemoteError(kind, "request rejected with status " + std::to_string(res.status), q.transcript);
            }
            if (round < max_rounds && endpoint.backoff_ms > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(endpoint.backoff_ms * round));
            }
            continue;
        }
        ChatReply reply;
        try {
            reply = parse_chat_reply(res.body);
        } catch (const RemoteError & e) {
            a.outcome = remote_error_kind_name(e.kind());
            a.detail = e.what();
            q.transcript.push_back(a);
            continue;
        }
        q.text = reply.content;
        got_reply = true;
        const bool cut = reply.finish_reason == "length";
        const bool unparsed = !cut && needs_retry && needs_retry(reply.content);
        a.outcome = cut ? "truncated" : (unparsed ? "parse_retry" : "ok");
        q.transcript.push_back(a);
        if (!cut && !unparsed) {
            q.truncated = false;
            return q;
        }
        q.truncated = true;
        for (int m : kMaxTokenLadder) {
            if (m > p.max_tokens) {
                p.max_tokens = m;
                break;
            }
        }
    }
    if (got_reply) {
        return q;
    }
    throw RemoteError(RemoteErrorKind::exhausted, "no usable reply after " + std::to_string(max_rounds) + " rounds",
                      q.transcript);
}

} // namespace cogsteer
