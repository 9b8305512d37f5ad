#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>

#include "cogsteer/remote/client.hpp"

namespace cogsteer {

enum class FixtureMode { record, replay };

inline FixtureMode parse_fixture_mode(const std::string & s) {
    if (s == "record") {
        return FixtureMode::record;
    }
    if (s == "replay") {
        return FixtureMode::replay;
    }
    throw ValidationError("fixture mode must be record or replay, got '" + s + "'");
}

// Append-only JSON Lines store of {key, request, response, timestamp}.
// Record mode is read-through: hits are served from the store, misses go to
// the wrapped transport and successful replies are appended. Replay mode
// never touches the network and fails on a miss.
class FixtureStore {
public:
    FixtureStore(std::string path, FixtureMode mode) : path_(std::move(path)), mode_(mode) {
        if (std::filesystem::exists(path_)) {
            load();
        } else if (mode_ == FixtureMode::replay) {
            throw Error("replay store does not exist: " + path_);
        }
    }

    FixtureMode mode() const { return mode_; }
    const std::string & path() const { return path_; }

    std::size_t size() const {
        std::lock_guard<std::mutex> lock(mu_);
        return entries_.size();
    }

    std::optional<std::string> lookup(const std::string & key) const {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = entries_.find(key);
        if (it == entries_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    void append(const std::string & key, const std::string & request_json, const std::string & response_body) {
        std::lock_guard<std::mutex> lock(mu_);
        if (entries_.contains(key)) {
            return;
        }
        nlohmann::ordered_json j;
        j["key"] = key;
        j["request"] = nlohmann::json::parse(request_json);
        j["response"] = response_body;
        j["timestamp"] = now_utc();
        std::ofstream out(path_, std::ios::binary | std::ios::app);
        if (!out) {
            throw Error("cannot append to fixture store: " + path_);
        }
        out << j.dump() << "\n";
        entries_[key] = response_body;
    }

    Transport wrap(Transport inner = {}) {
        return [this, inner](const EndpointConfig & ep, const std::string & body) -> HttpResponse {
            const std::string key = fixture_key(body);
            if (auto hit = lookup(key)) {
                return {200, *hit, {}};
            }
            if (mode_ == FixtureMode::replay || !inner) {
                throw RemoteError(RemoteErrorKind::cache_miss, "no recorded response for request hash " + key);
            }
            HttpResponse res = inner(ep, body);
            if (res.status == 200) {
                append(key, body, res.body);
            }
            return res;
        };
    }

private:
    static std::string now_utc() {
        const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&t, &tm);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
        return buf;
    }

    void load() {
        std::istringstream in(read_text(path_));
        std::string line;
        int n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (line.find_first_not_of(" \t\r") == std::string::npos) {
                continue;
            }
            try {
                const auto j = nlohmann::json::parse(line);
                entries_[j.at("key").get<std::string>()] = j.at("response").get<std::string>();
            } catch (const nlohmann::json::exception & e) {
                throw FormatError("fixture store " + path_ + " line " + std::to_string(n) + ": " + e.what());
            }
        }
    }

    std::string path_;
    FixtureMode mode_;
    mutable std::mutex mu_;
    std::map<std::string, std::string> entries_;
};

inline std::shared_ptr<FixtureStore> record_replay(FixtureMode mode, const std::string & path) {
    return std::make_shared<FixtureStore>(path, mode);
}

} // namespace cogsteer
