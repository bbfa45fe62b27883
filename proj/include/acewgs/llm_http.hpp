#pragma once

// cpp-httplib backed transport for LlmClient, plus the loopback mock model
// server used by the offline test suites.

#include "acewgs/corpus_store.hpp"
#include "acewgs/error.hpp"
#include "acewgs/llm_gateway.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <filesystem>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace acewgs {

namespace detail {

inline void set_timeouts(httplib::Client& client, double timeout_seconds) {
    auto sec = static_cast<time_t>(timeout_seconds);
    auto usec = static_cast<time_t>((timeout_seconds - static_cast<double>(sec)) * 1e6);
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);
}

} // namespace detail

/// A fresh connection per call keeps the client free of shared sockets.
inline Transport http_transport() {
    return [](const std::string& base_url, const std::string& path, const std::string& body,
              double timeout_seconds) -> HttpReply {
        httplib::Client client(base_url);
        detail::set_timeouts(client, timeout_seconds);
        auto res = client.Post(path, body, "application/json");
        if (!res) {
            throw Error(Errc::ConnectionFailed,
                        "cannot reach " + base_url + path + " (" + httplib::to_string(res.error()) + ")");
        }
        return HttpReply{res->status, res->body};
    };
}

inline LlmClient make_http_client(LlmConfig config) {
    return LlmClient(std::move(config), http_transport());
}

/// SO_REUSEADDR without SO_REUSEPORT, so a second server cannot share a
/// port that is already listening.
inline void exclusive_socket_options(socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
}

/// True when the backend answers its model listing endpoint.
inline bool backend_reachable(const std::string& base_url, double timeout_seconds = 2.0) {
    httplib::Client client(base_url);
    detail::set_timeouts(client, timeout_seconds);
    auto res = client.Get(std::string(wire::kTagsPath));
    return res && res->status == 200;
}

// ---------------------------------------------------------------------------
// Mock backend

enum class MockMode {
    /// Reply "echo: <prompt>".
    Echo,
    /// First matching rule wins; "*" matches anything.
    Canned,
    /// Rules hold question -> DSL pairs; the prompt is searched for the
    /// question text. Unmatched prompts get an unparseable reply.
    ScriptedDsl,
};

struct MockRule {
    std::string pattern;
    std::string response;
};

struct MockScript {
    MockMode mode = MockMode::Echo;
    /// Consulted in order for every mode. Echo mode falls back to echoing.
    std::vector<MockRule> rules;
    std::size_t embedding_dimension = 64;
    /// Models the server accepts; empty accepts any name.
    std::vector<std::string> models;

    static MockScript echo() { return MockScript{}; }

    static MockScript canned(std::vector<MockRule> rules) {
        MockScript s;
        s.mode = MockMode::Canned;
        s.rules = std::move(rules);
        return s;
    }

    /// Tab-separated `question<TAB>dsl` lines; '#' starts a comment line.
    static MockScript scripted_dsl_from_file(const std::filesystem::path& path) {
        MockScript s;
        s.mode = MockMode::ScriptedDsl;
        std::istringstream in(read_file(path));
        for (std::string line; std::getline(in, line);) {
            if (line.empty() || line[0] == '#') {
                continue;
            }
            auto tab = line.find('\t');
            if (tab == std::string::npos) {
                throw Error(Errc::ParseError, "DSL fixture line without tab: " + line);
            }
            s.rules.push_back({trim(line.substr(0, tab)), trim(line.substr(tab + 1))});
        }
        return s;
    }
};

inline constexpr std::string_view kEchoPrefix = "echo: ";
inline constexpr std::string_view kUnscriptedReply = "?? no scripted translation ??";

/// Pure reply function of the mock server, usable without sockets.
inline std::string mock_reply(const MockScript& script, std::string_view prompt) {
    for (const auto& rule : script.rules) {
        if (rule.pattern == "*" || prompt.find(rule.pattern) != std::string_view::npos) {
            return rule.response;
        }
    }
    switch (script.mode) {
    case MockMode::Echo: return std::string(kEchoPrefix) + std::string(prompt);
    case MockMode::Canned: return {};
    case MockMode::ScriptedDsl: return std::string(kUnscriptedReply);
    }
    return {};
}

/// Serves the generate/embeddings/tags protocol on a loopback port from a
/// background thread. Records every generate prompt for inspection.
class MockBackend {
public:
    explicit MockBackend(MockScript script, int port = 0, std::string host = "127.0.0.1")
        : script_(std::move(script)), host_(std::move(host)) {
        server_.set_socket_options(exclusive_socket_options);
        install_routes();
        if (port == 0) {
            port_ = server_.bind_to_any_port(host_);
        } else {
            port_ = server_.bind_to_port(host_, port) ? port : -1;
        }
        if (port_ <= 0) {
            throw Error(Errc::PortUnavailable, "cannot bind mock backend on " + host_ + ":" + std::to_string(port));
        }
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    MockBackend(const MockBackend&) = delete;
    MockBackend& operator=(const MockBackend&) = delete;

    ~MockBackend() { stop(); }

    void stop() {
        server_.stop();
        if (thread_.joinable()) {
            thread_.join();
        }
    }

    int port() const noexcept { return port_; }
    std::string url() const { return "http://" + host_ + ":" + std::to_string(port_); }

    /// Blocks the calling thread until stop() is called elsewhere.
    void wait() {
        if (thread_.joinable()) {
            thread_.join();
        }
    }

    std::vector<std::string> prompts() const {
        std::lock_guard lock(mutex_);
        return prompts_;
    }

    std::vector<nlohmann::json> generate_requests() const {
        std::lock_guard lock(mutex_);
        return requests_;
    }

    std::size_t embed_calls() const noexcept { return embed_calls_.load(); }

    void clear_log() {
        std::lock_guard lock(mutex_);
        prompts_.clear();
        requests_.clear();
    }

    void set_script(MockScript script) {
        std::lock_guard lock(mutex_);
        script_ = std::move(script);
    }

private:
    bool model_known(const std::string& name) const {
        return script_.models.empty() ||
               std::find(script_.models.begin(), script_.models.end(), name) != script_.models.end();
    }

    static void reply_json(httplib::Response& res, int status, const nlohmann::json& body) {
        res.status = status;
        res.set_content(wire::dump(body), "application/json");
    }

    void install_routes() {
        server_.Post(std::string(wire::kGeneratePath), [this](const httplib::Request& req, httplib::Response& res) {
            auto body = nlohmann::json::parse(req.body, nullptr, false);
            if (body.is_discarded() || !body.contains("prompt") || !body["prompt"].is_string()) {
                reply_json(res, 400, {{"error", "invalid request"}});
                return;
            }
            std::string model = body.value("model", "");
            std::string prompt = body["prompt"].get<std::string>();
            std::string text;
            {
                std::lock_guard lock(mutex_);
                prompts_.push_back(prompt);
                requests_.push_back(body);
                if (!model_known(model)) {
                    reply_json(res, 404, {{"error", "model \"" + model + "\" not found, try pulling it first"}});
                    return;
                }
                text = mock_reply(script_, prompt);
            }
            reply_json(res, 200, {{"model", model}, {"response", text}, {"done", true}});
        });
        server_.Post(std::string(wire::kEmbeddingsPath), [this](const httplib::Request& req, httplib::Response& res) {
            auto body = nlohmann::json::parse(req.body, nullptr, false);
            if (body.is_discarded() || !body.contains("prompt") || !body["prompt"].is_string()) {
                reply_json(res, 400, {{"error", "invalid request"}});
                return;
            }
            ++embed_calls_;
            std::size_t dim = 0;
            {
                std::lock_guard lock(mutex_);
                if (!model_known(body.value("model", ""))) {
                    reply_json(res, 404, {{"error", "model not found"}});
                    return;
                }
                dim = script_.embedding_dimension;
            }
            reply_json(res, 200, {{"embedding", hashed_embedding(body["prompt"].get<std::string>(), dim)}});
        });
        server_.Get(std::string(wire::kTagsPath), [this](const httplib::Request&, httplib::Response& res) {
            nlohmann::json models = nlohmann::json::array();
            std::lock_guard lock(mutex_);
            for (const auto& m : script_.models) {
                models.push_back({{"name", m}});
            }
            reply_json(res, 200, {{"models", models}});
        });
    }

    MockScript script_;
    std::string host_;
    int port_ = -1;
    httplib::Server server_;
    std::thread thread_;
    mutable std::mutex mutex_;
    std::vector<std::string> prompts_;
    std::vector<nlohmann::json> requests_;
    std::atomic<std::size_t> embed_calls_{0};
};

} // namespace acewgs
