#pragma once

#include "acewgs/error.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace acewgs {

struct LlmConfig {
    std::string base_url = "http://127.0.0.1:11434";
    /// Embeddings may live on a different server; empty means base_url.
    std::string embed_base_url;
    std::string model_name = "gemma2";
    std::string embed_model = "mxbai-embed-large";
    double temperature = 0.0;
    int top_k = 10;
    double top_p = 0.5;
    double timeout_seconds = 120.0;
    int max_retries = 2;

    const std::string& embeddings_url() const { return embed_base_url.empty() ? base_url : embed_base_url; }

    void validate() const {
        if (base_url.empty()) {
            throw Error(Errc::ConfigError, "llm.base_url must not be empty");
        }
        if (!(temperature >= 0.0)) {
            throw Error(Errc::ConfigError, "llm.temperature must be >= 0");
        }
        if (!(top_p > 0.0 && top_p <= 1.0)) {
            throw Error(Errc::ConfigError, "llm.top_p must be in (0, 1]");
        }
        if (top_k < 1) {
            throw Error(Errc::ConfigError, "llm.top_k must be >= 1");
        }
        if (max_retries < 0) {
            throw Error(Errc::ConfigError, "llm.max_retries must be >= 0");
        }
        if (!(timeout_seconds > 0.0)) {
            throw Error(Errc::ConfigError, "llm.timeout must be > 0");
        }
    }
};

struct GenerationResult {
    std::string text;
    std::string model_name;
    double latency_ms = 0.0;
};

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dimension() const noexcept { return values.size(); }
};

// ---------------------------------------------------------------------------
// Wire protocol

namespace wire {

inline constexpr std::string_view kGeneratePath = "/api/generate";
inline constexpr std::string_view kEmbeddingsPath = "/api/embeddings";
inline constexpr std::string_view kTagsPath = "/api/tags";

inline nlohmann::json generate_request(const LlmConfig& cfg, std::string_view prompt) {
    return {
        {"model", cfg.model_name},
        {"prompt", prompt},
        {"stream", false},
        {"options", {{"temperature", cfg.temperature}, {"top_k", cfg.top_k}, {"top_p", cfg.top_p}}},
    };
}

inline nlohmann::json embeddings_request(const LlmConfig& cfg, std::string_view text) {
    return {{"model", cfg.embed_model}, {"prompt", text}};
}

/// Serialization used for every request body. Invalid UTF-8 in user text is
/// replaced rather than aborting the request.
inline std::string dump(const nlohmann::json& j) {
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

} // namespace wire

/// One HTTP exchange. Transports throw Error(ConnectionFailed) when the
/// server cannot be reached and otherwise report status + body.
struct HttpReply {
    int status = 0;
    std::string body;
};

using Transport = std::function<HttpReply(const std::string& base_url, const std::string& path,
                                          const std::string& body, double timeout_seconds)>;

/// Blocking client for generation and embeddings. Safe to share between
/// threads: the only shared state is the observed embedding dimension.
class LlmClient {
public:
    LlmClient(LlmConfig config, Transport transport) : config_(std::move(config)), transport_(std::move(transport)) {
        config_.validate();
    }

    const LlmConfig& config() const noexcept { return config_; }

    GenerationResult generate(std::string_view prompt) const {
        if (prompt.empty()) {
            throw Error(Errc::EmptyPrompt, "prompt must not be empty");
        }
        auto start = std::chrono::steady_clock::now();
        auto body = wire::dump(wire::generate_request(config_, prompt));
        auto reply = post_with_retry(config_.base_url, std::string(wire::kGeneratePath), body);
        auto json = parse_reply(reply);
        auto it = json.find("response");
        if (it == json.end() || !it->is_string()) {
            throw Error(Errc::MalformedResponse, "generate reply has no 'response' string");
        }
        GenerationResult result;
        result.text = it->get<std::string>();
        result.model_name = config_.model_name;
        result.latency_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        return result;
    }

    EmbeddingVector embed(std::string_view text) const {
        if (text.empty()) {
            throw Error(Errc::EmptyPrompt, "embedding text must not be empty");
        }
        auto body = wire::dump(wire::embeddings_request(config_, text));
        auto reply = post_with_retry(config_.embeddings_url(), std::string(wire::kEmbeddingsPath), body);
        auto json = parse_reply(reply);
        auto it = json.find("embedding");
        if (it == json.end() || !it->is_array() || it->empty()) {
            throw Error(Errc::MalformedResponse, "embeddings reply has no 'embedding' array");
        }
        EmbeddingVector vec;
        vec.values.reserve(it->size());
        for (const auto& v : *it) {
            if (!v.is_number()) {
                throw Error(Errc::MalformedResponse, "embedding entries must be numbers");
            }
            double d = v.get<double>();
            if (!std::isfinite(d)) {
                throw Error(Errc::MalformedResponse, "embedding entries must be finite");
            }
            vec.values.push_back(d);
        }
        check_dimension(vec.dimension());
        return vec;
    }

    /// Dimension seen on the first successful embed, 0 before that.
    std::size_t embedding_dimension() const {
        std::lock_guard lock(state_->mutex);
        auto it = state_->dimensions.find(config_.embed_model);
        return it == state_->dimensions.end() ? 0 : it->second;
    }

private:
    HttpReply post_with_retry(const std::string& base, const std::string& path, const std::string& body) const {
        for (int attempt = 0;; ++attempt) {
            try {
                return transport_(base, path, body, config_.timeout_seconds);
            } catch (const Error& e) {
                if (e.code() != Errc::ConnectionFailed || attempt >= config_.max_retries) {
                    throw;
                }
            }
        }
    }

    static nlohmann::json parse_reply(const HttpReply& reply) {
        nlohmann::json json = nlohmann::json::parse(reply.body, nullptr, false);
        if (reply.status == 404) {
            std::string detail = json.is_object() && json.contains("error") && json["error"].is_string()
                                     ? json["error"].get<std::string>()
                                     : std::string("model not found");
            throw Error(Errc::ModelNotFound, detail);
        }
        if (reply.status < 200 || reply.status >= 300) {
            throw Error(Errc::MalformedResponse, "backend returned HTTP " + std::to_string(reply.status));
        }
        if (json.is_discarded() || !json.is_object()) {
            throw Error(Errc::MalformedResponse, "backend reply is not a JSON object");
        }
        return json;
    }

    void check_dimension(std::size_t dim) const {
        std::lock_guard lock(state_->mutex);
        auto [it, inserted] = state_->dimensions.emplace(config_.embed_model, dim);
        if (!inserted && it->second != dim) {
            throw Error(Errc::DimensionMismatch, "model " + config_.embed_model + " returned dimension " +
                                                     std::to_string(dim) + ", previously " +
                                                     std::to_string(it->second));
        }
    }

    LlmConfig config_;
    Transport transport_;
    // Shared between copies of one client.
    struct DimensionState {
        std::mutex mutex;
        std::map<std::string, std::size_t> dimensions;
    };
    std::shared_ptr<DimensionState> state_ = std::make_shared<DimensionState>();
};

// ---------------------------------------------------------------------------
// Deterministic embedding used by the mock backend

/// FNV-1a over the raw bytes.
constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Uniform [-1, 1) entries from mt19937_64 seeded with the text hash. The
/// engine's output sequence is fixed by the standard, and the conversion to
/// double avoids the implementation-defined distributions, so vectors are
/// identical across runs and platforms.
inline std::vector<double> hashed_embedding(std::string_view text, std::size_t dimension) {
    std::mt19937_64 rng(fnv1a64(text));
    std::vector<double> v(dimension);
    for (auto& x : v) {
        double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        x = 2.0 * unit - 1.0;
    }
    return v;
}

} // namespace acewgs
