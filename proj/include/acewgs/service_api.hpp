#pragma once

#include "acewgs/comprehension_rag.hpp"
#include "acewgs/corpus_store.hpp"
#include "acewgs/error.hpp"
#include "acewgs/inverse_feature.hpp"
#include "acewgs/llm_gateway.hpp"
#include "acewgs/llm_http.hpp"
#include "acewgs/metadata_query.hpp"
#include "acewgs/pso_optimizer.hpp"
#include "acewgs/surrogate_model.hpp"
#include "acewgs/switch_router.hpp"
#include "acewgs/vector_index.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>
#include <toml.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>

namespace acewgs {

// ---------------------------------------------------------------------------
// Configuration

struct ServiceSettings {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::size_t job_workers = 2;
    std::size_t job_capacity = 100;
    double session_ttl_hours = 24.0;
    std::filesystem::path static_dir;
};

struct CorpusSettings {
    /// Directory holding manifest.csv and corpus/<ref_id>.txt.
    std::filesystem::path root;
    /// Saved vector index; built lazily per article when absent.
    std::filesystem::path index_file;
    std::filesystem::path catalog;
    std::filesystem::path bundle;
    std::filesystem::path rules;
    std::filesystem::path prompts_dir;
};

struct Config {
    LlmConfig llm;
    CorpusSettings corpus;
    PsoConfig pso;
    double risk_lambda = 0.0;
    ServiceSettings service;
    /// Directory the config file was read from.
    std::filesystem::path base_dir;
};

inline constexpr std::string_view kConfigEnv = "ACEWGS_CONFIG";
inline constexpr std::string_view kLlmUrlEnv = "ACEWGS_LLM_URL";

namespace config_detail {

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
    if (value.empty()) {
        return {};
    }
    std::filesystem::path p(value);
    return p.is_absolute() ? p : base / p;
}

template <class T>
T get(const toml::table& doc, std::string_view section, std::string_view key, T fallback) {
    auto node = doc[section][key];
    if (!node) {
        return fallback;
    }
    if constexpr (std::is_same_v<T, std::string>) {
        if (auto v = node.template value<std::string>()) {
            return *v;
        }
    } else if constexpr (std::is_floating_point_v<T>) {
        if (auto v = node.template value<double>()) {
            return static_cast<T>(*v);
        }
    } else {
        if (auto v = node.template value<std::int64_t>(); v && *v >= 0) {
            return static_cast<T>(*v);
        }
    }
    throw Error(Errc::ConfigError, std::string(section) + "." + std::string(key) + " has the wrong type");
}

} // namespace config_detail

/// Sections [llm], [corpus], [pso], [service]; relative paths resolve
/// against `base_dir`. ACEWGS_LLM_URL overrides llm.base_url.
inline Config parse_config(std::string_view text, const std::filesystem::path& base_dir) {
    using config_detail::get;
    using config_detail::resolve;
    toml::table doc;
    try {
        doc = toml::parse(text);
    } catch (const toml::parse_error& e) {
        throw Error(Errc::ConfigError, "config: " + std::string(e.description()) + " at line " +
                                           std::to_string(e.source().begin.line));
    }
    Config c;
    c.base_dir = base_dir;
    auto& l = c.llm;
    l.base_url = get(doc, "llm", "base_url", l.base_url);
    l.embed_base_url = get(doc, "llm", "embed_base_url", l.embed_base_url);
    l.model_name = get(doc, "llm", "model", l.model_name);
    l.embed_model = get(doc, "llm", "embed_model", l.embed_model);
    l.temperature = get(doc, "llm", "temperature", l.temperature);
    l.top_k = get(doc, "llm", "top_k", l.top_k);
    l.top_p = get(doc, "llm", "top_p", l.top_p);
    l.timeout_seconds = get(doc, "llm", "timeout", l.timeout_seconds);
    l.max_retries = get(doc, "llm", "max_retries", l.max_retries);
    if (const char* url = std::getenv(std::string(kLlmUrlEnv).c_str()); url && *url) {
        l.base_url = url;
    }
    l.validate();

    auto& k = c.corpus;
    k.root = resolve(base_dir, get<std::string>(doc, "corpus", "root", "."));
    k.index_file = resolve(base_dir, get<std::string>(doc, "corpus", "index", ""));
    k.catalog = resolve(base_dir, get<std::string>(doc, "corpus", "catalog", ""));
    k.bundle = resolve(base_dir, get<std::string>(doc, "corpus", "bundle", ""));
    k.rules = resolve(base_dir, get<std::string>(doc, "corpus", "rules", ""));
    k.prompts_dir = resolve(base_dir, get<std::string>(doc, "corpus", "prompts", ""));

    auto& p = c.pso;
    p.swarm_size = get(doc, "pso", "swarm_size", p.swarm_size);
    p.max_iters = get(doc, "pso", "max_iters", p.max_iters);
    p.seed = get(doc, "pso", "seed", p.seed);
    p.stagnation_window = get(doc, "pso", "stagnation_window", p.stagnation_window);
    p.threads = get(doc, "pso", "threads", p.threads);
    c.risk_lambda = get(doc, "pso", "risk_lambda", c.risk_lambda);
    if (p.swarm_size == 0 || p.max_iters == 0 || !(c.risk_lambda >= 0.0)) {
        throw Error(Errc::ConfigError, "pso.swarm_size and pso.max_iters must be positive, risk_lambda >= 0");
    }

    auto& s = c.service;
    s.host = get(doc, "service", "host", s.host);
    s.port = get(doc, "service", "port", s.port);
    s.job_workers = get(doc, "service", "job_workers", s.job_workers);
    s.job_capacity = get(doc, "service", "job_capacity", s.job_capacity);
    s.session_ttl_hours = get(doc, "service", "session_ttl_hours", s.session_ttl_hours);
    s.static_dir = resolve(base_dir, get<std::string>(doc, "service", "static_dir", ""));
    if (s.port < 0 || s.port > 65535 || s.job_workers == 0 || s.job_capacity == 0) {
        throw Error(Errc::ConfigError, "service.port, job_workers or job_capacity out of range");
    }
    return c;
}

/// Reads `path`, or $ACEWGS_CONFIG when `path` is empty.
inline Config load_config(std::filesystem::path path) {
    if (path.empty()) {
        if (const char* env = std::getenv(std::string(kConfigEnv).c_str()); env && *env) {
            path = env;
        } else {
            throw Error(Errc::ConfigError, "no config file given and ACEWGS_CONFIG is unset");
        }
    }
    if (!std::filesystem::is_regular_file(path)) {
        throw Error(Errc::ConfigError, "config file " + path.string() + " not found");
    }
    return parse_config(read_file(path), std::filesystem::absolute(path).parent_path());
}

// ---------------------------------------------------------------------------
// Prompts

struct PromptSet {
    std::string general = "You are a research assistant for water-gas shift catalysis. "
                          "Answer the researcher's question.\n\nQuestion: {question}\nAnswer:";
    std::string translate = std::string(kDefaultTranslatePrompt);
    std::string comprehend = std::string(kDefaultComprehendPrompt);
    std::string narrative = std::string(kDefaultNarrativePrompt);

    /// Files general.txt, translate.txt, comprehend.txt, narrative.txt
    /// replace the built-in templates when present.
    static PromptSet load(const std::filesystem::path& dir) {
        PromptSet p;
        if (dir.empty()) {
            return p;
        }
        auto maybe = [&](const char* name, std::string& slot) {
            const auto path = dir / name;
            if (std::filesystem::is_regular_file(path)) {
                slot = read_file(path);
            }
        };
        maybe("general.txt", p.general);
        maybe("translate.txt", p.translate);
        maybe("comprehend.txt", p.comprehend);
        maybe("narrative.txt", p.narrative);
        return p;
    }
};

// ---------------------------------------------------------------------------
// Application core

struct ChatTurn {
    std::string session_id;
    std::string query;
    FeatureKind routed_kind = FeatureKind::General;
    std::string answer;
    std::optional<std::vector<SourceSpan>> sources;
    double timing_ms = 0.0;
    std::optional<std::string> active_article;
    /// Feature-specific payload: the DSL and table for Extract, the form
    /// request for Inverse.
    nlohmann::json extra = nlohmann::json::object();
};

inline nlohmann::json to_json(const ChatTurn& t) {
    nlohmann::json j = {{"session_id", t.session_id},
                        {"query", t.query},
                        {"routed_kind", to_string(t.routed_kind)},
                        {"answer", t.answer},
                        {"timing_ms", t.timing_ms}};
    if (t.sources) {
        nlohmann::json s = nlohmann::json::array();
        for (const auto& span : *t.sources) {
            s.push_back({{"seq", span.seq},
                         {"char_start", span.char_start},
                         {"char_end", span.char_end},
                         {"similarity", span.similarity}});
        }
        j["sources"] = s;
    } else {
        j["sources"] = nullptr;
    }
    j["active_article"] = t.active_article ? nlohmann::json(*t.active_article) : nlohmann::json(nullptr);
    for (const auto& [k, v] : t.extra.items()) {
        j[k] = v;
    }
    return j;
}

inline nlohmann::json to_json(const ComprehensionAnswer& a, std::string_view ref_id) {
    nlohmann::json s = nlohmann::json::array();
    for (const auto& span : a.sources) {
        s.push_back({{"seq", span.seq},
                     {"char_start", span.char_start},
                     {"char_end", span.char_end},
                     {"similarity", span.similarity}});
    }
    return {{"ref_id", ref_id}, {"text", a.text}, {"sources", s}, {"model_name", a.model_name}};
}

inline nlohmann::json to_json(const ArticleMeta& m) {
    return {{"ref_id", m.ref_id}, {"year", m.year},       {"title", m.title}, {"abstract", m.abstract},
            {"journal", m.journal}, {"authors", m.authors}, {"doi", m.doi}};
}

inline constexpr std::string_view kInverseInstruction = "Set catalyst design parameters in the pop-up box.";

/// Everything the chat, REST and CLI front ends share.
class App {
public:
    App(Config config, Transport transport)
        : config_(std::move(config)),
          llm_(config_.llm, std::move(transport)),
          corpus_(config_.corpus.root),
          catalog_(config_.corpus.catalog.empty() ? Catalog{} : load_catalog(config_.corpus.catalog)),
          bundle_(load_optional_bundle(config_.corpus.bundle)),
          router_(config_.corpus.rules.empty() ? RuleSet::defaults() : RuleSet::load(config_.corpus.rules),
                  corpus_.manifest()),
          prompts_(PromptSet::load(config_.corpus.prompts_dir)),
          index_(load_optional_index(config_.corpus.index_file)),
          engine_(index_, llm_, prompts_.comprehend),
          jobs_(make_runner(), config_.service.job_workers, config_.service.job_capacity) {}

    const Config& config() const noexcept { return config_; }
    const LlmClient& llm() const noexcept { return llm_; }
    const Corpus& corpus() const noexcept { return corpus_; }
    const Catalog& catalog() const noexcept { return catalog_; }
    const Router& router() const noexcept { return router_; }
    const PromptSet& prompts() const noexcept { return prompts_; }
    VectorIndex& index() noexcept { return index_; }
    InverseJobQueue& jobs() noexcept { return jobs_; }
    const std::optional<ModelBundle>& bundle() const noexcept { return bundle_; }

    ChatTurn chat(std::string session_id, std::string_view query) {
        const auto started = std::chrono::steady_clock::now();
        if (session_id.empty()) {
            session_id = new_session_id();
        }
        auto session = session_for(session_id);
        std::lock_guard session_lock(session->mutex);

        const auto routed = router_.route(query, session->state);
        auto next = update_session(session->state, routed);

        ChatTurn turn;
        turn.session_id = session_id;
        turn.query = std::string(query);
        turn.routed_kind = routed.kind;
        if (routed.is_mode_command()) {
            turn.answer = next.mode_lock ? "Mode locked to " + std::string(to_string(*next.mode_lock)) + "."
                                         : "Automatic routing restored.";
        } else {
            switch (routed.kind) {
            case FeatureKind::General: answer_general(turn); break;
            case FeatureKind::Extract: answer_extract(turn); break;
            case FeatureKind::Comprehend: answer_comprehend(turn, routed); break;
            case FeatureKind::Inverse:
                turn.answer = std::string(kInverseInstruction);
                turn.extra["action"] = "parameter_settings";
                break;
            }
        }
        session->state = std::move(next);
        turn.active_article = session->state.active_article;
        turn.timing_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
        return turn;
    }

    /// All rows, or the rows selected by a DSL query.
    nlohmann::json articles(const std::optional<std::string>& dsl) const {
        if (dsl && !trim(*dsl).empty()) {
            return to_json(execute(parse_dsl(*dsl), corpus_.manifest()));
        }
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& m : corpus_.manifest().rows()) {
            rows.push_back(to_json(m));
        }
        return {{"articles", rows}, {"count", rows.size()}};
    }

    ComprehensionAnswer comprehend(std::string_view ref_id, std::string_view question,
                                   std::size_t k = kDefaultRetrievalK) {
        if (!corpus_.manifest().contains(ref_id)) {
            throw Error(Errc::UnknownReference, "reference ID " + std::string(ref_id) + " is not in the article database");
        }
        ensure_indexed(ref_id);
        return engine_.answer({std::string(ref_id), std::string(question), k});
    }

    std::string submit_inverse(const ParameterSettings& settings) {
        if (!bundle_) {
            throw Error(Errc::ConfigError, "no model bundle configured");
        }
        make_design_space(settings, catalog_);
        return jobs_.submit(settings);
    }

    /// Runs an inverse job synchronously on the calling thread.
    InverseReport run_inverse(const ParameterSettings& settings, const ProgressFn& progress = {}) {
        if (!bundle_) {
            throw Error(Errc::ConfigError, "no model bundle configured");
        }
        return make_runner()(settings, progress);
    }

    nlohmann::json health() const {
        const bool llm_ok = backend_reachable(config_.llm.base_url, 2.0);
        const bool index_ok = index_.size() > 0 || corpus_.validate_layout().texts_found > 0;
        return {{"status", llm_ok && index_ok ? "ok" : "degraded"},
                {"llm", llm_ok ? "ok" : "down"},
                {"index", index_ok ? "ok" : "empty"},
                {"articles", corpus_.manifest().size()},
                {"indexed_chunks", index_.size()},
                {"model", config_.llm.model_name}};
    }

    std::size_t session_count() {
        std::lock_guard lock(sessions_mutex_);
        purge_sessions_locked();
        return sessions_.size();
    }

private:
    struct Session {
        std::mutex mutex;
        SessionState state;
        std::chrono::steady_clock::time_point last_used;
    };

    static std::optional<ModelBundle> load_optional_bundle(const std::filesystem::path& path) {
        if (path.empty()) {
            return std::nullopt;
        }
        return load_bundle(path);
    }

    static VectorIndex load_optional_index(const std::filesystem::path& path) {
        if (!path.empty() && std::filesystem::exists(path)) {
            return VectorIndex::load(path);
        }
        return VectorIndex{};
    }

    InverseRunner make_runner() {
        return [this](const ParameterSettings& s, const ProgressFn& progress) {
            return make_inverse_runner(catalog_, *bundle_, config_.pso, config_.risk_lambda, &llm_, prompts_.narrative)(
                s, progress);
        };
    }

    std::string new_session_id() {
        std::lock_guard lock(sessions_mutex_);
        char buf[40];
        std::snprintf(buf, sizeof buf, "s-%016llx", static_cast<unsigned long long>(session_rng_()));
        return buf;
    }

    std::shared_ptr<Session> session_for(const std::string& id) {
        std::lock_guard lock(sessions_mutex_);
        purge_sessions_locked();
        auto& slot = sessions_[id];
        if (!slot) {
            slot = std::make_shared<Session>();
        }
        slot->last_used = std::chrono::steady_clock::now();
        return slot;
    }

    void purge_sessions_locked() {
        const auto ttl = std::chrono::duration<double, std::ratio<3600>>(config_.service.session_ttl_hours);
        const auto now = std::chrono::steady_clock::now();
        std::erase_if(sessions_, [&](const auto& kv) { return now - kv.second->last_used > ttl; });
    }

    void ensure_indexed(std::string_view ref_id) {
        std::lock_guard lock(index_build_mutex_);
        if (!engine_.is_indexed(ref_id)) {
            engine_.index_article(corpus_, ref_id);
        }
    }

    void answer_general(ChatTurn& turn) {
        auto result = llm_.generate(fill_placeholder(prompts_.general, "question", turn.query));
        turn.answer = trim(result.text);
    }

    void answer_extract(ChatTurn& turn) {
        auto translation = translate(turn.query, llm_, prompts_.translate);
        auto table = execute(translation.plan, corpus_.manifest());
        turn.answer = format_result(table);
        turn.extra["dsl"] = render(translation.plan);
        turn.extra["table"] = to_json(table);
    }

    void answer_comprehend(ChatTurn& turn, const RoutedQuery& routed) {
        const auto ref = routed.param(route_param::kRefId);
        if (!ref) {
            turn.answer = "No article is selected. Name one by its reference ID, for example R71.";
            return;
        }
        static const std::regex activation(R"(\bcomprehend\b|\breference\s+id\b)", std::regex::icase);
        const bool explicit_ref = routed.param(route_param::kRefSource) == "explicit";
        if (explicit_ref && std::regex_search(turn.query, activation)) {
            const auto* meta = corpus_.manifest().find(*ref);
            turn.answer = "Ready to retrieve information from the article " + *ref + ".\nTitle: " + meta->title;
            turn.extra["ref_id"] = *ref;
            return;
        }
        auto answer = comprehend(*ref, turn.query);
        turn.answer = trim(answer.text);
        turn.sources = std::move(answer.sources);
        turn.extra["ref_id"] = *ref;
    }

    Config config_;
    LlmClient llm_;
    Corpus corpus_;
    Catalog catalog_;
    std::optional<ModelBundle> bundle_;
    Router router_;
    PromptSet prompts_;
    VectorIndex index_;
    ComprehensionEngine engine_;
    std::mutex index_build_mutex_;
    std::mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::mt19937_64 session_rng_{std::random_device{}()};
    // Declared last so workers stop before the state they use is destroyed.
    InverseJobQueue jobs_;
};

// ---------------------------------------------------------------------------
// HTTP

inline int http_status(Errc code) {
    switch (code) {
    case Errc::InvalidSettings:
    case Errc::InvalidDesign:
    case Errc::InfeasibleSpace: return 422;
    case Errc::UnknownJob:
    case Errc::UnknownReference:
    case Errc::ArticleNotIndexed:
    case Errc::MissingText: return 404;
    case Errc::BadRequest:
    case Errc::SyntaxError:
    case Errc::UnknownField:
    case Errc::TypeError:
    case Errc::EmptyPrompt:
    case Errc::UnknownCatalogId: return 400;
    case Errc::ConnectionFailed:
    case Errc::ModelNotFound:
    case Errc::MalformedResponse:
    case Errc::TranslationExhausted: return 502;
    default: return 500;
    }
}

inline nlohmann::json error_body(std::string_view code, std::string_view message) {
    return {{"code", code}, {"message", message}};
}

/// REST front end over an App.
class HttpService {
public:
    explicit HttpService(App& app) : app_(app) {
        server_.set_socket_options(exclusive_socket_options);
        install_routes();
    }

    HttpService(const HttpService&) = delete;
    HttpService& operator=(const HttpService&) = delete;

    ~HttpService() { stop(); }

    /// Binds and serves on a background thread. Port 0 picks a free port.
    int start(const std::string& host, int port) {
        const int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
        if (bound < 0) {
            throw Error(Errc::PortUnavailable, "cannot bind " + host + ":" + std::to_string(port));
        }
        port_ = bound;
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return port_;
    }

    int port() const noexcept { return port_; }

    void stop() {
        server_.stop();
        if (thread_.joinable()) {
            thread_.join();
        }
    }

    void wait() {
        if (thread_.joinable()) {
            thread_.join();
        }
    }

private:
    using Handler = std::function<nlohmann::json(const httplib::Request&, int& status)>;

    static void reply(httplib::Response& res, int status, const nlohmann::json& body) {
        res.status = status;
        res.set_content(wire::dump(body), "application/json");
    }

    static nlohmann::json parse_body(const httplib::Request& req) {
        try {
            auto j = nlohmann::json::parse(req.body);
            if (!j.is_object()) {
                throw Error(Errc::BadRequest, "request body must be a JSON object");
            }
            return j;
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(Errc::BadRequest, std::string("invalid JSON body: ") + e.what());
        }
    }

    static std::string required_string(const nlohmann::json& j, const char* key) {
        auto it = j.find(key);
        if (it == j.end() || !it->is_string()) {
            throw Error(Errc::BadRequest, std::string("missing string field '") + key + "'");
        }
        return it->get<std::string>();
    }

    auto wrap(Handler handler) {
        return [handler = std::move(handler)](const httplib::Request& req, httplib::Response& res) {
            try {
                int status = 200;
                auto body = handler(req, status);
                reply(res, status, body);
            } catch (const Error& e) {
                reply(res, http_status(e.code()), error_body(to_string(e.code()), e.message()));
            } catch (const std::exception& e) {
                spdlog::error("request {} {} failed: {}", req.method, req.path, e.what());
                reply(res, 500, error_body("Internal", "internal error"));
            }
        };
    }

    void install_routes() {
        server_.Post("/api/v1/chat", wrap([this](const httplib::Request& req, int&) {
                         auto body = parse_body(req);
                         std::string session;
                         if (auto it = body.find("session_id"); it != body.end() && it->is_string()) {
                             session = it->get<std::string>();
                         }
                         return to_json(app_.chat(session, required_string(body, "query")));
                     }));
        server_.Get("/api/v1/articles", wrap([this](const httplib::Request& req, int&) {
                        std::optional<std::string> dsl;
                        if (req.has_param("dsl")) {
                            dsl = req.get_param_value("dsl");
                        }
                        return app_.articles(dsl);
                    }));
        server_.Post("/api/v1/comprehend", wrap([this](const httplib::Request& req, int&) {
                         auto body = parse_body(req);
                         const auto ref = required_string(body, "ref_id");
                         std::size_t k = kDefaultRetrievalK;
                         if (auto it = body.find("k"); it != body.end()) {
                             if (!it->is_number_unsigned() || it->get<std::size_t>() == 0) {
                                 throw Error(Errc::BadRequest, "'k' must be a positive integer");
                             }
                             k = it->get<std::size_t>();
                         }
                         return to_json(app_.comprehend(ref, required_string(body, "question"), k), ref);
                     }));
        server_.Post("/api/v1/inverse/jobs", wrap([this](const httplib::Request& req, int& status) {
                         auto settings = settings_from_json(parse_body(req));
                         auto id = app_.submit_inverse(settings);
                         status = 202;
                         return nlohmann::json{{"job_id", id}};
                     }));
        server_.Get(R"(/api/v1/inverse/jobs/([A-Za-z0-9_\-]+))", wrap([this](const httplib::Request& req, int&) {
                        return to_json(app_.jobs().poll(req.matches[1].str()));
                    }));
        server_.Get("/api/v1/catalog", wrap([this](const httplib::Request&, int&) {
                        auto j = to_json(app_.catalog());
                        j["default_bounds"] = nlohmann::json::object();
                        const auto bounds = DesignSpace::default_bounds({0.0, 0.0}, true);
                        for (std::size_t i = 0; i < kDesignDims; ++i) {
                            if (static_cast<DesignDim>(i) != DesignDim::TemperatureC) {
                                j["default_bounds"][std::string(kDesignDimNames[i])] = {bounds[i].lo, bounds[i].hi};
                            }
                        }
                        return j;
                    }));
        server_.Get("/api/v1/health", wrap([this](const httplib::Request&, int&) { return app_.health(); }));

        if (const auto& dir = app_.config().service.static_dir; !dir.empty() && std::filesystem::is_directory(dir)) {
            server_.set_mount_point("/", dir.string());
        }
        server_.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
            if (res.body.empty() && res.status == 404) {
                reply(res, 404, error_body("NotFound", "no route for " + req.method + " " + req.path));
            }
        });
    }

    App& app_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = -1;
};

} // namespace acewgs
