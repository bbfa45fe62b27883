#include <acewgs/service_api.hpp>

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>

namespace {

using namespace acewgs;

ParameterSettings read_settings(const std::filesystem::path& path) {
    const auto text = read_file(path);
    if (path.extension() == ".json") {
        try {
            return settings_from_json(nlohmann::json::parse(text));
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(Errc::InvalidSettings, std::string("settings JSON: ") + e.what());
        }
    }
    return settings_from_toml(text);
}

void print_table(const ResultTable& table) {
    if (table.count) {
        std::cout << *table.count << '\n';
        return;
    }
    for (const auto& row : table.rows) {
        std::cout << join(row, "\t") << '\n';
    }
}

std::unique_ptr<App> make_app(const std::string& config_path) {
    return std::make_unique<App>(load_config(config_path), http_transport());
}

int cmd_ingest(const std::string& root) {
    Corpus corpus(root);
    const auto report = corpus.validate_layout();
    std::cout << "articles: " << report.articles << "\ntexts: " << report.texts_found << '\n';
    for (const auto& ref : report.missing_texts) {
        std::cout << "missing text: " << ref << '\n';
    }
    for (const auto& name : report.orphan_texts) {
        std::cout << "orphan text: " << name << '\n';
    }
    if (!report.ok()) {
        throw Error(Errc::MissingText, std::to_string(report.missing_texts.size()) + " article text(s) missing");
    }
    return 0;
}

int cmd_index_build(const std::string& config_path, std::string out) {
    auto cfg = load_config(config_path);
    if (out.empty()) {
        out = cfg.corpus.index_file.string();
    }
    if (out.empty()) {
        throw Error(Errc::ConfigError, "no index path: pass --out or set corpus.index");
    }
    Corpus corpus(cfg.corpus.root);
    auto llm = make_http_client(cfg.llm);
    VectorIndex index;
    ComprehensionEngine engine(index, llm);
    const auto chunks = engine.index_corpus(corpus);
    index.save(out);
    std::cout << "indexed " << chunks << " chunks from " << corpus.manifest().size() << " articles into " << out
              << '\n';
    return 0;
}

int cmd_index_search(const std::string& config_path, const std::string& text, const std::string& ref, std::size_t k) {
    auto cfg = load_config(config_path);
    if (cfg.corpus.index_file.empty() || !std::filesystem::exists(cfg.corpus.index_file)) {
        throw Error(Errc::EmptyIndex, "no saved index; run `acewgs index build` first");
    }
    auto index = VectorIndex::load(cfg.corpus.index_file);
    auto llm = make_http_client(cfg.llm);
    const auto query = llm.embed(text);
    std::optional<std::string> filter;
    if (!ref.empty()) {
        filter = ref;
    }
    for (const auto& hit : index.search(std::span<const double>(query.values), k, filter)) {
        std::cout << hit.chunk.ref_id << '\t' << hit.chunk.seq << '\t' << hit.chunk.char_start << '-'
                  << hit.chunk.char_end << '\t' << hit.similarity << '\n';
    }
    return 0;
}

int cmd_query(const std::string& config_path, const std::string& corpus_root, const std::string& dsl) {
    std::filesystem::path manifest_path;
    if (!corpus_root.empty()) {
        manifest_path = std::filesystem::path(corpus_root) / "manifest.csv";
    } else {
        manifest_path = load_config(config_path).corpus.root / "manifest.csv";
    }
    print_table(execute(parse_dsl(dsl), load_manifest(manifest_path)));
    return 0;
}

int cmd_comprehend(const std::string& config_path, const std::string& ref, const std::string& question,
                   std::size_t k) {
    auto app = make_app(config_path);
    const auto answer = app->comprehend(ref, question, k);
    std::cout << trim(answer.text) << '\n';
    for (const auto& s : answer.sources) {
        std::cout << "source: " << ref << " #" << s.seq << " chars " << s.char_start << '-' << s.char_end << '\n';
    }
    return 0;
}

int cmd_inverse(const std::string& config_path, const std::string& settings_path, const std::string& server,
                bool wait) {
    const auto settings = read_settings(settings_path);
    if (server.empty()) {
        auto app = make_app(config_path);
        const auto report = app->run_inverse(settings);
        std::cout << to_json(report).dump(2) << '\n';
        return 0;
    }
    httplib::Client client(server);
    client.set_read_timeout(30, 0);
    auto res = client.Post("/api/v1/inverse/jobs", to_json(settings).dump(), "application/json");
    if (!res) {
        throw Error(Errc::ConnectionFailed, "cannot reach " + server);
    }
    auto body = nlohmann::json::parse(res->body, nullptr, false);
    if (res->status != 202) {
        throw Error(Errc::BadRequest, body.is_object() ? body.value("code", "") + ": " + body.value("message", "")
                                                       : res->body);
    }
    const auto id = body.at("job_id").get<std::string>();
    if (!wait) {
        std::cout << id << '\n';
        return 0;
    }
    while (true) {
        auto poll = client.Get("/api/v1/inverse/jobs/" + id);
        if (!poll) {
            throw Error(Errc::ConnectionFailed, "lost connection to " + server);
        }
        auto job = nlohmann::json::parse(poll->body);
        if (poll->status != 200) {
            throw Error(Errc::UnknownJob, job.value("message", "poll failed"));
        }
        const auto status = job.at("status").get<std::string>();
        if (status == "Finished") {
            std::cout << job.at("result").dump(2) << '\n';
            return 0;
        }
        if (status == "Failed") {
            throw Error(Errc::InvalidSettings, "job " + id + " failed: " + job.value("error", ""));
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(500));
    }
}

std::atomic<bool> g_stop{false};

void wait_for_signal() {
    std::signal(SIGINT, [](int) { g_stop = true; });
    std::signal(SIGTERM, [](int) { g_stop = true; });
    while (!g_stop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
    }
}

int cmd_serve(const std::string& config_path, int port_override) {
    auto app = make_app(config_path);
    HttpService service(*app);
    const auto& s = app->config().service;
    const int port = service.start(s.host, port_override >= 0 ? port_override : s.port);
    std::cout << "listening on http://" << s.host << ':' << port << std::endl;
    wait_for_signal();
    service.stop();
    return 0;
}

int cmd_eval_run(const std::string& config_path, const std::string& questions_path, const std::string& out_path) {
    auto cfg = load_config(config_path);
    auto llm = make_http_client(cfg.llm);
    const auto prompts = PromptSet::load(cfg.corpus.prompts_dir);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
        throw Error(Errc::IoError, "cannot write " + out_path);
    }
    std::istringstream in(read_file(questions_path));
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) {
        const auto question = trim(line);
        if (question.empty() || question[0] == '#') {
            continue;
        }
        const auto result = llm.generate(fill_placeholder(prompts.general, "question", question));
        out << wire::dump({{"question", question},
                           {"model", result.model_name},
                           {"text", result.text},
                           {"latency_ms", result.latency_ms}})
            << '\n';
        ++n;
    }
    std::cout << "wrote " << n << " answers to " << out_path << '\n';
    return 0;
}

int cmd_mock_llm(int port, const std::string& mode, const std::string& script) {
    MockScript s = MockScript::echo();
    if (mode == "canned") {
        s = MockScript::canned({});
    } else if (mode == "dsl") {
        if (script.empty()) {
            throw Error(Errc::BadRequest, "--script is required for dsl mode");
        }
        s = MockScript::scripted_dsl_from_file(script);
    } else if (mode != "echo") {
        throw Error(Errc::BadRequest, "unknown mock mode '" + mode + "'");
    }
    MockBackend backend(std::move(s), port);
    std::cout << backend.url() << std::endl;
    wait_for_signal();
    backend.stop();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Water-gas-shift catalyst research assistant"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    app.add_option("--config", config_path, "Config TOML (default: $ACEWGS_CONFIG)");

    std::string corpus_root;
    auto* ingest = app.add_subcommand("ingest", "Check the manifest and article texts");
    ingest->add_option("--corpus", corpus_root, "Corpus directory")->required();

    auto* index = app.add_subcommand("index", "Build or search the vector index");
    index->require_subcommand(1);
    std::string index_out;
    auto* build = index->add_subcommand("build", "Embed every article and save the index");
    build->add_option("--out", index_out, "Index file (default: corpus.index)");
    std::string search_text, search_ref;
    std::size_t search_k = 4;
    auto* search = index->add_subcommand("search", "Nearest chunks to a query text");
    search->add_option("text", search_text, "Query text")->required();
    search->add_option("--ref", search_ref, "Restrict to one article");
    search->add_option("-k", search_k, "Number of hits")->check(CLI::PositiveNumber);

    std::string dsl;
    auto* query = app.add_subcommand("query", "Run a query DSL statement against the manifest");
    query->add_option("dsl", dsl, "Query, e.g. \"SELECT ref_id WHERE year EQ 2021\"")->required();
    query->add_option("--corpus", corpus_root, "Corpus directory (default: from config)");

    std::string ref, question;
    std::size_t k = kDefaultRetrievalK;
    auto* comprehend = app.add_subcommand("comprehend", "Ask a question about one article");
    comprehend->add_option("--ref", ref, "Article reference ID")->required();
    comprehend->add_option("question", question, "Question")->required();
    comprehend->add_option("-k", k, "Excerpts to retrieve")->check(CLI::PositiveNumber);

    std::string settings_path, server;
    bool wait = false;
    auto* inverse = app.add_subcommand("inverse", "Run the inverse design model");
    inverse->add_option("--settings", settings_path, "Parameter settings (.toml or .json)")->required();
    inverse->add_option("--server", server, "Submit to a running service instead of running locally");
    inverse->add_flag("--wait", wait, "With --server, poll until the job finishes");

    int port = -1;
    auto* serve = app.add_subcommand("serve", "Start the HTTP service");
    serve->add_option("--port", port, "Override service.port");

    std::string questions_path, answers_path = "answers.jsonl";
    auto* eval = app.add_subcommand("eval-run", "Answer every question in a file with the general model");
    eval->add_option("questions", questions_path, "One question per line")->required();
    eval->add_option("--out", answers_path, "JSON Lines output");

    int mock_port = 0;
    std::string mock_mode = "echo", mock_script;
    auto* mock = app.add_subcommand("mock-llm", "Run the offline mock model server");
    mock->add_option("--port", mock_port, "Port (0 picks a free one)");
    mock->add_option("--mode", mock_mode, "echo, canned or dsl");
    mock->add_option("--script", mock_script, "question<TAB>DSL file for dsl mode");

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::warn);

    try {
        if (*ingest) return cmd_ingest(corpus_root);
        if (*build) return cmd_index_build(config_path, index_out);
        if (*search) return cmd_index_search(config_path, search_text, search_ref, search_k);
        if (*query) return cmd_query(config_path, corpus_root, dsl);
        if (*comprehend) return cmd_comprehend(config_path, ref, question, k);
        if (*inverse) return cmd_inverse(config_path, settings_path, server, wait);
        if (*serve) return cmd_serve(config_path, port);
        if (*eval) return cmd_eval_run(config_path, questions_path, answers_path);
        if (*mock) return cmd_mock_llm(mock_port, mock_mode, mock_script);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: Internal: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
