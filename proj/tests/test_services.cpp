#include "service_harness.hpp"

#include <gtest/gtest.h>

using namespace acewgs;
using namespace harness;

namespace {

LlmConfig config_for(const MockBackend& mock) {
    LlmConfig cfg;
    cfg.base_url = mock.url();
    cfg.timeout_seconds = 5.0;
    return cfg;
}

Errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::IoError;
}

int free_port() {
    httplib::Server probe;
    const int port = probe.bind_to_any_port("127.0.0.1");
    probe.stop();
    return port;
}

} // namespace

TEST(LlmClient, GenerateSendsSamplingOptions) {
    MockBackend mock(MockScript::echo());
    auto cfg = config_for(mock);
    cfg.temperature = 0.3;
    cfg.top_k = 7;
    cfg.top_p = 0.9;
    const auto client = make_http_client(cfg);
    const auto r = client.generate("hello");
    EXPECT_EQ(r.text, "echo: hello");
    EXPECT_EQ(r.model_name, cfg.model_name);
    const auto req = mock.generate_requests().at(0);
    EXPECT_EQ(req.at("stream"), false);
    EXPECT_EQ(req.at("options").at("top_k"), 7);
    EXPECT_DOUBLE_EQ(req.at("options").at("top_p").get<double>(), 0.9);
    EXPECT_DOUBLE_EQ(req.at("options").at("temperature").get<double>(), 0.3);
    EXPECT_EQ(code_of([&] { client.generate(""); }), Errc::EmptyPrompt);
}

TEST(LlmClient, EmbeddingsAreDeterministic) {
    MockBackend mock(MockScript::echo());
    const auto client = make_http_client(config_for(mock));
    const auto a = client.embed("same text");
    const auto b = client.embed("same text");
    EXPECT_EQ(a.values, b.values);
    EXPECT_EQ(a.dimension(), 64u);
    EXPECT_EQ(client.embedding_dimension(), 64u);
    EXPECT_NE(client.embed("other text").values, a.values);
}

TEST(LlmClient, UnknownModelAndDeadBackend) {
    auto script = MockScript::echo();
    script.models = {"gemma2"};
    MockBackend mock(script);
    auto cfg = config_for(mock);
    cfg.model_name = "missing-model";
    EXPECT_EQ(code_of([&] { make_http_client(cfg).generate("x"); }), Errc::ModelNotFound);

    LlmConfig dead;
    dead.base_url = "http://127.0.0.1:" + std::to_string(free_port());
    dead.timeout_seconds = 1.0;
    dead.max_retries = 1;
    EXPECT_EQ(code_of([&] { make_http_client(dead).generate("x"); }), Errc::ConnectionFailed);
    EXPECT_FALSE(backend_reachable(dead.base_url, 1.0));
    EXPECT_TRUE(backend_reachable(mock.url(), 1.0));
}

TEST(LlmClient, RetriesOnlyConnectionFailures) {
    int calls = 0;
    LlmConfig cfg;
    cfg.max_retries = 2;
    const LlmClient flaky(cfg, [&](const std::string&, const std::string&, const std::string&, double) -> HttpReply {
        if (++calls < 3) {
            throw Error(Errc::ConnectionFailed, "refused");
        }
        return {200, R"({"response":"ok"})"};
    });
    EXPECT_EQ(flaky.generate("x").text, "ok");
    EXPECT_EQ(calls, 3);

    calls = 0;
    const LlmClient broken(cfg, [&](const std::string&, const std::string&, const std::string&, double) -> HttpReply {
        ++calls;
        return {200, "not json"};
    });
    EXPECT_EQ(code_of([&] { broken.generate("x"); }), Errc::MalformedResponse);
    EXPECT_EQ(calls, 1);
}

TEST(LlmConfig, Validation) {
    LlmConfig cfg;
    cfg.top_p = 0.0;
    EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::ConfigError);
    cfg = {};
    cfg.top_k = 0;
    EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::ConfigError);
    cfg = {};
    cfg.base_url.clear();
    EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::ConfigError);
}

TEST(Translate, ScriptedMockAndRepairLoop) {
    MockBackend mock(case_study_script());
    const auto client = make_http_client(config_for(mock));
    const auto t = translate("Extract the journal names for all papers that were published in the year 2021.", client);
    EXPECT_EQ(t.dsl, "SELECT journal WHERE year EQ 2021");
    EXPECT_EQ(t.attempts, 1);
    mock.clear_log();
    EXPECT_EQ(code_of([&] { translate("Something nobody scripted", client); }), Errc::TranslationExhausted);
    EXPECT_EQ(mock.prompts().size(), 3u);
    EXPECT_NE(mock.prompts().back().find("rejected"), std::string::npos);
}

TEST(Comprehension, AnswersFromRetrievedChunks) {
    MockBackend mock(MockScript::canned({{"*", "IWI"}}));
    const auto client = make_http_client(config_for(mock));
    Corpus corpus(kRoot / "data" / "case_study");
    VectorIndex index;
    ComprehensionEngine engine(index, client);
    EXPECT_EQ(code_of([&] { engine.answer({"R71", "What method?", 4}); }), Errc::ArticleNotIndexed);
    const auto n = engine.index_article(corpus, "R71");
    EXPECT_EQ(n, expected_chunk_count(char_length(corpus.load_text("R71"))));
    const auto a = engine.answer({"R71", "What preparation method was used?", 2});
    EXPECT_EQ(a.text, "IWI");
    EXPECT_LE(a.sources.size(), 2u);
    EXPECT_NE(a.prompt.find("What preparation method was used?"), std::string::npos);
    EXPECT_NE(a.prompt.find("Article: R71"), std::string::npos);
    EXPECT_EQ(code_of([&] { engine.answer({"R71", "  ", 2}); }), Errc::EmptyPrompt);
    EXPECT_EQ(code_of([&] { engine.answer({"R71", "q", 0}); }), Errc::InvalidParams);
}

TEST(Config, ParseErrorsAndPaths) {
    EXPECT_EQ(code_of([] { parse_config("[llm\n", "/tmp"); }), Errc::ConfigError);
    EXPECT_EQ(code_of([] { parse_config("[llm]\ntop_p = 2.0\n", "/tmp"); }), Errc::ConfigError);
    EXPECT_EQ(code_of([] { parse_config("[service]\nport = 70000\n", "/tmp"); }), Errc::ConfigError);
    EXPECT_EQ(code_of([] { load_config("/nonexistent/acewgs.toml"); }), Errc::ConfigError);
    const auto cfg = parse_config("[corpus]\nroot = 'data'\n[pso]\nswarm_size = 12\n", "/srv/acewgs");
    EXPECT_EQ(cfg.corpus.root, std::filesystem::path("/srv/acewgs/data"));
    EXPECT_EQ(cfg.pso.swarm_size, 12u);
}

class HttpApi : public ::testing::Test {
protected:
    void SetUp() override {
        scratch_ = scratch_dir("acewgs_http");
        auto cfg = test_config(mock_.url(), scratch_);
        cfg.pso.swarm_size = 16;
        cfg.pso.max_iters = 30;
        app_ = std::make_unique<App>(cfg, http_transport());
        service_ = std::make_unique<HttpService>(*app_);
        port_ = service_->start("127.0.0.1", 0);
        client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
        client_->set_read_timeout(30);
    }

    void TearDown() override {
        service_->stop();
        service_.reset();
        app_.reset();
        std::filesystem::remove_all(scratch_);
    }

    MockBackend mock_{case_study_script()};
    std::filesystem::path scratch_;
    std::unique_ptr<App> app_;
    std::unique_ptr<HttpService> service_;
    std::unique_ptr<httplib::Client> client_;
    int port_ = 0;
};

TEST_F(HttpApi, ChatRoutesAndKeepsSession) {
    auto res = post_json(*client_, "/api/v1/chat",
                         {{"query", "Retrieve papers where the string 'MoC' is mentioned in the abstract in the exact "
                                    "same form."}});
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200);
    auto j = body_of(res);
    EXPECT_EQ(j.at("routed_kind"), "Extract");
    EXPECT_EQ(j.at("dsl"), "SELECT ref_id, year, journal, title WHERE abstract CONTAINS 'MoC'");
    EXPECT_EQ(j.at("table").at("rows").size(), 2u);
    const auto session = j.at("session_id").get<std::string>();
    ASSERT_FALSE(session.empty());

    res = post_json(*client_, "/api/v1/chat",
                    {{"session_id", session}, {"query", "Comprehend the article of reference ID R71."}});
    j = body_of(res);
    EXPECT_EQ(j.at("routed_kind"), "Comprehend");
    EXPECT_EQ(j.at("active_article"), "R71");
    EXPECT_NE(j.at("answer").get<std::string>().find("Ready to retrieve information from the article R71."),
              std::string::npos);

    res = post_json(*client_, "/api/v1/chat",
                    {{"session_id", session}, {"query", "Find the name of the catalyst synthesis or preparation method."}});
    j = body_of(res);
    EXPECT_EQ(j.at("routed_kind"), "Comprehend");
    EXPECT_EQ(j.at("answer"), std::string(kPrepAnswer));
    EXPECT_FALSE(j.at("sources").empty());
    EXPECT_EQ(app_->session_count(), 1u);
}

TEST_F(HttpApi, ChatErrors) {
    auto res = client_->Post("/api/v1/chat", "{not json", "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 400);
    EXPECT_EQ(body_of(res).at("code"), "BadRequest");
    res = post_json(*client_, "/api/v1/chat", {{"query", "   "}});
    EXPECT_EQ(res->status, 400);
    res = post_json(*client_, "/api/v1/chat", {{"query", "Comprehend R999."}});
    EXPECT_EQ(res->status, 404);
    EXPECT_EQ(body_of(res).at("code"), "UnknownReference");
    res = post_json(*client_, "/api/v1/chat", {{"query", "Something nobody scripted about the journal list"}});
    EXPECT_EQ(res->status, 502);
    EXPECT_EQ(body_of(res).at("code"), "TranslationExhausted");
}

TEST_F(HttpApi, ArticlesAndCatalog) {
    auto res = client_->Get("/api/v1/articles");
    ASSERT_TRUE(res);
    EXPECT_EQ(body_of(res).at("count"), 82);
    res = client_->Get("/api/v1/articles?dsl=" + httplib::detail::encode_url("COUNT WHERE year EQ 2021"));
    EXPECT_EQ(body_of(res).at("count"), 10);
    res = client_->Get("/api/v1/articles?dsl=" + httplib::detail::encode_url("SELECT nope"));
    EXPECT_EQ(res->status, 400);
    EXPECT_EQ(body_of(res).at("code"), "UnknownField");
    res = client_->Get("/api/v1/catalog");
    const auto cat = body_of(res);
    EXPECT_EQ(cat.at("base_metals").size(), 6u);
    EXPECT_TRUE(cat.at("default_bounds").contains("w_f_ratio"));
    EXPECT_FALSE(cat.at("default_bounds").contains("temperature"));
}

TEST_F(HttpApi, ComprehendEndpoint) {
    auto res = post_json(*client_, "/api/v1/comprehend",
                         {{"ref_id", "R71"}, {"question", "Find the name of the catalyst synthesis or preparation method."},
                          {"k", 2}});
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200);
    const auto j = body_of(res);
    EXPECT_EQ(j.at("text"), std::string(kPrepAnswer));
    EXPECT_LE(j.at("sources").size(), 2u);
    res = post_json(*client_, "/api/v1/comprehend", {{"ref_id", "R999"}, {"question", "q"}});
    EXPECT_EQ(res->status, 404);
    res = post_json(*client_, "/api/v1/comprehend", {{"ref_id", "R71"}, {"question", "q"}, {"k", 0}});
    EXPECT_EQ(res->status, 400);
}

TEST_F(HttpApi, InverseJobLifecycle) {
    const nlohmann::json settings = {{"base_metal", "Pt"},    {"promoter", "Au"},
                                     {"support", "alpha-MoC"}, {"prep_method", "iwi"},
                                     {"temperature_range", {150, 250}}};
    auto res = post_json(*client_, "/api/v1/inverse/jobs", settings);
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 202);
    const auto id = body_of(res).at("job_id").get<std::string>();
    nlohmann::json job;
    for (int i = 0; i < 600; ++i) {
        job = body_of(client_->Get("/api/v1/inverse/jobs/" + id));
        if (job.at("status") == "Finished" || job.at("status") == "Failed") {
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    ASSERT_EQ(job.at("status"), "Finished") << job.dump();
    const auto report = report_from_json(job.at("result"));
    EXPECT_LE(report.conversion, report.x_eq);
    EXPECT_EQ(report.narrative, std::string(kNarrative));

    auto bad = settings;
    bad["temperature_range"] = {300, 100};
    res = post_json(*client_, "/api/v1/inverse/jobs", bad);
    EXPECT_EQ(res->status, 422);
    EXPECT_EQ(body_of(res).at("code"), "InvalidSettings");
    res = client_->Get("/api/v1/inverse/jobs/job-000999-deadbeef");
    EXPECT_EQ(res->status, 404);
    EXPECT_EQ(body_of(res).at("code"), "UnknownJob");
}

TEST_F(HttpApi, HealthAndUnknownRoutes) {
    auto res = client_->Get("/api/v1/health");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    const auto h = body_of(res);
    EXPECT_EQ(h.at("llm"), "ok");
    EXPECT_EQ(h.at("articles"), 82);
    res = client_->Get("/api/v1/nowhere");
    EXPECT_EQ(res->status, 404);
    EXPECT_EQ(body_of(res).at("code"), "NotFound");
}

TEST(HttpServiceStart, PortInUse) {
    MockBackend mock(MockScript::echo());
    const auto scratch = scratch_dir("acewgs_port");
    App app(test_config(mock.url(), scratch), http_transport());
    HttpService first(app);
    const int port = first.start("127.0.0.1", 0);
    HttpService second(app);
    EXPECT_EQ(code_of([&] { second.start("127.0.0.1", port); }), Errc::PortUnavailable);
    first.stop();
    std::filesystem::remove_all(scratch);
}
