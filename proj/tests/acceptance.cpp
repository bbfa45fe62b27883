// Prints one PASS/FAIL line per acceptance criterion; exit status is the
// number of failures. Uses the mock language model only.

#include "generators.hpp"
#include "oracles.hpp"
#include "service_harness.hpp"

#include <acewgs/corpus_store.hpp>
#include <acewgs/inverse_feature.hpp>
#include <acewgs/metadata_query.hpp>
#include <acewgs/pso_optimizer.hpp>
#include <acewgs/switch_router.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

using namespace acewgs;
using harness::kRoot;

namespace {

/// Collects failure messages for one criterion.
struct Check {
    std::vector<std::string> failures;

    void expect(bool ok, const std::string& what) {
        if (!ok && failures.size() < 5) {
            failures.push_back(what);
        }
    }
    std::string detail;
};

int run(const char* name, double budget_s, const std::function<void(Check&)>& body) {
    Check check;
    const auto start = std::chrono::steady_clock::now();
    try {
        body(check);
    } catch (const std::exception& e) {
        check.failures.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs >= budget_s) {
        check.failures.push_back("took " + std::to_string(secs) + " s, budget " + std::to_string(budget_s) + " s");
    }
    const bool ok = check.failures.empty();
    std::printf("%s  %-28s %7.2f s  %s\n", ok ? "PASS" : "FAIL", name, secs, check.detail.c_str());
    for (const auto& f : check.failures) {
        std::printf("      - %s\n", f.c_str());
    }
    std::fflush(stdout);
    return ok ? 0 : 1;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

void chunker(Check& c) {
    static const std::vector<std::string> alphabet = {"a", "b", " ", "\n", "é", "α", "°", "—", "H", "2", "𝜶", "x"};
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> length(0, 50'000), pick(0, alphabet.size() - 1);
    std::size_t total_chunks = 0;
    for (int doc = 0; doc < 200; ++doc) {
        const std::size_t n = doc == 0 ? 0 : (doc == 1 ? 50'000 : length(rng));
        std::string text;
        for (std::size_t i = 0; i < n; ++i) {
            text += alphabet[pick(rng)];
        }
        const auto chunks = chunk_document(text, 1000, 150, "R" + std::to_string(doc));
        total_chunks += chunks.size();
        std::string rebuilt;
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            const auto len = char_length(chunks[i].text);
            c.expect(len <= 1000, "chunk longer than 1000 characters");
            c.expect(chunks[i].char_end - chunks[i].char_start == len, "span length differs from text length");
            if (i == 0) {
                rebuilt = chunks[i].text;
                continue;
            }
            c.expect(chunks[i - 1].char_end - chunks[i].char_start == 150, "overlap is not 150 characters");
            const auto prev = code_point_offsets(chunks[i - 1].text);
            const auto cur = code_point_offsets(chunks[i].text);
            c.expect(chunks[i - 1].text.substr(prev[prev.size() - 1 - 150]) == chunks[i].text.substr(0, cur[150]),
                     "overlapping text differs");
            rebuilt += chunks[i].text.substr(cur[150]);
        }
        c.expect(rebuilt == text, "reconstruction differs for document " + std::to_string(doc));
    }
    c.detail = "200 documents, " + std::to_string(total_chunks) + " chunks";
}

void vector_search(Check& c) {
    constexpr std::size_t n = 1000, dim = 256;
    std::mt19937_64 rng(2);
    std::normal_distribution<float> nd(0.0f, 1.0f);
    VectorIndex index;
    std::vector<std::vector<float>> vectors;
    std::vector<Chunk> chunks;
    for (std::size_t i = 0; i < n; ++i) {
        Chunk ch{"R" + std::to_string(1 + i % 82), static_cast<std::uint32_t>(i / 82), "t" + std::to_string(i), 0, 1};
        std::vector<float> v(dim);
        for (auto& x : v) {
            x = nd(rng);
        }
        index.add(ch, std::span<const float>(v));
        vectors.push_back(std::move(v));
        chunks.push_back(std::move(ch));
    }
    const auto path = std::filesystem::temp_directory_path() / "acewgs_acceptance.awvx";
    index.save(path);
    const auto loaded = VectorIndex::load(path);
    std::filesystem::remove(path);
    for (int q = 0; q < 50; ++q) {
        std::vector<float> query(dim);
        for (auto& x : query) {
            x = nd(rng);
        }
        const auto hits = index.search(std::span<const float>(query), 10);
        const auto oracle_hits = oracle::brute_force_topk(vectors, chunks, query, 10);
        c.expect(hits.size() == oracle_hits.size(), "hit count differs from oracle");
        for (std::size_t i = 0; i < std::min(hits.size(), oracle_hits.size()); ++i) {
            c.expect(hits[i].chunk.ref_id == oracle_hits[i].ref_id && hits[i].chunk.seq == oracle_hits[i].seq,
                     "query " + std::to_string(q) + " rank " + std::to_string(i) + " differs from oracle");
        }
        const auto again = loaded.search(std::span<const float>(query), 10);
        c.expect(again.size() == hits.size(), "loaded index returns a different hit count");
        for (std::size_t i = 0; i < std::min(again.size(), hits.size()); ++i) {
            c.expect(again[i].chunk.ref_id == hits[i].chunk.ref_id && again[i].chunk.seq == hits[i].chunk.seq &&
                         std::bit_cast<std::uint64_t>(again[i].similarity) ==
                             std::bit_cast<std::uint64_t>(hits[i].similarity),
                     "save/load changed a ranking");
        }
    }
    c.detail = "1000 x 256, 50 queries, k=10";
}

void query_dsl(Check& c) {
    const auto m = load_manifest(kRoot / "data" / "case_study" / "manifest.csv");
    const auto moc = execute(parse_dsl("SELECT ref_id WHERE abstract CONTAINS 'MoC'"), m);
    std::vector<std::string> ids;
    for (const auto& row : moc.rows) {
        ids.push_back(row[0]);
    }
    c.expect(ids == std::vector<std::string>{"R51", "R71"}, "CONTAINS 'MoC' did not return exactly R51, R71");
    const auto journals = format_result(execute(parse_dsl("SELECT journal WHERE year EQ 2021"), m));
    c.expect(journals == "['Nature', 'Energy & Fuels', 'Nanomaterials', 'Catalysis Today', 'Journal of Catalysis', "
                         "'Journal of Catalysis', 'Catalysts', 'Heliyon', 'International Journal of Energy Research', "
                         "'Catalysts']",
             "2021 journal list differs: " + journals);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 1000; ++i) {
        const auto plan = gen::random_plan(rng);
        c.expect(parse_dsl(render(plan)) == plan, "round trip failed for " + render(plan));
    }
    c.detail = "MoC -> R51, R71; 10 journals; 1000 round trips";
}

void thermodynamics(Check& c) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> temp(300.0, 1500.0);
    double worst_iterate = 0.0;
    double worst_reported = 0.0;
    std::size_t forward = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto f = oracle::random_feed(rng);
        const double t = temp(rng);
        const auto r = equilibrium_conversion(f, Kelvin{t});
        c.expect(r.x_eq <= std::min(1.0, f.y_h2o / f.y_co), "x_eq above x_max");
        if (r.regime != EquilibriumRegime::Forward) {
            continue;
        }
        ++forward;
        const double at_iterate = std::abs(oracle::residual_at_slack(f, t, r.slack));
        worst_iterate = std::max(worst_iterate, at_iterate);
        worst_reported = std::max(worst_reported, std::abs(oracle::residual_at(f, t, r.x_eq)));
        c.expect(at_iterate <= 1e-9, "residual " + fmt(at_iterate) + " at case " + std::to_string(i));
    }
    for (int i = 0; i < 20; ++i) {
        const auto f = oracle::random_feed(rng);
        double prev = 2.0;
        for (int k = 0; k < 50; ++k) {
            const double x = equilibrium_conversion(f, Kelvin{300.0 + 1200.0 * k / 49.0}).x_eq;
            c.expect(x <= prev, "x_eq increased with temperature for feed " + std::to_string(i));
            prev = x;
        }
    }
    double worst_grid = 0.0;
    FeedComposition paper_feed{0.001, 0.0618, 0.05, 0.0015, 1.0 - 0.1143};
    for (int i = 0; i < 25; ++i) {
        const auto f = i == 0 ? paper_feed : oracle::random_feed(rng);
        const double t = i == 0 ? 473.15 : temp(rng);
        const auto r = equilibrium_conversion(f, Kelvin{t});
        if (r.regime != EquilibriumRegime::Forward) {
            c.expect(oracle::grid_scan_conversion(f, t, 1000) < 0.0, "oracle found a root the solver did not");
            continue;
        }
        const double g = oracle::grid_scan_conversion(f, t);
        worst_grid = std::max(worst_grid, std::abs(g - r.x_eq));
        c.expect(std::abs(g - r.x_eq) <= 1e-9, "grid-scan disagreement " + fmt(std::abs(g - r.x_eq)));
    }
    c.detail = std::to_string(forward) + " forward cases, max |K-Q| " + fmt(worst_iterate) + " (at reported x_eq " +
               fmt(worst_reported) + "), grid max diff " + fmt(worst_grid);
}

void theory_clamp(Check& c) {
    const auto catalog = load_catalog(kRoot / "config" / "catalog.toml");
    const auto bundle = load_bundle(kRoot / "models" / "reference.bundle.json");
    std::mt19937_64 rng(5);
    std::size_t violations = 0;
    for (int i = 0; i < 10'000; ++i) {
        const auto p = predict(oracle::random_design(rng, catalog), bundle);
        if (!(p.conversion >= 0.0 && p.conversion <= p.x_eq)) {
            ++violations;
        }
    }
    c.expect(violations == 0, std::to_string(violations) + " clamp violations");
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const auto d = oracle::random_design(rng, catalog);
        const auto p = predict(d, bundle);
        const double diff = std::abs(p.conversion - oracle::eigen_conversion(bundle, d, p.x_eq));
        worst = std::max(worst, diff);
        c.expect(diff <= 1e-9, "forward pass differs from oracle by " + fmt(diff));
    }
    c.detail = "10^4 designs, 0 <= conversion <= x_eq; oracle max diff " + fmt(worst);
}

void pso(Check& c) {
    PsoConfig cfg;
    cfg.swarm_size = 30;
    cfg.max_iters = 200;
    cfg.seed = 42;
    const std::vector<Bounds> box(5, Bounds{-5.0, 5.0});
    auto sphere = [](std::span<const double> x) {
        double s = 0.0;
        for (double v : x) {
            s += v * v;
        }
        return -s;
    };
    const auto a = particle_swarm_maximize(std::span<const Bounds>(box), sphere, cfg);
    const auto b = particle_swarm_maximize(std::span<const Bounds>(box), sphere, cfg);
    c.expect(-a.best_value <= 1e-6, "sphere best " + fmt(-a.best_value));
    c.expect(std::bit_cast<std::uint64_t>(a.best_value) == std::bit_cast<std::uint64_t>(b.best_value) &&
                 a.best_position == b.best_position && a.trace == b.trace,
             "rerun with the same seed differs");

    const auto bundle = load_bundle(kRoot / "models" / "reference.bundle.json");
    DesignSpace s;
    s.base_metal = "Pt";
    s.promoter = "Au";
    s.support = "alpha-MoC";
    s.prep_method = "iwi";
    s.bounds = DesignSpace::default_bounds({150.0, 350.0}, true);
    s[DesignDim::PromoterWt] = {3.0, 3.0};
    s[DesignDim::YCo] = {0.001, 0.001};
    s[DesignDim::YH2o] = {0.0618, 0.0618};
    s[DesignDim::YCo2] = {0.05, 0.05};
    s[DesignDim::YH2] = {0.0015, 0.0015};
    s[DesignDim::TimeOnStream] = {1.0, 1.0};
    const auto best = optimize_design(s, bundle, PsoConfig{});
    std::vector<double> x(kDesignDims);
    for (std::size_t d = 0; d < kDesignDims; ++d) {
        x[d] = s.bounds[d].lo;
    }
    constexpr int n = 50;
    auto at = [&](DesignDim d, int i) { return s[d].lo + s[d].width() * i / (n - 1); };
    double grid = -1.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int k = 0; k < n; ++k) {
                x[idx(DesignDim::BaseWt)] = at(DesignDim::BaseWt, i);
                x[idx(DesignDim::TemperatureC)] = at(DesignDim::TemperatureC, j);
                x[idx(DesignDim::WfRatio)] = at(DesignDim::WfRatio, k);
                grid = std::max(grid, predict(s.to_design(x), bundle).conversion);
            }
        }
    }
    c.expect(best.prediction.conversion >= grid - 1e-3,
             "PSO " + fmt(best.prediction.conversion) + " below grid " + fmt(grid));
    c.detail = "sphere f=" + fmt(-a.best_value) + " in " + std::to_string(a.iterations_used) + " iters; PSO " +
               fmt(best.prediction.conversion) + " vs grid " + fmt(grid);
}

void end_to_end(Check& c) {
    acewgs::MockBackend mock(harness::case_study_script());
    const auto scratch = harness::scratch_dir("acewgs_e2e");
    App app(harness::test_config(mock.url(), scratch), http_transport());
    HttpService service(app);
    const int port = service.start("127.0.0.1", 0);
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(120);

    const std::vector<std::pair<std::string, std::string>> script = {
        {"Extract", "Extract the journal names for all papers that were published in the year 2021."},
        {"Extract", "Retrieve the reference and title of all papers published in the year 2021 in the journal Nature."},
        {"Extract", "Retrieve papers where the string 'MoC' is mentioned in the abstract in the exact same form."},
        {"Comprehend", "Comprehend the article of reference ID R71."},
        {"Comprehend", "Extract the name of the catalysts mentioned in the article."},
        {"Comprehend", "Find the name of the catalyst synthesis or preparation method."},
        {"Comprehend", "Provide a step-by-step synthesis method for the catalyst as described in the article."},
        {"General", "/mode auto"},
        {"General", "Provide one or two catalyst design ideas based on the two existing catalysts: i. Pt α-MoC "
                    "catalyst and ii. Au α-MoC catalyst."},
        {"Inverse", "Run inverse model."},
    };
    std::string session;
    for (const auto& [expected, query] : script) {
        nlohmann::json body = {{"query", query}};
        if (!session.empty()) {
            body["session_id"] = session;
        }
        auto res = harness::post_json(client, "/api/v1/chat", body);
        if (!res || res->status != 200) {
            c.expect(false, "chat failed for: " + query + (res ? " " + res->body : ""));
            continue;
        }
        const auto j = harness::body_of(res);
        session = j.at("session_id").get<std::string>();
        c.expect(j.at("routed_kind") == expected,
                 "routed " + j.at("routed_kind").get<std::string>() + " instead of " + expected + ": " + query);
        if (query.rfind("Retrieve papers where", 0) == 0) {
            c.expect(j.at("table").at("rows").size() == 2, "MoC query did not return two rows");
        }
        if (expected == "Inverse") {
            c.expect(j.value("action", "") == "parameter_settings", "inverse turn did not request parameters");
        }
    }

    const nlohmann::json settings = {{"base_metal", "Pt"},    {"promoter", "Au"},
                                     {"support", "alpha-MoC"}, {"prep_method", "iwi"},
                                     {"temperature_range", {150, 250}}};
    auto res = harness::post_json(client, "/api/v1/inverse/jobs", settings);
    if (!res || res->status != 202) {
        c.expect(false, "job submission failed");
        return;
    }
    const auto id = harness::body_of(res).at("job_id").get<std::string>();
    nlohmann::json job;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(110);
    while (std::chrono::steady_clock::now() < deadline) {
        job = harness::body_of(client.Get("/api/v1/inverse/jobs/" + id));
        if (job.at("status") == "Finished" || job.at("status") == "Failed") {
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    if (job.value("status", "") != "Finished") {
        c.expect(false, "job did not finish: " + job.dump());
        return;
    }
    const auto report = report_from_json(job.at("result"));
    double total = 0.0;
    for (const auto& comp : report.composition) {
        total += comp.wt_pct;
    }
    c.expect(std::abs(total - 100.0) <= 0.01 + 1e-9, "wt% sum " + fmt(total));
    c.expect(report.conversion <= report.x_eq, "conversion above x_eq");
    c.expect(count_words(report.narrative) <= kNarrativeWordLimit, "narrative too long");
    c.expect(!report.narrative.empty(), "narrative missing");
    service.stop();
    std::filesystem::remove_all(scratch);
    c.detail = "10 chat turns + inverse job; conversion " + fmt(report.conversion) + "% <= x_eq " +
               fmt(report.x_eq) + "%, wt% sum " + fmt(total);
}

void router(Check& c) {
    const auto m = load_manifest(kRoot / "data" / "case_study" / "manifest.csv");
    const Router r(RuleSet::load(kRoot / "config" / "routing_rules.txt"), m);
    std::ifstream in(kRoot / "tests" / "fixtures" / "router_queries.tsv");
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        ++n;
        const auto a = line.find('\t');
        const auto b = line.find('\t', a + 1);
        SessionState state;
        if (const auto active = line.substr(a + 1, b - a - 1); active != "-") {
            state.active_article = active;
        }
        const auto query = line.substr(b + 1);
        const auto got = r.route(query, state).kind;
        c.expect(to_string(got) == line.substr(0, a), "mismatch: " + query);
    }
    c.expect(n == 30, "fixture has " + std::to_string(n) + " queries, expected 30");
    c.detail = std::to_string(n) + " queries";
}

} // namespace

int main() {
    spdlog::set_level(spdlog::level::warn);
    int failed = 0;
    failed += run("chunker", 5.0, chunker);
    failed += run("vector-search", 10.0, vector_search);
    failed += run("query-dsl", 5.0, query_dsl);
    failed += run("thermodynamics", 30.0, thermodynamics);
    failed += run("theory-clamp", 30.0, theory_clamp);
    failed += run("pso", 60.0, pso);
    failed += run("end-to-end", 120.0, end_to_end);
    failed += run("router", 60.0, router);
    std::printf("%d of 8 criteria failed\n", failed);
    return failed;
}
