#include <acewgs/corpus_store.hpp>
#include <acewgs/switch_router.hpp>

#include <gtest/gtest.h>

#include <fstream>

using namespace acewgs;

namespace {

const std::filesystem::path kRoot(ACEWGS_SOURCE_DIR);

const Manifest& manifest() {
    static const Manifest m = load_manifest(kRoot / "data" / "case_study" / "manifest.csv");
    return m;
}

struct FixtureRow {
    FeatureKind expected;
    std::optional<std::string> active;
    std::string query;
};

std::vector<FixtureRow> fixture() {
    std::ifstream in(kRoot / "tests" / "fixtures" / "router_queries.tsv");
    std::vector<FixtureRow> rows;
    for (std::string line; std::getline(in, line);) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const auto a = line.find('\t');
        const auto b = line.find('\t', a + 1);
        FixtureRow row;
        row.expected = *feature_from_string(line.substr(0, a));
        const auto active = line.substr(a + 1, b - a - 1);
        if (active != "-") {
            row.active = active;
        }
        row.query = line.substr(b + 1);
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

TEST(Router, FixtureRoutesWithoutMismatch) {
    const Router router(RuleSet::load(kRoot / "config" / "routing_rules.txt"), manifest());
    const auto rows = fixture();
    ASSERT_EQ(rows.size(), 30u);
    for (const auto& row : rows) {
        SessionState state;
        state.active_article = row.active;
        EXPECT_EQ(router.route(row.query, state).kind, row.expected) << row.query;
    }
}

TEST(Router, DefaultRulesMatchConfigFile) {
    EXPECT_EQ(read_file(kRoot / "config" / "routing_rules.txt"), std::string(kDefaultRoutingRules));
}

TEST(Router, ModeLockAndAuto) {
    const Router router(RuleSet::defaults(), manifest());
    SessionState state;
    auto r = router.route("/mode extract", state);
    state = update_session(state, r);
    ASSERT_EQ(state.mode_lock, FeatureKind::Extract);
    EXPECT_EQ(router.route("Run inverse model.", state).kind, FeatureKind::Extract);
    state = update_session(state, router.route("/mode auto", state));
    EXPECT_FALSE(state.mode_lock.has_value());
    EXPECT_EQ(router.route("Run inverse model.", state).kind, FeatureKind::Inverse);
    EXPECT_THROW(router.route("/mode sideways", state), Error);
    EXPECT_THROW(router.route("   ", state), Error);
}

TEST(Router, ArticleStickinessAndRelease) {
    const Router router(RuleSet::defaults(), manifest());
    SessionState state;
    state = update_session(state, router.route("Comprehend the article of reference ID R71.", state));
    ASSERT_EQ(state.active_article, "R71");
    const auto follow = router.route("What support was used?", state);
    EXPECT_EQ(follow.kind, FeatureKind::Comprehend);
    EXPECT_EQ(follow.param(route_param::kRefSource), "session");
    state = update_session(state, router.route("Extract the journals of papers from 2020.", state));
    EXPECT_FALSE(state.active_article.has_value());
}

TEST(Router, UnknownReferenceIsRejected) {
    const Router router(RuleSet::defaults(), manifest());
    try {
        router.route("Comprehend R999", SessionState{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::UnknownReference);
    }
}

TEST(Router, RulesFormatErrors) {
    EXPECT_THROW(RuleSet::parse("x extract foo"), Error);
    EXPECT_THROW(RuleSet::parse("10 sideways foo"), Error);
    EXPECT_THROW(RuleSet::parse("10 extract"), Error);
    EXPECT_THROW(RuleSet::parse("10 extract ("), Error);
}
