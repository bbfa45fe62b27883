#include "generators.hpp"

#include <acewgs/metadata_query.hpp>

#include <gtest/gtest.h>

using namespace acewgs;

namespace {

const Manifest& case_study() {
    static const Manifest m =
        load_manifest(std::filesystem::path(ACEWGS_SOURCE_DIR) / "data" / "case_study" / "manifest.csv");
    return m;
}

Errc error_of(std::string_view dsl) {
    try {
        parse_dsl(dsl);
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::IoError;
}

std::vector<std::string> column(const ResultTable& t, std::size_t c = 0) {
    std::vector<std::string> out;
    for (const auto& row : t.rows) {
        out.push_back(row[c]);
    }
    return out;
}

} // namespace

TEST(Dsl, ParsesSpecExamples) {
    const auto plan = parse_dsl("SELECT ref_id, title WHERE abstract CONTAINS 'MoC'");
    EXPECT_EQ(plan.verb, Verb::Select);
    EXPECT_EQ(plan.fields.size(), 2u);
    ASSERT_EQ(plan.predicates.size(), 1u);
    EXPECT_EQ(plan.predicates[0].op, Op::Contains);
    EXPECT_EQ(std::get<std::string>(plan.predicates[0].value), "MoC");

    const auto count = parse_dsl("  count   where year eq 2021 ");
    EXPECT_EQ(count.verb, Verb::Count);
    EXPECT_EQ(render(count), "COUNT WHERE year EQ 2021");
}

TEST(Dsl, Errors) {
    EXPECT_EQ(error_of("SELECT nonsense WHERE year EQ 2021"), Errc::UnknownField);
    EXPECT_EQ(error_of("SELECT title WHERE title GT 5"), Errc::TypeError);
    EXPECT_EQ(error_of("SELECT title WHERE year CONTAINS '20'"), Errc::TypeError);
    EXPECT_EQ(error_of("SELECT title WHERE year EQ '2021'"), Errc::TypeError);
    EXPECT_EQ(error_of("SELECT title WHERE title EQ 'x' trailing"), Errc::SyntaxError);
    EXPECT_EQ(error_of("SELECT title WHERE title EQ 'unterminated"), Errc::SyntaxError);
    EXPECT_EQ(error_of("SELECT"), Errc::SyntaxError);
    EXPECT_EQ(error_of("SELECT title LIMIT 0"), Errc::SyntaxError);
    EXPECT_EQ(error_of("DROP TABLE articles"), Errc::SyntaxError);
    try {
        parse_dsl("SELECT title WHERE title EQ 'x' trailing");
    } catch (const Error& e) {
        ASSERT_TRUE(e.position().has_value());
        EXPECT_EQ(*e.position(), 32u);
    }
}

TEST(Dsl, EscapedQuotes) {
    const auto plan = parse_dsl("SELECT title WHERE title CONTAINS 'it''s'");
    EXPECT_EQ(std::get<std::string>(plan.predicates[0].value), "it's");
    EXPECT_EQ(render(plan), "SELECT title WHERE title CONTAINS 'it''s'");
}

TEST(Dsl, RoundTripGenerated) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 1000; ++i) {
        const auto plan = gen::random_plan(rng);
        ASSERT_EQ(parse_dsl(render(plan)), plan) << render(plan);
    }
}

TEST(Execute, CaseStudyQueries) {
    const auto& m = case_study();
    EXPECT_EQ(column(execute(parse_dsl("SELECT ref_id WHERE abstract CONTAINS 'MoC'"), m)),
              (std::vector<std::string>{"R51", "R71"}));
    EXPECT_EQ(column(execute(parse_dsl("SELECT ref_id WHERE abstract ICONTAINS 'moc'"), m)),
              (std::vector<std::string>{"R33", "R51", "R71"}));
    const auto journals = execute(parse_dsl("SELECT journal WHERE year EQ 2021"), m);
    EXPECT_EQ(format_result(journals),
              "['Nature', 'Energy & Fuels', 'Nanomaterials', 'Catalysis Today', 'Journal of Catalysis', "
              "'Journal of Catalysis', 'Catalysts', 'Heliyon', 'International Journal of Energy Research', "
              "'Catalysts']");
    const auto nature =
        execute(parse_dsl("SELECT ref_id, year, journal, title WHERE year EQ 2021 AND journal EQ 'Nature'"), m);
    EXPECT_EQ(format_result(nature),
              "R71 \\ 2021 \\ Nature \\ A stable low-temperature H2-production catalyst by crowding Pt on α-MoC");
    EXPECT_EQ(execute(parse_dsl("COUNT WHERE year EQ 3000"), m).count, 0);
    EXPECT_EQ(execute(parse_dsl("COUNT"), m).count, 82);
    EXPECT_EQ(execute(parse_dsl("SELECT ref_id LIMIT 3"), m).rows.size(), 3u);
}

TEST(Execute, RowsSatisfyPredicatesOnIndependentRefilter) {
    const auto& m = case_study();
    std::mt19937_64 rng(5);
    for (int i = 0; i < 300; ++i) {
        auto plan = gen::random_plan(rng);
        plan.verb = Verb::Select;
        plan.fields = {Field::RefId};
        plan.limit.reset();
        const auto table = execute(plan, m);
        std::vector<std::string> expected;
        for (const auto& row : m.rows()) {
            bool all = true;
            for (const auto& p : plan.predicates) {
                std::string text;
                switch (p.field) {
                case Field::RefId: text = row.ref_id; break;
                case Field::Title: text = row.title; break;
                case Field::Abstract: text = row.abstract; break;
                case Field::Journal: text = row.journal; break;
                case Field::Doi: text = row.doi; break;
                case Field::Authors: text = join(row.authors, "; "); break;
                case Field::Year: break;
                }
                bool ok = false;
                if (p.field == Field::Year) {
                    const auto v = std::get<std::int64_t>(p.value);
                    const auto y = static_cast<std::int64_t>(row.year);
                    ok = (p.op == Op::Eq && y == v) || (p.op == Op::Neq && y != v) || (p.op == Op::Lt && y < v) ||
                         (p.op == Op::Lte && y <= v) || (p.op == Op::Gt && y > v) || (p.op == Op::Gte && y >= v);
                } else {
                    const auto& v = std::get<std::string>(p.value);
                    auto low = [](std::string s) {
                        for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
                        return s;
                    };
                    const bool in_authors = std::find(row.authors.begin(), row.authors.end(), v) != row.authors.end();
                    switch (p.op) {
                    case Op::Eq: ok = p.field == Field::Authors ? in_authors : text == v; break;
                    case Op::Neq: ok = p.field == Field::Authors ? !in_authors : text != v; break;
                    case Op::Contains: ok = text.find(v) != std::string::npos; break;
                    case Op::IContains: ok = low(text).find(low(v)) != std::string::npos; break;
                    default: break;
                    }
                }
                all = all && ok;
            }
            if (all) {
                expected.push_back(row.ref_id);
            }
        }
        ASSERT_EQ(column(table), expected) << render(plan);
    }
}

TEST(Translate, NormalizesFences) {
    EXPECT_EQ(normalize_llm_dsl("```sql\nSELECT title\n```"), "SELECT title");
    EXPECT_EQ(normalize_llm_dsl("  `COUNT`  "), "COUNT");
}
