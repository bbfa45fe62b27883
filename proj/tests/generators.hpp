#pragma once

#include <acewgs/metadata_query.hpp>

#include <random>
#include <set>

namespace gen {

inline std::string random_string_value(std::mt19937_64& rng) {
    static const std::vector<std::string> pieces = {"a", "Z", "MoC", " ", "'", "''", "α", "°C", ",", "AND", "WHERE", "2021",
                                                    "\\", "\"", "-", "é"};
    std::uniform_int_distribution<int> len(0, 6);
    std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
    std::string s;
    for (int i = len(rng); i > 0; --i) {
        s += pieces[pick(rng)];
    }
    return s;
}

/// A valid plan: fields distinct, operators matched to field types.
inline acewgs::QueryPlan random_plan(std::mt19937_64& rng) {
    using namespace acewgs;
    std::uniform_int_distribution<int> coin(0, 4);
    std::uniform_int_distribution<std::size_t> field_pick(0, kAllFields.size() - 1);
    QueryPlan plan;
    plan.verb = coin(rng) == 0 ? Verb::Count : Verb::Select;
    if (plan.verb == Verb::Select) {
        std::uniform_int_distribution<int> nf(1, 4);
        std::set<std::size_t> used;
        for (int i = nf(rng); i > 0; --i) {
            auto f = field_pick(rng);
            if (used.insert(f).second) {
                plan.fields.push_back(kAllFields[f]);
            }
        }
        if (coin(rng) < 2) {
            plan.limit = std::uniform_int_distribution<std::int64_t>(1, 100)(rng);
        }
    }
    std::uniform_int_distribution<int> np(0, 3);
    for (int i = np(rng); i > 0; --i) {
        Predicate p;
        p.field = kAllFields[field_pick(rng)];
        if (p.field == Field::Year) {
            p.op = static_cast<Op>(std::uniform_int_distribution<int>(0, 5)(rng));
            p.value = std::uniform_int_distribution<std::int64_t>(1900, 2100)(rng);
        } else {
            static constexpr Op string_ops[] = {Op::Eq, Op::Neq, Op::Contains, Op::IContains};
            p.op = string_ops[std::uniform_int_distribution<int>(0, 3)(rng)];
            p.value = random_string_value(rng);
        }
        plan.predicates.push_back(std::move(p));
    }
    return plan;
}

} // namespace gen
