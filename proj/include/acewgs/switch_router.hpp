#pragma once

#include "acewgs/corpus_store.hpp"
#include "acewgs/error.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace acewgs {

enum class FeatureKind { General, Extract, Comprehend, Inverse };

constexpr std::string_view to_string(FeatureKind k) noexcept {
    switch (k) {
    case FeatureKind::General: return "General";
    case FeatureKind::Extract: return "Extract";
    case FeatureKind::Comprehend: return "Comprehend";
    case FeatureKind::Inverse: return "Inverse";
    }
    return "General";
}

/// Case-insensitive; accepts "General" as well as "general".
inline std::optional<FeatureKind> feature_from_string(std::string_view s) {
    std::string lower;
    for (char c : s) {
        lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (lower == "general") return FeatureKind::General;
    if (lower == "extract") return FeatureKind::Extract;
    if (lower == "comprehend") return FeatureKind::Comprehend;
    if (lower == "inverse") return FeatureKind::Inverse;
    return std::nullopt;
}

/// Parameter keys set on routed queries.
namespace route_param {
inline constexpr std::string_view kRefId = "ref_id";
/// "explicit" when the query named the article, "session" when inherited.
inline constexpr std::string_view kRefSource = "ref_source";
/// "lock" or "auto" for /mode commands.
inline constexpr std::string_view kModeCommand = "mode_command";
/// Text of the rule that matched, or "fallback"/"session"/"mode_lock".
inline constexpr std::string_view kRule = "rule";
} // namespace route_param

struct RoutedQuery {
    FeatureKind kind = FeatureKind::General;
    std::string raw_text;
    std::map<std::string, std::string, std::less<>> params;

    std::optional<std::string> param(std::string_view key) const {
        auto it = params.find(key);
        return it == params.end() ? std::nullopt : std::optional<std::string>(it->second);
    }
    bool is_mode_command() const { return params.count(route_param::kModeCommand) > 0; }
};

struct SessionState {
    std::optional<std::string> active_article;
    std::optional<FeatureKind> mode_lock;
    std::vector<std::pair<std::string, FeatureKind>> history;
};

struct RoutingRule {
    int priority = 0;
    FeatureKind feature = FeatureKind::General;
    std::string pattern;
    std::regex regex;
};

/// Default rules, identical to config/routing_rules.txt.
inline constexpr std::string_view kDefaultRoutingRules = R"(# priority  feature     pattern (ECMAScript regex, case-insensitive)
100 inverse    \binverse\s+model\b
100 inverse    \brun\s+inverse\b
80  comprehend \bcomprehend\b
80  comprehend \breference\s+id\s+R\d+
80  comprehend \bR\d+\b
60  extract    \bretrieve\b
60  extract    \bextract\b.*\b(papers|articles)\b
60  extract    \bpublished\b
60  extract    \bjournals?\b
60  extract    \bdatabase\b
)";

class RuleSet {
public:
    RuleSet() = default;

    /// One rule per line: `priority feature pattern`. Blank lines and lines
    /// starting with '#' are skipped. Higher priority is tried first; equal
    /// priorities keep file order.
    static RuleSet parse(std::string_view text) {
        RuleSet set;
        std::istringstream in{std::string(text)};
        std::size_t line_no = 0;
        for (std::string line; std::getline(in, line);) {
            ++line_no;
            auto t = trim(line);
            if (t.empty() || t[0] == '#') {
                continue;
            }
            std::istringstream fields(t);
            std::string priority, feature;
            fields >> priority >> feature;
            std::string pattern;
            std::getline(fields, pattern);
            pattern = trim(pattern);
            const std::string where = "rules line " + std::to_string(line_no);
            RoutingRule rule;
            try {
                std::size_t used = 0;
                rule.priority = std::stoi(priority, &used);
                if (used != priority.size()) {
                    throw std::invalid_argument(priority);
                }
            } catch (const std::logic_error&) {
                throw Error(Errc::RulesFormat, where + ": priority '" + priority + "' is not an integer");
            }
            auto kind = feature_from_string(feature);
            if (!kind) {
                throw Error(Errc::RulesFormat, where + ": unknown feature '" + feature + "'");
            }
            if (pattern.empty()) {
                throw Error(Errc::RulesFormat, where + ": missing pattern");
            }
            rule.feature = *kind;
            rule.pattern = pattern;
            try {
                rule.regex = std::regex(pattern, std::regex::ECMAScript | std::regex::icase);
            } catch (const std::regex_error& e) {
                throw Error(Errc::RulesFormat, where + ": bad pattern: " + e.what());
            }
            set.rules_.push_back(std::move(rule));
        }
        std::stable_sort(set.rules_.begin(), set.rules_.end(),
                         [](const RoutingRule& a, const RoutingRule& b) { return a.priority > b.priority; });
        return set;
    }

    static RuleSet defaults() { return parse(kDefaultRoutingRules); }

    static RuleSet load(const std::filesystem::path& path) { return parse(read_file(path)); }

    const std::vector<RoutingRule>& rules() const noexcept { return rules_; }

private:
    std::vector<RoutingRule> rules_;
};

/// Finds the first R<number> token, upper-cased.
inline std::optional<std::string> extract_ref_id(std::string_view query) {
    static const std::regex ref(R"(\b[Rr](\d+)\b)");
    std::match_results<std::string_view::const_iterator> m;
    if (std::regex_search(query.begin(), query.end(), m, ref)) {
        return "R" + m[1].str();
    }
    return std::nullopt;
}

/// Rule-based switch. Pure: the result depends only on (query, state) and
/// the immutable rules and manifest.
class Router {
public:
    Router(RuleSet rules, const Manifest& manifest) : rules_(std::move(rules)), manifest_(&manifest) {}

    const RuleSet& rules() const noexcept { return rules_; }

    /// Priority: /mode command > mode lock > rules by priority > active
    /// article stickiness > General.
    RoutedQuery route(std::string_view query, const SessionState& state) const {
        const std::string text = trim(query);
        if (text.empty()) {
            throw Error(Errc::BadRequest, "query must not be empty");
        }
        RoutedQuery out;
        out.raw_text = std::string(query);

        if (auto mode = parse_mode_command(text)) {
            out.params[std::string(route_param::kRule)] = "mode_command";
            if (*mode == "auto") {
                out.kind = FeatureKind::General;
                out.params[std::string(route_param::kModeCommand)] = "auto";
            } else if (auto kind = feature_from_string(*mode)) {
                out.kind = *kind;
                out.params[std::string(route_param::kModeCommand)] = "lock";
            } else {
                throw Error(Errc::BadRequest, "unknown mode '" + *mode + "'; use general, extract, comprehend, inverse or auto");
            }
            return out;
        }

        if (state.mode_lock) {
            out.kind = *state.mode_lock;
            out.params[std::string(route_param::kRule)] = "mode_lock";
            if (out.kind == FeatureKind::Comprehend) {
                attach_reference(out, text, state, /*required=*/false);
            }
            return out;
        }

        for (const auto& rule : rules_.rules()) {
            if (!std::regex_search(text, rule.regex)) {
                continue;
            }
            if (rule.feature == FeatureKind::Comprehend) {
                // Needs an article: named in the query or already active.
                if (!attach_reference(out, text, state, /*required=*/true)) {
                    continue;
                }
            }
            out.kind = rule.feature;
            out.params[std::string(route_param::kRule)] = rule.pattern;
            return out;
        }

        if (state.active_article) {
            out.kind = FeatureKind::Comprehend;
            out.params[std::string(route_param::kRule)] = "session";
            out.params[std::string(route_param::kRefId)] = *state.active_article;
            out.params[std::string(route_param::kRefSource)] = "session";
            return out;
        }
        out.kind = FeatureKind::General;
        out.params[std::string(route_param::kRule)] = "fallback";
        return out;
    }

private:
    static std::optional<std::string> parse_mode_command(std::string_view text) {
        if (text.rfind("/mode", 0) != 0) {
            return std::nullopt;
        }
        auto rest = trim(text.substr(5));
        if (!rest.empty() && text.size() > 5 && !std::isspace(static_cast<unsigned char>(text[5]))) {
            return std::nullopt;
        }
        return rest;
    }

    /// Sets ref_id params. Returns false when no article is available.
    bool attach_reference(RoutedQuery& out, std::string_view text, const SessionState& state, bool required) const {
        if (auto ref = extract_ref_id(text)) {
            if (!manifest_->contains(*ref)) {
                throw Error(Errc::UnknownReference, "reference ID " + *ref + " is not in the article database");
            }
            out.params[std::string(route_param::kRefId)] = *ref;
            out.params[std::string(route_param::kRefSource)] = "explicit";
            return true;
        }
        if (state.active_article) {
            out.params[std::string(route_param::kRefId)] = *state.active_article;
            out.params[std::string(route_param::kRefSource)] = "session";
            return true;
        }
        return !required;
    }

    RuleSet rules_;
    const Manifest* manifest_;
};

/// Applies a routed query to the session: records history, follows /mode
/// commands and activates articles named by Comprehend routes.
inline SessionState update_session(SessionState state, const RoutedQuery& routed) {
    state.history.emplace_back(routed.raw_text, routed.kind);
    if (auto cmd = routed.param(route_param::kModeCommand)) {
        if (*cmd == "auto") {
            state.mode_lock.reset();
            state.active_article.reset();
        } else {
            state.mode_lock = routed.kind;
        }
        return state;
    }
    if (routed.kind == FeatureKind::Comprehend) {
        if (auto ref = routed.param(route_param::kRefId)) {
            state.active_article = *ref;
        }
    } else if (auto rule = routed.param(route_param::kRule); rule && *rule != "fallback" && *rule != "mode_lock") {
        // An explicit route elsewhere ends article stickiness.
        state.active_article.reset();
    }
    return state;
}

} // namespace acewgs
