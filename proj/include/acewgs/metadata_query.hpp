#pragma once

// Query DSL over the article manifest (grammar version 1):
//
//   query     := count | select
//   count     := "COUNT" [ "WHERE" predicates ]
//   select    := "SELECT" field ("," field)* [ "WHERE" predicates ] [ "LIMIT" integer ]
//   predicates:= predicate ("AND" predicate)*
//   predicate := field op value
//   op        := EQ | NEQ | LT | LTE | GT | GTE | CONTAINS | ICONTAINS
//   value     := integer | 'single quoted string' ('' escapes a quote)
//
// Keywords and operators are case-insensitive, field names are not.

#include "acewgs/corpus_store.hpp"
#include "acewgs/error.hpp"
#include "acewgs/llm_gateway.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace acewgs {

enum class Field { RefId, Year, Title, Abstract, Journal, Authors, Doi };

inline constexpr std::array<Field, 7> kAllFields = {Field::RefId,   Field::Year,    Field::Title, Field::Abstract,
                                                    Field::Journal, Field::Authors, Field::Doi};

constexpr std::string_view field_name(Field f) noexcept {
    return kManifestColumns[static_cast<std::size_t>(f)];
}

inline std::optional<Field> field_from_name(std::string_view name) {
    for (Field f : kAllFields) {
        if (field_name(f) == name) {
            return f;
        }
    }
    return std::nullopt;
}

constexpr bool is_numeric_field(Field f) noexcept { return f == Field::Year; }

enum class Op { Eq, Neq, Lt, Lte, Gt, Gte, Contains, IContains };

inline constexpr std::array<std::pair<Op, std::string_view>, 8> kOpNames = {{
    {Op::Eq, "EQ"},
    {Op::Neq, "NEQ"},
    {Op::Lt, "LT"},
    {Op::Lte, "LTE"},
    {Op::Gt, "GT"},
    {Op::Gte, "GTE"},
    {Op::Contains, "CONTAINS"},
    {Op::IContains, "ICONTAINS"},
}};

constexpr std::string_view op_name(Op op) noexcept {
    for (auto [o, name] : kOpNames) {
        if (o == op) {
            return name;
        }
    }
    return "?";
}

constexpr bool is_ordering_op(Op op) noexcept { return op == Op::Lt || op == Op::Lte || op == Op::Gt || op == Op::Gte; }
constexpr bool is_substring_op(Op op) noexcept { return op == Op::Contains || op == Op::IContains; }

using Value = std::variant<std::int64_t, std::string>;

struct Predicate {
    Field field = Field::RefId;
    Op op = Op::Eq;
    Value value;

    bool operator==(const Predicate&) const = default;
};

enum class Verb { Select, Count };

struct QueryPlan {
    Verb verb = Verb::Select;
    std::vector<Field> fields;
    std::vector<Predicate> predicates;
    std::optional<std::int64_t> limit;

    bool operator==(const QueryPlan&) const = default;
};

/// Throws TypeError when the operator or value does not fit the field.
inline void check_predicate(const Predicate& p, std::size_t position = 0) {
    const bool numeric = is_numeric_field(p.field);
    const bool int_value = std::holds_alternative<std::int64_t>(p.value);
    const std::string what = std::string(field_name(p.field)) + " " + std::string(op_name(p.op));
    if (is_ordering_op(p.op) && !numeric) {
        throw Error(Errc::TypeError, "ordering operator on string field: " + what, position);
    }
    if (is_substring_op(p.op) && numeric) {
        throw Error(Errc::TypeError, "substring operator on numeric field: " + what, position);
    }
    if (numeric && !int_value) {
        throw Error(Errc::TypeError, "field year takes an integer value: " + what, position);
    }
    if (!numeric && int_value) {
        throw Error(Errc::TypeError, "string field takes a quoted value: " + what, position);
    }
}

namespace dsl_detail {

enum class Tok { Word, Integer, String, Comma, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    std::int64_t number = 0;
    std::size_t pos = 0;
};

inline std::string upper(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return out;
}

inline std::vector<Token> lex(std::string_view text) {
    std::vector<Token> out;
    std::size_t i = 0;
    auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
    while (true) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
        }
        if (i >= text.size()) {
            out.push_back({Tok::End, {}, 0, i});
            return out;
        }
        const std::size_t start = i;
        char c = text[i];
        if (c == ',') {
            out.push_back({Tok::Comma, ",", 0, start});
            ++i;
        } else if (c == '\'') {
            std::string value;
            ++i;
            bool closed = false;
            while (i < text.size()) {
                if (text[i] == '\'') {
                    if (i + 1 < text.size() && text[i + 1] == '\'') {
                        value.push_back('\'');
                        i += 2;
                        continue;
                    }
                    ++i;
                    closed = true;
                    break;
                }
                value.push_back(text[i++]);
            }
            if (!closed) {
                throw Error(Errc::SyntaxError, "unterminated string literal", start);
            }
            out.push_back({Tok::String, std::move(value), 0, start});
        } else if (std::isdigit(static_cast<unsigned char>(c)) || (c == '-' && i + 1 < text.size() &&
                                                                    std::isdigit(static_cast<unsigned char>(text[i + 1])))) {
            ++i;
            while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
                ++i;
            }
            if (i < text.size() && is_word(text[i])) {
                throw Error(Errc::SyntaxError, "malformed number", start);
            }
            std::string digits(text.substr(start, i - start));
            Token t{Tok::Integer, digits, 0, start};
            try {
                t.number = std::stoll(digits);
            } catch (const std::out_of_range&) {
                throw Error(Errc::SyntaxError, "integer out of range", start);
            }
            out.push_back(std::move(t));
        } else if (is_word(c)) {
            while (i < text.size() && is_word(text[i])) {
                ++i;
            }
            out.push_back({Tok::Word, std::string(text.substr(start, i - start)), 0, start});
        } else {
            throw Error(Errc::SyntaxError, std::string("unexpected character '") + c + "'", start);
        }
    }
}

class Parser {
public:
    explicit Parser(std::string_view text) : tokens_(lex(text)) {}

    QueryPlan parse() {
        QueryPlan plan;
        if (accept_keyword("COUNT")) {
            plan.verb = Verb::Count;
            if (accept_keyword("WHERE")) {
                plan.predicates = predicates();
            }
        } else if (accept_keyword("SELECT")) {
            plan.verb = Verb::Select;
            plan.fields.push_back(field());
            while (peek().kind == Tok::Comma) {
                ++at_;
                plan.fields.push_back(field());
            }
            if (accept_keyword("WHERE")) {
                plan.predicates = predicates();
            }
            if (accept_keyword("LIMIT")) {
                const Token& t = peek();
                if (t.kind != Tok::Integer || t.number < 1) {
                    throw Error(Errc::SyntaxError, "LIMIT takes a positive integer", t.pos);
                }
                plan.limit = t.number;
                ++at_;
            }
        } else {
            throw Error(Errc::SyntaxError, "expected SELECT or COUNT", peek().pos);
        }
        if (peek().kind != Tok::End) {
            throw Error(Errc::SyntaxError, "unexpected trailing input '" + peek().text + "'", peek().pos);
        }
        return plan;
    }

private:
    const Token& peek() const { return tokens_[at_]; }

    bool accept_keyword(std::string_view kw) {
        if (peek().kind == Tok::Word && upper(peek().text) == kw) {
            ++at_;
            return true;
        }
        return false;
    }

    Field field() {
        const Token& t = peek();
        if (t.kind != Tok::Word) {
            throw Error(Errc::SyntaxError, "expected a field name", t.pos);
        }
        auto f = field_from_name(t.text);
        if (!f) {
            throw Error(Errc::UnknownField, "unknown field '" + t.text + "'", t.pos);
        }
        ++at_;
        return *f;
    }

    std::vector<Predicate> predicates() {
        std::vector<Predicate> preds;
        preds.push_back(predicate());
        while (accept_keyword("AND")) {
            preds.push_back(predicate());
        }
        return preds;
    }

    Predicate predicate() {
        const std::size_t start = peek().pos;
        Predicate p;
        p.field = field();
        const Token& op_tok = peek();
        bool found = false;
        if (op_tok.kind == Tok::Word) {
            auto name = upper(op_tok.text);
            for (auto [op, op_text] : kOpNames) {
                if (name == op_text) {
                    p.op = op;
                    found = true;
                }
            }
        }
        if (!found) {
            throw Error(Errc::SyntaxError, "expected an operator (EQ, NEQ, LT, LTE, GT, GTE, CONTAINS, ICONTAINS)",
                        op_tok.pos);
        }
        ++at_;
        const Token& v = peek();
        if (v.kind == Tok::Integer) {
            p.value = v.number;
        } else if (v.kind == Tok::String) {
            p.value = v.text;
        } else {
            throw Error(Errc::SyntaxError, "expected an integer or a quoted string", v.pos);
        }
        ++at_;
        check_predicate(p, start);
        return p;
    }

    std::vector<Token> tokens_;
    std::size_t at_ = 0;
};

} // namespace dsl_detail

inline QueryPlan parse_dsl(std::string_view text) {
    return dsl_detail::Parser(text).parse();
}

inline std::string render_value(const Value& v) {
    if (auto n = std::get_if<std::int64_t>(&v)) {
        return std::to_string(*n);
    }
    std::string out = "'";
    for (char c : std::get<std::string>(v)) {
        if (c == '\'') {
            out += "''";
        } else {
            out.push_back(c);
        }
    }
    out.push_back('\'');
    return out;
}

/// Canonical text form; parse_dsl(render(p)) == p.
inline std::string render(const QueryPlan& plan) {
    std::string out;
    if (plan.verb == Verb::Count) {
        out = "COUNT";
    } else {
        out = "SELECT ";
        for (std::size_t i = 0; i < plan.fields.size(); ++i) {
            if (i) {
                out += ", ";
            }
            out += field_name(plan.fields[i]);
        }
    }
    for (std::size_t i = 0; i < plan.predicates.size(); ++i) {
        const auto& p = plan.predicates[i];
        out += i == 0 ? " WHERE " : " AND ";
        out += std::string(field_name(p.field)) + " " + std::string(op_name(p.op)) + " " + render_value(p.value);
    }
    if (plan.verb == Verb::Select && plan.limit) {
        out += " LIMIT " + std::to_string(*plan.limit);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Execution

inline std::string field_text(const ArticleMeta& row, Field f) {
    switch (f) {
    case Field::RefId: return row.ref_id;
    case Field::Year: return std::to_string(row.year);
    case Field::Title: return row.title;
    case Field::Abstract: return row.abstract;
    case Field::Journal: return row.journal;
    case Field::Authors: return join(row.authors, "; ");
    case Field::Doi: return row.doi;
    }
    return {};
}

namespace dsl_detail {

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

inline bool string_matches(std::string_view haystack, Op op, const std::string& needle) {
    switch (op) {
    case Op::Eq: return haystack == needle;
    case Op::Neq: return haystack != needle;
    case Op::Contains: return haystack.find(needle) != std::string_view::npos;
    case Op::IContains: return lower(haystack).find(lower(needle)) != std::string::npos;
    default: return false;
    }
}

} // namespace dsl_detail

/// EQ/NEQ on `authors` test individual names; substring operators search
/// the "; "-joined list.
inline bool matches(const ArticleMeta& row, const Predicate& p) {
    if (p.field == Field::Year) {
        const auto rhs = std::get<std::int64_t>(p.value);
        const std::int64_t lhs = row.year;
        switch (p.op) {
        case Op::Eq: return lhs == rhs;
        case Op::Neq: return lhs != rhs;
        case Op::Lt: return lhs < rhs;
        case Op::Lte: return lhs <= rhs;
        case Op::Gt: return lhs > rhs;
        case Op::Gte: return lhs >= rhs;
        default: return false;
        }
    }
    const auto& needle = std::get<std::string>(p.value);
    if (p.field == Field::Authors && (p.op == Op::Eq || p.op == Op::Neq)) {
        bool any = std::any_of(row.authors.begin(), row.authors.end(),
                               [&](const std::string& a) { return a == needle; });
        return p.op == Op::Eq ? any : !any;
    }
    return dsl_detail::string_matches(field_text(row, p.field), p.op, needle);
}

struct ResultTable {
    /// Column names; a COUNT result has the single column "count".
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::optional<std::int64_t> count;

    bool operator==(const ResultTable&) const = default;
};

inline ResultTable execute(const QueryPlan& plan, const Manifest& manifest) {
    ResultTable table;
    std::int64_t matched = 0;
    for (const auto& row : manifest.rows()) {
        bool ok = std::all_of(plan.predicates.begin(), plan.predicates.end(),
                              [&](const Predicate& p) { return matches(row, p); });
        if (!ok) {
            continue;
        }
        ++matched;
        if (plan.verb == Verb::Select) {
            if (plan.limit && static_cast<std::int64_t>(table.rows.size()) >= *plan.limit) {
                break;
            }
            std::vector<std::string> out;
            out.reserve(plan.fields.size());
            for (Field f : plan.fields) {
                out.push_back(field_text(row, f));
            }
            table.rows.push_back(std::move(out));
        }
    }
    if (plan.verb == Verb::Count) {
        table.columns = {"count"};
        table.count = matched;
        table.rows = {{std::to_string(matched)}};
    } else {
        for (Field f : plan.fields) {
            table.columns.emplace_back(field_name(f));
        }
    }
    return table;
}

/// Plain-text rendering used in chat answers: single-column results as a
/// bracketed list, wider rows one per line with " \ " between cells.
inline std::string format_result(const ResultTable& table) {
    if (table.count) {
        return std::to_string(*table.count);
    }
    if (table.rows.empty()) {
        return "No matching articles.";
    }
    std::string out;
    if (table.columns.size() == 1) {
        out = "[";
        for (std::size_t i = 0; i < table.rows.size(); ++i) {
            out += (i ? ", '" : "'") + table.rows[i][0] + "'";
        }
        return out + "]";
    }
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        if (i) {
            out += '\n';
        }
        out += join(table.rows[i], " \\ ");
    }
    return out;
}

inline nlohmann::json to_json(const ResultTable& table) {
    nlohmann::json j = {{"columns", table.columns}, {"rows", table.rows}};
    if (table.count) {
        j["count"] = *table.count;
    }
    return j;
}

// ---------------------------------------------------------------------------
// Translation through the language model

inline constexpr std::string_view kDefaultTranslatePrompt =
    R"(You translate questions about a table of research articles into a query language.
The table has one row per article with these fields:
  ref_id (string, e.g. 'R71'), year (integer), title (string), abstract (string),
  journal (string), authors (string, '; '-separated names), doi (string).

Grammar:
  COUNT [WHERE predicate (AND predicate)*]
  SELECT field (, field)* [WHERE predicate (AND predicate)*] [LIMIT n]
  predicate := field OP value
  OP := EQ | NEQ | LT | LTE | GT | GTE | CONTAINS | ICONTAINS
  LT, LTE, GT, GTE only apply to year. CONTAINS (case-sensitive) and ICONTAINS
  (case-insensitive) only apply to string fields. Strings are single-quoted.

Examples:
  How many articles are there? => COUNT
  List the titles of papers from 2019. => SELECT title WHERE year EQ 2019

Reply with exactly one query and nothing else.

Question: {question}
Query:)";

inline constexpr int kTranslateRetries = 2;

struct Translation {
    std::string dsl;
    QueryPlan plan;
    int attempts = 0;
};

/// Strips whitespace and a surrounding markdown code fence.
inline std::string normalize_llm_dsl(std::string_view raw) {
    std::string s = trim(raw);
    if (s.rfind("```", 0) == 0) {
        auto nl = s.find('\n');
        s = nl == std::string::npos ? s.substr(3) : s.substr(nl + 1);
        auto close = s.rfind("```");
        if (close != std::string::npos) {
            s = s.substr(0, close);
        }
        s = trim(s);
    }
    if (s.size() >= 2 && s.front() == '`' && s.back() == '`') {
        s = trim(s.substr(1, s.size() - 2));
    }
    return s;
}

inline std::string fill_placeholder(std::string_view tmpl, std::string_view key, std::string_view value) {
    std::string out(tmpl);
    const std::string marker = "{" + std::string(key) + "}";
    for (auto at = out.find(marker); at != std::string::npos; at = out.find(marker, at + value.size())) {
        out.replace(at, marker.size(), value);
    }
    return out;
}

/// Asks the model for a query, parses it, and on failure re-asks with the
/// parser's message appended, at most kTranslateRetries extra times.
inline Translation translate(std::string_view question, const LlmClient& llm,
                             std::string_view prompt_template = kDefaultTranslatePrompt) {
    if (trim(question).empty()) {
        throw Error(Errc::EmptyPrompt, "question must not be empty");
    }
    const std::string base = fill_placeholder(prompt_template, "question", question);
    std::string prompt = base;
    std::string last_error;
    for (int attempt = 1; attempt <= 1 + kTranslateRetries; ++attempt) {
        auto raw = llm.generate(prompt).text;
        auto dsl = normalize_llm_dsl(raw);
        try {
            auto plan = parse_dsl(dsl);
            return Translation{dsl, std::move(plan), attempt};
        } catch (const Error& e) {
            last_error = e.what();
            prompt = base + "\n\nYour previous reply was:\n" + dsl + "\nIt was rejected: " + last_error +
                     "\nReply with a corrected query only.\nQuery:";
        }
    }
    throw Error(Errc::TranslationExhausted,
                "no parseable query after " + std::to_string(1 + kTranslateRetries) + " attempts: " + last_error);
}

} // namespace acewgs
