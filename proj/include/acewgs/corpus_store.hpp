#pragma once

#include "acewgs/error.hpp"

#include <algorithm>
#include <array>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace acewgs {

/// One row of the article manifest.
struct ArticleMeta {
    std::string ref_id;
    int year = 0;
    std::string title;
    std::string abstract;
    std::string journal;
    std::vector<std::string> authors;
    std::string doi;

    bool operator==(const ArticleMeta&) const = default;
};

inline constexpr std::array<std::string_view, 7> kManifestColumns = {
    "ref_id", "year", "title", "abstract", "journal", "authors", "doi"};

inline bool is_valid_ref_id(std::string_view id) {
    static const std::regex pattern("R[0-9]+");
    return std::regex_match(id.begin(), id.end(), pattern);
}

namespace csv {

/// RFC 4180 records: quoted fields may hold commas, doubled quotes and
/// newlines. Each record remembers the 1-based line it started on.
struct Record {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

inline std::vector<Record> parse(std::string_view text) {
    std::vector<Record> records;
    Record current;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;
    current.line = 1;

    auto end_field = [&] {
        current.fields.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&](std::size_t next_line) {
        end_field();
        bool blank = current.fields.size() == 1 && current.fields[0].empty();
        if (!blank) {
            records.push_back(std::move(current));
        }
        current = Record{};
        current.line = next_line;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') {
                    ++line;
                }
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
        case '"':
            if (field_started || !field.empty()) {
                throw Error(Errc::ParseError, "line " + std::to_string(line) + ": stray quote");
            }
            in_quotes = true;
            field_started = true;
            break;
        case ',':
            end_field();
            break;
        case '\r':
            break;
        case '\n':
            ++line;
            end_record(line);
            break;
        default:
            field.push_back(c);
        }
    }
    if (in_quotes) {
        throw Error(Errc::ParseError, "line " + std::to_string(current.line) + ": unterminated quote");
    }
    if (field_started || !field.empty() || !current.fields.empty()) {
        end_record(line);
    }
    return records;
}

inline std::string quote(std::string_view value) {
    bool needs = value.find_first_of(",\"\n\r") != std::string_view::npos;
    if (!needs) {
        return std::string(value);
    }
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

} // namespace csv

inline std::string trim(std::string_view s) {
    auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) {
            out += sep;
        }
        out += parts[i];
    }
    return out;
}

/// Immutable after construction, so concurrent readers need no locking.
class Manifest {
public:
    Manifest() = default;

    explicit Manifest(std::vector<ArticleMeta> rows) : rows_(std::move(rows)) {
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            auto [it, inserted] = by_id_.emplace(rows_[i].ref_id, i);
            if (!inserted) {
                throw Error(Errc::DuplicateRefId, "duplicate ref_id " + rows_[i].ref_id);
            }
        }
    }

    const std::vector<ArticleMeta>& rows() const noexcept { return rows_; }
    std::size_t size() const noexcept { return rows_.size(); }
    bool empty() const noexcept { return rows_.empty(); }
    bool contains(std::string_view ref_id) const { return by_id_.count(std::string(ref_id)) > 0; }

    const ArticleMeta* find(std::string_view ref_id) const {
        auto it = by_id_.find(std::string(ref_id));
        return it == by_id_.end() ? nullptr : &rows_[it->second];
    }

private:
    std::vector<ArticleMeta> rows_;
    std::map<std::string, std::size_t> by_id_;
};

/// Parses manifest CSV text. Header must be exactly the seven columns.
inline Manifest parse_manifest(std::string_view text) {
    auto records = csv::parse(text);
    if (records.empty()) {
        return Manifest{};
    }
    const auto& header = records.front();
    if (header.fields.size() != kManifestColumns.size()) {
        throw Error(Errc::ParseError, "line 1: expected header " + std::string("ref_id,year,title,abstract,journal,authors,doi"));
    }
    for (std::size_t i = 0; i < kManifestColumns.size(); ++i) {
        if (trim(header.fields[i]) != kManifestColumns[i]) {
            throw Error(Errc::ParseError, "line 1: unexpected column '" + header.fields[i] + "'");
        }
    }

    std::vector<ArticleMeta> rows;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        const std::string where = "line " + std::to_string(rec.line);
        if (rec.fields.size() < kManifestColumns.size()) {
            throw Error(Errc::MissingField, where + ": expected 7 fields, got " + std::to_string(rec.fields.size()));
        }
        if (rec.fields.size() > kManifestColumns.size()) {
            throw Error(Errc::ParseError, where + ": expected 7 fields, got " + std::to_string(rec.fields.size()));
        }
        ArticleMeta meta;
        meta.ref_id = trim(rec.fields[0]);
        if (meta.ref_id.empty()) {
            throw Error(Errc::MissingField, where + ": empty ref_id");
        }
        if (!is_valid_ref_id(meta.ref_id)) {
            throw Error(Errc::ParseError, where + ": ref_id '" + meta.ref_id + "' does not match R<number>");
        }
        std::string year = trim(rec.fields[1]);
        if (year.empty()) {
            throw Error(Errc::MissingField, where + ": empty year");
        }
        try {
            std::size_t used = 0;
            meta.year = std::stoi(year, &used);
            if (used != year.size()) {
                throw std::invalid_argument(year);
            }
        } catch (const std::logic_error&) {
            throw Error(Errc::ParseError, where + ": year '" + year + "' is not an integer");
        }
        if (meta.year < 1900 || meta.year > 2100) {
            throw Error(Errc::ParseError, where + ": year " + year + " outside [1900, 2100]");
        }
        meta.title = trim(rec.fields[2]);
        meta.abstract = trim(rec.fields[3]);
        meta.journal = trim(rec.fields[4]);
        std::stringstream authors(rec.fields[5]);
        for (std::string name; std::getline(authors, name, ';');) {
            if (auto t = trim(name); !t.empty()) {
                meta.authors.push_back(std::move(t));
            }
        }
        meta.doi = trim(rec.fields[6]);
        if (meta.title.empty() || meta.journal.empty()) {
            throw Error(Errc::MissingField, where + ": title and journal are required");
        }
        rows.push_back(std::move(meta));
    }
    return Manifest(std::move(rows));
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::IoError, "cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Manifest load_manifest(const std::filesystem::path& path) {
    return parse_manifest(read_file(path));
}

inline std::string render_manifest(const Manifest& manifest) {
    std::string out = "ref_id,year,title,abstract,journal,authors,doi\n";
    for (const auto& m : manifest.rows()) {
        out += csv::quote(m.ref_id) + ',' + std::to_string(m.year) + ',' + csv::quote(m.title) + ',' +
               csv::quote(m.abstract) + ',' + csv::quote(m.journal) + ',' + csv::quote(join(m.authors, "; ")) +
               ',' + csv::quote(m.doi) + '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Chunking

struct Chunk {
    std::string ref_id;
    std::uint32_t seq = 0;
    std::string text;
    /// Offsets in characters (Unicode code points), half-open.
    std::uint64_t char_start = 0;
    std::uint64_t char_end = 0;

    bool operator==(const Chunk&) const = default;
};

inline constexpr std::size_t kDefaultChunkSize = 1000;
inline constexpr std::size_t kDefaultChunkOverlap = 150;

/// Byte offset of every code point start in `text`, plus text.size() at the
/// end. Malformed bytes count as one character each so no input is rejected.
inline std::vector<std::size_t> code_point_offsets(std::string_view text) {
    std::vector<std::size_t> offsets;
    offsets.reserve(text.size() + 1);
    std::size_t i = 0;
    while (i < text.size()) {
        offsets.push_back(i);
        auto lead = static_cast<unsigned char>(text[i]);
        std::size_t len = 1;
        if (lead >= 0xC2 && lead <= 0xDF) {
            len = 2;
        } else if (lead >= 0xE0 && lead <= 0xEF) {
            len = 3;
        } else if (lead >= 0xF0 && lead <= 0xF4) {
            len = 4;
        }
        if (i + len > text.size()) {
            len = 1;
        }
        for (std::size_t k = 1; k < len; ++k) {
            if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
                len = 1;
                break;
            }
        }
        i += len;
    }
    offsets.push_back(text.size());
    return offsets;
}

inline std::size_t char_length(std::string_view text) {
    return code_point_offsets(text).size() - 1;
}

/// Fixed character windows of `size` starting every `size - overlap`
/// characters. The final window may be shorter. Empty text yields no chunks.
inline std::vector<Chunk> chunk_document(std::string_view text, std::size_t size = kDefaultChunkSize,
                                         std::size_t overlap = kDefaultChunkOverlap, std::string_view ref_id = {}) {
    if (size == 0 || overlap >= size) {
        throw Error(Errc::InvalidParams, "chunk overlap must be smaller than chunk size");
    }
    std::vector<Chunk> chunks;
    if (text.empty()) {
        return chunks;
    }
    const auto offsets = code_point_offsets(text);
    const std::size_t length = offsets.size() - 1;
    const std::size_t step = size - overlap;
    for (std::size_t start = 0;; start += step) {
        std::size_t end = std::min(start + size, length);
        Chunk c;
        c.ref_id = std::string(ref_id);
        c.seq = static_cast<std::uint32_t>(chunks.size());
        c.char_start = start;
        c.char_end = end;
        c.text = std::string(text.substr(offsets[start], offsets[end] - offsets[start]));
        chunks.push_back(std::move(c));
        if (end == length) {
            break;
        }
    }
    return chunks;
}

/// Expected number of chunks for a text of `length` characters.
constexpr std::size_t expected_chunk_count(std::size_t length, std::size_t size = kDefaultChunkSize,
                                           std::size_t overlap = kDefaultChunkOverlap) {
    if (length == 0) {
        return 0;
    }
    if (length <= size) {
        return 1;
    }
    const std::size_t step = size - overlap;
    return (length - overlap + step - 1) / step;
}

// ---------------------------------------------------------------------------
// Corpus on disk: <dir>/manifest.csv plus <dir>/corpus/<ref_id>.txt

struct LayoutReport {
    std::size_t articles = 0;
    std::size_t texts_found = 0;
    std::vector<std::string> missing_texts;
    std::vector<std::string> orphan_texts;

    bool ok() const { return missing_texts.empty(); }
};

class Corpus {
public:
    Corpus() = default;

    explicit Corpus(std::filesystem::path root)
        : root_(std::move(root)), manifest_(load_manifest(root_ / "manifest.csv")) {}

    Corpus(std::filesystem::path root, Manifest manifest) : root_(std::move(root)), manifest_(std::move(manifest)) {}

    const Manifest& manifest() const noexcept { return manifest_; }
    const std::filesystem::path& root() const noexcept { return root_; }

    std::filesystem::path text_path(std::string_view ref_id) const {
        return root_ / "corpus" / (std::string(ref_id) + ".txt");
    }

    bool has_text(std::string_view ref_id) const { return std::filesystem::is_regular_file(text_path(ref_id)); }

    std::string load_text(std::string_view ref_id) const {
        auto path = text_path(ref_id);
        if (!std::filesystem::is_regular_file(path)) {
            throw Error(Errc::MissingText, "no text for " + std::string(ref_id) + " at " + path.string());
        }
        return read_file(path);
    }

    /// Checks that every manifest row has a text file and lists stray files.
    LayoutReport validate_layout() const {
        LayoutReport report;
        report.articles = manifest_.size();
        for (const auto& row : manifest_.rows()) {
            if (has_text(row.ref_id)) {
                ++report.texts_found;
            } else {
                report.missing_texts.push_back(row.ref_id);
            }
        }
        auto dir = root_ / "corpus";
        if (std::filesystem::is_directory(dir)) {
            for (const auto& entry : std::filesystem::directory_iterator(dir)) {
                if (entry.path().extension() == ".txt" && !manifest_.contains(entry.path().stem().string())) {
                    report.orphan_texts.push_back(entry.path().filename().string());
                }
            }
            std::sort(report.orphan_texts.begin(), report.orphan_texts.end());
        }
        return report;
    }

private:
    std::filesystem::path root_;
    Manifest manifest_;
};

} // namespace acewgs
