#pragma once

#include "acewgs/corpus_store.hpp"
#include "acewgs/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace acewgs {

struct IndexedEntry {
    Chunk chunk;
    std::vector<float> vector;
    /// L2 norm of `vector`, accumulated in double.
    double norm = 0.0;
};

struct SearchHit {
    Chunk chunk;
    double similarity = 0.0;
};

inline double l2_norm(std::span<const float> v) {
    double sum = 0.0;
    for (float x : v) {
        sum += static_cast<double>(x) * static_cast<double>(x);
    }
    return std::sqrt(sum);
}

/// Similarity ordering: descending score, then (ref_id, seq) ascending.
inline bool hit_before(const SearchHit& a, const SearchHit& b) {
    if (a.similarity != b.similarity) {
        return a.similarity > b.similarity;
    }
    if (a.chunk.ref_id != b.chunk.ref_id) {
        return a.chunk.ref_id < b.chunk.ref_id;
    }
    return a.chunk.seq < b.chunk.seq;
}

inline std::vector<float> to_float(std::span<const double> v) {
    return std::vector<float>(v.begin(), v.end());
}

/// Exact full-scan cosine index. Readers share, add/replace/save/load
/// take the writer lock.
class VectorIndex {
public:
    static constexpr std::uint32_t kVersion = 1;
    static constexpr char kMagic[4] = {'A', 'W', 'V', 'X'};

    VectorIndex() = default;
    VectorIndex(const VectorIndex& other) {
        std::shared_lock lock(other.mutex_);
        dimension_ = other.dimension_;
        entries_ = other.entries_;
    }
    VectorIndex& operator=(const VectorIndex&) = delete;

    /// Replaces all contents under the writer lock.
    void assign(const VectorIndex& other) {
        if (&other == this) {
            return;
        }
        std::scoped_lock lock(mutex_, other.mutex_);
        dimension_ = other.dimension_;
        entries_ = other.entries_;
    }

    std::size_t dimension() const {
        std::shared_lock lock(mutex_);
        return dimension_;
    }

    std::size_t size() const {
        std::shared_lock lock(mutex_);
        return entries_.size();
    }

    std::size_t count_for(std::string_view ref_id) const {
        std::shared_lock lock(mutex_);
        return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(),
                                                      [&](const IndexedEntry& e) { return e.chunk.ref_id == ref_id; }));
    }

    /// Copy of all entries in insertion order.
    std::vector<IndexedEntry> entries() const {
        std::shared_lock lock(mutex_);
        return entries_;
    }

    void add(Chunk chunk, std::span<const float> vector) {
        auto entry = make_entry(std::move(chunk), vector);
        std::unique_lock lock(mutex_);
        check_dimension_locked(entry.vector.size());
        if (dimension_ == 0) {
            dimension_ = entry.vector.size();
        }
        entries_.push_back(std::move(entry));
    }

    void add(Chunk chunk, std::span<const double> vector) { add(std::move(chunk), to_float(vector)); }

    /// Drops every entry of `ref_id` and inserts the new ones in one step.
    /// Validation happens before anything is removed.
    void replace_article(std::string_view ref_id, std::vector<std::pair<Chunk, std::vector<float>>> items) {
        std::vector<IndexedEntry> fresh;
        fresh.reserve(items.size());
        for (auto& [chunk, vec] : items) {
            if (chunk.ref_id != ref_id) {
                throw Error(Errc::InvalidParams, "chunk of " + chunk.ref_id + " passed for " + std::string(ref_id));
            }
            fresh.push_back(make_entry(std::move(chunk), vec));
        }
        std::unique_lock lock(mutex_);
        std::size_t dim = dimension_;
        for (const auto& e : fresh) {
            if (dim == 0) {
                dim = e.vector.size();
            } else if (e.vector.size() != dim) {
                throw Error(Errc::DimensionMismatch, "vector of dimension " + std::to_string(e.vector.size()) +
                                                         " for index of dimension " + std::to_string(dim));
            }
        }
        std::erase_if(entries_, [&](const IndexedEntry& e) { return e.chunk.ref_id == ref_id; });
        dimension_ = dim;
        for (auto& e : fresh) {
            entries_.push_back(std::move(e));
        }
    }

    /// Top `k` by cosine similarity over entries passing the filter.
    std::vector<SearchHit> search(std::span<const float> query, std::size_t k,
                                  std::optional<std::string_view> ref_filter = std::nullopt) const {
        if (k == 0) {
            throw Error(Errc::InvalidParams, "k must be at least 1");
        }
        const double qnorm = l2_norm(query);
        if (!(qnorm > 0.0) || !std::isfinite(qnorm)) {
            throw Error(Errc::ZeroVector, "query vector has zero or non-finite norm");
        }
        std::shared_lock lock(mutex_);
        if (dimension_ != 0 && query.size() != dimension_) {
            throw Error(Errc::DimensionMismatch, "query dimension " + std::to_string(query.size()) +
                                                     " differs from index dimension " + std::to_string(dimension_));
        }
        std::vector<SearchHit> hits;
        for (const auto& e : entries_) {
            if (ref_filter && e.chunk.ref_id != *ref_filter) {
                continue;
            }
            double dot = 0.0;
            for (std::size_t i = 0; i < query.size(); ++i) {
                dot += static_cast<double>(query[i]) * static_cast<double>(e.vector[i]);
            }
            hits.push_back({e.chunk, dot / (qnorm * e.norm)});
        }
        if (hits.empty()) {
            throw Error(Errc::EmptyIndex, ref_filter ? "no entries for " + std::string(*ref_filter) : "index is empty");
        }
        const std::size_t n = std::min(k, hits.size());
        std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(), hit_before);
        hits.resize(n);
        return hits;
    }

    std::vector<SearchHit> search(std::span<const double> query, std::size_t k,
                                  std::optional<std::string_view> ref_filter = std::nullopt) const {
        return search(std::span<const float>(to_float(query)), k, ref_filter);
    }

    // -- persistence --------------------------------------------------------
    //
    // "AWVX" | u32 version | u32 dimension | u64 count | entries...
    // entry: f32[dimension] | u32 len + ref_id | u32 seq | u64 char_start |
    //        u64 char_end | u32 len + text            (all little-endian)

    void save(const std::filesystem::path& path) const {
        std::string buf;
        {
            std::shared_lock lock(mutex_);
            buf.append(kMagic, 4);
            put<std::uint32_t>(buf, kVersion);
            put<std::uint32_t>(buf, static_cast<std::uint32_t>(dimension_));
            put<std::uint64_t>(buf, entries_.size());
            for (const auto& e : entries_) {
                for (float f : e.vector) {
                    put<std::uint32_t>(buf, std::bit_cast<std::uint32_t>(f));
                }
                put_string(buf, e.chunk.ref_id);
                put<std::uint32_t>(buf, e.chunk.seq);
                put<std::uint64_t>(buf, e.chunk.char_start);
                put<std::uint64_t>(buf, e.chunk.char_end);
                put_string(buf, e.chunk.text);
            }
        }
        auto tmp = path;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) {
                throw Error(Errc::IoError, "cannot write " + tmp.string());
            }
            out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
            if (!out) {
                throw Error(Errc::IoError, "short write to " + tmp.string());
            }
        }
        std::filesystem::rename(tmp, path);
    }

    static VectorIndex load(const std::filesystem::path& path) {
        return from_bytes(read_file(path));
    }

    static VectorIndex from_bytes(std::string_view bytes) {
        Reader in{bytes};
        if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
            throw Error(Errc::FormatError, "bad magic, not an index file");
        }
        in.at = 4;
        if (auto version = in.get<std::uint32_t>(); version != kVersion) {
            throw Error(Errc::FormatError, "unsupported index version " + std::to_string(version));
        }
        VectorIndex idx;
        idx.dimension_ = in.get<std::uint32_t>();
        const auto count = in.get<std::uint64_t>();
        if (count > 0 && idx.dimension_ == 0) {
            throw Error(Errc::FormatError, "entries present but dimension is 0");
        }
        for (std::uint64_t n = 0; n < count; ++n) {
            IndexedEntry e;
            e.vector.resize(idx.dimension_);
            for (auto& f : e.vector) {
                f = std::bit_cast<float>(in.get<std::uint32_t>());
            }
            e.chunk.ref_id = in.get_string();
            e.chunk.seq = in.get<std::uint32_t>();
            e.chunk.char_start = in.get<std::uint64_t>();
            e.chunk.char_end = in.get<std::uint64_t>();
            e.chunk.text = in.get_string();
            e.norm = l2_norm(e.vector);
            if (!(e.norm > 0.0) || !std::isfinite(e.norm)) {
                throw Error(Errc::FormatError, "stored vector with zero or non-finite norm");
            }
            idx.entries_.push_back(std::move(e));
        }
        if (in.at != bytes.size()) {
            throw Error(Errc::FormatError, "trailing bytes after last entry");
        }
        return idx;
    }

private:
    static IndexedEntry make_entry(Chunk chunk, std::span<const float> vector) {
        if (vector.empty()) {
            throw Error(Errc::DimensionMismatch, "empty vector");
        }
        IndexedEntry e{std::move(chunk), std::vector<float>(vector.begin(), vector.end()), 0.0};
        e.norm = l2_norm(e.vector);
        if (!std::isfinite(e.norm)) {
            throw Error(Errc::InvalidParams, "vector has non-finite entries");
        }
        if (!(e.norm > 0.0)) {
            throw Error(Errc::ZeroVector, "cannot index a zero vector");
        }
        return e;
    }

    void check_dimension_locked(std::size_t dim) const {
        if (dimension_ != 0 && dim != dimension_) {
            throw Error(Errc::DimensionMismatch, "vector of dimension " + std::to_string(dim) +
                                                     " for index of dimension " + std::to_string(dimension_));
        }
    }

    template <typename T>
    static void put(std::string& buf, T value) {
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            buf.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
        }
    }

    static void put_string(std::string& buf, std::string_view s) {
        put<std::uint32_t>(buf, static_cast<std::uint32_t>(s.size()));
        buf.append(s);
    }

    struct Reader {
        std::string_view bytes;
        std::size_t at = 0;

        void need(std::size_t n) const {
            if (bytes.size() - at < n) {
                throw Error(Errc::TruncatedFile, "index file ends early at byte " + std::to_string(at));
            }
        }

        template <typename T>
        T get() {
            need(sizeof(T));
            T value = 0;
            for (std::size_t i = 0; i < sizeof(T); ++i) {
                value |= static_cast<T>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
            }
            at += sizeof(T);
            return value;
        }

        std::string get_string() {
            auto len = get<std::uint32_t>();
            need(len);
            std::string s(bytes.substr(at, len));
            at += len;
            return s;
        }
    };

    mutable std::shared_mutex mutex_;
    std::size_t dimension_ = 0;
    std::vector<IndexedEntry> entries_;
};

} // namespace acewgs
