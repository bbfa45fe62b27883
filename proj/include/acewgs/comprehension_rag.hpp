#pragma once

#include "acewgs/corpus_store.hpp"
#include "acewgs/error.hpp"
#include "acewgs/llm_gateway.hpp"
#include "acewgs/metadata_query.hpp"
#include "acewgs/vector_index.hpp"

#include <spdlog/spdlog.h>

#include <filesystem>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace acewgs {

inline constexpr std::size_t kDefaultRetrievalK = 4;

inline constexpr std::string_view kDefaultComprehendPrompt =
    R"(Answer only from the provided article excerpts; say 'not found in the article' otherwise.

Article: {ref_id}

Excerpts:
{excerpts}

Question: {question}
Answer:)";

struct ComprehensionRequest {
    std::string ref_id;
    std::string question;
    std::size_t k = kDefaultRetrievalK;
};

struct SourceSpan {
    std::uint32_t seq = 0;
    std::uint64_t char_start = 0;
    std::uint64_t char_end = 0;
    double similarity = 0.0;
};

struct ComprehensionAnswer {
    std::string text;
    std::vector<SourceSpan> sources;
    std::string model_name;
    /// Prompt sent to the model, kept for auditing what context was used.
    std::string prompt;
};

/// Numbered excerpt block: "[1] (chars a-b)\n<text>" separated by blank lines.
inline std::string format_excerpts(const std::vector<SearchHit>& hits) {
    std::string out;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        if (i) {
            out += "\n\n";
        }
        out += "[" + std::to_string(i + 1) + "] (chars " + std::to_string(hits[i].chunk.char_start) + "-" +
               std::to_string(hits[i].chunk.char_end) + ")\n" + hits[i].chunk.text;
    }
    return out;
}

inline std::string build_comprehend_prompt(std::string_view tmpl, std::string_view ref_id, std::string_view question,
                                           const std::vector<SearchHit>& hits) {
    // Excerpts go in last so their text is never scanned for placeholders.
    auto out = fill_placeholder(tmpl, "ref_id", ref_id);
    out = fill_placeholder(out, "question", question);
    return fill_placeholder(out, "excerpts", format_excerpts(hits));
}

/// Per-article retrieval plus generation. Holds which articles have been
/// indexed so an article with no text can be told apart from one never
/// ingested.
class ComprehensionEngine {
public:
    ComprehensionEngine(VectorIndex& index, const LlmClient& llm,
                        std::string prompt_template = std::string(kDefaultComprehendPrompt))
        : index_(index), llm_(llm), template_(std::move(prompt_template)) {}

    VectorIndex& index() noexcept { return index_; }
    const LlmClient& llm() const noexcept { return llm_; }

    bool is_indexed(std::string_view ref_id) const {
        {
            std::lock_guard lock(mutex_);
            if (empty_articles_.count(std::string(ref_id))) {
                return true;
            }
        }
        return index_.count_for(ref_id) > 0;
    }

    /// Chunks, embeds and stores one article, replacing earlier entries.
    std::size_t index_article(const Corpus& corpus, std::string_view ref_id) {
        const auto text = corpus.load_text(ref_id);
        const auto chunks = chunk_document(text, kDefaultChunkSize, kDefaultChunkOverlap, ref_id);
        if (chunks.empty()) {
            spdlog::warn("article {} has empty text; nothing indexed", ref_id);
        }
        std::vector<std::pair<Chunk, std::vector<float>>> items;
        items.reserve(chunks.size());
        for (const auto& c : chunks) {
            items.emplace_back(c, to_float(llm_.embed(c.text).values));
        }
        index_.replace_article(ref_id, std::move(items));
        std::lock_guard lock(mutex_);
        if (chunks.empty()) {
            empty_articles_.insert(std::string(ref_id));
        } else {
            empty_articles_.erase(std::string(ref_id));
        }
        return chunks.size();
    }

    /// Indexes every manifest article that has a text file.
    std::size_t index_corpus(const Corpus& corpus) {
        std::size_t total = 0;
        for (const auto& row : corpus.manifest().rows()) {
            if (corpus.has_text(row.ref_id)) {
                total += index_article(corpus, row.ref_id);
            }
        }
        return total;
    }

    ComprehensionAnswer answer(const ComprehensionRequest& req) const {
        if (trim(req.question).empty()) {
            throw Error(Errc::EmptyPrompt, "question must not be empty");
        }
        if (req.k == 0) {
            throw Error(Errc::InvalidParams, "k must be at least 1");
        }
        {
            std::lock_guard lock(mutex_);
            if (empty_articles_.count(req.ref_id)) {
                throw Error(Errc::EmptyRetrieval, "article " + req.ref_id + " has no text chunks");
            }
        }
        if (index_.count_for(req.ref_id) == 0) {
            throw Error(Errc::ArticleNotIndexed, "article " + req.ref_id + " is not indexed");
        }
        const auto query = to_float(llm_.embed(req.question).values);
        const auto hits = index_.search(std::span<const float>(query), req.k, req.ref_id);

        ComprehensionAnswer out;
        out.prompt = build_comprehend_prompt(template_, req.ref_id, req.question, hits);
        auto gen = llm_.generate(out.prompt);
        out.text = std::move(gen.text);
        out.model_name = std::move(gen.model_name);
        for (const auto& h : hits) {
            out.sources.push_back({h.chunk.seq, h.chunk.char_start, h.chunk.char_end, h.similarity});
        }
        return out;
    }

private:
    VectorIndex& index_;
    const LlmClient& llm_;
    std::string template_;
    mutable std::mutex mutex_;
    std::set<std::string> empty_articles_;
};

} // namespace acewgs
