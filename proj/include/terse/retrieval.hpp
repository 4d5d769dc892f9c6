#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "terse/corpus.hpp"

namespace terse {

struct bm25_params {
    double k1 = 1.2;
    double b = 0.75;
    double delta = 1.0;

    bool operator==(const bm25_params&) const = default;
};

struct scored_doc {
    std::string id;
    double score = 0.0;

    bool operator==(const scored_doc&) const = default;
};

/// Lowercased unicode_words tokens, the text analysis used for indexing and queries.
std::vector<std::string> bm25_terms(std::string_view text);

/// In-memory BM25+ index over question texts.
///
///   score(q, d) = sum over distinct t in q with tf(t,d) > 0 of
///                 idf(t) * (tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl)) + delta)
///   idf(t)      = ln((N + 1) / df(t))
///
/// Results are ordered by score descending, then record id ascending.
class bm25_index {
  public:
    struct document {
        std::string id;
        std::size_t length = 0;
        /// Term counts, sorted by term.
        std::vector<std::pair<std::string, std::uint32_t>> terms;

        bool operator==(const document&) const = default;
    };

    /// Throws empty_corpus when `pool` is empty.
    static bm25_index build(const corpus& pool, bm25_params params = {});

    /// Rebuilds derived statistics from documents; used by build() and load().
    static bm25_index from_documents(std::vector<document> docs, bm25_params params);

    std::vector<scored_doc> top_k(std::string_view query, std::size_t k) const;

    std::size_t doc_count() const { return docs_.size(); }
    double avgdl() const { return avgdl_; }
    std::size_t df(const std::string& term) const;
    const bm25_params& params() const { return params_; }
    const std::vector<document>& documents() const { return docs_; }

    void save(const std::filesystem::path& path) const;
    static bm25_index load(const std::filesystem::path& path);

    bool operator==(const bm25_index& o) const { return params_ == o.params_ && docs_ == o.docs_; }

  private:
    struct posting {
        std::uint32_t doc;
        std::uint32_t tf;
    };

    bm25_params params_;
    std::vector<document> docs_;
    std::unordered_map<std::string, std::vector<posting>> postings_;
    double avgdl_ = 0.0;
};

/// Median whitespace-word target length of the top-k neighbours of `query`.
/// Even counts average the middle two, rounding half up; the result is at least 1.
std::size_t median_target_length(const bm25_index& index, const corpus& pool,
                                 std::string_view query, std::size_t k = 10);

}  // namespace terse
