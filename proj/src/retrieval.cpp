#include "terse/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "jsonl.hpp"
#include "terse/error.hpp"
#include "terse/tokenize.hpp"

namespace terse {

using detail::json;

namespace {
constexpr int index_format_version = 1;
}

std::vector<std::string> bm25_terms(std::string_view text) {
    return tokenize(text, token_scheme::unicode_words, /*lowercase=*/true).tokens;
}

bm25_index bm25_index::build(const corpus& pool, bm25_params params) {
    if (pool.empty()) throw empty_corpus("cannot index an empty pool");
    std::vector<document> docs;
    docs.reserve(pool.size());
    for (const auto& r : pool.records()) {
        auto terms = bm25_terms(r.question);
        std::map<std::string, std::uint32_t> counts;
        for (auto& t : terms) ++counts[std::move(t)];
        document d;
        d.id = r.id;
        d.length = terms.size();
        d.terms.assign(counts.begin(), counts.end());
        docs.push_back(std::move(d));
    }
    return from_documents(std::move(docs), params);
}

bm25_index bm25_index::from_documents(std::vector<document> docs, bm25_params params) {
    if (docs.empty()) throw empty_corpus("cannot index an empty pool");
    if (!(params.k1 > 0) || !(params.b >= 0 && params.b <= 1) || !(params.delta >= 0) ||
        !std::isfinite(params.k1) || !std::isfinite(params.delta)) {
        throw error("invalid BM25+ parameters");
    }
    bm25_index idx;
    idx.params_ = params;
    idx.docs_ = std::move(docs);
    std::size_t total = 0;
    for (std::uint32_t i = 0; i < idx.docs_.size(); ++i) {
        const auto& d = idx.docs_[i];
        total += d.length;
        for (const auto& [term, tf] : d.terms) {
            idx.postings_[term].push_back({i, tf});
        }
    }
    idx.avgdl_ = static_cast<double>(total) / static_cast<double>(idx.docs_.size());
    return idx;
}

std::size_t bm25_index::df(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? 0 : it->second.size();
}

std::vector<scored_doc> bm25_index::top_k(std::string_view query, std::size_t k) const {
    if (k == 0) throw error("k must be at least 1");
    const double n = static_cast<double>(docs_.size());
    std::vector<double> scores(docs_.size(), 0.0);

    auto terms = bm25_terms(query);
    std::set<std::string> distinct(terms.begin(), terms.end());
    for (const auto& t : distinct) {
        auto it = postings_.find(t);
        if (it == postings_.end()) continue;
        const double idf = std::log((n + 1.0) / static_cast<double>(it->second.size()));
        for (const auto& p : it->second) {
            const double tf = p.tf;
            const double norm = avgdl_ > 0 ? static_cast<double>(docs_[p.doc].length) / avgdl_ : 0.0;
            const double sat = tf * (params_.k1 + 1.0) /
                               (tf + params_.k1 * (1.0 - params_.b + params_.b * norm));
            scores[p.doc] += idf * (sat + params_.delta);
        }
    }

    std::vector<std::uint32_t> order(docs_.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    auto better = [&](std::uint32_t a, std::uint32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return docs_[a].id < docs_[b].id;
    };
    const std::size_t take = std::min(k, docs_.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      better);
    std::vector<scored_doc> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        out.push_back({docs_[order[i]].id, scores[order[i]]});
    }
    return out;
}

void bm25_index::save(const std::filesystem::path& path) const {
    json j;
    j["format"] = "terse-bm25plus";
    j["version"] = index_format_version;
    j["params"] = {{"k1", params_.k1}, {"b", params_.b}, {"delta", params_.delta}};
    json docs = json::array();
    for (const auto& d : docs_) {
        json terms = json::array();
        for (const auto& [t, tf] : d.terms) terms.push_back({t, tf});
        docs.push_back({{"id", d.id}, {"length", d.length}, {"terms", std::move(terms)}});
    }
    j["documents"] = std::move(docs);
    auto out = detail::open_output(path);
    out << j.dump() << '\n';
}

bm25_index bm25_index::load(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(detail::slurp(path));
    } catch (const json::exception& e) {
        throw parse_error(1, std::string("index file: ") + e.what());
    }
    try {
        if (j.at("format") != "terse-bm25plus") throw parse_error(1, "not a BM25+ index file");
        if (j.at("version").get<int>() != index_format_version) {
            throw parse_error(1, "unsupported index version " + j.at("version").dump());
        }
        bm25_params p;
        p.k1 = j.at("params").at("k1").get<double>();
        p.b = j.at("params").at("b").get<double>();
        p.delta = j.at("params").at("delta").get<double>();
        std::vector<document> docs;
        for (const auto& d : j.at("documents")) {
            document doc;
            doc.id = d.at("id").get<std::string>();
            doc.length = d.at("length").get<std::size_t>();
            for (const auto& t : d.at("terms")) {
                doc.terms.emplace_back(t.at(0).get<std::string>(), t.at(1).get<std::uint32_t>());
            }
            docs.push_back(std::move(doc));
        }
        return from_documents(std::move(docs), p);
    } catch (const json::exception& e) {
        throw parse_error(1, std::string("index file: ") + e.what());
    }
}

std::size_t median_target_length(const bm25_index& index, const corpus& pool,
                                 std::string_view query, std::size_t k) {
    if (pool.empty()) throw empty_corpus("empty pool");
    auto hits = index.top_k(query, k);
    std::vector<std::size_t> lengths;
    lengths.reserve(hits.size());
    for (const auto& h : hits) {
        const auto* r = pool.find(h.id);
        if (r == nullptr) throw unknown_record_id(h.id);
        lengths.push_back(word_length(*r));
    }
    if (lengths.empty()) throw empty_corpus("no neighbours");
    std::sort(lengths.begin(), lengths.end());
    const std::size_t m = lengths.size();
    std::size_t median = (m % 2 == 1) ? lengths[m / 2]
                                      : (lengths[m / 2 - 1] + lengths[m / 2] + 1) / 2;
    return std::max<std::size_t>(median, 1);
}

}  // namespace terse
