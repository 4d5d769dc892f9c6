#include "terse/corpus.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <unordered_set>

#include "jsonl.hpp"
#include "terse/error.hpp"
#include "terse/tokenize.hpp"

namespace terse {

using detail::json;

std::string_view to_string(split_kind s) {
    switch (s) {
        case split_kind::train: return "train";
        case split_kind::validation: return "validation";
        case split_kind::test: return "test";
    }
    return "test";
}

split_kind parse_split(std::string_view name) {
    if (name == "train") return split_kind::train;
    if (name == "validation" || name == "valid" || name == "dev") return split_kind::validation;
    if (name == "test") return split_kind::test;
    throw error("unknown split: " + std::string(name));
}

corpus::corpus(std::vector<query_record> records, corpus_provenance provenance)
    : records_(std::move(records)), provenance_(std::move(provenance)) {
    by_id_.reserve(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& r = records_[i];
        if (r.id.empty()) throw parse_error(0, "empty id");
        if (!by_id_.emplace(r.id, i).second) throw parse_error(0, "duplicate id " + r.id);
    }
}

const query_record* corpus::find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &records_[it->second];
}

namespace {

std::string required_string(const json& j, const char* key, std::size_t no) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        throw parse_error(no, std::string("missing field \"") + key + "\"");
    }
    if (!it->is_string()) {
        throw parse_error(no, std::string("field \"") + key + "\" must be a string");
    }
    return it->get<std::string>();
}

std::optional<std::string> optional_string(const json& j, const char* key, std::size_t no) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) {
        throw parse_error(no, std::string("field \"") + key + "\" must be a string");
    }
    return it->get<std::string>();
}

}  // namespace

query_record parse_record_line(std::string_view line, std::size_t no,
                               const std::string& dataset_label) {
    json j = detail::parse_json_line(line, no);
    query_record r;
    r.id = required_string(j, "id", no);
    if (r.id.empty()) throw parse_error(no, "empty id");
    auto ds = optional_string(j, "dataset", no);
    if (ds && !ds->empty()) {
        r.dataset = *ds;
    } else if (!dataset_label.empty()) {
        r.dataset = dataset_label;
    } else {
        throw parse_error(no, "missing field \"dataset\" and no dataset label given");
    }
    try {
        r.split = parse_split(required_string(j, "split", no));
    } catch (const parse_error&) {
        throw;
    } catch (const error& e) {
        throw parse_error(no, e.what());
    }
    r.context = optional_string(j, "context", no);
    r.question = required_string(j, "question", no);
    if (r.question.empty()) throw parse_error(no, "empty question");
    r.target_answer = required_string(j, "target_answer", no);
    if (auto it = j.find("extra_answers"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) throw parse_error(no, "\"extra_answers\" must be an array");
        for (const auto& a : *it) {
            if (!a.is_string()) throw parse_error(no, "\"extra_answers\" must hold strings");
            r.extra_answers.push_back(a.get<std::string>());
        }
    }
    if (auto it = j.find("target_length"); it != j.end() && !it->is_null()) {
        if (!it->is_number_unsigned()) {
            throw parse_error(no, "\"target_length\" must be a non-negative integer");
        }
        r.target_length = it->get<std::size_t>();
    }
    return r;
}

std::string serialize_record(const query_record& r) {
    json j = json::object();
    j["id"] = r.id;
    j["dataset"] = r.dataset;
    j["split"] = to_string(r.split);
    if (r.context) j["context"] = *r.context;
    j["question"] = r.question;
    j["target_answer"] = r.target_answer;
    if (!r.extra_answers.empty()) j["extra_answers"] = r.extra_answers;
    if (r.target_length) j["target_length"] = *r.target_length;
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

corpus load_corpus(const std::filesystem::path& path, const std::string& dataset_label) {
    std::vector<query_record> records;
    std::unordered_set<std::string> ids;
    detail::for_each_line(path, [&](std::string_view line, std::size_t no) {
        auto r = parse_record_line(line, no, dataset_label);
        if (!ids.insert(r.id).second) throw parse_error(no, "duplicate id " + r.id);
        records.push_back(std::move(r));
    });
    if (records.empty()) throw empty_corpus("no records in " + path.string());
    return corpus(std::move(records), corpus_provenance{{path.string()}, std::nullopt});
}

void write_corpus(const corpus& c, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    for (const auto& r : c.records()) {
        out << serialize_record(r) << '\n';
    }
}

source_format parse_source_format(std::string_view name) {
    if (name == "canonical") return source_format::canonical;
    if (name == "dolly") return source_format::dolly;
    if (name == "gooaq") return source_format::gooaq;
    if (name == "msmarco") return source_format::msmarco;
    if (name == "narrativeqa") return source_format::narrativeqa;
    if (name == "tweetqa") return source_format::tweetqa;
    throw error("unknown source format: " + std::string(name));
}

namespace {

// Accepts a plain string or an object carrying the string under "text".
std::optional<std::string> text_of(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_object()) {
        auto it = v.find("text");
        if (it != v.end() && it->is_string()) return it->get<std::string>();
    }
    return std::nullopt;
}

std::vector<std::string> answers_of(const json& v) {
    std::vector<std::string> out;
    if (auto t = text_of(v)) {
        out.push_back(*t);
    } else if (v.is_array()) {
        for (const auto& a : v) {
            if (auto t = text_of(a); t && !t->empty()) out.push_back(*t);
        }
    }
    return out;
}

std::string id_of(const json& j, std::size_t no) {
    for (const char* key : {"id", "qid", "query_id", "document_id"}) {
        auto it = j.find(key);
        if (it == j.end()) continue;
        if (it->is_string()) return it->get<std::string>();
        if (it->is_number()) return it->dump();
    }
    return std::to_string(no);
}

query_record adapt(const json& j, source_format fmt, std::size_t no) {
    query_record r;
    r.id = id_of(j, no);
    std::vector<std::string> answers;
    auto field = [&](const char* key) -> const json* {
        auto it = j.find(key);
        return it == j.end() || it->is_null() ? nullptr : &*it;
    };
    auto need = [&](const char* key) -> const json& {
        const json* v = field(key);
        if (v == nullptr) throw parse_error(no, std::string("missing field \"") + key + "\"");
        return *v;
    };
    switch (fmt) {
        case source_format::dolly: {
            r.question = text_of(need("instruction")).value_or("");
            if (const json* c = field("context"); c && c->is_string() && !c->get<std::string>().empty()) {
                r.context = c->get<std::string>();
            }
            answers = answers_of(need("response"));
            break;
        }
        case source_format::gooaq: {
            r.question = text_of(need("question")).value_or("");
            const json* a = field("answer");
            if (a == nullptr || (a->is_string() && a->get<std::string>().empty())) {
                a = field("short_answer");
            }
            if (a == nullptr) throw parse_error(no, "missing field \"answer\"");
            answers = answers_of(*a);
            break;
        }
        case source_format::msmarco: {
            r.question = text_of(need("query")).value_or("");
            answers = answers_of(need("answers"));
            if (const json* p = field("passages")) {
                std::string ctx;
                auto append = [&](const json& passage) {
                    auto t = passage.find("passage_text");
                    if (t == passage.end() || !t->is_string()) return;
                    if (!ctx.empty()) ctx += "\n";
                    ctx += t->get<std::string>();
                };
                if (p->is_array()) {
                    for (const auto& passage : *p) {
                        auto sel = passage.find("is_selected");
                        if (sel != passage.end() && sel->is_number() && sel->get<int>() == 1) {
                            append(passage);
                        }
                    }
                } else if (p->is_object() && p->contains("passage_text") &&
                           p->contains("is_selected")) {
                    // Columnar layout: {"is_selected": [...], "passage_text": [...]}.
                    const auto& sel = (*p)["is_selected"];
                    const auto& txt = (*p)["passage_text"];
                    for (std::size_t i = 0; i < std::min(sel.size(), txt.size()); ++i) {
                        if (sel[i].is_number() && sel[i].get<int>() == 1 && txt[i].is_string()) {
                            if (!ctx.empty()) ctx += "\n";
                            ctx += txt[i].get<std::string>();
                        }
                    }
                }
                if (!ctx.empty()) r.context = ctx;
            }
            break;
        }
        case source_format::narrativeqa: {
            r.question = text_of(need("question")).value_or("");
            answers = answers_of(need("answers"));
            if (const json* d = field("document")) {
                auto s = d->find("summary");
                if (s != d->end()) {
                    if (auto t = text_of(*s)) r.context = *t;
                }
            } else if (const json* s = field("summary")) {
                if (auto t = text_of(*s)) r.context = *t;
            }
            break;
        }
        case source_format::tweetqa: {
            r.question = text_of(need("Question")).value_or("");
            answers = answers_of(need("Answer"));
            if (const json* t = field("Tweet"); t && t->is_string()) r.context = t->get<std::string>();
            break;
        }
        case source_format::canonical:
            break;
    }
    if (r.question.empty()) throw parse_error(no, "empty question");
    if (answers.empty()) throw parse_error(no, "no answer");
    r.target_answer = answers.front();
    r.extra_answers.assign(answers.begin() + 1, answers.end());
    return r;
}

}  // namespace

corpus ingest_source(const std::filesystem::path& path, source_format format,
                     const std::string& dataset_label, split_kind split) {
    if (format == source_format::canonical) {
        return with_target_lengths(load_corpus(path, dataset_label));
    }
    if (dataset_label.empty()) throw error("a dataset label is required for ingest");
    std::vector<query_record> records;
    std::unordered_set<std::string> ids;
    detail::for_each_line(path, [&](std::string_view line, std::size_t no) {
        json j = detail::parse_json_line(line, no);
        auto r = adapt(j, format, no);
        r.dataset = dataset_label;
        r.split = split;
        if (auto s = j.find("split"); s != j.end() && s->is_string()) {
            try {
                r.split = parse_split(s->get<std::string>());
            } catch (const error& e) {
                throw parse_error(no, e.what());
            }
        }
        if (!ids.insert(r.id).second) throw parse_error(no, "duplicate id " + r.id);
        records.push_back(std::move(r));
    });
    if (records.empty()) throw empty_corpus("no records in " + path.string());
    return with_target_lengths(corpus(std::move(records), {{path.string()}, std::nullopt}));
}

std::size_t word_length(const query_record& r) {
    return r.target_length ? *r.target_length
                           : count_tokens(r.target_answer, token_scheme::whitespace);
}

corpus with_target_lengths(const corpus& c) {
    auto records = c.records();
    for (auto& r : records) {
        r.target_length = count_tokens(r.target_answer, token_scheme::whitespace);
    }
    return corpus(std::move(records), c.provenance());
}

namespace {

// Uniform integer in [0, bound) by rejection, independent of the standard
// library's distribution implementation.
std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                (std::numeric_limits<std::uint64_t>::max() % bound);
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

}  // namespace

corpus sample_split(const corpus& c, split_kind split, std::size_t n, std::uint64_t seed,
                    bool strict) {
    std::vector<const query_record*> pool;
    for (const auto& r : c.records()) {
        if (r.split == split) pool.push_back(&r);
    }
    if (n > pool.size()) {
        if (strict) throw insufficient_records(n, pool.size());
        n = pool.size();
    }
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        auto j = i + static_cast<std::size_t>(bounded_draw(rng, pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    std::vector<query_record> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(*pool[i]);
    auto prov = c.provenance();
    prov.seed = seed;
    return corpus(std::move(out), std::move(prov));
}

corpus build_train_pool(const std::vector<corpus>& corpora, std::size_t per_dataset,
                        std::uint64_t seed, bool strict) {
    std::vector<query_record> out;
    corpus_provenance prov;
    prov.seed = seed;
    for (const auto& c : corpora) {
        auto sample = sample_split(c, split_kind::train, per_dataset, seed, strict);
        for (auto r : sample.records()) {
            r.id = r.dataset + "/" + r.id;
            out.push_back(std::move(r));
        }
        const auto& src = c.provenance().sources;
        prov.sources.insert(prov.sources.end(), src.begin(), src.end());
    }
    return corpus(std::move(out), std::move(prov));
}

}  // namespace terse
