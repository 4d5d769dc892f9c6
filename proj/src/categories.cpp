#include "terse/categories.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "jsonl.hpp"
#include "terse/error.hpp"
#include "terse/tokenize.hpp"

namespace terse {

using detail::json;

std::string_view to_string(category c) {
    switch (c) {
        case category::minans: return "MINANS";
        case category::addinfo: return "ADDINFO";
        case category::explain: return "EXPLAIN";
        case category::converse: return "CONVERSE";
        case category::redinfo: return "REDINFO";
        case category::irrel: return "IRREL";
    }
    return "MINANS";
}

std::optional<category> try_parse_category(std::string_view name) {
    std::string n(name);
    std::transform(n.begin(), n.end(), n.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
    for (auto c : all_categories) {
        if (n == to_string(c)) return c;
    }
    return std::nullopt;
}

category parse_category(std::string_view name) {
    if (auto c = try_parse_category(name)) return *c;
    throw error("unknown category: " + std::string(name));
}

group_by parse_group_by(std::string_view name) {
    if (name == "overall") return group_by::overall;
    if (name == "model") return group_by::model;
    if (name == "dataset") return group_by::dataset;
    throw error("unknown grouping: " + std::string(name));
}

void validate_spans(const std::vector<category_span>& spans, std::size_t n_tokens) {
    std::vector<const category_span*> sorted;
    for (const auto& s : spans) {
        if (s.start >= s.end || s.end > n_tokens) {
            throw span_out_of_range("span [" + std::to_string(s.start) + ", " + std::to_string(s.end) +
                                    ") invalid for " + std::to_string(n_tokens) + " tokens");
        }
        sorted.push_back(&s);
    }
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->start < b->start; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i]->start < sorted[i - 1]->end) {
            throw error("overlapping spans at token " + std::to_string(sorted[i]->start));
        }
    }
}

std::vector<std::optional<category>> token_labels(const std::vector<category_span>& spans,
                                                  std::size_t n_tokens) {
    validate_spans(spans, n_tokens);
    std::vector<std::optional<category>> labels(n_tokens);
    for (const auto& s : spans) {
        for (std::size_t t = s.start; t < s.end; ++t) labels[t] = s.label;
    }
    return labels;
}

std::optional<std::pair<std::size_t, std::size_t>> char_to_token_span(std::string_view text,
                                                                       std::size_t cp_begin,
                                                                       std::size_t cp_end) {
    auto toks = tokenize_located(text, token_scheme::unicode_words);
    std::optional<std::size_t> first;
    std::size_t last = 0;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (toks[i].cp_end > cp_begin && toks[i].cp_begin < cp_end) {
            if (!first) first = i;
            last = i + 1;
        }
    }
    if (!first) return std::nullopt;
    return std::make_pair(*first, last);
}

std::map<std::string, category_distribution> distribution(const std::vector<annotated_response>& annotations,
                                                          group_by by) {
    std::map<std::string, std::map<category, std::size_t>> counts;
    for (const auto& a : annotations) {
        std::string key = by == group_by::overall ? "all"
                          : by == group_by::model ? a.model
                                                  : (a.dataset.empty() ? "unknown" : a.dataset);
        auto& bucket = counts[key];
        for (const auto& s : a.spans) bucket[s.label] += s.end - s.start;
    }
    std::map<std::string, category_distribution> out;
    for (const auto& [key, bucket] : counts) {
        std::size_t total = 0;
        for (const auto& [c, n] : bucket) total += n;
        if (total == 0) continue;
        auto& d = out[key];
        for (const auto& [c, n] : bucket) {
            if (n > 0) d[c] = static_cast<double>(n) / static_cast<double>(total);
        }
    }
    return out;
}

namespace {

struct label_counts {
    std::map<category, std::size_t> tp, ref, pred;

    void add(const std::vector<std::optional<category>>& reference,
             const std::vector<std::optional<category>>& prediction) {
        for (std::size_t t = 0; t < reference.size(); ++t) {
            if (reference[t]) ++ref[*reference[t]];
            if (prediction[t]) ++pred[*prediction[t]];
            if (reference[t] && prediction[t] && *reference[t] == *prediction[t]) ++tp[*reference[t]];
        }
    }

    category_f1 finish() const {
        category_f1 out;
        double sum = 0.0;
        std::size_t present = 0;
        for (auto c : all_categories) {
            auto get = [c](const std::map<category, std::size_t>& m) {
                auto it = m.find(c);
                return it == m.end() ? std::size_t{0} : it->second;
            };
            const auto r = get(ref);
            const auto p = get(pred);
            if (r == 0 && p == 0) continue;
            const auto hit = static_cast<double>(get(tp));
            // 2PR/(P+R) written on counts: 2·tp / (|ref| + |pred|).
            const double f = 2.0 * hit / static_cast<double>(r + p);
            out.per_category[c] = f;
            sum += f;
            ++present;
        }
        out.macro = present == 0 ? 1.0 : sum / static_cast<double>(present);
        return out;
    }
};

}  // namespace

category_f1 token_f1(const std::vector<category_span>& pred, const std::vector<category_span>& gold,
                     std::size_t n_tokens) {
    label_counts counts;
    counts.add(token_labels(gold, n_tokens), token_labels(pred, n_tokens));
    return counts.finish();
}

category_f1 pairwise_f(const std::vector<annotated_response>& a, const std::vector<annotated_response>& b) {
    using key = std::pair<std::string, std::string>;
    std::map<key, const annotated_response*> right;
    for (const auto& r : b) {
        if (!right.emplace(key{r.id, r.model}, &r).second) {
            throw mismatched_coverage("duplicate annotation for " + r.id + "/" + r.model);
        }
    }
    if (right.size() != a.size()) throw mismatched_coverage("annotators cover different responses");
    label_counts counts;
    std::set<key> seen;
    for (const auto& l : a) {
        auto it = right.find(key{l.id, l.model});
        if (it == right.end() || !seen.insert(it->first).second) {
            throw mismatched_coverage("response " + l.id + "/" + l.model + " not covered by both annotators");
        }
        if (it->second->response_text != l.response_text) {
            throw mismatched_coverage("response text differs for " + l.id + "/" + l.model);
        }
        const auto n = count_tokens(l.response_text, token_scheme::unicode_words);
        counts.add(token_labels(l.spans, n), token_labels(it->second->spans, n));
    }
    return counts.finish();
}

std::vector<annotated_response> load_annotations(const std::filesystem::path& path) {
    std::vector<annotated_response> out;
    detail::for_each_line(path, [&](std::string_view line, std::size_t no) {
        json j = detail::parse_json_line(line, no);
        try {
            annotated_response a;
            a.id = j.at("id").get<std::string>();
            a.model = j.at("model").get<std::string>();
            a.dataset = j.value("dataset", "");
            a.response_text = j.at("response_text").get<std::string>();
            for (const auto& s : j.at("spans")) {
                category_span span;
                span.label = parse_category(s.at("category").get<std::string>());
                if (s.contains("start")) {
                    span.start = s.at("start").get<std::size_t>();
                    span.end = s.at("end").get<std::size_t>();
                } else {
                    auto tok = char_to_token_span(a.response_text, s.at("char_start").get<std::size_t>(),
                                                  s.at("char_end").get<std::size_t>());
                    if (!tok) continue;  // span covers whitespace only
                    span.start = tok->first;
                    span.end = tok->second;
                }
                a.spans.push_back(span);
            }
            std::sort(a.spans.begin(), a.spans.end(),
                      [](const category_span& x, const category_span& y) { return x.start < y.start; });
            validate_spans(a.spans, count_tokens(a.response_text, token_scheme::unicode_words));
            out.push_back(std::move(a));
        } catch (const json::exception& e) {
            throw parse_error(no, e.what());
        } catch (const parse_error&) {
            throw;
        } catch (const error& e) {
            throw parse_error(no, e.what());
        }
    });
    return out;
}

void write_annotations(const std::vector<annotated_response>& annotations, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    for (const auto& a : annotations) {
        json spans = json::array();
        for (const auto& s : a.spans) {
            spans.push_back({{"start", s.start}, {"end", s.end}, {"category", to_string(s.label)}});
        }
        json j = {{"id", a.id}, {"model", a.model}, {"response_text", a.response_text}, {"spans", spans}};
        if (!a.dataset.empty()) j["dataset"] = a.dataset;
        out << j.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    }
}

const std::string_view autocat_prompt_template =
    R"(You will label the information in an assistant's answer to a user question.

Every part of the answer belongs to exactly one of these categories:
MINANS: the shortest part that directly answers the question, correct or not.
ADDINFO: helpful facts or context beyond the direct answer.
EXPLAIN: reasoning steps or a description of how the answer was reached.
CONVERSE: politeness, greetings, offers of further help and other conversational filler.
REDINFO: restatements, summaries or repetitions of something the answer already said.
IRREL: text unrelated to the question, including hallucinated tangents and repeated token loops.

Split the answer into consecutive fragments, copying each fragment verbatim from the answer,
and assign one category to each fragment. Reply with a JSON array only, in this form:
[{"text": "<verbatim fragment>", "category": "<CATEGORY>"}]

### Question:
{question}

### Answer:
{response}
)";

std::string render_autocat_prompt(std::string_view question, std::string_view response) {
    std::string out(autocat_prompt_template);
    auto replace = [&out](std::string_view key, std::string_view value) {
        auto pos = out.find(key);
        if (pos != std::string::npos) out.replace(pos, key.size(), value);
    };
    replace("{question}", question);
    replace("{response}", response);
    return out;
}

namespace {

json recover_fragments(std::string_view reply) {
    auto try_parse = [](std::string_view s) -> std::optional<json> {
        json j = json::parse(s, nullptr, false);
        if (j.is_discarded()) return std::nullopt;
        if (j.is_object() && j.contains("fragments")) j = j["fragments"];
        if (!j.is_array()) return std::nullopt;
        return j;
    };
    if (auto j = try_parse(reply)) return *j;
    if (auto fence = reply.find("```"); fence != std::string_view::npos) {
        auto body = reply.find('\n', fence);
        auto close = body == std::string_view::npos ? body : reply.find("```", body);
        if (close != std::string_view::npos) {
            if (auto j = try_parse(reply.substr(body + 1, close - body - 1))) return *j;
        }
    }
    for (auto [open, close] : {std::pair{'[', ']'}, std::pair{'{', '}'}}) {
        auto b = reply.find(open);
        auto e = reply.rfind(close);
        if (b != std::string_view::npos && e != std::string_view::npos && e > b) {
            if (auto j = try_parse(reply.substr(b, e - b + 1))) return *j;
        }
    }
    throw malformed_model_output("no JSON fragment list in model reply");
}

}  // namespace

auto_categorization align_fragments(std::string_view model_reply, std::string_view response_text) {
    const auto fragments = recover_fragments(model_reply);
    const auto tokens = tokenize(response_text, token_scheme::unicode_words).tokens;
    std::vector<char> used(tokens.size(), 0);
    auto_categorization out;
    for (const auto& f : fragments) {
        if (!f.is_object() || !f.contains("text") || !f["text"].is_string() || !f.contains("category") ||
            !f["category"].is_string()) {
            ++out.dropped_fragments;
            continue;
        }
        auto label = try_parse_category(f["category"].get<std::string>());
        auto frag = tokenize(f["text"].get<std::string>(), token_scheme::unicode_words).tokens;
        if (!label || frag.empty() || frag.size() > tokens.size()) {
            ++out.dropped_fragments;
            continue;
        }
        std::optional<std::size_t> at;
        for (std::size_t p = 0; p + frag.size() <= tokens.size() && !at; ++p) {
            bool ok = true;
            for (std::size_t k = 0; k < frag.size() && ok; ++k) {
                ok = used[p + k] == 0 && tokens[p + k] == frag[k];
            }
            if (ok) at = p;
        }
        if (!at) {
            ++out.dropped_fragments;
            continue;
        }
        for (std::size_t k = 0; k < frag.size(); ++k) used[*at + k] = 1;
        out.spans.push_back({*at, *at + frag.size(), *label});
    }
    std::sort(out.spans.begin(), out.spans.end(),
              [](const category_span& a, const category_span& b) { return a.start < b.start; });
    return out;
}

auto_categorization auto_categorize(const completion_fn& complete, std::string_view response_text,
                                    std::string_view question) {
    return align_fragments(complete(render_autocat_prompt(question, response_text)), response_text);
}

}  // namespace terse
