#include "terse/metrics.hpp"

#include <algorithm>

#include "jsonl.hpp"
#include "terse/error.hpp"

namespace terse {

using detail::json;

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
    if (a.empty() || b.empty()) return 0;
    if (b.size() > a.size()) std::swap(a, b);
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

rouge_score rouge_l_tokens(std::span<const std::string> candidate, std::span<const std::string> reference) {
    rouge_score s;
    const auto l = static_cast<double>(lcs_length(candidate, reference));
    if (!candidate.empty()) s.precision = l / static_cast<double>(candidate.size());
    if (!reference.empty()) s.recall = l / static_cast<double>(reference.size());
    if (s.precision + s.recall > 0) {
        s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    }
    return s;
}

rouge_score rouge_l(std::string_view candidate, std::string_view reference) {
    auto c = tokenize(candidate, token_scheme::unicode_words, true);
    auto r = tokenize(reference, token_scheme::unicode_words, true);
    return rouge_l_tokens(c.tokens, r.tokens);
}

std::optional<double> length_ratio(double generated, double target) {
    if (!(target > 0)) return std::nullopt;
    return generated / target;
}

double reasoning_fraction(std::string_view text, std::string_view open_delim,
                          std::string_view close_delim, token_scheme scheme) {
    if (open_delim.empty() || close_delim.empty() || open_delim == close_delim) {
        throw error("reasoning delimiters must be non-empty and distinct");
    }
    std::size_t inside = 0;
    std::size_t total = 0;
    bool in_span = false;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        // Next delimiter of either kind; the one that starts first wins.
        const auto o = text.find(open_delim, pos);
        const auto c = text.find(close_delim, pos);
        const auto next = std::min(o, c);
        const auto segment = text.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
        const auto n = count_tokens(segment, scheme);
        total += n;
        if (in_span) inside += n;
        if (next == std::string_view::npos) break;
        if (next == o && (c == std::string_view::npos || o <= c) &&
            !(o == c && close_delim.size() > open_delim.size())) {
            in_span = true;
            pos = o + open_delim.size();
        } else {
            in_span = false;
            pos = c + close_delim.size();
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(inside) / static_cast<double>(total);
}

scored_run score_run(const std::vector<generation_record>& run, const corpus& data,
                     const std::map<std::string, double>* energy, const score_options& options) {
    scored_run out;
    out.cards.reserve(run.size());
    for (const auto& g : run) {
        const auto* rec = data.find(g.id);
        if (rec == nullptr) throw unknown_record_id(g.id);
        score_card c;
        c.id = g.id;
        c.model = g.model;
        c.dataset = rec->dataset;
        c.strategy = g.strategy;
        if (!g.ok()) {
            c.error = *g.error;
            ++out.excluded;
            out.cards.push_back(std::move(c));
            continue;
        }
        c.rouge = rouge_l(g.response_text, rec->target_answer);
        c.generated_length = count_tokens(g.response_text, options.scheme);
        c.target_length = count_tokens(rec->target_answer, options.scheme);
        c.length_ratio = length_ratio(static_cast<double>(c.generated_length),
                                      static_cast<double>(c.target_length));
        if (energy != nullptr) {
            if (auto it = energy->find(g.id); it != energy->end()) c.energy_mwh = it->second;
        }
        if (g.response_text.find(options.open_delim) != std::string::npos) {
            c.reasoning_fraction = reasoning_fraction(g.response_text, options.open_delim,
                                                      options.close_delim, options.scheme);
        }
        out.cards.push_back(std::move(c));
    }
    return out;
}

std::string serialize_score_card(const score_card& c) {
    json j = {{"id", c.id}, {"model", c.model}, {"dataset", c.dataset}, {"strategy", c.strategy}};
    if (c.error) {
        j["error"] = *c.error;
    } else {
        j["rouge_l"] = {{"precision", c.rouge.precision}, {"recall", c.rouge.recall}, {"f1", c.rouge.f1}};
        j["generated_length"] = c.generated_length;
        j["target_length"] = c.target_length;
        j["length_ratio"] = c.length_ratio ? json(*c.length_ratio) : json(nullptr);
        if (c.energy_mwh) j["energy_mwh"] = *c.energy_mwh;
        if (c.reasoning_fraction) j["reasoning_fraction"] = *c.reasoning_fraction;
    }
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

score_card parse_score_card(std::string_view line, std::size_t no) {
    json j = detail::parse_json_line(line, no);
    try {
        score_card c;
        c.id = j.at("id").get<std::string>();
        c.model = j.value("model", "");
        c.dataset = j.value("dataset", "");
        c.strategy = j.value("strategy", "");
        if (j.contains("error")) {
            c.error = j["error"].get<std::string>();
            return c;
        }
        const auto& r = j.at("rouge_l");
        c.rouge = {r.at("precision").get<double>(), r.at("recall").get<double>(), r.at("f1").get<double>()};
        c.generated_length = j.at("generated_length").get<std::size_t>();
        c.target_length = j.at("target_length").get<std::size_t>();
        if (auto it = j.find("length_ratio"); it != j.end() && !it->is_null()) c.length_ratio = it->get<double>();
        if (auto it = j.find("energy_mwh"); it != j.end() && !it->is_null()) c.energy_mwh = it->get<double>();
        if (auto it = j.find("reasoning_fraction"); it != j.end() && !it->is_null()) {
            c.reasoning_fraction = it->get<double>();
        }
        return c;
    } catch (const json::exception& e) {
        throw parse_error(no, e.what());
    }
}

void write_scores(const std::vector<score_card>& cards, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    for (const auto& c : cards) out << serialize_score_card(c) << '\n';
}

std::vector<score_card> load_scores(const std::filesystem::path& path) {
    std::vector<score_card> out;
    detail::for_each_line(path, [&](std::string_view line, std::size_t no) {
        out.push_back(parse_score_card(line, no));
    });
    return out;
}

}  // namespace terse
