#include "terse/prompt.hpp"

#include <algorithm>
#include <cctype>

#include "terse/error.hpp"
#include "terse/lengthmodel.hpp"
#include "terse/retrieval.hpp"

namespace terse {

std::string limit_directive(std::size_t words) {
    return "Answer within " + std::to_string(words) + " words.";
}

void strategy::validate() const {
    if ((kind == strategy_kind::limit) != source.has_value()) {
        throw error("a limit source is required for LIMIT and only for LIMIT");
    }
    if (neighbours == 0 || examples == 0) throw error("strategy counts must be positive");
}

strategy parse_strategy(std::string_view name) {
    std::string n(name);
    std::transform(n.begin(), n.end(), n.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    strategy s;
    if (n == "default") {
        s.kind = strategy_kind::default_prompt;
    } else if (n == "brief") {
        s.kind = strategy_kind::brief;
    } else if (n == "minans") {
        s.kind = strategy_kind::minans;
    } else if (n == "maddnored") {
        s.kind = strategy_kind::maddnored;
    } else if (n == "incontext") {
        s.kind = strategy_kind::incontext;
    } else if (n == "limit:similarbm" || n == "similarbm") {
        s.kind = strategy_kind::limit;
        s.source = limit_source::similarbm;
    } else if (n == "limit:goldreslen" || n == "goldreslen") {
        s.kind = strategy_kind::limit;
        s.source = limit_source::goldreslen;
    } else if (n == "limit:predreslen" || n == "predreslen") {
        s.kind = strategy_kind::limit;
        s.source = limit_source::predreslen;
    } else {
        throw error("unknown strategy: " + std::string(name));
    }
    return s;
}

std::string strategy_name(const strategy& s) {
    switch (s.kind) {
        case strategy_kind::default_prompt: return "default";
        case strategy_kind::brief: return "brief";
        case strategy_kind::minans: return "minans";
        case strategy_kind::maddnored: return "maddnored";
        case strategy_kind::incontext: return "incontext";
        case strategy_kind::limit:
            if (!s.source) return "limit";
            switch (*s.source) {
                case limit_source::similarbm: return "limit:similarbm";
                case limit_source::goldreslen: return "limit:goldreslen";
                case limit_source::predreslen: return "limit:predreslen";
            }
    }
    return "default";
}

std::string render_prompt(const query_record& record, std::string_view directive_line) {
    std::string out;
    if (record.context && !record.context->empty()) {
        out += *record.context;
        out += '\n';
    }
    out += question_marker;
    out += record.question;
    out += '\n';
    if (!directive_line.empty()) {
        out += directive_line;
        out += '\n';
    }
    out += response_marker;
    return out;
}

void check_deps(const strategy& s, const prompt_deps& deps) {
    s.validate();
    const auto name = strategy_name(s);
    const bool needs_index = s.kind == strategy_kind::incontext ||
                             (s.kind == strategy_kind::limit && s.source == limit_source::similarbm);
    if (needs_index) {
        if (deps.index == nullptr) throw missing_dependency(name, "a BM25+ index");
        if (deps.pool == nullptr) throw missing_dependency(name, "the training pool");
    }
    if (s.kind == strategy_kind::limit && s.source == limit_source::predreslen &&
        deps.predictor == nullptr) {
        throw missing_dependency(name, "a length model");
    }
}

std::vector<const query_record*> select_incontext(const bm25_index& index, const corpus& pool,
                                                  const query_record& record, std::size_t m) {
    if (m == 0) throw error("m must be at least 1");
    // Same-question records would leak the answer; answerless ones cannot serve as examples.
    auto usable = [&](const query_record& r) {
        return r.question != record.question && !r.target_answer.empty();
    };
    std::size_t excluded = 0;
    for (const auto& r : pool.records()) {
        if (!usable(r)) ++excluded;
    }
    auto hits = index.top_k(record.question, m + excluded);
    std::vector<const query_record*> out;
    for (const auto& h : hits) {
        const auto* r = pool.find(h.id);
        if (r == nullptr) throw unknown_record_id(h.id);
        if (!usable(*r)) continue;
        out.push_back(r);
        if (out.size() == m) break;
    }
    return out;
}

prompt_spec build_prompt(const query_record& record, const strategy& s, const prompt_deps& deps) {
    check_deps(s, deps);
    prompt_spec spec;
    spec.record_id = record.id;
    spec.strat = s;
    switch (s.kind) {
        case strategy_kind::default_prompt:
            spec.prompt_text = render_prompt(record);
            break;
        case strategy_kind::brief:
            spec.prompt_text = render_prompt(record, directive::brief);
            break;
        case strategy_kind::minans:
            spec.prompt_text = render_prompt(record, directive::minans);
            break;
        case strategy_kind::maddnored:
            spec.prompt_text = render_prompt(record, directive::maddnored);
            break;
        case strategy_kind::limit: {
            std::size_t x = 0;
            switch (*s.source) {
                case limit_source::similarbm:
                    x = median_target_length(*deps.index, *deps.pool, record.question, s.neighbours);
                    break;
                case limit_source::goldreslen:
                    if (!record.target_length) throw missing_target_length(record.id);
                    x = std::max<std::size_t>(*record.target_length, 1);
                    break;
                case limit_source::predreslen:
                    x = deps.predictor->predict(record);
                    break;
            }
            spec.resolved_limit = x;
            spec.prompt_text = render_prompt(record, limit_directive(x));
            break;
        }
        case strategy_kind::incontext: {
            auto examples = select_incontext(*deps.index, *deps.pool, record, s.examples);
            for (const auto* ex : examples) {
                spec.incontext_ids.push_back(ex->id);
                spec.prompt_text += render_prompt(*ex);
                spec.prompt_text += ' ';
                spec.prompt_text += ex->target_answer;
                spec.prompt_text += "\n\n";
            }
            spec.prompt_text += render_prompt(record);
            break;
        }
    }
    return spec;
}

}  // namespace terse
