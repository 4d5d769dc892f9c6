#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "terse/corpus.hpp"

namespace terse {

class bm25_index;
class length_predictor;

enum class strategy_kind { default_prompt, brief, minans, maddnored, limit, incontext };
enum class limit_source { similarbm, goldreslen, predreslen };

/// Directive sentences, byte-exact.
namespace directive {
inline constexpr std::string_view brief = "Answer briefly.";
inline constexpr std::string_view minans = "Only provide the minimal answer.";
inline constexpr std::string_view maddnored =
    "Provide the minimal answer. Provide some additional information where applicable, but do "
    "not produce redundant text or politeness and conversational enhancements.";
}  // namespace directive

inline constexpr std::string_view question_marker = "### Question: ";
inline constexpr std::string_view response_marker = "### Response:";

/// "Answer within X words."
std::string limit_directive(std::size_t words);

struct strategy {
    strategy_kind kind = strategy_kind::default_prompt;
    std::optional<limit_source> source;  // set iff kind == limit
    std::size_t neighbours = 10;         // SIMILARBM k
    std::size_t examples = 10;           // INCONTEXT m

    /// Throws when `source` and `kind` disagree.
    void validate() const;
    bool operator==(const strategy&) const = default;
};

/// Parses "default", "brief", "minans", "maddnored", "incontext",
/// "limit:similarbm", "limit:goldreslen", "limit:predreslen" (case-insensitive).
strategy parse_strategy(std::string_view name);
/// Inverse of parse_strategy.
std::string strategy_name(const strategy& s);

struct prompt_deps {
    const bm25_index* index = nullptr;
    const corpus* pool = nullptr;
    const length_predictor* predictor = nullptr;
};

struct prompt_spec {
    std::string record_id;
    strategy strat;
    std::optional<std::size_t> resolved_limit;
    std::vector<std::string> incontext_ids;
    std::string prompt_text;
};

/// Context (if any) + "\n", "### Question: <question>\n", the directive
/// line (if any) + "\n", then "### Response:".
std::string render_prompt(const query_record& record, std::string_view directive_line = {});

/// Throws missing_dependency when `deps` lacks what the strategy needs and
/// missing_target_length for GOLDRESLEN records without a target length.
prompt_spec build_prompt(const query_record& record, const strategy& s, const prompt_deps& deps);

/// Checks `deps` against the strategy without building anything.
void check_deps(const strategy& s, const prompt_deps& deps);

/// Top-m BM25+ neighbours of the record's question, most similar first,
/// skipping pool records whose question equals the query's.
std::vector<const query_record*> select_incontext(const bm25_index& index, const corpus& pool,
                                                  const query_record& record, std::size_t m = 10);

}  // namespace terse
