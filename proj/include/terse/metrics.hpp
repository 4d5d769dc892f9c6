#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "terse/corpus.hpp"
#include "terse/llm_client.hpp"
#include "terse/tokenize.hpp"

namespace terse {

struct rouge_score {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    bool operator==(const rouge_score&) const = default;
};

/// Length of the longest common subsequence of two token sequences.
std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// ROUGE-L over lowercased unicode_words tokens, beta = 1, no stemming.
rouge_score rouge_l(std::string_view candidate, std::string_view reference);
rouge_score rouge_l_tokens(std::span<const std::string> candidate, std::span<const std::string> reference);

/// generated / target; nullopt (undefined) when target is 0.
std::optional<double> length_ratio(double generated, double target);

/// Fraction of tokens inside open/close delimiter spans, excluding the
/// delimiters themselves. An unmatched opener runs to the end of the text;
/// stray closers are ignored. Result is in [0, 1]; 0 for empty text.
double reasoning_fraction(std::string_view text, std::string_view open_delim = "<think>",
                          std::string_view close_delim = "</think>",
                          token_scheme scheme = token_scheme::unicode_words);

struct score_card {
    std::string id;
    std::string model;
    std::string dataset;
    std::string strategy;
    rouge_score rouge;
    std::size_t generated_length = 0;
    std::size_t target_length = 0;
    std::optional<double> length_ratio;
    std::optional<double> energy_mwh;
    std::optional<double> reasoning_fraction;
    /// Failed generation; metric fields are meaningless when set.
    std::optional<std::string> error;

    bool ok() const { return !error.has_value(); }
};

struct score_options {
    token_scheme scheme = token_scheme::unicode_words;
    std::string open_delim = "<think>";
    std::string close_delim = "</think>";
};

struct scored_run {
    /// One card per run record, in run order; failed generations carry `error`.
    std::vector<score_card> cards;
    std::size_t excluded = 0;
};

/// Throws unknown_record_id when a run record is not in the corpus.
/// The reasoning fraction is filled only for responses containing the opener.
scored_run score_run(const std::vector<generation_record>& run, const corpus& data,
                     const std::map<std::string, double>* energy = nullptr,
                     const score_options& options = {});

std::string serialize_score_card(const score_card& c);
score_card parse_score_card(std::string_view line, std::size_t line_no);
void write_scores(const std::vector<score_card>& cards, const std::filesystem::path& path);
std::vector<score_card> load_scores(const std::filesystem::path& path);

}  // namespace terse
