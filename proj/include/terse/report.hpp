#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "terse/categories.hpp"
#include "terse/metrics.hpp"

namespace terse {

enum class dimension { model, dataset, strategy };
dimension parse_dimension(std::string_view name);
/// "model,dataset" -> {model, dataset}.
std::vector<dimension> parse_dimensions(std::string_view list);

/// Value of a dimension that was not grouped on.
inline constexpr std::string_view any_value = "*";

struct summary_row {
    std::string model;
    std::string dataset;
    std::string strategy;
    /// Every scorecard in the group, failed generations included.
    std::size_t n_samples = 0;
    /// Failed generations; excluded from every mean.
    std::size_t failed = 0;
    double mean_target_length = 0.0;
    double mean_generated_length = 0.0;
    /// Mean of per-sample ratios over samples where the ratio is defined.
    std::optional<double> mean_length_ratio;
    /// mean_generated_length / mean_target_length.
    std::optional<double> ratio_of_means;
    rouge_score rouge;
    std::optional<double> mean_energy_mwh;
    /// Samples left out of the ratio mean: failed or undefined ratio.
    std::size_t exclusion_count = 0;

    bool operator==(const summary_row&) const = default;
};

/// Arithmetic means per group, rows sorted lexicographically by
/// (model, dataset, strategy). Permutation-invariant in `cards`.
std::vector<summary_row> aggregate(const std::vector<score_card>& cards, const std::vector<dimension>& by);

enum class report_format { markdown_table, csv };
report_format parse_report_format(std::string_view name);

/// Columns, in order:
/// model, dataset, strategy, n_samples, failed, exclusion_count,
/// mean_target_length, mean_generated_length, mean_length_ratio, ratio_of_means,
/// rouge_precision, rouge_recall, rouge_f1, mean_energy_mwh.
/// Lengths print with 1 decimal; ratios, ROUGE and energy with 3. Absent
/// values are empty cells. Throws empty_report for no rows.
std::string render(const std::vector<summary_row>& rows, report_format format);

/// Inverse of render(rows, csv) at printed precision.
std::vector<summary_row> parse_csv(std::string_view text);

/// Splits one CSV document into records of fields (RFC 4180 quoting).
std::vector<std::vector<std::string>> split_csv(std::string_view text);
std::string csv_field(std::string_view value);

/// Fixed-point formatting with `decimals` digits; never prints "-0.0".
std::string format_fixed(double value, int decimals);

struct reduction_row {
    std::string model;
    std::string dataset;
    std::string strategy;
    /// 1 - strategy mean / default mean, as a fraction.
    double length_reduction = 0.0;
    std::optional<double> energy_reduction;
};

/// Reductions of every non-default row against the "default" row of the
/// same (model, dataset). Throws missing_baseline when that row is absent.
std::vector<reduction_row> reduction_vs_default(const std::vector<summary_row>& rows);

/// "60.0%".
std::string format_percent(double fraction);
std::string render_reductions(const std::vector<reduction_row>& rows, report_format format);

/// One line per dataset with the mean target length followed
/// by each model's mean generated length (1 decimal). Uses rows grouped by
/// (model, dataset); the target column is the sample-weighted mean over models.
std::string render_length_table(const std::vector<summary_row>& rows, report_format format);

/// Tidy "group,category,fraction" data for category charts.
std::string render_distribution_csv(const std::map<std::string, category_distribution>& dist);

}  // namespace terse
