#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace terse {

/// Information categories of response tokens.
enum class category { minans, addinfo, explain, converse, redinfo, irrel };

inline constexpr std::array<category, 6> all_categories = {
    category::minans, category::addinfo, category::explain,
    category::converse, category::redinfo, category::irrel};

/// "MINANS", "ADDINFO", ...
std::string_view to_string(category c);
/// Case-insensitive; throws on unknown names.
category parse_category(std::string_view name);
std::optional<category> try_parse_category(std::string_view name);

/// Half-open token range [start, end) over the unicode_words tokens of a response.
struct category_span {
    std::size_t start = 0;
    std::size_t end = 0;
    category label = category::minans;

    bool operator==(const category_span&) const = default;
};

struct annotated_response {
    std::string id;
    std::string model;
    std::string dataset;
    std::string response_text;
    std::vector<category_span> spans;
};

/// Throws span_out_of_range for empty or out-of-range spans and
/// error for overlapping ones.
void validate_spans(const std::vector<category_span>& spans, std::size_t n_tokens);

/// Per-token labels; unlabeled tokens are nullopt.
std::vector<std::optional<category>> token_labels(const std::vector<category_span>& spans,
                                                  std::size_t n_tokens);

/// Token span covering every token that overlaps [cp_begin, cp_end) in
/// Unicode code points; nullopt when no token overlaps.
std::optional<std::pair<std::size_t, std::size_t>> char_to_token_span(std::string_view text,
                                                                       std::size_t cp_begin,
                                                                       std::size_t cp_end);

enum class group_by { overall, model, dataset };
group_by parse_group_by(std::string_view name);

using category_distribution = std::map<category, double>;

/// Per group, labeled tokens of each category over all labeled tokens.
/// The overall group is keyed "all". Categories with no tokens are omitted.
std::map<std::string, category_distribution> distribution(const std::vector<annotated_response>& annotations,
                                                          group_by by);

struct category_f1 {
    std::map<category, double> per_category;
    /// Mean over categories present in either side; 1.0 when neither side labels anything.
    double macro = 1.0;
};

/// Token-level F1 per category, `gold` as reference and `pred` as prediction.
/// Throws span_out_of_range for spans beyond n_tokens.
category_f1 token_f1(const std::vector<category_span>& pred, const std::vector<category_span>& gold,
                     std::size_t n_tokens);

/// Inter-annotator agreement: tokens of all responses pooled, F1 per category,
/// macro-averaged. Symmetric. Throws mismatched_coverage unless both sides
/// annotate the same (id, model) pairs.
category_f1 pairwise_f(const std::vector<annotated_response>& a, const std::vector<annotated_response>& b);

/// Annotation file: one object per line with
/// {id, model, dataset?, response_text, spans: [{start, end, category}]}.
/// Spans given as {char_start, char_end, category} (code points) are converted
/// to token offsets on load.
std::vector<annotated_response> load_annotations(const std::filesystem::path& path);
void write_annotations(const std::vector<annotated_response>& annotations, const std::filesystem::path& path);

/// Fixed instruction sent to the model for automatic categorization.
/// "{question}" and "{response}" are substituted.
extern const std::string_view autocat_prompt_template;

std::string render_autocat_prompt(std::string_view question, std::string_view response);

struct auto_categorization {
    std::vector<category_span> spans;
    std::size_t dropped_fragments = 0;
};

/// Parses the model's reply (a JSON array of {"text", "category"} objects,
/// optionally inside a code fence or under a "fragments" key) and aligns each
/// fragment to the first unconsumed exact token match in the response.
/// Unalignable or unknown-category fragments are dropped and counted.
/// Throws malformed_model_output when no JSON array can be recovered.
auto_categorization align_fragments(std::string_view model_reply, std::string_view response_text);

using completion_fn = std::function<std::string(const std::string& prompt)>;

auto_categorization auto_categorize(const completion_fn& complete, std::string_view response_text,
                                    std::string_view question);

}  // namespace terse
