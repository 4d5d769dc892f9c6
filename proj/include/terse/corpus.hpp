#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace terse {

enum class split_kind { train, validation, test };

std::string_view to_string(split_kind s);
split_kind parse_split(std::string_view name);

struct query_record {
    std::string id;
    std::string dataset;
    split_kind split = split_kind::test;
    std::optional<std::string> context;
    std::string question;
    std::string target_answer;
    /// Further gold answers (MS-MARCO style); never used for scoring.
    std::vector<std::string> extra_answers;
    /// Gold answer length in whitespace words.
    std::optional<std::size_t> target_length;

    bool operator==(const query_record&) const = default;
};

struct corpus_provenance {
    std::vector<std::string> sources;
    std::optional<std::uint64_t> seed;

    bool operator==(const corpus_provenance&) const = default;
};

/// Ordered, id-unique collection of records. Immutable once built.
class corpus {
  public:
    corpus() = default;
    /// Throws parse_error(0, ...) on a duplicate or empty id.
    explicit corpus(std::vector<query_record> records, corpus_provenance provenance = {});

    const std::vector<query_record>& records() const { return records_; }
    const corpus_provenance& provenance() const { return provenance_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    /// nullptr when absent.
    const query_record* find(std::string_view id) const;

    bool operator==(const corpus& other) const { return records_ == other.records_; }

  private:
    std::vector<query_record> records_;
    corpus_provenance provenance_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// Reads the canonical line format. `dataset_label` fills records whose
/// line has no "dataset" field.
corpus load_corpus(const std::filesystem::path& path, const std::string& dataset_label = "");

/// Parses one canonical line. Exposed for adapters and tests.
query_record parse_record_line(std::string_view line, std::size_t line_no,
                               const std::string& dataset_label);

std::string serialize_record(const query_record& r);
void write_corpus(const corpus& c, const std::filesystem::path& path);

/// Source dataset layouts accepted by `ingest`.
enum class source_format { canonical, dolly, gooaq, msmarco, narrativeqa, tweetqa };
source_format parse_source_format(std::string_view name);

/// Normalizes a line-delimited dump of an upstream dataset into records.
/// Records without an id get "<line number>"; `split` fills absent splits.
corpus ingest_source(const std::filesystem::path& path, source_format format,
                     const std::string& dataset_label, split_kind split);

/// Sets target_length to the whitespace word count of each target answer.
corpus with_target_lengths(const corpus& c);

std::size_t word_length(const query_record& r);

/// Deterministic sample without replacement from one split.
///
/// The permutation is a partial Fisher-Yates shuffle driven by std::mt19937_64
/// seeded with `seed`; bounded draws use rejection sampling so the result is
/// identical across standard library implementations.
corpus sample_split(const corpus& c, split_kind split, std::size_t n, std::uint64_t seed,
                    bool strict = true);

/// Samples `per_dataset` train records from each corpus and concatenates
/// them; ids become "<dataset>/<id>".
corpus build_train_pool(const std::vector<corpus>& corpora, std::size_t per_dataset = 5000,
                        std::uint64_t seed = 0, bool strict = true);

}  // namespace terse
