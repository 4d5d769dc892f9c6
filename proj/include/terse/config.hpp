#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "terse/corpus.hpp"
#include "terse/energy.hpp"
#include "terse/llm_client.hpp"
#include "terse/prompt.hpp"
#include "terse/tokenize.hpp"

namespace terse {

struct sample_config {
    split_kind split = split_kind::test;
    std::size_t n = 0;
};

struct energy_config {
    std::vector<power_source_config> sources;
    double interval_s = 0.1;
    attribution_mode attribution = attribution_mode::uniform;
};

/// Pipeline configuration. Relative paths resolve against the directory of
/// the config file. See docs/pipeline.example.json for an annotated example.
struct run_config {
    std::filesystem::path corpus;
    std::optional<std::filesystem::path> train_pool;
    /// Prebuilt BM25+ index; built from train_pool when absent.
    std::optional<std::filesystem::path> index;
    std::optional<std::filesystem::path> length_model;
    /// External predictor (POST {question, context} -> {length}); alternative to length_model.
    std::optional<std::string> length_model_url;
    strategy strat;
    endpoint_config endpoint;
    gen_params generation;
    energy_config energy;
    std::filesystem::path output_dir;
    /// Response cache; defaults to <output_dir>/cache.jsonl.
    std::optional<std::filesystem::path> cache;
    std::optional<sample_config> sample;
    token_scheme scheme = token_scheme::unicode_words;
    std::uint64_t seed = 0;

    std::filesystem::path cache_path() const { return cache ? *cache : output_dir / "cache.jsonl"; }
};

/// Throws config_parse_error on malformed JSON, unknown enum values or
/// wrongly typed fields. Paths are resolved against `base_dir`.
run_config parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {});
run_config load_run_config(const std::filesystem::path& path);

/// Canonical JSON form (sorted keys, absolute paths) used for hashing.
std::string canonical_json(const run_config& cfg);
std::string config_hash(const run_config& cfg);

/// Cross-reference findings such as "corpus path: file not found: x.jsonl" or
/// "length model path: required by limit:predreslen". Empty iff valid.
std::vector<std::string> validate(const run_config& cfg);

}  // namespace terse
