#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "terse/clock.hpp"
#include "terse/corpus.hpp"
#include "terse/prompt.hpp"
#include "terse/tokenize.hpp"

namespace terse {

enum class penalty_mode {
    /// Send "repetition_penalty" as a top-level field (vLLM, llama.cpp, TGI).
    extension,
    /// Send "frequency_penalty" = repetition_penalty - 1 (plain OpenAI schema).
    frequency_penalty,
};

struct endpoint_config {
    std::string base_url;
    std::string model;
    /// Environment variable holding the bearer token; unset or empty means no auth header.
    std::string api_key_env = "OPENAI_API_KEY";
    std::chrono::milliseconds timeout{std::chrono::seconds(120)};
    int max_retries = 3;
    std::size_t max_parallel = 4;
    std::chrono::milliseconds backoff_base{500};
    penalty_mode penalty = penalty_mode::extension;
    std::optional<std::string> system_message;

    void validate() const;
};

struct gen_params {
    double temperature = 0.0;
    std::size_t max_new_tokens = 2048;
    double repetition_penalty = 1.2;
    std::optional<std::int64_t> seed;
};

struct generation_record {
    std::string id;
    std::string dataset;
    std::string strategy;
    std::string model;
    std::string endpoint;
    std::string prompt_text;
    std::string response_text;
    std::size_t prompt_tokens = 0;
    std::size_t response_tokens = 0;
    std::string finish_reason;
    std::optional<std::size_t> resolved_limit;
    std::vector<std::string> incontext_ids;
    /// Set instead of a response when generation failed.
    std::optional<std::string> error;

    // Timing sidecar fields; not part of the run file line.
    double start = 0.0;
    double end = 0.0;
    bool cache_hit = false;
    int retries = 0;

    bool ok() const { return !error.has_value(); }
};

/// Hex SHA-256 over model, prompt and every generation parameter.
std::string cache_key(const std::string& model, const std::string& prompt, const gen_params& params);

/// Append-only JSONL response store keyed by cache_key. Readers run
/// concurrently; appends are serialized and flushed line by line.
class response_cache {
  public:
    struct entry {
        std::string response_text;
        std::string finish_reason;
        std::string raw;  // server response body, kept for audit
    };

    /// Loads existing entries. A torn final line (interrupted append) is ignored.
    explicit response_cache(std::filesystem::path path);

    std::optional<entry> lookup(const std::string& key) const;
    void store(const std::string& key, const std::string& model, const entry& e);
    std::size_t size() const;
    const std::filesystem::path& path() const { return path_; }

  private:
    std::filesystem::path path_;
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, entry> entries_;
};

/// OpenAI-compatible chat completion client:
/// POST {base_url}/v1/chat/completions with a single user message.
class llm_client {
  public:
    llm_client(endpoint_config cfg, gen_params params, response_cache* cache = nullptr,
               token_scheme scheme = token_scheme::unicode_words);

    /// One completion, consulting the cache first. Transport failures and 5xx
    /// replies are retried with exponential backoff.
    generation_record generate(const prompt_spec& prompt) const;

    /// Raw completion text for an arbitrary prompt (cached the same way).
    std::string complete(const std::string& prompt) const;

    std::size_t network_calls() const { return network_calls_.load(); }
    const endpoint_config& config() const { return cfg_; }
    const gen_params& params() const { return params_; }

  private:
    struct reply {
        std::string text;
        std::string finish_reason;
        std::string raw;
        int retries = 0;
    };
    reply request(const std::string& prompt) const;
    std::string request_body(const std::string& prompt, penalty_mode mode) const;

    endpoint_config cfg_;
    gen_params params_;
    response_cache* cache_;
    token_scheme scheme_;
    mutable std::atomic<std::size_t> network_calls_{0};
    mutable std::atomic<bool> penalty_fallback_{false};
};

struct run_result {
    std::vector<generation_record> records;
    std::size_t succeeded = 0;
    std::size_t failed = 0;
    std::size_t cache_hits = 0;
};

/// Timing sidecar path for a run file: "<run>.timing.jsonl".
std::filesystem::path timing_path(const std::filesystem::path& run_file);

/// Generates one record per corpus entry with at most cfg.max_parallel
/// requests in flight. Lines are appended to `run_file` in corpus order as
/// soon as every earlier record has finished. Per-record failures become
/// error entries; missing strategy dependencies throw before any request.
run_result run_batch(const corpus& records, const strategy& strat, const llm_client& client,
                     const prompt_deps& deps, const std::filesystem::path& run_file);

std::string serialize_generation(const generation_record& g);
generation_record parse_generation(std::string_view line, std::size_t line_no);

/// Reads a run file and, when present, its timing sidecar.
std::vector<generation_record> load_run_file(const std::filesystem::path& run_file);

}  // namespace terse
