#include "terse/llm_client.hpp"

#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include "httplib.h"
#include "jsonl.hpp"
#include "terse/error.hpp"
#include "terse/hashing.hpp"
#include "url.hpp"

namespace terse {

using detail::json;

double monotonic_seconds() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

void endpoint_config::validate() const {
    if (base_url.empty()) throw error("endpoint base_url is empty");
    if (model.empty()) throw error("endpoint model is empty");
    if (max_parallel < 1) throw error("max_parallel must be at least 1");
    if (timeout.count() <= 0) throw error("timeout must be positive");
    if (max_retries < 0) throw error("max_retries must be non-negative");
    detail::split_url(base_url);
}

std::string cache_key(const std::string& model, const std::string& prompt, const gen_params& params) {
    char num[64];
    field_hasher h;
    h.add("terse-cache-v1").add(model).add(prompt);
    std::snprintf(num, sizeof num, "%a", params.temperature);
    h.add(num);
    h.add(std::to_string(params.max_new_tokens));
    std::snprintf(num, sizeof num, "%a", params.repetition_penalty);
    h.add(num);
    h.add(params.seed ? std::to_string(*params.seed) : std::string("-"));
    return h.hex();
}

// ---------------------------------------------------------------------------
// response_cache

response_cache::response_cache(std::filesystem::path path) : path_(std::move(path)) {
    std::error_code ec;
    if (!std::filesystem::exists(path_, ec)) return;
    std::ifstream in(path_, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded() || !j.is_object() || !j.contains("key")) {
            // Only a torn tail is expected; anything else is still skipped rather
            // than poisoning the whole cache.
            continue;
        }
        entry e;
        e.response_text = j.value("response_text", "");
        e.finish_reason = j.value("finish_reason", "");
        e.raw = j.value("raw", "");
        entries_[j["key"].get<std::string>()] = std::move(e);
    }
}

std::optional<response_cache::entry> response_cache::lookup(const std::string& key) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void response_cache::store(const std::string& key, const std::string& model, const entry& e) {
    json j = {{"key", key},
              {"model", model},
              {"response_text", e.response_text},
              {"finish_reason", e.finish_reason},
              {"raw", e.raw}};
    std::unique_lock lock(mutex_);
    if (entries_.count(key) != 0) return;
    auto out = detail::open_output(path_, std::ios::app);
    out << j.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    out.flush();
    entries_[key] = e;
}

std::size_t response_cache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

// ---------------------------------------------------------------------------
// llm_client

llm_client::llm_client(endpoint_config cfg, gen_params params, response_cache* cache,
                       token_scheme scheme)
    : cfg_(std::move(cfg)), params_(params), cache_(cache), scheme_(scheme) {
    cfg_.validate();
    if (params_.max_new_tokens == 0) throw error("max_new_tokens must be positive");
}

std::string llm_client::request_body(const std::string& prompt, penalty_mode mode) const {
    json messages = json::array();
    if (cfg_.system_message) {
        messages.push_back({{"role", "system"}, {"content", *cfg_.system_message}});
    }
    messages.push_back({{"role", "user"}, {"content", prompt}});
    json body = {{"model", cfg_.model},
                 {"messages", std::move(messages)},
                 {"temperature", params_.temperature},
                 {"max_tokens", params_.max_new_tokens}};
    if (params_.seed) body["seed"] = *params_.seed;
    if (mode == penalty_mode::extension) {
        body["repetition_penalty"] = params_.repetition_penalty;
    } else {
        body["frequency_penalty"] = params_.repetition_penalty - 1.0;
    }
    return body.dump(-1, ' ', false, json::error_handler_t::replace);
}

llm_client::reply llm_client::request(const std::string& prompt) const {
    auto url = detail::split_url(cfg_.base_url);
    const std::string path = url.path + "/v1/chat/completions";

    httplib::Headers headers;
    if (const char* token = std::getenv(cfg_.api_key_env.c_str()); token != nullptr && *token != '\0') {
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    const int attempts = cfg_.max_retries + 1;
    std::string last_failure;
    bool saw_server_error = false;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0) {
            auto delay = cfg_.backoff_base * (1LL << std::min(attempt - 1, 16));
            std::this_thread::sleep_for(std::min<std::chrono::milliseconds>(delay, std::chrono::seconds(60)));
        }
        const auto mode = penalty_fallback_.load() ? penalty_mode::frequency_penalty : cfg_.penalty;

        httplib::Client cli(url.origin);
        cli.set_connection_timeout(cfg_.timeout);
        cli.set_read_timeout(cfg_.timeout);
        cli.set_write_timeout(cfg_.timeout);
        ++network_calls_;
        auto res = cli.Post(path, headers, request_body(prompt, mode), "application/json");
        if (!res) {
            last_failure = "transport: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            saw_server_error = true;
            last_failure = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
            continue;
        }
        if (res->status == 400 && mode == penalty_mode::extension &&
            res->body.find("repetition_penalty") != std::string::npos) {
            if (!penalty_fallback_.exchange(true)) {
                std::cerr << "warning: endpoint rejected repetition_penalty; sending frequency_penalty="
                          << params_.repetition_penalty - 1.0 << " instead\n";
            }
            --attempt;  // the rejected request does not count against the retry budget
            continue;
        }
        if (res->status != 200) throw http_error(res->status, res->body.substr(0, 200));

        json j = json::parse(res->body, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw malformed_response("reply is not a JSON object");
        auto choices = j.find("choices");
        if (choices == j.end() || !choices->is_array() || choices->empty()) {
            throw malformed_response("reply has no choices");
        }
        const auto& choice = (*choices)[0];
        reply r;
        r.raw = res->body;
        r.retries = attempt;
        if (auto msg = choice.find("message"); msg != choice.end() && msg->is_object()) {
            auto content = msg->find("content");
            if (content != msg->end() && content->is_string()) {
                r.text = content->get<std::string>();
            } else if (content == msg->end() || !content->is_null()) {
                throw malformed_response("message.content is not a string");
            }
        } else if (auto text = choice.find("text"); text != choice.end() && text->is_string()) {
            r.text = text->get<std::string>();
        } else {
            throw malformed_response("choice has neither message nor text");
        }
        if (auto fr = choice.find("finish_reason"); fr != choice.end() && fr->is_string()) {
            r.finish_reason = fr->get<std::string>();
        }
        return r;
    }
    if (!saw_server_error) {
        throw endpoint_unreachable(cfg_.base_url + ": " + last_failure);
    }
    throw retries_exhausted(attempts, last_failure);
}

generation_record llm_client::generate(const prompt_spec& prompt) const {
    if (prompt.prompt_text.empty()) throw error("empty prompt");
    generation_record g;
    g.id = prompt.record_id;
    g.strategy = strategy_name(prompt.strat);
    g.model = cfg_.model;
    g.endpoint = cfg_.base_url;
    g.prompt_text = prompt.prompt_text;
    g.prompt_tokens = count_tokens(prompt.prompt_text, scheme_);
    g.resolved_limit = prompt.resolved_limit;
    g.incontext_ids = prompt.incontext_ids;

    const auto key = cache_key(cfg_.model, prompt.prompt_text, params_);
    if (cache_ != nullptr) {
        if (auto hit = cache_->lookup(key)) {
            g.start = g.end = monotonic_seconds();
            g.cache_hit = true;
            g.response_text = hit->response_text;
            g.finish_reason = hit->finish_reason;
            g.response_tokens = count_tokens(g.response_text, scheme_);
            return g;
        }
    }
    g.start = monotonic_seconds();
    auto r = request(prompt.prompt_text);
    g.end = monotonic_seconds();
    g.retries = r.retries;
    g.response_text = std::move(r.text);
    g.finish_reason = std::move(r.finish_reason);
    g.response_tokens = count_tokens(g.response_text, scheme_);
    if (cache_ != nullptr) {
        cache_->store(key, cfg_.model, {g.response_text, g.finish_reason, std::move(r.raw)});
    }
    return g;
}

std::string llm_client::complete(const std::string& prompt) const {
    prompt_spec spec;
    spec.prompt_text = prompt;
    return generate(spec).response_text;
}

// ---------------------------------------------------------------------------
// run files

std::filesystem::path timing_path(const std::filesystem::path& run_file) {
    auto p = run_file;
    p += ".timing.jsonl";
    return p;
}

std::string serialize_generation(const generation_record& g) {
    json j = {{"id", g.id},
              {"dataset", g.dataset},
              {"strategy", g.strategy},
              {"model", g.model},
              {"endpoint", g.endpoint},
              {"prompt", g.prompt_text}};
    if (g.resolved_limit) j["resolved_limit"] = *g.resolved_limit;
    if (!g.incontext_ids.empty()) j["incontext_ids"] = g.incontext_ids;
    if (g.error) {
        j["error"] = *g.error;
    } else {
        j["response"] = g.response_text;
        j["prompt_tokens"] = g.prompt_tokens;
        j["response_tokens"] = g.response_tokens;
        j["finish_reason"] = g.finish_reason;
    }
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

generation_record parse_generation(std::string_view line, std::size_t no) {
    json j = detail::parse_json_line(line, no);
    try {
        generation_record g;
        g.id = j.at("id").get<std::string>();
        g.dataset = j.value("dataset", "");
        g.strategy = j.value("strategy", "");
        g.model = j.value("model", "");
        g.endpoint = j.value("endpoint", "");
        g.prompt_text = j.value("prompt", "");
        if (j.contains("resolved_limit")) g.resolved_limit = j["resolved_limit"].get<std::size_t>();
        if (j.contains("incontext_ids")) g.incontext_ids = j["incontext_ids"].get<std::vector<std::string>>();
        if (j.contains("error")) {
            g.error = j["error"].get<std::string>();
        } else {
            g.response_text = j.at("response").get<std::string>();
            g.prompt_tokens = j.value("prompt_tokens", std::size_t{0});
            g.response_tokens = j.value("response_tokens", std::size_t{0});
            g.finish_reason = j.value("finish_reason", "");
        }
        return g;
    } catch (const json::exception& e) {
        throw parse_error(no, e.what());
    }
}

std::vector<generation_record> load_run_file(const std::filesystem::path& run_file) {
    std::vector<generation_record> out;
    detail::for_each_line(run_file, [&](std::string_view line, std::size_t no) {
        out.push_back(parse_generation(line, no));
    });
    const auto tp = timing_path(run_file);
    std::error_code ec;
    if (std::filesystem::exists(tp, ec)) {
        std::unordered_map<std::string, std::size_t> pos;
        for (std::size_t i = 0; i < out.size(); ++i) pos[out[i].id] = i;
        detail::for_each_line(tp, [&](std::string_view line, std::size_t no) {
            json j = detail::parse_json_line(line, no);
            auto it = pos.find(j.value("id", ""));
            if (it == pos.end()) return;
            auto& g = out[it->second];
            g.start = j.value("start", 0.0);
            g.end = j.value("end", 0.0);
            g.cache_hit = j.value("cache_hit", false);
            g.retries = j.value("retries", 0);
        });
    }
    return out;
}

run_result run_batch(const corpus& records, const strategy& strat, const llm_client& client,
                     const prompt_deps& deps, const std::filesystem::path& run_file) {
    check_deps(strat, deps);

    const std::size_t n = records.size();
    run_result result;
    result.records.resize(n);
    std::vector<char> done(n, 0);
    std::size_t next_to_write = 0;
    std::mutex write_mutex;

    auto run_out = detail::open_output(run_file);
    auto timing_out = detail::open_output(timing_path(run_file));

    auto finish = [&](std::size_t i, generation_record g) {
        std::lock_guard lock(write_mutex);
        result.records[i] = std::move(g);
        done[i] = 1;
        while (next_to_write < n && done[next_to_write] != 0) {
            const auto& r = result.records[next_to_write];
            run_out << serialize_generation(r) << '\n';
            json t = {{"id", r.id}, {"start", r.start}, {"end", r.end},
                      {"cache_hit", r.cache_hit}, {"retries", r.retries}};
            timing_out << t.dump() << '\n';
            ++next_to_write;
        }
        run_out.flush();
        timing_out.flush();
    };

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            const auto& rec = records.records()[i];
            generation_record g;
            try {
                g = client.generate(build_prompt(rec, strat, deps));
            } catch (const std::exception& e) {
                g = generation_record{};
                g.id = rec.id;
                g.strategy = strategy_name(strat);
                g.model = client.config().model;
                g.endpoint = client.config().base_url;
                g.error = e.what();
                g.start = g.end = monotonic_seconds();
            }
            g.dataset = rec.dataset;
            finish(i, std::move(g));
        }
    };

    const std::size_t threads = std::min(client.config().max_parallel, std::max<std::size_t>(n, 1));
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    for (const auto& g : result.records) {
        if (g.ok()) {
            ++result.succeeded;
            if (g.cache_hit) ++result.cache_hits;
        } else {
            ++result.failed;
        }
    }
    return result;
}

}  // namespace terse
