#include "terse/config.hpp"

#include <cstdlib>

#include "jsonl.hpp"
#include "terse/error.hpp"
#include "terse/hashing.hpp"

namespace terse {

using detail::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) path = base / path;
    return path.lexically_normal();
}

power_source_kind parse_source_kind(const std::string& name) {
    if (name == "gpu") return power_source_kind::gpu;
    if (name == "cpu_rapl" || name == "rapl") return power_source_kind::cpu_rapl;
    if (name == "mock") return power_source_kind::mock;
    throw config_parse_error("unknown power source kind: " + name);
}

attribution_mode parse_attribution(const std::string& name) {
    if (name == "uniform") return attribution_mode::uniform;
    if (name == "overlap") return attribution_mode::overlap;
    throw config_parse_error("unknown attribution mode: " + name);
}

penalty_mode parse_penalty(const std::string& name) {
    if (name == "extension" || name == "repetition_penalty") return penalty_mode::extension;
    if (name == "frequency_penalty") return penalty_mode::frequency_penalty;
    throw config_parse_error("unknown penalty mode: " + name);
}

template <class T>
std::optional<T> opt(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<T>();
}

endpoint_config parse_endpoint(const json& j) {
    endpoint_config e;
    e.base_url = j.at("base_url").get<std::string>();
    e.model = j.at("model").get<std::string>();
    if (auto v = opt<std::string>(j, "api_key_env")) e.api_key_env = *v;
    if (auto v = opt<double>(j, "timeout_s")) {
        e.timeout = std::chrono::milliseconds(static_cast<long long>(*v * 1000.0));
    }
    if (auto v = opt<int>(j, "max_retries")) e.max_retries = *v;
    if (auto v = opt<std::size_t>(j, "max_parallel")) e.max_parallel = *v;
    if (auto v = opt<long long>(j, "backoff_ms")) e.backoff_base = std::chrono::milliseconds(*v);
    if (auto v = opt<std::string>(j, "penalty")) e.penalty = parse_penalty(*v);
    e.system_message = opt<std::string>(j, "system_message");
    return e;
}

gen_params parse_generation(const json& j) {
    gen_params g;
    if (auto v = opt<double>(j, "temperature")) g.temperature = *v;
    if (auto v = opt<std::size_t>(j, "max_new_tokens")) g.max_new_tokens = *v;
    if (auto v = opt<double>(j, "repetition_penalty")) g.repetition_penalty = *v;
    g.seed = opt<std::int64_t>(j, "seed");
    return g;
}

power_source_config parse_source(const json& j, const std::filesystem::path& base) {
    power_source_config s;
    s.kind = parse_source_kind(j.at("kind").get<std::string>());
    s.label = j.value("label", std::string(to_string(s.kind)));
    if (auto v = opt<std::string>(j, "command")) s.command = *v;
    if (auto v = opt<std::string>(j, "energy_file")) s.energy_file = resolve(base, *v);
    if (auto v = opt<std::string>(j, "max_range_file")) s.max_range_file = resolve(base, *v);
    if (auto v = opt<double>(j, "watts")) s.mock_watts = *v;
    if (auto it = j.find("schedule"); it != j.end()) {
        for (const auto& point : *it) s.mock_schedule.emplace_back(point.at(0).get<double>(), point.at(1).get<double>());
    }
    return s;
}

}  // namespace

run_config parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
    json j = json::parse(text, nullptr, false, true);
    if (j.is_discarded() || !j.is_object()) throw config_parse_error("config is not a JSON object");
    try {
        run_config c;
        c.corpus = resolve(base_dir, j.at("corpus").get<std::string>());
        if (auto v = opt<std::string>(j, "train_pool")) c.train_pool = resolve(base_dir, *v);
        if (auto v = opt<std::string>(j, "index")) c.index = resolve(base_dir, *v);
        if (auto v = opt<std::string>(j, "length_model")) c.length_model = resolve(base_dir, *v);
        c.length_model_url = opt<std::string>(j, "length_model_url");
        c.strat = parse_strategy(j.at("strategy").get<std::string>());
        if (auto v = opt<std::size_t>(j, "neighbours")) c.strat.neighbours = *v;
        if (auto v = opt<std::size_t>(j, "examples")) c.strat.examples = *v;
        c.endpoint = parse_endpoint(j.at("endpoint"));
        if (auto it = j.find("generation"); it != j.end()) c.generation = parse_generation(*it);
        if (auto it = j.find("energy"); it != j.end() && !it->is_null()) {
            if (auto v = opt<double>(*it, "interval_s")) c.energy.interval_s = *v;
            if (auto v = opt<std::string>(*it, "attribution")) c.energy.attribution = parse_attribution(*v);
            for (const auto& s : it->value("sources", json::array())) c.energy.sources.push_back(parse_source(s, base_dir));
        }
        c.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
        if (auto v = opt<std::string>(j, "cache")) c.cache = resolve(base_dir, *v);
        if (auto it = j.find("sample"); it != j.end() && !it->is_null()) {
            c.sample = sample_config{parse_split(it->value("split", "test")), it->at("n").get<std::size_t>()};
        }
        if (auto v = opt<std::string>(j, "tokenizer")) c.scheme = parse_token_scheme(*v);
        if (auto v = opt<std::uint64_t>(j, "seed")) c.seed = *v;
        return c;
    } catch (const config_parse_error&) {
        throw;
    } catch (const json::exception& e) {
        throw config_parse_error(e.what());
    } catch (const error& e) {
        throw config_parse_error(e.what());
    }
}

run_config load_run_config(const std::filesystem::path& path) {
    auto base = std::filesystem::absolute(path).parent_path();
    return parse_run_config(detail::slurp(path), base);
}

std::string canonical_json(const run_config& c) {
    auto abs = [](const std::filesystem::path& p) { return std::filesystem::absolute(p).lexically_normal().string(); };
    auto opt_path = [&](const std::optional<std::filesystem::path>& p) { return p ? json(abs(*p)) : json(nullptr); };
    json sources = json::array();
    for (const auto& s : c.energy.sources) {
        json sched = json::array();
        for (auto [t, w] : s.mock_schedule) sched.push_back({t, w});
        sources.push_back({{"kind", to_string(s.kind)},
                           {"label", s.label},
                           {"command", s.command},
                           {"energy_file", s.energy_file.string()},
                           {"max_range_file", s.max_range_file.string()},
                           {"watts", s.mock_watts},
                           {"schedule", sched}});
    }
    json j = {
        {"corpus", abs(c.corpus)},
        {"train_pool", opt_path(c.train_pool)},
        {"index", opt_path(c.index)},
        {"length_model", opt_path(c.length_model)},
        {"length_model_url", c.length_model_url ? json(*c.length_model_url) : json(nullptr)},
        {"strategy", strategy_name(c.strat)},
        {"neighbours", c.strat.neighbours},
        {"examples", c.strat.examples},
        {"endpoint",
         {{"base_url", c.endpoint.base_url},
          {"model", c.endpoint.model},
          {"api_key_env", c.endpoint.api_key_env},
          {"timeout_ms", c.endpoint.timeout.count()},
          {"max_retries", c.endpoint.max_retries},
          {"max_parallel", c.endpoint.max_parallel},
          {"backoff_ms", c.endpoint.backoff_base.count()},
          {"penalty", c.endpoint.penalty == penalty_mode::extension ? "extension" : "frequency_penalty"},
          {"system_message", c.endpoint.system_message ? json(*c.endpoint.system_message) : json(nullptr)}}},
        {"generation",
         {{"temperature", c.generation.temperature},
          {"max_new_tokens", c.generation.max_new_tokens},
          {"repetition_penalty", c.generation.repetition_penalty},
          {"seed", c.generation.seed ? json(*c.generation.seed) : json(nullptr)}}},
        {"energy",
         {{"interval_s", c.energy.interval_s},
          {"attribution", c.energy.attribution == attribution_mode::uniform ? "uniform" : "overlap"},
          {"sources", sources}}},
        {"output_dir", abs(c.output_dir)},
        {"cache", abs(c.cache_path())},
        {"sample", c.sample ? json{{"split", to_string(c.sample->split)}, {"n", c.sample->n}} : json(nullptr)},
        {"tokenizer", to_string(c.scheme)},
        {"seed", c.seed},
    };
    return j.dump();
}

std::string config_hash(const run_config& cfg) { return sha256_hex(canonical_json(cfg)); }

std::vector<std::string> validate(const run_config& c) {
    std::vector<std::string> findings;
    auto need_file = [&](const std::string& field, const std::filesystem::path& p) {
        if (!std::filesystem::is_regular_file(p)) findings.push_back(field + ": file not found: " + p.string());
    };
    need_file("corpus path", c.corpus);
    if (c.train_pool) need_file("train pool path", *c.train_pool);
    if (c.index) need_file("index path", *c.index);
    if (c.length_model) need_file("length model path", *c.length_model);

    const auto name = strategy_name(c.strat);
    const bool needs_pool = c.strat.kind == strategy_kind::incontext ||
                            (c.strat.kind == strategy_kind::limit && c.strat.source == limit_source::similarbm);
    if (needs_pool && !c.train_pool) findings.push_back("train pool path: required by " + name);
    if (c.strat.kind == strategy_kind::limit && c.strat.source == limit_source::predreslen && !c.length_model &&
        !c.length_model_url) {
        findings.push_back("length model path: required by " + name);
    }
    try {
        c.strat.validate();
    } catch (const error& e) {
        findings.push_back(std::string("strategy: ") + e.what());
    }
    try {
        c.endpoint.validate();
    } catch (const error& e) {
        findings.push_back(std::string("endpoint: ") + e.what());
    }
    if (c.output_dir.empty()) findings.push_back("output_dir: empty");
    if (c.sample && c.sample->n == 0) findings.push_back("sample.n: must be at least 1");
    if (!c.energy.sources.empty() && !(c.energy.interval_s > 0)) {
        findings.push_back("energy.interval_s: must be positive");
    }
    for (const auto& s : c.energy.sources) {
        const auto field = "energy source " + s.label;
        switch (s.kind) {
            case power_source_kind::gpu:
                if (s.command.empty()) findings.push_back(field + ": command is empty");
                break;
            case power_source_kind::cpu_rapl:
                need_file(field + " energy_file", s.energy_file);
                need_file(field + " max_range_file", s.max_range_file);
                break;
            case power_source_kind::mock:
                break;
        }
    }
    return findings;
}

}  // namespace terse
