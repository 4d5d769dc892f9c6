#include "terse/pipeline.hpp"

#include <memory>

#include "jsonl.hpp"
#include "terse/error.hpp"
#include "terse/hashing.hpp"
#include "terse/lengthmodel.hpp"
#include "terse/metrics.hpp"
#include "terse/report.hpp"
#include "terse/retrieval.hpp"

#ifndef TERSE_VERSION
#define TERSE_VERSION "unknown"
#endif

namespace terse {

using detail::json;

std::string_view version() { return TERSE_VERSION; }

namespace {

template <class F>
auto stage(const char* name, std::ostream* log, F&& body) {
    if (log != nullptr) *log << "[" << name << "]\n";
    try {
        return body();
    } catch (const stage_error&) {
        throw;
    } catch (const std::exception& e) {
        throw stage_error(name, e.what());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    auto out = detail::open_output(path);
    out << text;
}

}  // namespace

pipeline_result run_pipeline(const run_config& cfg, std::ostream* log, pipeline_until until) {
    stage("validate", log, [&] {
        auto findings = validate(cfg);
        if (findings.empty()) return;
        std::string msg;
        for (const auto& f : findings) msg += (msg.empty() ? "" : "; ") + f;
        throw error(msg);
    });

    const auto& dir = cfg.output_dir;
    pipeline_result res;
    res.run_file = dir / "run.jsonl";
    res.scores = dir / "scores.jsonl";
    res.report_md = dir / "report.md";
    res.report_csv = dir / "report.csv";
    res.manifest = dir / "manifest.json";

    auto data = stage("load", log, [&] {
        auto c = load_corpus(cfg.corpus);
        if (cfg.sample) c = sample_split(c, cfg.sample->split, cfg.sample->n, cfg.seed);
        return c;
    });
    std::optional<corpus> pool;
    if (cfg.train_pool) pool = stage("load", log, [&] { return load_corpus(*cfg.train_pool); });

    std::optional<bm25_index> index;
    if (pool) {
        index = stage("index", log, [&] {
            return cfg.index ? bm25_index::load(*cfg.index) : bm25_index::build(*pool);
        });
    }

    std::unique_ptr<length_predictor> predictor = stage("predictor", log, [&]() -> std::unique_ptr<length_predictor> {
        if (cfg.length_model) return std::make_unique<length_model>(length_model::load(*cfg.length_model));
        if (cfg.length_model_url) return std::make_unique<http_length_predictor>(*cfg.length_model_url);
        return nullptr;
    });

    prompt_deps deps{index ? &*index : nullptr, pool ? &*pool : nullptr, predictor.get()};
    response_cache cache(cfg.cache_path());
    llm_client client(cfg.endpoint, cfg.generation, &cache, cfg.scheme);

    std::unique_ptr<sampler_handle> sampler;
    if (!cfg.energy.sources.empty()) {
        sampler = stage("energy", log, [&] {
            return start_sampling(cfg.energy.sources, std::chrono::duration<double>(cfg.energy.interval_s));
        });
    }

    auto run = stage("run", log, [&] {
        auto r = run_batch(data, cfg.strat, client, deps, res.run_file);
        if (r.succeeded == 0 && !r.records.empty()) {
            const auto& first = r.records.front();
            throw error("no generation succeeded (" + first.id + ": " + first.error.value_or("unknown") + ")");
        }
        return r;
    });
    res.records = run.records.size();
    res.succeeded = run.succeeded;
    res.failed = run.failed;
    res.cache_hits = run.cache_hits;
    res.network_calls = client.network_calls();

    std::optional<std::map<std::string, double>> energy;
    if (sampler) {
        energy = stage("energy", log, [&] {
            auto trace = sampler->stop();
            std::vector<request_window> windows;
            windows.reserve(run.records.size());
            for (const auto& g : run.records) windows.push_back({g.id, g.start, g.end});
            auto shares = attribute(trace, windows, cfg.energy.attribution);
            res.energy_trace = dir / "energy_trace.csv";
            res.energy_map = dir / "energy.json";
            write_trace_csv(trace, *res.energy_trace);
            write_energy_map(shares, *res.energy_map);
            return shares;
        });
    }

    json artifacts = {{"run", res.run_file.filename().string()},
                      {"timing", timing_path(res.run_file).filename().string()}};
    if (res.energy_trace) {
        artifacts["energy_trace"] = res.energy_trace->filename().string();
        artifacts["energy_map"] = res.energy_map->filename().string();
    }
    std::optional<std::size_t> excluded;
    if (until == pipeline_until::report) {
        auto scored = stage("score", log, [&] {
            score_options opts;
            opts.scheme = cfg.scheme;
            auto s = score_run(run.records, data, energy ? &*energy : nullptr, opts);
            write_scores(s.cards, res.scores);
            return s;
        });
        excluded = scored.excluded;
        stage("report", log, [&] {
            auto rows = aggregate(scored.cards, {dimension::model, dimension::dataset, dimension::strategy});
            write_text(res.report_md, render(rows, report_format::markdown_table));
            write_text(res.report_csv, render(rows, report_format::csv));
        });
        artifacts["scores"] = res.scores.filename().string();
        artifacts["report_md"] = res.report_md.filename().string();
        artifacts["report_csv"] = res.report_csv.filename().string();
    }

    stage("manifest", log, [&] {
        json manifest = {
            {"tool", "terse"},
            {"version", version()},
            {"config_hash", config_hash(cfg)},
            {"config", json::parse(canonical_json(cfg))},
            {"corpus_sha256", sha256_hex(detail::slurp(cfg.corpus))},
            {"records", res.records},
            {"succeeded", res.succeeded},
            {"failed", res.failed},
            {"artifacts", artifacts},
        };
        if (excluded) manifest["excluded_from_scores"] = *excluded;
        if (cfg.train_pool) manifest["train_pool_sha256"] = sha256_hex(detail::slurp(*cfg.train_pool));
        if (cfg.length_model) manifest["length_model_sha256"] = sha256_hex(detail::slurp(*cfg.length_model));
        write_text(res.manifest, manifest.dump(2) + "\n");
    });
    return res;
}

}  // namespace terse
