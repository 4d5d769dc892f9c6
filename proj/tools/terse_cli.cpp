#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "terse/categories.hpp"
#include "terse/config.hpp"
#include "terse/corpus.hpp"
#include "terse/energy.hpp"
#include "terse/error.hpp"
#include "terse/lengthmodel.hpp"
#include "terse/llm_client.hpp"
#include "terse/metrics.hpp"
#include "terse/pipeline.hpp"
#include "terse/prompt.hpp"
#include "terse/report.hpp"
#include "terse/retrieval.hpp"

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
        return;
    }
    if (out_path.find('/') != std::string::npos) fs::create_directories(fs::path(out_path).parent_path());
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw terse::error("cannot write " + out_path);
    out << text;
}

std::string join_findings(const std::vector<std::string>& findings) {
    std::string s;
    for (const auto& f : findings) s += "  " + f + "\n";
    return s;
}

std::string fmt(double v, int decimals) { return terse::format_fixed(v, decimals); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"terse: response-length and energy benchmark harness for LLM endpoints"};
    app.set_version_flag("--version", std::string(terse::version()));
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Normalize dataset dumps into a corpus file");
    std::vector<std::string> ingest_in;
    std::vector<std::string> ingest_labels;
    std::string ingest_format = "canonical";
    std::string ingest_split = "test";
    std::string ingest_out;
    std::size_t sample_n = 0;
    std::string sample_split_name = "test";
    std::size_t pool_per_dataset = 0;
    std::uint64_t ingest_seed = 0;
    ingest->add_option("--in", ingest_in, "Input file(s)")->required();
    ingest->add_option("--dataset", ingest_labels, "Dataset label per input (default: file stem)");
    ingest->add_option("--format", ingest_format, "canonical|dolly|gooaq|msmarco|narrativeqa|tweetqa");
    ingest->add_option("--split", ingest_split, "Split for records without one");
    ingest->add_option("--sample", sample_n, "Keep a seeded sample of N records from --sample-split");
    ingest->add_option("--sample-split", sample_split_name, "Split to sample from");
    ingest->add_option("--pool-per-dataset", pool_per_dataset,
                       "Build a training pool of N train records per input instead");
    ingest->add_option("--seed", ingest_seed, "Sampling seed");
    ingest->add_option("--out", ingest_out, "Output corpus file")->required();

    // index
    auto* index = app.add_subcommand("index", "BM25+ index over a training pool");
    index->require_subcommand(1);
    auto* index_build = index->add_subcommand("build", "Build an index");
    std::string pool_path, index_out, index_path, query_text;
    std::size_t query_k = 10;
    index_build->add_option("--pool", pool_path, "Training pool corpus")->required();
    index_build->add_option("--out", index_out, "Index file")->required();
    auto* index_query = index->add_subcommand("query", "Top-k neighbours of a query");
    index_query->add_option("--index", index_path, "Index file")->required();
    index_query->add_option("--text", query_text, "Query text")->required();
    index_query->add_option("--k", query_k, "Neighbour count");

    // predict-length
    auto* predict = app.add_subcommand("predict-length", "Response length regressor");
    predict->require_subcommand(1);
    auto* predict_train = predict->add_subcommand("train", "Fit the ridge regressor");
    std::string model_out, model_path, eval_corpus;
    double lambda = 1.0;
    predict_train->add_option("--pool", pool_path, "Training pool corpus")->required();
    predict_train->add_option("--out", model_out, "Model file")->required();
    predict_train->add_option("--lambda", lambda, "Ridge penalty");
    auto* predict_eval = predict->add_subcommand("eval", "MAE and R² on a corpus");
    predict_eval->add_option("--model", model_path, "Model file")->required();
    predict_eval->add_option("--corpus", eval_corpus, "Evaluation corpus")->required();

    // prompt
    auto* prompt = app.add_subcommand("prompt", "Prompt construction");
    prompt->require_subcommand(1);
    auto* preview = prompt->add_subcommand("preview", "Print the exact prompt for one record");
    std::string preview_corpus, preview_id, preview_strategy = "default";
    std::string preview_pool, preview_index, preview_model;
    preview->add_option("--corpus", preview_corpus, "Corpus holding the record")->required();
    preview->add_option("--record", preview_id, "Record id")->required();
    preview->add_option("--strategy", preview_strategy, "default|brief|minans|maddnored|incontext|limit:<source>");
    preview->add_option("--pool", preview_pool, "Training pool (SIMILARBM, INCONTEXT)");
    preview->add_option("--index", preview_index, "Prebuilt index (otherwise built from --pool)");
    preview->add_option("--model", preview_model, "Length model (PREDRESLEN)");

    // run / pipeline
    std::string config_path;
    auto* run = app.add_subcommand("run", "Generate responses for a config (no scoring)");
    run->add_option("--config", config_path, "Run config file")->required()->check(CLI::ExistingFile);
    auto* pipeline = app.add_subcommand("pipeline", "Run, score and report a config end to end");
    pipeline->add_option("--config", config_path, "Run config file")->required()->check(CLI::ExistingFile);
    bool validate_only = false;
    pipeline->add_flag("--validate", validate_only, "Only print config findings");

    // score
    auto* score = app.add_subcommand("score", "Per-sample metrics for a run file");
    std::string run_path, score_corpus, energy_path, scores_out;
    bool score_json = false;
    std::string open_delim = "<think>", close_delim = "</think>";
    score->add_option("--run", run_path, "Run file")->required();
    score->add_option("--corpus", score_corpus, "Corpus the run was generated from")->required();
    score->add_option("--energy", energy_path, "Per-record energy map (mWh)");
    score->add_option("--out", scores_out, "Score file");
    score->add_option("--think-open", open_delim, "Reasoning span opener");
    score->add_option("--think-close", close_delim, "Reasoning span closer");
    score->add_flag("--json", score_json, "Print score cards as a JSON array on stdout");

    // agreement / catdist
    auto* agreement = app.add_subcommand("agreement", "Pairwise F-measure between two annotators");
    std::string ann_a, ann_b;
    bool agreement_json = false;
    agreement->add_option("--a", ann_a, "First annotation file")->required();
    agreement->add_option("--b", ann_b, "Second annotation file")->required();
    agreement->add_flag("--json", agreement_json, "JSON output");
    auto* catdist = app.add_subcommand("catdist", "Category distribution of annotations");
    std::string ann_path, catdist_group = "overall", catdist_out;
    catdist->add_option("--annotations", ann_path, "Annotation file")->required();
    catdist->add_option("--group-by", catdist_group, "overall|model|dataset");
    catdist->add_option("--out", catdist_out, "Write tidy CSV here instead of stdout");

    // report
    auto* report = app.add_subcommand("report", "Aggregate score files into tables");
    std::vector<std::string> score_files;
    std::string group_by = "model,dataset,strategy", report_format_name = "markdown_table", report_out;
    std::string report_kind = "summary";
    report->add_option("--scores", score_files, "Score files")->required();
    report->add_option("--group-by", group_by, "Comma-separated dimensions");
    report->add_option("--format", report_format_name, "markdown_table|csv");
    report->add_option("--table", report_kind, "summary|reduction|lengths")
        ->check(CLI::IsMember({"summary", "reduction", "lengths"}));
    report->add_option("--out", report_out, "Output file");

    // autocat
    auto* autocat = app.add_subcommand("autocat", "Model-based categorization scored against gold annotations");
    std::string gold_path, autocat_corpus, autocat_base_url, autocat_model, autocat_out, autocat_cache;
    autocat->add_option("--gold", gold_path, "Gold annotation file")->required();
    autocat->add_option("--corpus", autocat_corpus, "Corpus providing the questions");
    autocat->add_option("--base-url", autocat_base_url, "OpenAI-compatible endpoint")->required();
    autocat->add_option("--model", autocat_model, "Model name")->required();
    autocat->add_option("--cache", autocat_cache, "Response cache file");
    autocat->add_option("--out", autocat_out, "Write predicted annotations here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            std::vector<terse::corpus> inputs;
            const auto fmt_kind = terse::parse_source_format(ingest_format);
            for (std::size_t i = 0; i < ingest_in.size(); ++i) {
                const auto label = i < ingest_labels.size() ? ingest_labels[i] : fs::path(ingest_in[i]).stem().string();
                inputs.push_back(terse::ingest_source(ingest_in[i], fmt_kind, label, terse::parse_split(ingest_split)));
            }
            terse::corpus result;
            if (pool_per_dataset > 0) {
                result = terse::build_train_pool(inputs, pool_per_dataset, ingest_seed);
            } else {
                if (inputs.size() != 1) throw terse::error("several --in files need --pool-per-dataset");
                result = std::move(inputs.front());
                if (sample_n > 0) {
                    result = terse::sample_split(result, terse::parse_split(sample_split_name), sample_n, ingest_seed);
                }
            }
            terse::write_corpus(result, ingest_out);
            std::cerr << "wrote " << result.size() << " records to " << ingest_out << "\n";
        } else if (*index_build) {
            auto idx = terse::bm25_index::build(terse::load_corpus(pool_path));
            idx.save(index_out);
            std::cerr << "indexed " << idx.doc_count() << " documents\n";
        } else if (*index_query) {
            auto idx = terse::bm25_index::load(index_path);
            for (const auto& d : idx.top_k(query_text, query_k)) std::cout << d.id << '\t' << fmt(d.score, 6) << '\n';
        } else if (*predict_train) {
            auto model = terse::length_model::train(terse::load_corpus(pool_path), lambda);
            model.save(model_out);
            auto q = terse::evaluate_length_predictor(model, terse::load_corpus(pool_path));
            std::cerr << "train MAE " << fmt(q.mae, 3) << ", R2 " << fmt(q.r2, 3) << " on " << q.n << " records\n";
        } else if (*predict_eval) {
            auto model = terse::length_model::load(model_path);
            auto q = terse::evaluate_length_predictor(model, terse::load_corpus(eval_corpus));
            std::cout << "n\t" << q.n << "\nmae\t" << fmt(q.mae, 3) << "\nr2\t" << fmt(q.r2, 4) << '\n';
        } else if (*preview) {
            auto data = terse::load_corpus(preview_corpus);
            const auto* rec = data.find(preview_id);
            if (rec == nullptr) throw terse::unknown_record_id(preview_id);
            std::optional<terse::corpus> pool;
            std::optional<terse::bm25_index> idx;
            std::optional<terse::length_model> model;
            if (!preview_pool.empty()) {
                pool = terse::load_corpus(preview_pool);
                idx = preview_index.empty() ? terse::bm25_index::build(*pool) : terse::bm25_index::load(preview_index);
            }
            if (!preview_model.empty()) model = terse::length_model::load(preview_model);
            terse::prompt_deps deps{idx ? &*idx : nullptr, pool ? &*pool : nullptr, model ? &*model : nullptr};
            auto spec = terse::build_prompt(*rec, terse::parse_strategy(preview_strategy), deps);
            std::cout << spec.prompt_text << '\n';
        } else if (*run || *pipeline) {
            auto cfg = terse::load_run_config(config_path);
            auto findings = terse::validate(cfg);
            if (validate_only) {
                std::cout << join_findings(findings);
                return findings.empty() ? 0 : 2;
            }
            auto res = terse::run_pipeline(cfg, &std::cerr, *run ? terse::pipeline_until::run : terse::pipeline_until::report);
            std::cerr << res.succeeded << "/" << res.records << " generated, " << res.cache_hits << " from cache, "
                      << res.network_calls << " requests\n";
            std::cout << res.run_file.string() << '\n';
            if (*pipeline) std::cout << res.scores.string() << '\n' << res.report_md.string() << '\n';
            std::cout << res.manifest.string() << '\n';
        } else if (*score) {
            auto records = terse::load_run_file(run_path);
            auto data = terse::load_corpus(score_corpus);
            std::optional<std::map<std::string, double>> energy;
            if (!energy_path.empty()) energy = terse::load_energy_map(energy_path);
            terse::score_options opts;
            opts.open_delim = open_delim;
            opts.close_delim = close_delim;
            auto scored = terse::score_run(records, data, energy ? &*energy : nullptr, opts);
            if (!scores_out.empty()) terse::write_scores(scored.cards, scores_out);
            if (score_json) {
                json arr = json::array();
                for (const auto& c : scored.cards) arr.push_back(json::parse(terse::serialize_score_card(c)));
                std::cout << arr.dump(2) << '\n';
            } else if (scores_out.empty()) {
                for (const auto& c : scored.cards) std::cout << terse::serialize_score_card(c) << '\n';
            }
            if (scored.excluded > 0) std::cerr << scored.excluded << " failed generations excluded\n";
        } else if (*agreement) {
            auto f = terse::pairwise_f(terse::load_annotations(ann_a), terse::load_annotations(ann_b));
            if (agreement_json) {
                json j = {{"macro_f1", f.macro}, {"per_category", json::object()}};
                for (const auto& [c, v] : f.per_category) j["per_category"][std::string(terse::to_string(c))] = v;
                std::cout << j.dump(2) << '\n';
            } else {
                for (const auto& [c, v] : f.per_category) std::cout << terse::to_string(c) << '\t' << fmt(v, 3) << '\n';
                std::cout << "macro\t" << fmt(f.macro, 3) << '\n';
            }
        } else if (*catdist) {
            auto dist = terse::distribution(terse::load_annotations(ann_path), terse::parse_group_by(catdist_group));
            emit(terse::render_distribution_csv(dist), catdist_out);
        } else if (*report) {
            std::vector<terse::score_card> cards;
            for (const auto& f : score_files) {
                auto part = terse::load_scores(f);
                cards.insert(cards.end(), part.begin(), part.end());
            }
            const auto format = terse::parse_report_format(report_format_name);
            auto rows = terse::aggregate(cards, terse::parse_dimensions(group_by));
            std::string text;
            if (report_kind == "reduction") {
                text = terse::render_reductions(terse::reduction_vs_default(rows), format);
            } else if (report_kind == "lengths") {
                text = terse::render_length_table(terse::aggregate(cards, {terse::dimension::model, terse::dimension::dataset}),
                                                  format);
            } else {
                text = terse::render(rows, format);
            }
            emit(text, report_out);
        } else if (*autocat) {
            auto gold = terse::load_annotations(gold_path);
            std::optional<terse::corpus> questions;
            if (!autocat_corpus.empty()) questions = terse::load_corpus(autocat_corpus);
            terse::endpoint_config ep;
            ep.base_url = autocat_base_url;
            ep.model = autocat_model;
            std::unique_ptr<terse::response_cache> cache;
            if (!autocat_cache.empty()) cache = std::make_unique<terse::response_cache>(autocat_cache);
            terse::llm_client client(ep, terse::gen_params{}, cache.get());
            std::vector<terse::annotated_response> predicted;
            double sum = 0.0;
            std::size_t dropped = 0;
            for (const auto& g : gold) {
                std::string question;
                if (questions) {
                    if (const auto* r = questions->find(g.id)) question = r->question;
                }
                auto result = terse::auto_categorize([&](const std::string& p) { return client.complete(p); },
                                                     g.response_text, question);
                dropped += result.dropped_fragments;
                const auto n = terse::count_tokens(g.response_text, terse::token_scheme::unicode_words);
                const auto f = terse::token_f1(result.spans, g.spans, n);
                sum += f.macro;
                std::cout << g.id << '\t' << g.model << '\t' << fmt(f.macro, 3) << '\n';
                predicted.push_back({g.id, g.model, g.dataset, g.response_text, result.spans});
            }
            if (!gold.empty()) std::cout << "mean\t\t" << fmt(sum / static_cast<double>(gold.size()), 3) << '\n';
            if (dropped > 0) std::cerr << dropped << " fragments could not be aligned\n";
            if (!autocat_out.empty()) terse::write_annotations(predicted, autocat_out);
        }
    } catch (const terse::stage_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const terse::config_parse_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
