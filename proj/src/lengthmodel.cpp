#include "terse/lengthmodel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "httplib.h"
#include "jsonl.hpp"
#include "terse/error.hpp"
#include "terse/hashing.hpp"
#include "terse/tokenize.hpp"
#include "url.hpp"

namespace terse {

using detail::json;

std::size_t clamp_length(double x) {
    if (std::isnan(x)) return min_length_limit;
    double r = std::round(x);
    if (r < static_cast<double>(min_length_limit)) return min_length_limit;
    if (r > static_cast<double>(max_length_limit)) return max_length_limit;
    return static_cast<std::size_t>(r);
}

std::vector<double> featurize(const query_record& record, const feature_schema& schema) {
    static constexpr std::array<std::string_view, 7> wh = {"what", "who",  "when", "where",
                                                           "why",  "how", "which"};
    static constexpr std::array<std::string_view, 5> aux = {"is", "are", "do", "does", "can"};

    std::vector<double> f(schema.dimension(), 0.0);
    const auto qwc = static_cast<double>(count_tokens(record.question, token_scheme::whitespace));
    f[0] = 1.0;
    f[1] = qwc;
    f[2] = record.context
               ? static_cast<double>(count_tokens(*record.context, token_scheme::whitespace))
               : 0.0;
    f[3] = std::log1p(qwc);

    auto words = tokenize(record.question, token_scheme::unicode_words, true);
    if (!words.empty()) {
        const auto& lead = words.tokens.front();
        for (std::size_t i = 0; i < wh.size(); ++i) {
            if (lead == wh[i]) f[4 + i] = 1.0;
        }
        if (std::find(aux.begin(), aux.end(), lead) != aux.end()) f[11] = 1.0;
    }
    f[12] = static_cast<double>(std::count(record.question.begin(), record.question.end(), '?'));

    auto it = std::find(schema.datasets.begin(), schema.datasets.end(), record.dataset);
    if (it != schema.datasets.end()) {
        f[feature_schema::fixed_columns + static_cast<std::size_t>(it - schema.datasets.begin())] = 1.0;
    }
    return f;
}

length_model::length_model(std::vector<double> weights, feature_schema schema, double lambda,
                           metadata meta)
    : weights_(std::move(weights)), schema_(std::move(schema)), lambda_(lambda), meta_(std::move(meta)) {
    if (weights_.size() != schema_.dimension()) {
        throw schema_mismatch("weight count does not match feature dimension");
    }
    for (double w : weights_) {
        if (!std::isfinite(w)) throw error("non-finite model weight");
    }
}

length_model length_model::train(const corpus& pool, double ridge_lambda) {
    if (!(ridge_lambda >= 0) || !std::isfinite(ridge_lambda)) {
        throw error("ridge lambda must be a finite non-negative number");
    }
    feature_schema schema;
    {
        std::set<std::string> ds;
        for (const auto& r : pool.records()) ds.insert(r.dataset);
        schema.datasets.assign(ds.begin(), ds.end());
    }
    const std::size_t dim = schema.dimension();
    const std::size_t n = pool.size();
    if (n <= dim) {
        throw insufficient_data("need more than " + std::to_string(dim) + " records, got " +
                                std::to_string(n));
    }

    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim),
                                                 static_cast<Eigen::Index>(dim));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    field_hasher hasher;
    for (const auto& r : pool.records()) {
        auto f = featurize(r, schema);
        Eigen::Map<const Eigen::VectorXd> x(f.data(), static_cast<Eigen::Index>(dim));
        const auto y = static_cast<double>(word_length(r));
        gram.noalias() += x * x.transpose();
        rhs.noalias() += y * x;
        hasher.add(r.id).add(r.question).add(r.target_answer);
    }
    for (Eigen::Index i = 1; i < gram.rows(); ++i) gram(i, i) += ridge_lambda;

    Eigen::VectorXd w;
    if (ridge_lambda == 0.0) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gram);
        qr.setThreshold(1e-12);
        if (qr.rank() < gram.rows()) throw singular_system();
        w = qr.solve(rhs);
    } else {
        // Positive definite: the bias column is non-zero and every other column is penalised.
        Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
        if (ldlt.info() != Eigen::Success) throw singular_system();
        w = ldlt.solve(rhs);
    }

    std::vector<double> weights(w.data(), w.data() + w.size());
    return length_model(std::move(weights), std::move(schema), ridge_lambda,
                        metadata{hasher.hex(), n});
}

double length_model::raw(const query_record& record) const {
    auto f = featurize(record, schema_);
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) acc += weights_[i] * f[i];
    return acc;
}

std::size_t length_model::predict(const query_record& record) const { return clamp_length(raw(record)); }

void length_model::save(const std::filesystem::path& path) const {
    json j;
    j["format"] = "terse-length-model";
    j["schema_version"] = schema_.version;
    j["features"] = {"bias", "question_words", "context_words", "log1p_question_words",
                     "lead_what", "lead_who", "lead_when", "lead_where", "lead_why", "lead_how",
                     "lead_which", "lead_aux", "question_marks"};
    j["datasets"] = schema_.datasets;
    j["ridge_lambda"] = lambda_;
    // Hex floats keep predictions bit-identical after a round trip.
    json w = json::array();
    for (double v : weights_) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%a", v);
        w.push_back(buf);
    }
    j["weights"] = std::move(w);
    j["training"] = {{"pool_sha256", meta_.pool_hash}, {"records", meta_.record_count}};
    auto out = detail::open_output(path);
    out << j.dump(2) << '\n';
}

length_model length_model::load(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(detail::slurp(path));
    } catch (const json::exception& e) {
        throw parse_error(1, std::string("model file: ") + e.what());
    }
    try {
        if (j.at("format") != "terse-length-model") throw parse_error(1, "not a length model file");
        feature_schema schema;
        schema.version = j.at("schema_version").get<int>();
        if (schema.version != feature_schema::current_version) {
            throw schema_mismatch("model schema version " + std::to_string(schema.version) +
                                  " != featurizer version " +
                                  std::to_string(feature_schema::current_version));
        }
        schema.datasets = j.at("datasets").get<std::vector<std::string>>();
        std::vector<double> weights;
        for (const auto& v : j.at("weights")) {
            weights.push_back(std::strtod(v.get<std::string>().c_str(), nullptr));
        }
        metadata meta{j.at("training").at("pool_sha256").get<std::string>(),
                      j.at("training").at("records").get<std::size_t>()};
        return length_model(std::move(weights), std::move(schema), j.at("ridge_lambda").get<double>(),
                            std::move(meta));
    } catch (const json::exception& e) {
        throw parse_error(1, std::string("model file: ") + e.what());
    }
}

http_length_predictor::http_length_predictor(std::string url, std::chrono::milliseconds timeout)
    : url_(std::move(url)), timeout_(timeout) {}

std::size_t http_length_predictor::predict(const query_record& record) const {
    auto target = detail::split_url(url_);
    httplib::Client cli(target.origin);
    cli.set_connection_timeout(timeout_);
    cli.set_read_timeout(timeout_);
    json body = {{"question", record.question}};
    body["context"] = record.context ? json(*record.context) : json(nullptr);
    auto res = cli.Post(target.path.empty() ? "/" : target.path, body.dump(), "application/json");
    if (!res) {
        throw endpoint_unreachable("length predictor at " + url_ + ": " + httplib::to_string(res.error()));
    }
    if (res->status != 200) throw http_error(res->status, res->body.substr(0, 200));
    try {
        auto reply = json::parse(res->body);
        return clamp_length(reply.at("length").get<double>());
    } catch (const json::exception& e) {
        throw malformed_response(std::string("length predictor reply: ") + e.what());
    }
}

fit_quality evaluate_length_predictor(const length_predictor& model, const corpus& data) {
    fit_quality q;
    q.n = data.size();
    if (data.empty()) return q;
    double mean = 0.0;
    for (const auto& r : data.records()) mean += static_cast<double>(word_length(r));
    mean /= static_cast<double>(data.size());
    double ss_res = 0.0;
    double ss_tot = 0.0;
    double abs_err = 0.0;
    for (const auto& r : data.records()) {
        const auto y = static_cast<double>(word_length(r));
        const auto p = static_cast<double>(model.predict(r));
        abs_err += std::abs(y - p);
        ss_res += (y - p) * (y - p);
        ss_tot += (y - mean) * (y - mean);
    }
    q.mae = abs_err / static_cast<double>(q.n);
    q.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : (ss_res == 0 ? 1.0 : 0.0);
    return q;
}

}  // namespace terse
