#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "terse/corpus.hpp"

namespace terse {

inline constexpr std::size_t min_length_limit = 1;
inline constexpr std::size_t max_length_limit = 2000;

/// round(x) clamped to [1, 2000]. Non-finite input clamps to the nearest bound.
std::size_t clamp_length(double x);

/// Column layout of the feature vector:
///   0      bias (1)
///   1      question word count
///   2      context word count
///   3      log(1 + question word count)
///   4..11  leading word is what / who / when / where / why / how / which / is|are|do|does|can
///   12     number of '?' characters
///   13..   one-hot over `datasets`
struct feature_schema {
    static constexpr int current_version = 1;
    static constexpr std::size_t fixed_columns = 13;

    int version = current_version;
    std::vector<std::string> datasets;

    std::size_t dimension() const { return fixed_columns + datasets.size(); }
    bool operator==(const feature_schema&) const = default;
};

std::vector<double> featurize(const query_record& record, const feature_schema& schema);

/// Anything that turns a query into the X of "Answer within X words."
class length_predictor {
  public:
    virtual ~length_predictor() = default;
    virtual std::size_t predict(const query_record& record) const = 0;
};

/// Closed-form ridge regression from hand features to gold answer word counts.
/// The bias column is not penalised.
class length_model : public length_predictor {
  public:
    struct metadata {
        std::string pool_hash;
        std::size_t record_count = 0;
        bool operator==(const metadata&) const = default;
    };

    /// Throws insufficient_data when the pool is not larger than the feature
    /// dimension and singular_system when the normal equations are rank deficient.
    static length_model train(const corpus& pool, double ridge_lambda = 1.0);

    /// Unclamped linear response.
    double raw(const query_record& record) const;
    std::size_t predict(const query_record& record) const override;

    const std::vector<double>& weights() const { return weights_; }
    const feature_schema& schema() const { return schema_; }
    double ridge_lambda() const { return lambda_; }
    const metadata& meta() const { return meta_; }

    void save(const std::filesystem::path& path) const;
    /// Throws schema_mismatch when the file was written by another feature schema.
    static length_model load(const std::filesystem::path& path);

    length_model(std::vector<double> weights, feature_schema schema, double lambda, metadata meta);

  private:
    std::vector<double> weights_;
    feature_schema schema_;
    double lambda_ = 1.0;
    metadata meta_;
};

/// Delegates to an HTTP service: POST {"question","context"} -> {"length": real}.
class http_length_predictor : public length_predictor {
  public:
    explicit http_length_predictor(std::string url,
                                   std::chrono::milliseconds timeout = std::chrono::seconds(30));
    std::size_t predict(const query_record& record) const override;

  private:
    std::string url_;
    std::chrono::milliseconds timeout_;
};

struct fit_quality {
    double mae = 0.0;
    double r2 = 0.0;
    std::size_t n = 0;
};

/// MAE and R² of predictor output against whitespace word counts of targets.
fit_quality evaluate_length_predictor(const length_predictor& model, const corpus& data);

}  // namespace terse
