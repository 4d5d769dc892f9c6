#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include "terse/config.hpp"

namespace terse {

/// Library version string.
std::string_view version();

struct pipeline_result {
    std::filesystem::path run_file;
    std::filesystem::path scores;
    std::filesystem::path report_md;
    std::filesystem::path report_csv;
    std::filesystem::path manifest;
    std::optional<std::filesystem::path> energy_trace;
    std::optional<std::filesystem::path> energy_map;
    std::size_t records = 0;
    std::size_t succeeded = 0;
    std::size_t failed = 0;
    std::size_t cache_hits = 0;
    /// Generation requests actually sent to the endpoint.
    std::size_t network_calls = 0;
};

enum class pipeline_until { run, report };

/// Runs validate, load, index, predictor, run (bracketed by energy sampling
/// when sources are configured), energy, score and report, writing every
/// artifact under cfg.output_dir plus manifest.json. The first fatal failure
/// is rethrown as stage_error naming the stage; files already written stay.
/// A run where every generation failed is fatal at stage "run".
/// pipeline_until::run stops after the energy stage (manifest still written).
pipeline_result run_pipeline(const run_config& cfg, std::ostream* log = nullptr,
                             pipeline_until until = pipeline_until::report);

}  // namespace terse
