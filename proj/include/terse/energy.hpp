#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace terse {

namespace detail {
class power_reader;
}

enum class power_source_kind { gpu, cpu_rapl, mock };

std::string_view to_string(power_source_kind k);

struct power_sample {
    double timestamp = 0.0;  // monotonic seconds
    power_source_kind source = power_source_kind::mock;
    double power_watts = 0.0;
};

/// Joules to milliwatt-hours (1 mWh = 3.6 J).
constexpr double joules_to_mwh(double joules) { return joules / 3.6; }

struct rapl_reading {
    std::uint64_t counter_microjoules = 0;
    std::uint64_t max_range_microjoules = 0;
    double timestamp = 0.0;
};

/// Average power between two RAPL counter readings, unwrapping one
/// counter overflow. Throws non_monotonic_time unless cur is later than prev.
double rapl_power(const rapl_reading& prev, const rapl_reading& cur);

/// Parses the first decimal number printed by a power query command (e.g. "87.34" or "87.34 W").
double parse_watts(std::string_view text);

/// Configuration for one power source.
struct power_source_config {
    power_source_kind kind = power_source_kind::mock;
    std::string label;
    /// gpu: shell command printing one watts value per invocation.
    std::string command;
    /// cpu_rapl: "energy_uj" and "max_energy_range_uj" files.
    std::filesystem::path energy_file;
    std::filesystem::path max_range_file;
    /// mock: constant watts, or a piecewise-linear schedule of
    /// (seconds since sampling start, watts) points held flat past the ends.
    double mock_watts = 0.0;
    std::vector<std::pair<double, double>> mock_schedule;
};

/// One power source's share of an EnergyTrace.
struct source_trace {
    std::string label;
    power_source_kind kind = power_source_kind::mock;
    std::vector<power_sample> samples;
    double integrated_mwh = 0.0;
    std::size_t failed_reads = 0;
};

struct energy_trace {
    std::vector<source_trace> sources;
    double total_mwh = 0.0;
    double window_start = 0.0;
    double window_end = 0.0;

    /// Sum of every source's interpolated power at time t.
    double power_at(double t) const;
};

/// Trapezoidal integral of a (timestamp, watts) series over [start, end] in
/// joules. Values are held flat before the first and after the last sample;
/// a single sample integrates as power times window length, none as 0.
double integrate_joules(const std::vector<power_sample>& samples, double start, double end);

/// Builds a trace from already-collected samples (integrating each source).
energy_trace make_trace(std::vector<source_trace> sources, double start, double end);

/// Background power sampler. Construction probes every source, takes an
/// initial sample and starts a sampling thread; stop() joins it, takes a final
/// sample and integrates. Individual read failures are counted, not fatal.
class sampler_handle {
  public:
    sampler_handle(std::vector<power_source_config> sources, std::chrono::duration<double> interval);
    ~sampler_handle();
    sampler_handle(const sampler_handle&) = delete;
    sampler_handle& operator=(const sampler_handle&) = delete;

    energy_trace stop();
    bool running() const { return thread_.joinable(); }

  private:
    void sample_all(double now);

    std::vector<std::unique_ptr<detail::power_reader>> sources_;
    std::vector<source_trace> traces_;
    std::chrono::duration<double> interval_;
    double start_ = 0.0;
    std::mutex mutex_;
    std::jthread thread_;
};

/// Throws no_sources_configured or source_probe_failed.
std::unique_ptr<sampler_handle> start_sampling(std::vector<power_source_config> sources,
                                               std::chrono::duration<double> interval);

enum class attribution_mode { uniform, overlap };

struct request_window {
    std::string id;
    double start = 0.0;
    double end = 0.0;
};

/// Splits a trace's energy across records.
///
/// uniform: total / number of records.
/// overlap: each segment's energy is shared equally by the windows active
/// during it; energy with no active window is shared equally by all records.
/// Throws window_out_of_range for windows outside the trace window.
std::map<std::string, double> attribute(const energy_trace& trace,
                                        const std::vector<request_window>& windows,
                                        attribution_mode mode = attribution_mode::uniform);

/// Delimited time series: "source,label,timestamp,watts".
void write_trace_csv(const energy_trace& trace, const std::filesystem::path& path);

/// {"id", "energy_mwh"} per line.
void write_energy_map(const std::map<std::string, double>& energy, const std::filesystem::path& path);
std::map<std::string, double> load_energy_map(const std::filesystem::path& path);

}  // namespace terse
