#include "terse/energy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <set>

#include "jsonl.hpp"
#include "terse/error.hpp"
#include "terse/clock.hpp"

namespace terse {

using detail::json;

std::string_view to_string(power_source_kind k) {
    switch (k) {
        case power_source_kind::gpu: return "gpu";
        case power_source_kind::cpu_rapl: return "cpu_rapl";
        case power_source_kind::mock: return "mock";
    }
    return "mock";
}

double rapl_power(const rapl_reading& prev, const rapl_reading& cur) {
    const double dt = cur.timestamp - prev.timestamp;
    if (!(dt > 0)) throw non_monotonic_time();
    std::uint64_t delta = 0;
    if (cur.counter_microjoules >= prev.counter_microjoules) {
        delta = cur.counter_microjoules - prev.counter_microjoules;
    } else {
        if (cur.max_range_microjoules == 0) throw error("RAPL counter wrapped with unknown range");
        delta = cur.max_range_microjoules - prev.counter_microjoules + cur.counter_microjoules;
    }
    return static_cast<double>(delta) / dt / 1e6;
}

double parse_watts(std::string_view text) {
    std::string s(text);
    const char* p = s.c_str();
    // First number in the output; header lines such as "power.draw [W]" are skipped.
    for (; *p != '\0'; ++p) {
        const bool starts = std::isdigit(static_cast<unsigned char>(*p)) ||
                            (*p == '.' && std::isdigit(static_cast<unsigned char>(p[1])));
        if (!starts) continue;
        char* end = nullptr;
        const double v = std::strtod(p, &end);
        if (end != p && std::isfinite(v)) return v;
    }
    throw error("no power value in command output: '" + s + "'");
}

namespace {

double interpolate(const std::vector<power_sample>& s, double t) {
    if (t <= s.front().timestamp) return s.front().power_watts;
    if (t >= s.back().timestamp) return s.back().power_watts;
    auto it = std::upper_bound(s.begin(), s.end(), t,
                               [](double v, const power_sample& p) { return v < p.timestamp; });
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double span = hi.timestamp - lo.timestamp;
    if (span <= 0) return hi.power_watts;
    const double w = (t - lo.timestamp) / span;
    return lo.power_watts + w * (hi.power_watts - lo.power_watts);
}

}  // namespace

double integrate_joules(const std::vector<power_sample>& samples, double start, double end) {
    if (samples.empty() || !(end > start)) return 0.0;
    if (samples.size() == 1) return samples.front().power_watts * (end - start);
    std::vector<double> points{start};
    for (const auto& s : samples) {
        if (s.timestamp > start && s.timestamp < end) points.push_back(s.timestamp);
    }
    points.push_back(end);
    double joules = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        const double a = points[i - 1];
        const double b = points[i];
        joules += 0.5 * (interpolate(samples, a) + interpolate(samples, b)) * (b - a);
    }
    return joules;
}

double energy_trace::power_at(double t) const {
    double p = 0.0;
    for (const auto& s : sources) {
        if (!s.samples.empty()) p += interpolate(s.samples, t);
    }
    return p;
}

energy_trace make_trace(std::vector<source_trace> sources, double start, double end) {
    energy_trace t;
    t.window_start = start;
    t.window_end = std::max(start, end);
    for (auto& s : sources) {
        s.integrated_mwh = joules_to_mwh(integrate_joules(s.samples, t.window_start, t.window_end));
        t.total_mwh += s.integrated_mwh;
    }
    t.sources = std::move(sources);
    return t;
}

// ---------------------------------------------------------------------------
// sources

namespace detail {

class power_reader {
  public:
    virtual ~power_reader() = default;
    /// Watts at `now`, or nullopt when no value is available yet. Throws on read failure.
    virtual std::optional<double> read(double now) = 0;
};

}  // namespace detail

namespace {

std::uint64_t read_counter(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::uint64_t v = 0;
    if (!in || !(in >> v)) throw error("cannot read " + path.string());
    return v;
}

class mock_reader : public detail::power_reader {
  public:
    mock_reader(const power_source_config& cfg, double origin)
        : watts_(cfg.mock_watts), schedule_(cfg.mock_schedule), origin_(origin) {
        std::sort(schedule_.begin(), schedule_.end());
    }

    std::optional<double> read(double now) override {
        if (schedule_.empty()) return watts_;
        const double t = now - origin_;
        if (t <= schedule_.front().first) return schedule_.front().second;
        if (t >= schedule_.back().first) return schedule_.back().second;
        auto it = std::upper_bound(schedule_.begin(), schedule_.end(), t,
                                   [](double v, const auto& p) { return v < p.first; });
        const auto& [t1, w1] = *it;
        const auto& [t0, w0] = *(it - 1);
        return w0 + (t - t0) / (t1 - t0) * (w1 - w0);
    }

  private:
    double watts_;
    std::vector<std::pair<double, double>> schedule_;
    double origin_;
};

class command_reader : public detail::power_reader {
  public:
    explicit command_reader(std::string command) : command_(std::move(command)) {}

    std::optional<double> read(double) override {
        FILE* pipe = ::popen(command_.c_str(), "r");
        if (pipe == nullptr) throw error("cannot run power command: " + command_);
        std::string output;
        std::array<char, 256> buf{};
        while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe) != nullptr) output += buf.data();
        const int status = ::pclose(pipe);
        if (status != 0) throw error("power command failed: " + command_);
        return parse_watts(output);
    }

  private:
    std::string command_;
};

class rapl_reader : public detail::power_reader {
  public:
    rapl_reader(std::filesystem::path energy, std::filesystem::path max_range)
        : energy_(std::move(energy)), max_range_(read_counter(max_range)) {
        if (max_range_ == 0) throw error("RAPL max range is zero");
    }

    std::optional<double> read(double now) override {
        rapl_reading cur{read_counter(energy_), max_range_, now};
        if (cur.counter_microjoules > max_range_) throw error("RAPL counter exceeds its max range");
        std::optional<double> watts;
        if (prev_) watts = rapl_power(*prev_, cur);
        prev_ = cur;
        return watts;
    }

  private:
    std::filesystem::path energy_;
    std::uint64_t max_range_;
    std::optional<rapl_reading> prev_;
};

}  // namespace

// ---------------------------------------------------------------------------
// sampler

sampler_handle::sampler_handle(std::vector<power_source_config> sources,
                               std::chrono::duration<double> interval)
    : interval_(interval) {
    if (sources.empty()) throw no_sources_configured();
    if (!(interval.count() > 0)) throw error("sampling interval must be positive");
    start_ = monotonic_seconds();
    for (auto& cfg : sources) {
        std::unique_ptr<detail::power_reader> reader;
        try {
            switch (cfg.kind) {
                case power_source_kind::mock:
                    reader = std::make_unique<mock_reader>(cfg, start_);
                    break;
                case power_source_kind::gpu:
                    if (cfg.command.empty()) throw error("gpu source needs a command");
                    reader = std::make_unique<command_reader>(cfg.command);
                    reader->read(start_);
                    break;
                case power_source_kind::cpu_rapl:
                    reader = std::make_unique<rapl_reader>(cfg.energy_file, cfg.max_range_file);
                    break;
            }
        } catch (const error& e) {
            throw source_probe_failed(std::string(to_string(cfg.kind)) + " source: " + e.what());
        }
        source_trace t;
        t.kind = cfg.kind;
        t.label = cfg.label.empty() ? std::string(to_string(cfg.kind)) : cfg.label;
        traces_.push_back(std::move(t));
        sources_.push_back(std::move(reader));
    }
    // RAPL establishes its baseline here; a read failure at this point is a probe failure.
    for (std::size_t i = 0; i < sources_.size(); ++i) {
        try {
            if (auto w = sources_[i]->read(start_)) traces_[i].samples.push_back({start_, traces_[i].kind, *w});
        } catch (const error& e) {
            throw source_probe_failed(traces_[i].label + ": " + e.what());
        }
    }

    thread_ = std::jthread([this](std::stop_token stop) {
        std::mutex m;
        std::condition_variable_any cv;
        for (std::size_t tick = 1;; ++tick) {
            const auto deadline = std::chrono::steady_clock::time_point(
                std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                    std::chrono::duration<double>(start_ + static_cast<double>(tick) * interval_.count())));
            std::unique_lock lock(m);
            if (cv.wait_until(lock, stop, deadline, [] { return false; }); stop.stop_requested()) return;
            lock.unlock();
            sample_all(monotonic_seconds());
        }
    });
}

sampler_handle::~sampler_handle() {
    if (thread_.joinable()) {
        thread_.request_stop();
        thread_.join();
    }
}

void sampler_handle::sample_all(double now) {
    for (std::size_t i = 0; i < sources_.size(); ++i) {
        std::optional<double> w;
        bool failed = false;
        try {
            w = sources_[i]->read(now);
        } catch (const std::exception&) {
            failed = true;
        }
        std::lock_guard lock(mutex_);
        auto& t = traces_[i];
        if (failed) {
            ++t.failed_reads;
        } else if (w && (t.samples.empty() || now > t.samples.back().timestamp)) {
            t.samples.push_back({now, t.kind, *w});
        }
    }
}

energy_trace sampler_handle::stop() {
    if (!thread_.joinable()) throw error("sampler already stopped");
    thread_.request_stop();
    thread_.join();
    const double end = monotonic_seconds();
    sample_all(end);
    std::lock_guard lock(mutex_);
    return make_trace(traces_, start_, end);
}

std::unique_ptr<sampler_handle> start_sampling(std::vector<power_source_config> sources,
                                               std::chrono::duration<double> interval) {
    return std::make_unique<sampler_handle>(std::move(sources), interval);
}

// ---------------------------------------------------------------------------
// attribution

std::map<std::string, double> attribute(const energy_trace& trace,
                                        const std::vector<request_window>& windows,
                                        attribution_mode mode) {
    constexpr double eps = 1e-9;
    std::map<std::string, double> out;
    if (windows.empty()) return out;
    for (const auto& w : windows) {
        if (w.end < w.start || w.start < trace.window_start - eps || w.end > trace.window_end + eps) {
            throw window_out_of_range("window of " + w.id + " lies outside the trace window");
        }
        out[w.id] = 0.0;
    }
    if (mode == attribution_mode::uniform) {
        const double share = trace.total_mwh / static_cast<double>(windows.size());
        for (const auto& w : windows) out[w.id] += share;
        return out;
    }

    std::set<double> cuts{trace.window_start, trace.window_end};
    for (const auto& s : trace.sources) {
        for (const auto& p : s.samples) {
            if (p.timestamp > trace.window_start && p.timestamp < trace.window_end) cuts.insert(p.timestamp);
        }
    }
    for (const auto& w : windows) {
        cuts.insert(std::clamp(w.start, trace.window_start, trace.window_end));
        cuts.insert(std::clamp(w.end, trace.window_start, trace.window_end));
    }
    std::vector<double> points(cuts.begin(), cuts.end());
    double unattributed = 0.0;
    std::vector<std::size_t> active;
    for (std::size_t i = 1; i < points.size(); ++i) {
        const double a = points[i - 1];
        const double b = points[i];
        const double mwh = joules_to_mwh(0.5 * (trace.power_at(a) + trace.power_at(b)) * (b - a));
        active.clear();
        for (std::size_t k = 0; k < windows.size(); ++k) {
            if (windows[k].start <= a && windows[k].end >= b) active.push_back(k);
        }
        if (active.empty()) {
            unattributed += mwh;
        } else {
            const double share = mwh / static_cast<double>(active.size());
            for (auto k : active) out[windows[k].id] += share;
        }
    }
    const double idle_share = unattributed / static_cast<double>(windows.size());
    for (const auto& w : windows) out[w.id] += idle_share;
    return out;
}

void write_trace_csv(const energy_trace& trace, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    out << "source,label,timestamp,watts\n";
    char buf[128];
    for (const auto& s : trace.sources) {
        for (const auto& p : s.samples) {
            std::snprintf(buf, sizeof buf, "%.6f,%.6f", p.timestamp - trace.window_start, p.power_watts);
            out << to_string(s.kind) << ',' << s.label << ',' << buf << '\n';
        }
    }
}

void write_energy_map(const std::map<std::string, double>& energy, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    for (const auto& [id, mwh] : energy) {
        out << json{{"id", id}, {"energy_mwh", mwh}}.dump() << '\n';
    }
}

std::map<std::string, double> load_energy_map(const std::filesystem::path& path) {
    std::map<std::string, double> out;
    detail::for_each_line(path, [&](std::string_view line, std::size_t no) {
        json j = detail::parse_json_line(line, no);
        try {
            out[j.at("id").get<std::string>()] = j.at("energy_mwh").get<double>();
        } catch (const json::exception& e) {
            throw parse_error(no, e.what());
        }
    });
    return out;
}

}  // namespace terse
