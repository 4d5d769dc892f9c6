#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "../support/temp_dir.hpp"
#include "terse/energy.hpp"
#include "terse/error.hpp"

using namespace terse;
using namespace std::chrono_literals;

namespace {

std::vector<power_sample> series(std::initializer_list<std::pair<double, double>> pts) {
    std::vector<power_sample> out;
    for (auto [t, w] : pts) out.push_back({t, power_source_kind::mock, w});
    return out;
}

energy_trace constant_trace(double watts, double start, double end) {
    source_trace s;
    s.label = "mock";
    s.samples = series({{start, watts}, {end, watts}});
    return make_trace({s}, start, end);
}

double sum(const std::map<std::string, double>& m) {
    double s = 0;
    for (const auto& [k, v] : m) s += v;
    return s;
}

}  // namespace

TEST_CASE("unit conversion and analytic integrals") {
    CHECK(joules_to_mwh(3600.0) == doctest::Approx(1000.0));
    CHECK(joules_to_mwh(integrate_joules(series({{0, 100}, {36, 100}}), 0, 36)) == doctest::Approx(1000.0));
    CHECK(joules_to_mwh(integrate_joules(series({{0, 0}, {36, 100}}), 0, 36)) == doctest::Approx(500.0));
    CHECK(integrate_joules(series({{0, 100}, {36, 100}}), 5, 5) == 0.0);
    CHECK(integrate_joules({}, 0, 10) == 0.0);
    CHECK(integrate_joules(series({{3, 50}}), 0, 10) == doctest::Approx(500.0));
    // Held flat outside the samples.
    CHECK(integrate_joules(series({{2, 10}, {4, 20}}), 0, 6) == doctest::Approx(2 * 10 + 30 + 2 * 20));
    // Sub-window of a ramp.
    CHECK(integrate_joules(series({{0, 0}, {10, 100}}), 5, 10) == doctest::Approx(375.0));
}

TEST_CASE("trace totals are the sum of sources") {
    source_trace a, b;
    a.label = "a";
    a.samples = series({{0, 10}, {10, 10}});
    b.label = "b";
    b.samples = series({{0, 0}, {10, 20}});
    auto t = make_trace({a, b}, 0, 10);
    CHECK(t.sources[0].integrated_mwh == doctest::Approx(100 / 3.6));
    CHECK(t.sources[1].integrated_mwh == doctest::Approx(100 / 3.6));
    CHECK(t.total_mwh == doctest::Approx(t.sources[0].integrated_mwh + t.sources[1].integrated_mwh));
    CHECK(t.power_at(5) == doctest::Approx(20.0));
}

TEST_CASE("rapl arithmetic") {
    CHECK(rapl_power({1'000'000, 1ULL << 32, 0.0}, {3'000'000, 1ULL << 32, 1.0}) == 2.0);
    const std::uint64_t max = 262143328850;
    // Wraparound: delta 15 uJ over 1 s.
    CHECK(rapl_power({max - 5, max, 10.0}, {10, max, 11.0}) == 15e-6);
    CHECK_THROWS_AS(rapl_power({0, max, 1.0}, {5, max, 1.0}), non_monotonic_time);
    CHECK_THROWS_AS(rapl_power({0, max, 2.0}, {5, max, 1.0}), non_monotonic_time);
}

TEST_CASE("watts parsing") {
    CHECK(parse_watts("87.34") == 87.34);
    CHECK(parse_watts("87.34 W\n") == 87.34);
    CHECK(parse_watts("power.draw [W]\n 120.5 W") == 120.5);
    CHECK_THROWS(parse_watts("N/A"));
}

TEST_CASE("mock sampler at 0.1 s for 1 s") {
    power_source_config cfg;
    cfg.kind = power_source_kind::mock;
    cfg.mock_watts = 100.0;
    auto h = start_sampling({cfg}, 100ms);
    std::this_thread::sleep_for(1s);
    auto trace = h->stop();
    REQUIRE(trace.sources.size() == 1);
    const auto n = trace.sources[0].samples.size();
    CHECK(n >= 9);
    CHECK(n <= 13);
    for (const auto& s : trace.sources[0].samples) CHECK(s.power_watts == 100.0);
    const double secs = trace.window_end - trace.window_start;
    CHECK(trace.total_mwh == doctest::Approx(joules_to_mwh(100.0 * secs)).epsilon(1e-9));
    CHECK_THROWS(h->stop());
}

TEST_CASE("sampler startup errors") {
    CHECK_THROWS_AS(start_sampling({}, 100ms), no_sources_configured);
    power_source_config rapl;
    rapl.kind = power_source_kind::cpu_rapl;
    rapl.energy_file = "/nonexistent/energy_uj";
    rapl.max_range_file = "/nonexistent/max_energy_range_uj";
    CHECK_THROWS_AS(start_sampling({rapl}, 100ms), source_probe_failed);
    power_source_config gpu;
    gpu.kind = power_source_kind::gpu;
    gpu.command = "false";
    CHECK_THROWS_AS(start_sampling({gpu}, 100ms), source_probe_failed);
}

TEST_CASE("gpu command source") {
    power_source_config gpu;
    gpu.kind = power_source_kind::gpu;
    gpu.label = "gpu0";
    gpu.command = "echo 87.34";
    auto h = start_sampling({gpu}, 50ms);
    std::this_thread::sleep_for(200ms);
    auto trace = h->stop();
    REQUIRE_FALSE(trace.sources[0].samples.empty());
    CHECK(trace.sources[0].label == "gpu0");
    for (const auto& s : trace.sources[0].samples) CHECK(s.power_watts == 87.34);
}

TEST_CASE("read failures are counted, not fatal") {
    testing::temp_dir dir;
    const auto flag = dir / "ok";
    testing::write_file(flag, "");
    power_source_config gpu;
    gpu.kind = power_source_kind::gpu;
    gpu.command = "test -f '" + flag.string() + "' && echo 50";
    auto h = start_sampling({gpu}, 50ms);
    std::filesystem::remove(flag);
    std::this_thread::sleep_for(300ms);
    auto trace = h->stop();
    CHECK(trace.sources[0].failed_reads >= 3);
    CHECK(trace.sources[0].samples.size() >= 1);
}

TEST_CASE("rapl source follows the counter") {
    testing::temp_dir dir;
    testing::write_file(dir / "max", "1000000000\n");
    testing::write_file(dir / "energy", "0\n");
    power_source_config rapl;
    rapl.kind = power_source_kind::cpu_rapl;
    rapl.energy_file = dir / "energy";
    rapl.max_range_file = dir / "max";
    auto h = start_sampling({rapl}, 50ms);
    std::this_thread::sleep_for(120ms);
    testing::write_file(dir / "energy", "500000\n");
    std::this_thread::sleep_for(120ms);
    auto trace = h->stop();
    // 0.5 J were consumed in total; RAPL power integrates back to it up to the
    // placement of the counter update between samples.
    CHECK(integrate_joules(trace.sources[0].samples, trace.window_start, trace.window_end) > 0.0);
    double joules = 0;
    const auto& s = trace.sources[0].samples;
    for (std::size_t i = 1; i < s.size(); ++i) joules += s[i].power_watts * (s[i].timestamp - s[i - 1].timestamp);
    CHECK(joules == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("uniform attribution") {
    auto t = constant_trace(100, 0, 36);
    std::vector<request_window> w;
    for (int i = 0; i < 10; ++i) w.push_back({"r" + std::to_string(i), 1.0 * i, 1.0 * i + 1});
    auto shares = attribute(t, w, attribution_mode::uniform);
    for (const auto& [id, v] : shares) CHECK(v == doctest::Approx(100.0));
    CHECK(sum(shares) == doctest::Approx(1000.0));
}

TEST_CASE("overlap attribution") {
    auto t = constant_trace(100, 0, 36);
    auto both = attribute(t, {{"a", 0, 36}, {"b", 0, 36}}, attribution_mode::overlap);
    CHECK(both["a"] == doctest::Approx(500.0));
    CHECK(both["b"] == doctest::Approx(500.0));

    auto whole = attribute(t, {{"only", 0, 36}}, attribution_mode::overlap);
    CHECK(whole["only"] == doctest::Approx(t.total_mwh));

    // a alone for 10 s, a and b together for 10 s, b alone for 6 s, 10 s idle.
    auto mixed = attribute(t, {{"a", 0, 20}, {"b", 10, 26}}, attribution_mode::overlap);
    const double per_s = 100.0 / 3.6;
    CHECK(mixed["a"] == doctest::Approx(per_s * (10 + 5 + 5)));
    CHECK(mixed["b"] == doctest::Approx(per_s * (5 + 6 + 5)));
    CHECK(sum(mixed) == doctest::Approx(t.total_mwh).epsilon(1e-6));

    CHECK_THROWS_AS(attribute(t, {{"late", 30, 40}}), window_out_of_range);
    CHECK(attribute(t, {}).empty());
}

TEST_CASE("property: attribution conserves energy") {
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        source_trace s;
        s.label = "m";
        for (int i = 0; i <= 20; ++i) s.samples.push_back({i * 0.5, power_source_kind::mock, 200 * u(rng)});
        auto t = make_trace({s}, 0, 10);
        std::vector<request_window> w;
        for (int i = 0, n = 1 + static_cast<int>(rng() % 12); i < n; ++i) {
            double a = 10 * u(rng), b = 10 * u(rng);
            w.push_back({"r" + std::to_string(i), std::min(a, b), std::max(a, b)});
        }
        for (auto mode : {attribution_mode::uniform, attribution_mode::overlap}) {
            auto shares = attribute(t, w, mode);
            CHECK(sum(shares) == doctest::Approx(t.total_mwh).epsilon(1e-6));
            for (const auto& [id, v] : shares) CHECK(v >= 0.0);
        }
    }
}

TEST_CASE("trace export and energy map round trip") {
    testing::temp_dir dir;
    auto t = constant_trace(42, 0, 2);
    write_trace_csv(t, dir / "trace.csv");
    auto csv = testing::read_file(dir / "trace.csv");
    CHECK(csv.rfind("source,label,timestamp,watts\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

    std::map<std::string, double> m = {{"a", 1.25}, {"b,c", 0.1 + 0.2}};
    write_energy_map(m, dir / "e.json");
    CHECK(load_energy_map(dir / "e.json") == m);
}
