#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dosbench/metrics.hpp"

// Open-loop, dual-stream traffic generation. Measurement requests probe the
// echo endpoint at a fixed rate for the whole window; attack requests hit the
// vulnerable endpoint at the attack bandwidth inside the attack window. Send
// times follow the plan regardless of outstanding responses.

namespace dosbench {

struct AttackSpec {
    double payload_ms = 500;   // target server-side CPU time per request
    double bandwidth = 100;    // attack requests per second
    double window_s = 5;       // attack duration
    double start_offset_s = 10; // seconds after measurement start

    void validate(double measurement_window_s) const;
};

struct RunConfig {
    double measurement_rate = 100; // requests per second
    int window_s = 60;             // measurement window
    int repetitions = 5;
    std::string target = "http://127.0.0.1:8080";
    std::uint64_t payload_q = 1;  // calibrated exponent for the attack stream
    double request_timeout_s = 0; // 0 = remaining window
    int max_inflight = 1024;      // measurement-stream connection cap
    int attack_connections = 32;  // attacker's socket budget
    std::uint64_t seed = 42;

    void validate() const;
};

struct SendEvent {
    Stream stream;
    std::uint64_t seq;        // per-stream ordinal
    Nanos at_ns;              // offset from measurement start
    std::uint64_t cache_bust; // random query token
};

// Deterministic send schedule: measurement sends at i/rate, attack sends at
// offset + j/bandwidth, merged in time order. Pure function of (config,
// attack, config.seed).
std::vector<SendEvent> plan_run(const RunConfig& config,
                                const AttackSpec& attack);

struct RawTrace {
    std::string run_id;
    RunConfig config;
    AttackSpec attack;
    Nanos window_start_mono = 0;        // CLOCK_MONOTONIC at window start
    std::int64_t window_start_wall = 0; // CLOCK_REALTIME at the same instant
    std::vector<RequestRecord> records; // sorted by send_ns
    std::map<std::string, std::string> annotations; // extra sidecar keys

    ThroughputSeries throughput() const;
    LatencySummary latency() const;
    std::size_t drop_count() const; // transport errors + unanswered
};

// Execute one run against a live target. Throws if the target is unreachable.
// `no_attack` runs the measurement stream only (baseline runs).
RawTrace execute_run(const RunConfig& config, const AttackSpec& attack,
                     const std::string& run_id, bool no_attack = false);

struct PreflightResult {
    bool pass = false;
    double achieved_rps = 0;
    double requested_rps = 0;
    ThroughputSeries baseline; // reusable as a calibrated expected throughput
};

// Short measurement-only burst; passes when achieved >= 0.95 * rate.
PreflightResult preflight_probe(const std::string& target, double rate,
                                int seconds = 5);

struct AggregatedResult {
    int runs = 0;
    ThroughputSeries mean_throughput;            // bin-wise mean across runs
    std::vector<RequestRecord> pooled_measurement;
    std::vector<ThroughputSeries> per_run;       // retained for dispersion
};

// Requires identical (rate, window) across traces.
AggregatedResult aggregate_runs(std::span<const RawTrace> traces);

// --- trace persistence (this module owns the CSV schema) -------------------
// columns: run_id,stream,seq,send_ns,recv_ns,status,latency_ns
// recv_ns and latency_ns are empty for drops; a key=value sidecar
// (<stem>.meta) holds the config, attack tuple, seed and annotations.

void write_trace_csv(const RawTrace& trace, const std::string& csv_path);
RawTrace read_trace_csv(const std::string& csv_path);

std::string trace_meta_path(const std::string& csv_path);

} // namespace dosbench
