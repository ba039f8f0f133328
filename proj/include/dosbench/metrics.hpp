#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

// Post-hoc metric computation over request traces: throughput binning,
// expected-throughput clipping, attacker's gain, throttled time, latency
// summaries and RMSPE stability. Everything here is a pure function of its
// inputs and safe to call concurrently.

namespace dosbench {

using Nanos = std::int64_t; // monotonic clock, nanoseconds

inline constexpr Nanos kNanosPerSecond = 1'000'000'000;

enum class Stream { measurement, attack };

enum class RequestStatus {
    ok,              // response received, HTTP code in http_code
    transport_error, // connect/send/recv failure, no response
    unanswered,      // no response by window end (or per-request timeout)
};

struct RequestRecord {
    Stream stream = Stream::measurement;
    std::uint64_t seq = 0; // per-stream ordinal
    Nanos send_ns = 0;
    std::optional<Nanos> recv_ns; // absent for drops
    RequestStatus status = RequestStatus::ok;
    int http_code = 0;

    // recv - send; absent when no response arrived
    std::optional<Nanos> latency_ns() const {
        if (!recv_ns) return std::nullopt;
        return *recv_ns - send_ns;
    }
    bool completed() const { return recv_ns.has_value(); }
};

// Responses received per whole second of the measurement window. Bins hold
// counts for single runs; they are doubles so that bin-wise means of several
// runs (aggregation, calibrated baselines) fit the same shape.
struct ThroughputSeries {
    Nanos window_start = 0;
    std::vector<double> bins;

    int duration_s() const { return static_cast<int>(bins.size()); }
    double sum() const;
};

// Throughput the observer would see in non-attack conditions: either the
// nominal measurement rate (unsaturated server) or a bin-wise baseline
// averaged from non-attack runs.
class ExpectedThroughput {
public:
    static ExpectedThroughput constant_rate(double requests_per_second);
    static ExpectedThroughput calibrated(ThroughputSeries baseline);

    bool is_constant() const { return constant_.has_value(); }
    // expected responses in second i of the window
    double at(int second) const;
    // duration in seconds; <0 means "any" (constant mode)
    int duration_s() const;
    double constant_value() const { return *constant_; }

private:
    ExpectedThroughput() = default;
    std::optional<double> constant_;
    ThroughputSeries baseline_;
};

struct GainResult {
    double gain = 0;            // requests "taken" from the observer
    int domain_begin_s = 0;     // inclusive, seconds from window start
    int domain_end_s = 0;       // exclusive
    double theoretical_max = 0; // sum of expected over the domain
};

struct LatencyBox {
    double min_ms = 0;
    double q1_ms = 0;
    double median_ms = 0;
    double q3_ms = 0;
    double p95_ms = 0;
    double max_ms = 0;
    int outliers = 0; // beyond 1.5x IQR whiskers
    int count = 0;
};

struct LatencySummary {
    // one box per second of the window, keyed by send time; empty when no
    // request sent in that second completed
    std::vector<std::optional<LatencyBox>> per_second;
    double global_median_ms = 0;
    double global_p95_ms = 0;
    std::size_t completed = 0;
    std::size_t dropped = 0; // transport errors + unanswered
};

struct ThrottleBand {
    std::string label; // "90-76", "75-51", ..., "<10"
    double hi;         // upper threshold fraction (exclusive side)
    double lo;         // lower threshold fraction; 0 for the lowest band
    int seconds;
};

// Count measurement-stream responses into per-second bins. Records outside
// [window_start, window_start + duration) and attack-stream records are
// ignored; drops contribute nothing.
ThroughputSeries bin_throughput(std::span<const RequestRecord> records,
                                Nanos window_start, int duration_s);

// Pointwise min(actual, expected): the actual throughput upper-bounded by the
// expected one, which removes post-attack compensation spikes.
ThroughputSeries bound_actual(const ThroughputSeries& actual,
                              const ExpectedThroughput& expected);

// Area between expected and bounded-actual throughput over
// [domain_begin_s, domain_end_s) — seconds relative to window start.
// Realized as an exact per-second sum.
GainResult attackers_gain(const ThroughputSeries& actual,
                          const ExpectedThroughput& expected,
                          int domain_begin_s, int domain_end_s);

// Number of whole seconds in the window with actual < p * expected (strict).
// p in (0, 1]. Thresholds are quantized to ppm so integer-valued series
// compare exactly.
int throttled_time(const ThroughputSeries& actual,
                   const ExpectedThroughput& expected, double p);

// Decompose throttled time into bands between consecutive thresholds.
// thresholds must be strictly descending, e.g. {0.9, 0.75, 0.5, 0.25, 0.1}.
// band(hi, lo) = T_hi - T_lo; the lowest band is T_min itself.
std::vector<ThrottleBand> throttled_bands(const ThroughputSeries& actual,
                                          const ExpectedThroughput& expected,
                                          std::span<const double> thresholds);

// Per-second latency boxes (grouped by send second) and global percentiles
// over completed measurement-stream records. Percentiles use nearest-rank.
LatencySummary latency_stats(std::span<const RequestRecord> records,
                             Nanos window_start, int duration_s);

// sqrt(mean(((observed_i - true_value)/true_value)^2))
double rmspe(std::span<const double> observed, double true_value);

// Nearest-rank percentile of a sorted sample: value at rank ceil(frac * n).
double percentile_nearest_rank(std::span<const double> sorted, double frac);

} // namespace dosbench
