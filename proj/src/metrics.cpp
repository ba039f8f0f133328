#include "dosbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dosbench {

double ThroughputSeries::sum() const {
    return std::accumulate(bins.begin(), bins.end(), 0.0);
}

ExpectedThroughput ExpectedThroughput::constant_rate(double rps) {
    if (rps <= 0) throw std::invalid_argument("expected rate must be > 0");
    ExpectedThroughput e;
    e.constant_ = rps;
    return e;
}

ExpectedThroughput ExpectedThroughput::calibrated(ThroughputSeries baseline) {
    if (baseline.bins.empty())
        throw std::invalid_argument("calibrated baseline must be non-empty");
    for (double b : baseline.bins)
        if (b < 0) throw std::invalid_argument("baseline bin < 0");
    ExpectedThroughput e;
    e.baseline_ = std::move(baseline);
    return e;
}

double ExpectedThroughput::at(int second) const {
    if (constant_) return *constant_;
    if (second < 0 || second >= baseline_.duration_s())
        throw std::out_of_range("second outside calibrated baseline");
    return baseline_.bins[static_cast<std::size_t>(second)];
}

int ExpectedThroughput::duration_s() const {
    return constant_ ? -1 : baseline_.duration_s();
}

ThroughputSeries bin_throughput(std::span<const RequestRecord> records,
                                Nanos window_start, int duration_s) {
    if (duration_s < 1) throw std::invalid_argument("duration must be >= 1 s");
    ThroughputSeries out;
    out.window_start = window_start;
    out.bins.assign(static_cast<std::size_t>(duration_s), 0.0);
    for (const auto& r : records) {
        if (r.stream != Stream::measurement || !r.recv_ns) continue;
        Nanos rel = *r.recv_ns - window_start;
        if (rel < 0) continue;
        Nanos bin = rel / kNanosPerSecond;
        if (bin >= duration_s) continue;
        out.bins[static_cast<std::size_t>(bin)] += 1.0;
    }
    return out;
}

static void check_alignment(const ThroughputSeries& actual,
                            const ExpectedThroughput& expected) {
    if (!expected.is_constant() &&
        expected.duration_s() != actual.duration_s())
        throw std::invalid_argument("actual/expected series are misaligned");
}

ThroughputSeries bound_actual(const ThroughputSeries& actual,
                              const ExpectedThroughput& expected) {
    check_alignment(actual, expected);
    ThroughputSeries out = actual;
    for (int i = 0; i < actual.duration_s(); ++i)
        out.bins[static_cast<std::size_t>(i)] =
            std::min(actual.bins[static_cast<std::size_t>(i)], expected.at(i));
    return out;
}

GainResult attackers_gain(const ThroughputSeries& actual,
                          const ExpectedThroughput& expected,
                          int domain_begin_s, int domain_end_s) {
    check_alignment(actual, expected);
    if (domain_begin_s < 0 || domain_end_s > actual.duration_s() ||
        domain_begin_s >= domain_end_s)
        throw std::invalid_argument("empty or out-of-window gain domain");

    double expected_sum = 0;
    double bounded_sum = 0;
    for (int i = domain_begin_s; i < domain_end_s; ++i) {
        double e = expected.at(i);
        expected_sum += e;
        bounded_sum += std::min(actual.bins[static_cast<std::size_t>(i)], e);
    }
    if (expected_sum <= 0)
        throw std::invalid_argument("expected throughput is zero over domain");

    GainResult g;
    g.gain = expected_sum - bounded_sum;
    g.domain_begin_s = domain_begin_s;
    g.domain_end_s = domain_end_s;
    g.theoretical_max = expected_sum;
    return g;
}

// threshold comparison quantized to parts-per-million; exact for
// integer-valued bins and expected rates
static bool below_threshold(double actual, double expected, std::int64_t ppm) {
    return actual * 1e6 < static_cast<double>(ppm) * expected;
}

int throttled_time(const ThroughputSeries& actual,
                   const ExpectedThroughput& expected, double p) {
    check_alignment(actual, expected);
    if (!(p > 0.0) || p > 1.0)
        throw std::invalid_argument("threshold p must be in (0, 1]");
    const std::int64_t ppm = std::llround(p * 1e6);
    int seconds = 0;
    for (int i = 0; i < actual.duration_s(); ++i)
        if (below_threshold(actual.bins[static_cast<std::size_t>(i)],
                            expected.at(i), ppm))
            ++seconds;
    return seconds;
}

std::vector<ThrottleBand> throttled_bands(const ThroughputSeries& actual,
                                          const ExpectedThroughput& expected,
                                          std::span<const double> thresholds) {
    if (thresholds.empty())
        throw std::invalid_argument("thresholds must be non-empty");
    for (std::size_t i = 0; i + 1 < thresholds.size(); ++i)
        if (!(thresholds[i] > thresholds[i + 1]))
            throw std::invalid_argument("thresholds must be strictly descending");

    std::vector<int> t(thresholds.size());
    for (std::size_t i = 0; i < thresholds.size(); ++i)
        t[i] = throttled_time(actual, expected, thresholds[i]);

    auto pct = [](double p) { return static_cast<int>(std::llround(p * 100)); };

    std::vector<ThrottleBand> bands;
    for (std::size_t i = 0; i + 1 < thresholds.size(); ++i) {
        ThrottleBand b;
        b.hi = thresholds[i];
        b.lo = thresholds[i + 1];
        b.label = std::to_string(pct(b.hi)) + "-" +
                  std::to_string(pct(b.lo) + 1);
        b.seconds = t[i] - t[i + 1];
        bands.push_back(std::move(b));
    }
    ThrottleBand lowest;
    lowest.hi = thresholds.back();
    lowest.lo = 0.0;
    lowest.label = "<" + std::to_string(pct(lowest.hi));
    lowest.seconds = t.back();
    bands.push_back(std::move(lowest));
    return bands;
}

double percentile_nearest_rank(std::span<const double> sorted, double frac) {
    if (sorted.empty()) throw std::invalid_argument("empty sample");
    if (frac <= 0) return sorted.front();
    auto rank = static_cast<std::size_t>(
        std::ceil(frac * static_cast<double>(sorted.size())));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

static LatencyBox make_box(std::vector<double>& ms) {
    std::sort(ms.begin(), ms.end());
    LatencyBox box;
    box.count = static_cast<int>(ms.size());
    box.min_ms = ms.front();
    box.max_ms = ms.back();
    box.q1_ms = percentile_nearest_rank(ms, 0.25);
    box.median_ms = percentile_nearest_rank(ms, 0.50);
    box.q3_ms = percentile_nearest_rank(ms, 0.75);
    box.p95_ms = percentile_nearest_rank(ms, 0.95);
    const double iqr = box.q3_ms - box.q1_ms;
    const double lo = box.q1_ms - 1.5 * iqr;
    const double hi = box.q3_ms + 1.5 * iqr;
    for (double v : ms)
        if (v < lo || v > hi) ++box.outliers;
    return box;
}

LatencySummary latency_stats(std::span<const RequestRecord> records,
                             Nanos window_start, int duration_s) {
    if (duration_s < 1) throw std::invalid_argument("duration must be >= 1 s");
    LatencySummary s;
    s.per_second.assign(static_cast<std::size_t>(duration_s), std::nullopt);

    std::vector<std::vector<double>> buckets(
        static_cast<std::size_t>(duration_s));
    std::vector<double> all;
    for (const auto& r : records) {
        if (r.stream != Stream::measurement) continue;
        if (!r.completed()) {
            ++s.dropped;
            continue;
        }
        double ms = static_cast<double>(*r.latency_ns()) / 1e6;
        all.push_back(ms);
        Nanos rel = r.send_ns - window_start;
        if (rel < 0) continue;
        Nanos bin = rel / kNanosPerSecond;
        if (bin < duration_s) buckets[static_cast<std::size_t>(bin)].push_back(ms);
    }
    s.completed = all.size();
    for (std::size_t i = 0; i < buckets.size(); ++i)
        if (!buckets[i].empty()) s.per_second[i] = make_box(buckets[i]);
    if (!all.empty()) {
        std::sort(all.begin(), all.end());
        s.global_median_ms = percentile_nearest_rank(all, 0.50);
        s.global_p95_ms = percentile_nearest_rank(all, 0.95);
    }
    return s;
}

double rmspe(std::span<const double> observed, double true_value) {
    if (observed.empty()) throw std::invalid_argument("empty observation set");
    if (!(true_value > 0))
        throw std::invalid_argument("true value must be > 0");
    double acc = 0;
    for (double o : observed) {
        double rel = (o - true_value) / true_value;
        acc += rel * rel;
    }
    return std::sqrt(acc / static_cast<double>(observed.size()));
}

} // namespace dosbench
