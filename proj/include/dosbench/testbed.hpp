#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dosbench/modmul.hpp"

// Reference vulnerable web application. Three endpoints:
//   GET /measure?v=<token>   echoes the token (the cheap measurement target)
//   GET /vuln?q=<int>        runs the CPU payload, returns a digest
//   GET /calibrate?q=<int>   runs the payload, returns its CPU cost in us
// The request dispatch model is pluggable so the same endpoints can be served
// by an event loop, a thread pool, preforked workers or light threads.

namespace dosbench {

enum class ArchModel {
    event_loop_single,
    thread_pool,
    prefork_workers,
    light_threads,
};

std::string to_string(ArchModel m);
ArchModel arch_model_from_string(const std::string& s);

struct ArchitectureConfig {
    ArchModel model = ArchModel::event_loop_single;
    int threads = 64;        // pool size for thread-pool
    int workers = 1;         // worker count for prefork-workers
    int cpu_parallelism = 0; // execution units for compute; 0 = all hardware
    void validate() const;
    std::string describe() const; // e.g. "thread-pool(64)"
};

enum class PayloadMode { linear_multiply, true_modexp };

PayloadMode payload_mode_from_string(const std::string& s);
std::string to_string(PayloadMode m);

struct VulnParams {
    U256 base;
    U256 modulus;
    PayloadMode mode = PayloadMode::linear_multiply;
    // fixed 256-bit odd constants; modulus > base
    static VulnParams defaults();
    void validate() const;
};

// The CPU payload: q modular multiplications (linear-multiply mode) or
// square-and-multiply base^q (true-modexp mode). Returns the low 64 bits of
// the result. Cost is strictly increasing in q on an idle core.
std::uint64_t payload_compute(std::uint64_t q, const VulnParams& vuln);

struct ServerStats {
    std::atomic<long> echo_served{0};
    std::atomic<long> payload_served{0};
    std::atomic<long> calibrate_served{0};
    std::atomic<long> bad_requests{0};
    std::atomic<long> connections_accepted{0};
    std::atomic<long> connections_refused{0};
    // concurrency bookkeeping for the architecture invariants
    std::atomic<int> payload_active{0};
    std::atomic<int> payload_active_peak{0};
};

class Testbed {
public:
    struct Options {
        ArchitectureConfig arch;
        VulnParams vuln = VulnParams::defaults();
        std::string host = "127.0.0.1";
        std::uint16_t port = 0; // 0 picks a free port
        int accept_backlog = 1024;
        int max_connections = 8192; // beyond this, connections are refused
        std::uint64_t q_max = std::uint64_t(1) << 32;
        // nice level for compute/worker threads; lets a co-located load
        // generator keep its pacing when the payload saturates the CPU
        int worker_nice = 0;
    };

    static std::unique_ptr<Testbed> start(Options options);
    virtual ~Testbed() = default;

    virtual void stop() = 0;
    virtual std::uint16_t port() const = 0;
    virtual const ServerStats& stats() const = 0;
    // peak concurrent payloads observed per prefork worker (empty otherwise)
    virtual std::vector<int> per_worker_payload_peaks() const = 0;

protected:
    Testbed() = default;
};

} // namespace dosbench
