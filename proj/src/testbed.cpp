#include "dosbench/testbed.hpp"

#include <poll.h>
#include <unistd.h>

#include <charconv>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <map>
#include <mutex>
#include <semaphore>
#include <stdexcept>
#include <thread>

#include "net_util.hpp"

namespace dosbench {

namespace {

// one compute slice between scheduling points; ~1-2 ms of work
constexpr std::uint64_t kSliceIters = 16384;
// logical-task executor width for the light-threads model
constexpr int kLightThreadPool = 256;

using GateSemaphore = std::counting_semaphore<4096>;

} // namespace

std::string to_string(ArchModel m) {
    switch (m) {
        case ArchModel::event_loop_single: return "event-loop-single";
        case ArchModel::thread_pool: return "thread-pool";
        case ArchModel::prefork_workers: return "prefork-workers";
        case ArchModel::light_threads: return "light-threads";
    }
    return "?";
}

ArchModel arch_model_from_string(const std::string& s) {
    if (s == "event-loop-single") return ArchModel::event_loop_single;
    if (s == "thread-pool") return ArchModel::thread_pool;
    if (s == "prefork-workers") return ArchModel::prefork_workers;
    if (s == "light-threads") return ArchModel::light_threads;
    throw std::invalid_argument("unknown architecture model: " + s);
}

PayloadMode payload_mode_from_string(const std::string& s) {
    if (s == "linear-multiply") return PayloadMode::linear_multiply;
    if (s == "true-modexp") return PayloadMode::true_modexp;
    throw std::invalid_argument("unknown payload mode: " + s);
}

std::string to_string(PayloadMode m) {
    return m == PayloadMode::linear_multiply ? "linear-multiply" : "true-modexp";
}

void ArchitectureConfig::validate() const {
    if (model == ArchModel::thread_pool && threads < 1)
        throw std::invalid_argument("thread-pool requires threads >= 1");
    if (model == ArchModel::prefork_workers && workers < 1)
        throw std::invalid_argument("prefork-workers requires workers >= 1");
    if (cpu_parallelism < 0)
        throw std::invalid_argument("cpu_parallelism must be >= 0");
}

std::string ArchitectureConfig::describe() const {
    switch (model) {
        case ArchModel::event_loop_single: return "event-loop-single";
        case ArchModel::thread_pool:
            return "thread-pool(" + std::to_string(threads) + ")";
        case ArchModel::prefork_workers:
            return "prefork-workers(" + std::to_string(workers) + ")";
        case ArchModel::light_threads: return "light-threads";
    }
    return "?";
}

VulnParams VulnParams::defaults() {
    VulnParams v;
    v.modulus = U256::from_hex(
        "c745ee37c4856ca2f1facb570ad5ef5aa78049663e2f7ff54ff21bfde87e3763");
    v.base = U256::from_hex(
        "4329eee610df25d0b61f58f0e1a16bc267d6940c81783323ea64f8b3fc932185");
    v.mode = PayloadMode::linear_multiply;
    return v;
}

void VulnParams::validate() const {
    if (modulus.is_zero() || base.is_zero())
        throw std::invalid_argument("vuln constants must be non-zero");
    if (!u256_less(base, modulus))
        throw std::invalid_argument("vuln modulus must exceed base");
    if ((modulus.w[0] & 1) == 0)
        throw std::invalid_argument("vuln modulus must be odd");
}

std::uint64_t payload_compute(std::uint64_t q, const VulnParams& vuln) {
    if (q < 1) throw std::invalid_argument("q must be >= 1");
    if (vuln.mode == PayloadMode::true_modexp)
        return mod_pow(vuln.base, q, vuln.modulus).low64();
    return chain_mul_mod(U256::from_u64(1), vuln.base, vuln.modulus, q).low64();
}

namespace {

struct Conn {
    int fd = -1;
    std::string inbuf;
    std::atomic<int> outstanding{0};
    std::atomic<bool> dead{false};
    std::mutex write_mu;
};

using ConnPtr = std::shared_ptr<Conn>;

struct Task {
    ConnPtr conn;
    http::Request request;
};

struct WorkQueue {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<Task> items;
    std::atomic<int> load{0}; // queued + in service
};

bool write_all(int fd, const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
        ssize_t n = ::send(fd, data.data() + off, data.size() - off,
                           MSG_NOSIGNAL);
        if (n > 0) {
            off += static_cast<std::size_t>(n);
            continue;
        }
        if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
            pollfd p{fd, POLLOUT, 0};
            if (poll(&p, 1, 1000) <= 0) return false;
            continue;
        }
        if (n < 0 && errno == EINTR) continue;
        return false;
    }
    return true;
}

std::optional<std::uint64_t> parse_q(const std::string& query,
                                     std::uint64_t q_max) {
    auto raw = http::query_param(query, "q");
    if (!raw || raw->empty()) return std::nullopt;
    std::uint64_t q = 0;
    auto [ptr, ec] = std::from_chars(raw->data(), raw->data() + raw->size(), q);
    if (ec != std::errc() || ptr != raw->data() + raw->size()) return std::nullopt;
    if (q < 1 || q > q_max) return std::nullopt;
    return q;
}

class TestbedImpl final : public Testbed {
public:
    explicit TestbedImpl(Options opt) : opt_(std::move(opt)) {
        opt_.arch.validate();
        opt_.vuln.validate();
        int hw = static_cast<int>(std::thread::hardware_concurrency());
        if (hw < 1) hw = 1;
        int units =
            opt_.arch.cpu_parallelism > 0 ? opt_.arch.cpu_parallelism : hw;
        gate_ = std::make_unique<GateSemaphore>(std::min(units, 4096));

        port_ = opt_.port;
        listen_fd_ = net::tcp_listen(opt_.host, port_, opt_.accept_backlog);
        net::set_nonblocking(listen_fd_);
        if (pipe(wake_pipe_) != 0) throw std::runtime_error("pipe() failed");
        net::set_nonblocking(wake_pipe_[0]);
        net::set_nonblocking(wake_pipe_[1]);

        switch (opt_.arch.model) {
            case ArchModel::event_loop_single:
                start_queued_workers(1, false);
                break;
            case ArchModel::prefork_workers:
                start_queued_workers(opt_.arch.workers, false);
                break;
            case ArchModel::light_threads:
                start_queued_workers(kLightThreadPool, true);
                break;
            case ArchModel::thread_pool:
                start_thread_pool(opt_.arch.threads);
                break;
        }
        if (opt_.arch.model != ArchModel::thread_pool)
            reactor_ = std::thread([this] { reactor_loop(); });
    }

    ~TestbedImpl() override { stop(); }

    void stop() override {
        bool expected = false;
        if (!stopping_.compare_exchange_strong(expected, true)) return;
        wake();
        if (reactor_.joinable()) reactor_.join();
        if (acceptor_.joinable()) acceptor_.join();
        for (auto& q : queues_) {
            std::lock_guard lk(q->mu);
            q->cv.notify_all();
        }
        {
            std::lock_guard lk(pool_mu_);
            pool_cv_.notify_all();
        }
        for (auto& t : workers_)
            if (t.joinable()) t.join();
        for (auto& [fd, conn] : conns_) ::close(fd);
        conns_.clear();
        if (listen_fd_ >= 0) ::close(listen_fd_);
        ::close(wake_pipe_[0]);
        ::close(wake_pipe_[1]);
        listen_fd_ = -1;
    }

    std::uint16_t port() const override { return port_; }
    const ServerStats& stats() const override { return stats_; }

    std::vector<int> per_worker_payload_peaks() const override {
        std::vector<int> out;
        for (const auto& p : worker_payload_peak_) out.push_back(p->load());
        return out;
    }

private:
    // ---- request handling --------------------------------------------------

    http::Response handle(const http::Request& rq, int worker_index) {
        http::Response resp;
        resp.keep_alive = rq.keep_alive;
        if (rq.method != "GET") {
            stats_.bad_requests.fetch_add(1, std::memory_order_relaxed);
            resp.code = 400;
            resp.body = "only GET is served\n";
            return resp;
        }
        if (rq.path == "/measure") {
            auto v = http::query_param(rq.query, "v");
            resp.code = 200;
            resp.body = v.value_or("");
            stats_.echo_served.fetch_add(1, std::memory_order_relaxed);
            return resp;
        }
        if (rq.path == "/vuln" || rq.path == "/calibrate") {
            auto q = parse_q(rq.query, opt_.q_max);
            if (!q) {
                stats_.bad_requests.fetch_add(1, std::memory_order_relaxed);
                resp.code = 400;
                resp.body = "bad q\n";
                return resp;
            }
            if (rq.path == "/vuln") {
                std::uint64_t digest = run_payload(*q, worker_index);
                char buf[24];
                std::snprintf(buf, sizeof(buf), "%016llx",
                              static_cast<unsigned long long>(digest));
                resp.code = 200;
                resp.body = buf;
                stats_.payload_served.fetch_add(1, std::memory_order_relaxed);
                return resp;
            }
            // /calibrate reports the CPU cost of payload_compute alone, in
            // microseconds; the thread CPU clock excludes gate waits and
            // preemption, so a loaded box does not skew calibration
            std::int64_t t0 = net::thread_cpu_ns();
            std::uint64_t digest = run_payload(*q, worker_index);
            std::int64_t t1 = net::thread_cpu_ns();
            (void)digest;
            resp.code = 200;
            resp.body = std::to_string((t1 - t0) / 1000);
            stats_.calibrate_served.fetch_add(1, std::memory_order_relaxed);
            return resp;
        }
        resp.code = 404;
        resp.body = "unknown endpoint\n";
        return resp;
    }

    std::uint64_t run_payload(std::uint64_t q, int worker_index) {
        int active =
            stats_.payload_active.fetch_add(1, std::memory_order_relaxed) + 1;
        int peak = stats_.payload_active_peak.load(std::memory_order_relaxed);
        while (active > peak &&
               !stats_.payload_active_peak.compare_exchange_weak(peak, active)) {
        }
        const bool tracked =
            worker_index >= 0 &&
            worker_index < static_cast<int>(worker_payload_active_.size());
        if (tracked) {
            auto& act = *worker_payload_active_[static_cast<std::size_t>(worker_index)];
            auto& pk = *worker_payload_peak_[static_cast<std::size_t>(worker_index)];
            int a = act.fetch_add(1, std::memory_order_relaxed) + 1;
            int wp = pk.load(std::memory_order_relaxed);
            while (a > wp && !pk.compare_exchange_weak(wp, a)) {
            }
        }

        std::uint64_t out;
        if (opt_.vuln.mode == PayloadMode::true_modexp) {
            gate_->acquire();
            out = mod_pow(opt_.vuln.base, q, opt_.vuln.modulus).low64();
            gate_->release();
        } else {
            U256 acc = U256::from_u64(1);
            std::uint64_t left = q;
            while (left > 0 && !stopping_.load(std::memory_order_relaxed)) {
                std::uint64_t n = std::min(left, kSliceIters);
                gate_->acquire();
                acc = chain_mul_mod(acc, opt_.vuln.base, opt_.vuln.modulus, n);
                gate_->release();
                left -= n;
            }
            out = acc.low64();
        }

        if (tracked)
            worker_payload_active_[static_cast<std::size_t>(worker_index)]
                ->fetch_sub(1, std::memory_order_relaxed);
        stats_.payload_active.fetch_sub(1, std::memory_order_relaxed);
        return out;
    }

    // ---- queued-dispatch architectures (event loop, prefork, light) -------

    void start_queued_workers(int n, bool shared_queue) {
        int queue_count = shared_queue ? 1 : n;
        for (int i = 0; i < queue_count; ++i)
            queues_.push_back(std::make_unique<WorkQueue>());
        if (!shared_queue) {
            for (int i = 0; i < n; ++i) {
                worker_payload_active_.push_back(
                    std::make_unique<std::atomic<int>>(0));
                worker_payload_peak_.push_back(
                    std::make_unique<std::atomic<int>>(0));
            }
        }
        for (int i = 0; i < n; ++i) {
            int queue_index = shared_queue ? 0 : i;
            int invariant_index = shared_queue ? -1 : i;
            workers_.emplace_back([this, queue_index, invariant_index] {
                net::set_thread_nice(opt_.worker_nice);
                queued_worker_loop(queue_index, invariant_index);
            });
        }
    }

    void queued_worker_loop(int queue_index, int invariant_index) {
        auto& q = *queues_[static_cast<std::size_t>(queue_index)];
        for (;;) {
            Task task;
            {
                std::unique_lock lk(q.mu);
                q.cv.wait(lk, [&] {
                    return stopping_.load(std::memory_order_relaxed) ||
                           !q.items.empty();
                });
                if (q.items.empty()) return; // stopping and drained
                task = std::move(q.items.front());
                q.items.pop_front();
            }
            http::Response resp = handle(task.request, invariant_index);
            deliver(task.conn, resp);
            q.load.fetch_sub(1, std::memory_order_relaxed);
        }
    }

    void dispatch(ConnPtr conn, http::Request rq) {
        conn->outstanding.fetch_add(1, std::memory_order_relaxed);
        // route to the worker with the lowest load
        std::size_t target = 0;
        if (queues_.size() > 1) {
            int best = INT32_MAX;
            for (std::size_t i = 0; i < queues_.size(); ++i) {
                int load = queues_[i]->load.load(std::memory_order_relaxed);
                if (load < best) {
                    best = load;
                    target = i;
                }
            }
        }
        auto& q = *queues_[target];
        q.load.fetch_add(1, std::memory_order_relaxed);
        {
            std::lock_guard lk(q.mu);
            q.items.push_back(Task{std::move(conn), std::move(rq)});
        }
        q.cv.notify_one();
    }

    void deliver(const ConnPtr& conn, const http::Response& resp) {
        std::string bytes =
            http::serialize_response(resp.code, resp.body, resp.keep_alive);
        {
            std::lock_guard lk(conn->write_mu);
            if (!conn->dead.load(std::memory_order_acquire)) {
                if (!write_all(conn->fd, bytes) || !resp.keep_alive)
                    conn->dead.store(true, std::memory_order_release);
            }
        }
        conn->outstanding.fetch_sub(1, std::memory_order_relaxed);
        if (conn->dead.load(std::memory_order_acquire)) wake();
    }

    void reactor_loop() {
        std::vector<pollfd> pfds;
        std::vector<ConnPtr> order;
        for (;;) {
            if (stopping_.load()) return;
            pfds.clear();
            order.clear();
            pfds.push_back({listen_fd_, POLLIN, 0});
            pfds.push_back({wake_pipe_[0], POLLIN, 0});
            {
                std::lock_guard lk(conns_mu_);
                for (auto it = conns_.begin(); it != conns_.end();) {
                    auto& conn = it->second;
                    if (conn->dead.load(std::memory_order_acquire) &&
                        conn->outstanding.load(std::memory_order_relaxed) == 0) {
                        ::close(it->first);
                        it = conns_.erase(it);
                        continue;
                    }
                    if (!conn->dead.load(std::memory_order_acquire)) {
                        pfds.push_back({it->first, POLLIN, 0});
                        order.push_back(conn);
                    }
                    ++it;
                }
            }
            int rc = poll(pfds.data(), static_cast<nfds_t>(pfds.size()), 50);
            if (rc < 0 && errno != EINTR) return;
            if (stopping_.load()) return;
            if (rc <= 0) continue;

            if (pfds[1].revents & POLLIN) {
                char buf[256];
                while (read(wake_pipe_[0], buf, sizeof(buf)) > 0) {
                }
            }
            if (pfds[0].revents & POLLIN) accept_new();

            for (std::size_t i = 2; i < pfds.size(); ++i) {
                if (!(pfds[i].revents & (POLLIN | POLLERR | POLLHUP))) continue;
                handle_readable(order[i - 2]);
            }
        }
    }

    void accept_new() {
        for (;;) {
            int fd = accept4(listen_fd_, nullptr, nullptr, SOCK_NONBLOCK);
            if (fd < 0) return;
            std::lock_guard lk(conns_mu_);
            if (static_cast<int>(conns_.size()) >= opt_.max_connections) {
                ::close(fd);
                stats_.connections_refused.fetch_add(1,
                                                     std::memory_order_relaxed);
                continue;
            }
            net::set_nodelay(fd);
            auto conn = std::make_shared<Conn>();
            conn->fd = fd;
            conns_.emplace(fd, std::move(conn));
            stats_.connections_accepted.fetch_add(1, std::memory_order_relaxed);
        }
    }

    void handle_readable(const ConnPtr& conn) {
        char buf[4096];
        for (;;) {
            ssize_t n = recv(conn->fd, buf, sizeof(buf), 0);
            if (n > 0) {
                conn->inbuf.append(buf, static_cast<std::size_t>(n));
                if (conn->inbuf.size() > 65536) { // header flood
                    conn->dead.store(true, std::memory_order_release);
                    return;
                }
                continue;
            }
            if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) break;
            if (n < 0 && errno == EINTR) continue;
            conn->dead.store(true, std::memory_order_release);
            break;
        }
        http::Request rq;
        while (!conn->dead.load(std::memory_order_acquire) &&
               http::try_parse_request(conn->inbuf, rq)) {
            if (rq.method.empty()) { // malformed request line
                stats_.bad_requests.fetch_add(1, std::memory_order_relaxed);
                std::lock_guard lk(conn->write_mu);
                write_all(conn->fd,
                          http::serialize_response(400, "bad request\n", false));
                conn->dead.store(true, std::memory_order_release);
                break;
            }
            dispatch(conn, std::move(rq));
        }
    }

    // ---- thread-pool (one thread per connection) ---------------------------

    void start_thread_pool(int n) {
        for (int i = 0; i < n; ++i) {
            workers_.emplace_back([this] {
                net::set_thread_nice(opt_.worker_nice);
                pool_worker_loop();
            });
        }
        acceptor_ = std::thread([this] { acceptor_loop(); });
    }

    void acceptor_loop() {
        for (;;) {
            pollfd p{listen_fd_, POLLIN, 0};
            int rc = poll(&p, 1, 50);
            if (stopping_.load()) return;
            if (rc <= 0) continue;
            for (;;) {
                int fd = accept4(listen_fd_, nullptr, nullptr, SOCK_NONBLOCK);
                if (fd < 0) break;
                std::lock_guard lk(pool_mu_);
                if (pool_live_conns_ >= opt_.max_connections) {
                    ::close(fd);
                    stats_.connections_refused.fetch_add(
                        1, std::memory_order_relaxed);
                    continue;
                }
                ++pool_live_conns_;
                stats_.connections_accepted.fetch_add(1,
                                                      std::memory_order_relaxed);
                pending_conns_.push_back(fd);
                pool_cv_.notify_one();
            }
        }
    }

    void pool_worker_loop() {
        for (;;) {
            int fd = -1;
            {
                std::unique_lock lk(pool_mu_);
                pool_cv_.wait(lk, [&] {
                    return stopping_.load(std::memory_order_relaxed) ||
                           !pending_conns_.empty();
                });
                if (stopping_.load()) return;
                fd = pending_conns_.front();
                pending_conns_.pop_front();
            }
            serve_connection(fd);
            {
                std::lock_guard lk(pool_mu_);
                --pool_live_conns_;
            }
        }
    }

    // the connection owns this pool thread until it closes
    void serve_connection(int fd) {
        std::string inbuf;
        char buf[4096];
        bool alive = true;
        while (alive && !stopping_.load()) {
            pollfd p{fd, POLLIN, 0};
            int rc = poll(&p, 1, 50);
            if (rc < 0 && errno != EINTR) break;
            if (rc <= 0) continue;
            ssize_t n = recv(fd, buf, sizeof(buf), 0);
            if (n == 0) break;
            if (n < 0) {
                if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR)
                    continue;
                break;
            }
            inbuf.append(buf, static_cast<std::size_t>(n));
            http::Request rq;
            while (alive && http::try_parse_request(inbuf, rq)) {
                http::Response resp;
                if (rq.method.empty()) {
                    stats_.bad_requests.fetch_add(1, std::memory_order_relaxed);
                    resp.code = 400;
                    resp.body = "bad request\n";
                    resp.keep_alive = false;
                } else {
                    resp = handle(rq, -1);
                }
                if (!write_all(fd, http::serialize_response(
                                       resp.code, resp.body, resp.keep_alive)))
                    alive = false;
                if (!resp.keep_alive) alive = false;
            }
        }
        ::close(fd);
    }

    void wake() {
        char b = 1;
        [[maybe_unused]] ssize_t n = write(wake_pipe_[1], &b, 1);
    }

    Options opt_;
    std::uint16_t port_ = 0;
    int listen_fd_ = -1;
    int wake_pipe_[2] = {-1, -1};
    std::atomic<bool> stopping_{false};
    ServerStats stats_;
    std::unique_ptr<GateSemaphore> gate_;

    std::thread reactor_;
    std::thread acceptor_;
    std::vector<std::thread> workers_;

    std::mutex conns_mu_;
    std::map<int, ConnPtr> conns_;

    std::vector<std::unique_ptr<WorkQueue>> queues_;

    std::mutex pool_mu_;
    std::condition_variable pool_cv_;
    std::deque<int> pending_conns_;
    int pool_live_conns_ = 0;

    std::vector<std::unique_ptr<std::atomic<int>>> worker_payload_active_;
    std::vector<std::unique_ptr<std::atomic<int>>> worker_payload_peak_;
};

} // namespace

std::unique_ptr<Testbed> Testbed::start(Options options) {
    return std::make_unique<TestbedImpl>(std::move(options));
}

} // namespace dosbench
