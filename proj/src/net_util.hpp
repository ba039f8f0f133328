#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Socket and clock plumbing shared by the testbed server and the traffic
// generator. Linux-only (poll, CLOCK_THREAD_CPUTIME_ID, setpriority).

namespace dosbench::net {

std::int64_t now_mono_ns();
std::int64_t now_wall_ns();
std::int64_t thread_cpu_ns();

// lower the calling thread's scheduling priority (nice > 0 only; unprivileged)
void set_thread_nice(int nice_level);

void set_nonblocking(int fd);
void set_nodelay(int fd);

// returns listening fd; port==0 picks an ephemeral port, reported back
int tcp_listen(const std::string& host, std::uint16_t& port, int backlog);

// blocking connect with timeout; returns fd or -1
int tcp_connect(const std::string& host, std::uint16_t port, int timeout_ms);

// nonblocking connect; returns fd (connect may still be in progress) or -1
int tcp_connect_nb(const std::string& host, std::uint16_t port,
                   bool& in_progress);

struct Endpoint {
    std::string host;
    std::uint16_t port = 0;
};

// accepts http://host:port or host:port
std::optional<Endpoint> parse_target(const std::string& url);

// raise RLIMIT_NOFILE toward its hard limit so connection pools fit
void raise_fd_limit(std::uint64_t want);

} // namespace dosbench::net

namespace dosbench::http {

struct Request {
    std::string method;
    std::string path;   // without query
    std::string query;  // raw query string
    bool keep_alive = true;
};

struct Response {
    int code = 0;
    std::string body;
    bool keep_alive = true;
};

// Incremental HTTP/1.1 request parse from the front of `buf`. On success the
// consumed bytes are erased and true is returned. Requests with bodies are
// not supported (the testbed speaks GET only).
bool try_parse_request(std::string& buf, Request& out);

// Incremental response parse; requires Content-Length (all peers here send it)
bool try_parse_response(std::string& buf, Response& out);

std::string serialize_request(const std::string& path_and_query,
                              const std::string& host);
std::string serialize_response(int code, std::string_view body,
                               bool keep_alive);

// first value of `key` in a query string, if present
std::optional<std::string> query_param(const std::string& query,
                                       std::string_view key);

// Minimal blocking client over one persistent connection; used where requests
// are strictly sequential (calibration probes, connectivity checks).
class BlockingClient {
public:
    BlockingClient(std::string host, std::uint16_t port);
    ~BlockingClient();
    BlockingClient(const BlockingClient&) = delete;
    BlockingClient& operator=(const BlockingClient&) = delete;

    bool connected() const { return fd_ >= 0; }
    // GET path; reconnects once on a broken connection
    std::optional<Response> get(const std::string& path_and_query,
                                int timeout_ms = 30000);

private:
    bool ensure_connected();
    std::string host_;
    std::uint16_t port_;
    int fd_ = -1;
    std::string inbuf_;
};

} // namespace dosbench::http
