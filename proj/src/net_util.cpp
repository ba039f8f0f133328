#include "net_util.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/resource.h>
#include <sys/socket.h>
#include <sys/syscall.h>
#include <sys/time.h>
#include <time.h>
#include <unistd.h>

#include <cctype>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace dosbench::net {

std::int64_t now_mono_ns() {
    timespec ts;
    clock_gettime(CLOCK_MONOTONIC, &ts);
    return static_cast<std::int64_t>(ts.tv_sec) * 1'000'000'000 + ts.tv_nsec;
}

std::int64_t now_wall_ns() {
    timespec ts;
    clock_gettime(CLOCK_REALTIME, &ts);
    return static_cast<std::int64_t>(ts.tv_sec) * 1'000'000'000 + ts.tv_nsec;
}

std::int64_t thread_cpu_ns() {
    timespec ts;
    clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
    return static_cast<std::int64_t>(ts.tv_sec) * 1'000'000'000 + ts.tv_nsec;
}

void set_thread_nice(int nice_level) {
    if (nice_level <= 0) return;
    // per-thread on Linux: PRIO_PROCESS with the thread id
    pid_t tid = static_cast<pid_t>(syscall(SYS_gettid));
    setpriority(PRIO_PROCESS, static_cast<id_t>(tid), nice_level);
}

void set_nonblocking(int fd) {
    int flags = fcntl(fd, F_GETFL, 0);
    fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

void set_nodelay(int fd) {
    int one = 1;
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

static bool fill_addr(const std::string& host, std::uint16_t port,
                      sockaddr_in& addr) {
    std::memset(&addr, 0, sizeof(addr));
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    std::string h = host.empty() || host == "localhost" ? "127.0.0.1" : host;
    return inet_pton(AF_INET, h.c_str(), &addr.sin_addr) == 1;
}

int tcp_listen(const std::string& host, std::uint16_t& port, int backlog) {
    int fd = socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) throw std::runtime_error("socket() failed");
    int one = 1;
    setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr;
    if (!fill_addr(host, port, addr)) {
        close(fd);
        throw std::runtime_error("bad listen address: " + host);
    }
    if (bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        close(fd);
        throw std::runtime_error("bind failed: " + std::string(strerror(errno)));
    }
    if (listen(fd, backlog) != 0) {
        close(fd);
        throw std::runtime_error("listen failed");
    }
    socklen_t len = sizeof(addr);
    getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    port = ntohs(addr.sin_port);
    return fd;
}

int tcp_connect(const std::string& host, std::uint16_t port, int timeout_ms) {
    bool in_progress = false;
    int fd = tcp_connect_nb(host, port, in_progress);
    if (fd < 0) return -1;
    if (in_progress) {
        pollfd p{fd, POLLOUT, 0};
        int rc = poll(&p, 1, timeout_ms);
        int err = 0;
        socklen_t len = sizeof(err);
        if (rc <= 0 ||
            getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len) != 0 || err != 0) {
            close(fd);
            return -1;
        }
    }
    return fd;
}

int tcp_connect_nb(const std::string& host, std::uint16_t port,
                   bool& in_progress) {
    in_progress = false;
    int fd = socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) return -1;
    set_nonblocking(fd);
    set_nodelay(fd);
    sockaddr_in addr;
    if (!fill_addr(host, port, addr)) {
        close(fd);
        return -1;
    }
    int rc = connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
    if (rc == 0) return fd;
    if (errno == EINPROGRESS) {
        in_progress = true;
        return fd;
    }
    close(fd);
    return -1;
}

std::optional<Endpoint> parse_target(const std::string& url) {
    std::string rest = url;
    if (rest.rfind("http://", 0) == 0) rest = rest.substr(7);
    auto slash = rest.find('/');
    if (slash != std::string::npos) rest = rest.substr(0, slash);
    auto colon = rest.find(':');
    Endpoint ep;
    if (colon == std::string::npos) {
        ep.host = rest;
        ep.port = 80;
    } else {
        ep.host = rest.substr(0, colon);
        int port = 0;
        auto p = rest.substr(colon + 1);
        auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), port);
        if (ec != std::errc() || ptr != p.data() + p.size() || port <= 0 ||
            port > 65535)
            return std::nullopt;
        ep.port = static_cast<std::uint16_t>(port);
    }
    if (ep.host.empty()) return std::nullopt;
    return ep;
}

void raise_fd_limit(std::uint64_t want) {
    rlimit rl{};
    if (getrlimit(RLIMIT_NOFILE, &rl) != 0) return;
    if (rl.rlim_cur >= want) return;
    rl.rlim_cur = want < rl.rlim_max ? want : rl.rlim_max;
    setrlimit(RLIMIT_NOFILE, &rl);
}

} // namespace dosbench::net

namespace dosbench::http {

static bool header_value(const std::string& headers, std::string_view name,
                         std::string& out) {
    // case-insensitive scan over "Key: value\r\n" lines
    std::size_t pos = 0;
    while (pos < headers.size()) {
        auto eol = headers.find("\r\n", pos);
        if (eol == std::string::npos) eol = headers.size();
        auto colon = headers.find(':', pos);
        if (colon != std::string::npos && colon < eol) {
            std::size_t klen = colon - pos;
            if (klen == name.size()) {
                bool match = true;
                for (std::size_t i = 0; i < klen; ++i) {
                    char a = headers[pos + i];
                    char b = name[i];
                    if (std::tolower(static_cast<unsigned char>(a)) !=
                        std::tolower(static_cast<unsigned char>(b))) {
                        match = false;
                        break;
                    }
                }
                if (match) {
                    std::size_t v = colon + 1;
                    while (v < eol && headers[v] == ' ') ++v;
                    out = headers.substr(v, eol - v);
                    return true;
                }
            }
        }
        pos = eol + 2;
    }
    return false;
}

bool try_parse_request(std::string& buf, Request& out) {
    auto end = buf.find("\r\n\r\n");
    if (end == std::string::npos) return false;
    std::string head = buf.substr(0, end);
    buf.erase(0, end + 4);

    auto line_end = head.find("\r\n");
    std::string line = head.substr(0, line_end);
    std::string headers =
        line_end == std::string::npos ? "" : head.substr(line_end + 2);

    auto sp1 = line.find(' ');
    auto sp2 = line.rfind(' ');
    if (sp1 == std::string::npos || sp2 == sp1) {
        out = Request{}; // malformed; caller answers 400
        return true;
    }
    out.method = line.substr(0, sp1);
    std::string target = line.substr(sp1 + 1, sp2 - sp1 - 1);
    auto qmark = target.find('?');
    if (qmark == std::string::npos) {
        out.path = target;
        out.query.clear();
    } else {
        out.path = target.substr(0, qmark);
        out.query = target.substr(qmark + 1);
    }
    std::string conn;
    out.keep_alive = true;
    if (header_value(headers, "connection", conn) && conn == "close")
        out.keep_alive = false;
    return true;
}

bool try_parse_response(std::string& buf, Response& out) {
    auto end = buf.find("\r\n\r\n");
    if (end == std::string::npos) return false;
    std::string head = buf.substr(0, end);

    std::string cl;
    if (!header_value(head.substr(head.find("\r\n") + 2), "content-length", cl))
        return false; // all peers in this toolkit send Content-Length
    std::size_t body_len = static_cast<std::size_t>(std::stoul(cl));
    if (buf.size() < end + 4 + body_len) return false;

    out.code = 0;
    auto sp = head.find(' ');
    if (sp != std::string::npos)
        out.code = std::atoi(head.c_str() + sp + 1);
    std::string conn;
    out.keep_alive = true;
    if (header_value(head, "connection", conn) && conn == "close")
        out.keep_alive = false;
    out.body = buf.substr(end + 4, body_len);
    buf.erase(0, end + 4 + body_len);
    return true;
}

std::string serialize_request(const std::string& path_and_query,
                              const std::string& host) {
    std::string r;
    r.reserve(64 + path_and_query.size());
    r += "GET ";
    r += path_and_query;
    r += " HTTP/1.1\r\nHost: ";
    r += host;
    r += "\r\n\r\n";
    return r;
}

std::string serialize_response(int code, std::string_view body,
                               bool keep_alive) {
    const char* reason = code == 200   ? "OK"
                         : code == 400 ? "Bad Request"
                         : code == 404 ? "Not Found"
                                       : "Error";
    char head[128];
    int n = std::snprintf(head, sizeof(head),
                          "HTTP/1.1 %d %s\r\nContent-Length: %zu\r\n"
                          "Connection: %s\r\n\r\n",
                          code, reason, body.size(),
                          keep_alive ? "keep-alive" : "close");
    std::string out(head, static_cast<std::size_t>(n));
    out.append(body);
    return out;
}

std::optional<std::string> query_param(const std::string& query,
                                       std::string_view key) {
    std::size_t pos = 0;
    while (pos < query.size()) {
        auto amp = query.find('&', pos);
        if (amp == std::string::npos) amp = query.size();
        auto eq = query.find('=', pos);
        if (eq != std::string::npos && eq < amp &&
            query.compare(pos, eq - pos, key) == 0)
            return query.substr(eq + 1, amp - eq - 1);
        pos = amp + 1;
    }
    return std::nullopt;
}

BlockingClient::BlockingClient(std::string host, std::uint16_t port)
    : host_(std::move(host)), port_(port) {
    ensure_connected();
}

BlockingClient::~BlockingClient() {
    if (fd_ >= 0) ::close(fd_);
}

bool BlockingClient::ensure_connected() {
    if (fd_ >= 0) return true;
    fd_ = net::tcp_connect(host_, port_, 2000);
    inbuf_.clear();
    return fd_ >= 0;
}

std::optional<Response> BlockingClient::get(const std::string& path_and_query,
                                            int timeout_ms) {
    for (int attempt = 0; attempt < 2; ++attempt) {
        if (!ensure_connected()) return std::nullopt;
        std::string req = serialize_request(
            path_and_query, host_ + ":" + std::to_string(port_));
        bool ok = true;
        std::size_t off = 0;
        while (off < req.size()) {
            ssize_t n =
                ::send(fd_, req.data() + off, req.size() - off, MSG_NOSIGNAL);
            if (n > 0) {
                off += static_cast<std::size_t>(n);
                continue;
            }
            if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
                pollfd p{fd_, POLLOUT, 0};
                if (poll(&p, 1, timeout_ms) <= 0) {
                    ok = false;
                    break;
                }
                continue;
            }
            if (n < 0 && errno == EINTR) continue;
            ok = false;
            break;
        }
        if (ok) {
            std::int64_t deadline = net::now_mono_ns() +
                                    static_cast<std::int64_t>(timeout_ms) * 1'000'000;
            Response resp;
            for (;;) {
                if (try_parse_response(inbuf_, resp)) {
                    if (!resp.keep_alive) {
                        ::close(fd_);
                        fd_ = -1;
                    }
                    return resp;
                }
                std::int64_t left = deadline - net::now_mono_ns();
                if (left <= 0) break;
                pollfd p{fd_, POLLIN, 0};
                int rc = poll(&p, 1, static_cast<int>(left / 1'000'000) + 1);
                if (rc <= 0) break;
                char buf[4096];
                ssize_t n = recv(fd_, buf, sizeof(buf), 0);
                if (n <= 0) break;
                inbuf_.append(buf, static_cast<std::size_t>(n));
            }
        }
        // broken connection: drop it and retry once with a fresh one
        ::close(fd_);
        fd_ = -1;
        inbuf_.clear();
    }
    return std::nullopt;
}

} // namespace dosbench::http
