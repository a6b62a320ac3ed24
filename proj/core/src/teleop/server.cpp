#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <map>

#include <fmt/format.h>

#include "flowbots/protocol.hpp"

namespace flowbots::teleop {

namespace {

constexpr std::size_t kMaxHandshakeBytes = 16 * 1024;

bool send_all(int fd, std::string_view bytes) {
    while (!bytes.empty()) {
        const ssize_t n = ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return false;
        bytes.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

// Bytes available within the timeout; empty optional on timeout, empty string on EOF.
std::optional<std::string> receive_some(int fd, int timeout_ms) {
    pollfd p{fd, POLLIN, 0};
    const int ready = ::poll(&p, 1, timeout_ms);
    if (ready == 0) return std::nullopt;
    if (ready < 0) return errno == EINTR ? std::nullopt : std::optional<std::string>(std::string());
    char buf[8192];
    const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
    if (n <= 0) return std::string();
    return std::string(buf, static_cast<std::size_t>(n));
}

}  // namespace

struct Server::Connection {
    int fd = -1;
    bool websocket = false;
    std::mutex write_mutex;
    std::mutex handler_mutex;
    std::unique_ptr<ProtocolHandler> handler;
    std::atomic<bool> closed{false};
    std::atomic<bool> done{false};
    std::thread reader;

    bool send(const Message& m) {
        const std::string body = to_json(m).dump();
        const std::lock_guard lock(write_mutex);
        return send_all(fd, websocket ? encode_websocket(body) : encode_frame(m));
    }

    void close() {
        if (!closed.exchange(true)) ::shutdown(fd, SHUT_RDWR);
    }
};

Server::Server(Service& service, std::string bind_address, std::uint16_t port)
    : service_(service), bind_address_(std::move(bind_address)), port_(port) {}

Server::~Server() { stop(); }

void Server::start() {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    const std::string service = std::to_string(port_);
    if (const int rc = ::getaddrinfo(bind_address_.c_str(), service.c_str(), &hints, &res); rc != 0) {
        throw InputError(fmt::format("cannot resolve '{}': {}", bind_address_, ::gai_strerror(rc)));
    }
    int fd = -1;
    for (addrinfo* a = res; a && fd < 0; a = a->ai_next) {
        fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
        if (fd < 0) continue;
        const int one = 1;
        ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(fd, a->ai_addr, a->ai_addrlen) != 0 || ::listen(fd, 16) != 0) {
            ::close(fd);
            fd = -1;
        }
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw InputError(fmt::format("cannot listen on {}:{}: {}", bind_address_, port_, std::strerror(errno)));

    sockaddr_storage addr{};
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.ss_family == AF_INET6 ? reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port
                                             : reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
    listen_fd_ = fd;
    running_ = true;
    acceptor_ = std::thread([this] { accept_loop(); });
}

void Server::stop() {
    if (!running_.exchange(false)) return;
    if (acceptor_.joinable()) acceptor_.join();
    ::close(listen_fd_);
    listen_fd_ = -1;
    std::vector<std::shared_ptr<Connection>> conns;
    {
        const std::lock_guard lock(mutex_);
        conns.swap(connections_);
    }
    for (auto& c : conns) {
        c->close();
        if (c->reader.joinable()) c->reader.join();
        ::close(c->fd);
    }
}

void Server::accept_loop() {
    while (running_) {
        pollfd p{listen_fd_, POLLIN, 0};
        if (::poll(&p, 1, 100) <= 0) continue;
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) continue;
        const int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        auto conn = std::make_shared<Connection>();
        conn->fd = fd;
        conn->handler = std::make_unique<ProtocolHandler>(service_);
        const std::lock_guard lock(mutex_);
        // Reap finished connections.
        for (auto it = connections_.begin(); it != connections_.end();) {
            if ((*it)->done) {
                if ((*it)->reader.joinable()) (*it)->reader.join();
                ::close((*it)->fd);
                it = connections_.erase(it);
            } else {
                ++it;
            }
        }
        conn->reader = std::thread([this, conn] { serve(conn); });
        connections_.push_back(conn);
    }
}

void Server::serve(const std::shared_ptr<Connection>& conn) {
    // Snapshot fan-out runs beside the request loop and coalesces to the
    // latest snapshot of every subscribed session.
    std::thread sender([this, conn] {
        std::map<std::string, std::optional<std::uint64_t>> sent;
        while (!conn->closed) {
            std::vector<std::string> subs;
            {
                const std::lock_guard lock(conn->handler_mutex);
                subs = conn->handler->subscriptions();
            }
            if (subs.empty()) {
                std::this_thread::sleep_for(std::chrono::milliseconds(5));
                continue;
            }
            for (const auto& id : subs) {
                try {
                    auto& last = sent[id];
                    const auto snap = last ? service_.wait_newer(id, *last, std::chrono::milliseconds(10))
                                           : service_.latest(id);
                    if (!snap) continue;
                    last = snap->tick;
                    if (!conn->send(snapshot_message(*snap))) conn->close();
                } catch (const NotFoundError&) {
                    // Session closed; nothing more to stream.
                    std::this_thread::sleep_for(std::chrono::milliseconds(5));
                }
            }
        }
    });

    std::string pending;
    const auto dispatch = [&](const Message& m) {
        std::vector<Message> replies;
        {
            const std::lock_guard lock(conn->handler_mutex);
            replies = conn->handler->handle(m);
        }
        for (const auto& r : replies) conn->send(r);
    };

    // Detect the framing from the first bytes.
    while (!conn->closed && pending.size() < 4) {
        const auto chunk = receive_some(conn->fd, 100);
        if (!chunk) continue;
        if (chunk->empty()) break;
        pending += *chunk;
    }
    if (!conn->closed && pending.rfind("GET ", 0) == 0) {
        while (!conn->closed && pending.find("\r\n\r\n") == std::string::npos && pending.size() < kMaxHandshakeBytes) {
            const auto chunk = receive_some(conn->fd, 100);
            if (!chunk) continue;
            if (chunk->empty()) break;
            pending += *chunk;
        }
        const std::size_t end = pending.find("\r\n\r\n");
        try {
            if (end == std::string::npos) throw ProtocolError("incomplete websocket handshake");
            const std::string reply = websocket_handshake(pending.substr(0, end + 4));
            {
                const std::lock_guard lock(conn->write_mutex);
                send_all(conn->fd, reply);
            }
            conn->websocket = true;
            pending.erase(0, end + 4);
        } catch (const ProtocolError& e) {
            send_all(conn->fd, fmt::format("HTTP/1.1 400 Bad Request\r\nContent-Length: {}\r\n\r\n{}",
                                           std::strlen(e.what()), e.what()));
            conn->close();
        }
    }

    FrameDecoder frames;
    WebSocketDecoder ws;
    bool first = true;
    while (!conn->closed) {
        std::string chunk;
        if (first) {
            chunk = std::move(pending);
            first = false;
        } else {
            const auto got = receive_some(conn->fd, 100);
            if (!got) continue;
            if (got->empty()) break;
            chunk = *got;
        }
        try {
            if (conn->websocket) {
                ws.feed(chunk);
                while (auto f = ws.next()) {
                    if (f->opcode == 0x8) {
                        const std::lock_guard lock(conn->write_mutex);
                        send_all(conn->fd, encode_websocket(f->payload, 0x8));
                        conn->close();
                        break;
                    }
                    if (f->opcode == 0x9) {
                        const std::lock_guard lock(conn->write_mutex);
                        send_all(conn->fd, encode_websocket(f->payload, 0xA));
                        continue;
                    }
                    if (f->opcode != 0x1) continue;
                    try {
                        dispatch(parse_message(f->payload));
                    } catch (const ProtocolError& e) {
                        conn->send(error_message("", 0, e.kind(), e.what()));
                    }
                }
            } else {
                frames.feed(chunk);
                for (;;) {
                    std::optional<Message> m;
                    try {
                        m = frames.next();
                    } catch (const ProtocolError& e) {
                        // A bad body still consumed its frame; an oversized header cannot be skipped.
                        conn->send(error_message("", 0, e.kind(), e.what()));
                        if (std::string_view(e.what()).find("exceeds") == std::string_view::npos) continue;
                        conn->close();
                        break;
                    }
                    if (!m) break;
                    dispatch(*m);
                }
            }
        } catch (const ProtocolError& e) {
            conn->send(error_message("", 0, e.kind(), e.what()));
            conn->close();
        }
    }
    conn->close();
    sender.join();
    conn->done = true;
}

// ---------------------------------------------------------------------------

Client::Client(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string service = std::to_string(port);
    if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
        throw InputError(fmt::format("cannot resolve '{}': {}", host, ::gai_strerror(rc)));
    }
    for (addrinfo* a = res; a && fd_ < 0; a = a->ai_next) {
        fd_ = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
        if (fd_ < 0) continue;
        if (::connect(fd_, a->ai_addr, a->ai_addrlen) != 0) {
            ::close(fd_);
            fd_ = -1;
        }
    }
    ::freeaddrinfo(res);
    if (fd_ < 0) throw InputError(fmt::format("cannot connect to {}:{}", host, port));
    const int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

Client::~Client() {
    if (fd_ >= 0) ::close(fd_);
}

void Client::send(const Message& message) {
    if (!send_all(fd_, encode_frame(message))) throw InputError("connection closed");
}

std::optional<Message> Client::receive(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        if (auto m = decoder_.next()) return m;
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) return std::nullopt;
        const auto chunk = receive_some(fd_, static_cast<int>(left.count()));
        if (!chunk) continue;
        if (chunk->empty()) throw InputError("connection closed");
        decoder_.feed(*chunk);
    }
}

Message Client::expect(const std::string& type, std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) break;
        auto m = receive(left);
        if (!m) break;
        if (m->type == type) return *m;
    }
    throw InputError(fmt::format("no '{}' message within {} ms", type, timeout.count()));
}

}  // namespace flowbots::teleop
