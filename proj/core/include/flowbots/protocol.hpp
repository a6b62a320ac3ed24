#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "flowbots/teleop.hpp"

namespace flowbots::teleop {

class ProtocolError : public Error {
public:
    explicit ProtocolError(const std::string& message) : Error("bad_message", message) {}
};

// Wire message {type, session, seq, payload}. Types: create, controls,
// snapshot, ack, error.
struct Message {
    std::string type;
    std::string session;
    std::uint64_t seq = 0;
    json payload = json::object();
};

json to_json(const Message& message);
Message message_from_json(const json& j);  // throws ProtocolError
Message parse_message(std::string_view text);

// ---------------------------------------------------------------------------
// Framing. Raw TCP: 4-byte big-endian length, then that many bytes of JSON.

inline constexpr std::size_t kMaxMessageBytes = 1u << 20;

std::string encode_frame(const Message& message);

class FrameDecoder {
public:
    void feed(std::string_view bytes);
    // Next complete message; throws ProtocolError on an oversized frame or bad JSON.
    std::optional<Message> next();

private:
    std::string buffer_;
};

// WebSocket (RFC 6455) for browser clients: one text frame per message.
std::string websocket_accept_key(std::string_view client_key);
// Full HTTP 101 response for an upgrade request; throws ProtocolError.
std::string websocket_handshake(std::string_view request);
// Server-to-client frames are unmasked; client frames carry a mask.
std::string encode_websocket(std::string_view payload, std::uint8_t opcode = 0x1,
                             std::optional<std::uint32_t> mask = std::nullopt);

struct WebSocketFrame {
    std::uint8_t opcode = 0;  // 0x1 text, 0x8 close, 0x9 ping, 0xA pong
    std::string payload;
};

class WebSocketDecoder {
public:
    void feed(std::string_view bytes);
    // Next complete (reassembled) frame; throws ProtocolError.
    std::optional<WebSocketFrame> next();

private:
    std::string buffer_;
    std::string fragments_;
    std::uint8_t fragment_opcode_ = 0;
};

// ---------------------------------------------------------------------------

// Request handling for one connection. The sessions it created or joined are
// the ones whose snapshots the connection streams.
class ProtocolHandler {
public:
    explicit ProtocolHandler(Service& service) : service_(service) {}

    std::vector<Message> handle(const Message& request);
    const std::vector<std::string>& subscriptions() const { return subscriptions_; }

private:
    Message create(const Message& request);
    Message controls(const Message& request);

    Service& service_;
    std::vector<std::string> subscriptions_;
};

Message snapshot_message(const Snapshot& snapshot);
Message error_message(const std::string& session, std::uint64_t seq, const std::string& kind,
                      const std::string& text);

// ---------------------------------------------------------------------------

// Accepts both framings on one port: a connection whose first bytes are an
// HTTP GET is upgraded to WebSocket, anything else is length-prefixed.
class Server {
public:
    Server(Service& service, std::string bind_address, std::uint16_t port);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    void start();  // throws InputError when the socket cannot be bound
    void stop();
    std::uint16_t port() const { return port_; }

private:
    struct Connection;
    void accept_loop();
    void serve(const std::shared_ptr<Connection>& connection);

    Service& service_;
    std::string bind_address_;
    std::uint16_t port_;
    int listen_fd_ = -1;
    std::atomic<bool> running_{false};
    std::thread acceptor_;
    std::mutex mutex_;
    std::vector<std::shared_ptr<Connection>> connections_;
};

// Blocking length-prefixed client, used by tests and scripted operators.
class Client {
public:
    Client(const std::string& host, std::uint16_t port);
    ~Client();
    Client(const Client&) = delete;
    Client& operator=(const Client&) = delete;

    void send(const Message& message);
    // Next message, or nothing after the timeout.
    std::optional<Message> receive(std::chrono::milliseconds timeout);
    // Next message of the given type, skipping others (throws InputError on timeout).
    Message expect(const std::string& type, std::chrono::milliseconds timeout);

private:
    int fd_ = -1;
    FrameDecoder decoder_;
};

}  // namespace flowbots::teleop
