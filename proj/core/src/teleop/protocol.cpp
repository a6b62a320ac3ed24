#include "flowbots/protocol.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include <fmt/format.h>
#include <openssl/evp.h>

namespace flowbots::teleop {

json to_json(const Message& m) {
    return {{"type", m.type}, {"session", m.session}, {"seq", m.seq}, {"payload", m.payload}};
}

Message message_from_json(const json& j) {
    if (!j.is_object()) throw ProtocolError("message must be a JSON object");
    Message m;
    try {
        m.type = j.at("type").get<std::string>();
        if (const auto it = j.find("session"); it != j.end() && !it->is_null()) m.session = it->get<std::string>();
        if (const auto it = j.find("seq"); it != j.end()) {
            if (!it->is_number_unsigned()) throw ProtocolError("seq must be a non-negative integer");
            m.seq = it->get<std::uint64_t>();
        }
        if (const auto it = j.find("payload"); it != j.end()) m.payload = *it;
    } catch (const json::exception& e) {
        throw ProtocolError(fmt::format("malformed message: {}", e.what()));
    }
    return m;
}

Message parse_message(std::string_view text) {
    try {
        return message_from_json(json::parse(text.begin(), text.end()));
    } catch (const json::parse_error& e) {
        throw ProtocolError(fmt::format("invalid JSON: {}", e.what()));
    }
}

// ---------------------------------------------------------------------------

std::string encode_frame(const Message& message) {
    const std::string body = to_json(message).dump();
    if (body.size() > kMaxMessageBytes) throw ProtocolError("message too large");
    const auto n = static_cast<std::uint32_t>(body.size());
    std::string out;
    out.reserve(4 + body.size());
    for (int shift = 24; shift >= 0; shift -= 8) out += static_cast<char>((n >> shift) & 0xFF);
    out += body;
    return out;
}

void FrameDecoder::feed(std::string_view bytes) { buffer_.append(bytes); }

std::optional<Message> FrameDecoder::next() {
    if (buffer_.size() < 4) return std::nullopt;
    std::uint32_t n = 0;
    for (int i = 0; i < 4; ++i) n = (n << 8) | static_cast<std::uint8_t>(buffer_[i]);
    if (n > kMaxMessageBytes) throw ProtocolError(fmt::format("frame of {} bytes exceeds the limit", n));
    if (buffer_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
    const std::string body = buffer_.substr(4, n);
    buffer_.erase(0, 4 + static_cast<std::size_t>(n));
    return parse_message(body);
}

// ---------------------------------------------------------------------------

std::string websocket_accept_key(std::string_view client_key) {
    static constexpr std::string_view kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
    std::string input(client_key);
    input += kGuid;
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(input.data(), input.size(), digest.data(), &len, EVP_sha1(), nullptr) != 1) {
        throw ProtocolError("sha1 failed");
    }
    std::array<unsigned char, 4 * ((EVP_MAX_MD_SIZE + 2) / 3) + 1> encoded{};
    const int n = EVP_EncodeBlock(encoded.data(), digest.data(), static_cast<int>(len));
    return {reinterpret_cast<const char*>(encoded.data()), static_cast<std::size_t>(n)};
}

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

std::string websocket_handshake(std::string_view request) {
    if (request.rfind("GET ", 0) != 0) throw ProtocolError("websocket upgrade must be a GET request");
    std::string key;
    bool upgrade = false;
    std::size_t pos = request.find('\n');
    while (pos != std::string_view::npos && pos + 1 < request.size()) {
        const std::size_t end = request.find('\n', pos + 1);
        const std::string_view line = trim(request.substr(pos + 1, end == std::string_view::npos ? end : end - pos - 1));
        pos = end;
        const std::size_t colon = line.find(':');
        if (colon == std::string_view::npos) continue;
        const std::string name = lower(trim(line.substr(0, colon)));
        const std::string_view value = trim(line.substr(colon + 1));
        if (name == "sec-websocket-key") key = std::string(value);
        if (name == "upgrade" && lower(value) == "websocket") upgrade = true;
    }
    if (!upgrade || key.empty()) throw ProtocolError("missing websocket upgrade headers");
    return fmt::format(
        "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
        "Sec-WebSocket-Accept: {}\r\n\r\n",
        websocket_accept_key(key));
}

std::string encode_websocket(std::string_view payload, std::uint8_t opcode, std::optional<std::uint32_t> mask) {
    std::string out;
    out += static_cast<char>(0x80 | (opcode & 0x0F));
    const std::uint8_t mask_bit = mask ? 0x80 : 0x00;
    const std::size_t n = payload.size();
    if (n < 126) {
        out += static_cast<char>(mask_bit | n);
    } else if (n < 65536) {
        out += static_cast<char>(mask_bit | 126);
        out += static_cast<char>((n >> 8) & 0xFF);
        out += static_cast<char>(n & 0xFF);
    } else {
        out += static_cast<char>(mask_bit | 127);
        for (int shift = 56; shift >= 0; shift -= 8) out += static_cast<char>((static_cast<std::uint64_t>(n) >> shift) & 0xFF);
    }
    if (!mask) return out.append(payload);
    std::array<char, 4> key{};
    for (int i = 0; i < 4; ++i) key[i] = static_cast<char>((*mask >> (24 - 8 * i)) & 0xFF);
    out.append(key.data(), 4);
    for (std::size_t i = 0; i < n; ++i) out += static_cast<char>(payload[i] ^ key[i % 4]);
    return out;
}

void WebSocketDecoder::feed(std::string_view bytes) { buffer_.append(bytes); }

std::optional<WebSocketFrame> WebSocketDecoder::next() {
    for (;;) {
        if (buffer_.size() < 2) return std::nullopt;
        const auto b0 = static_cast<std::uint8_t>(buffer_[0]);
        const auto b1 = static_cast<std::uint8_t>(buffer_[1]);
        const bool fin = (b0 & 0x80) != 0;
        const std::uint8_t opcode = b0 & 0x0F;
        const bool masked = (b1 & 0x80) != 0;
        std::uint64_t n = b1 & 0x7F;
        std::size_t header = 2;
        if (n == 126) {
            if (buffer_.size() < 4) return std::nullopt;
            n = (static_cast<std::uint64_t>(static_cast<std::uint8_t>(buffer_[2])) << 8) |
                static_cast<std::uint8_t>(buffer_[3]);
            header = 4;
        } else if (n == 127) {
            if (buffer_.size() < 10) return std::nullopt;
            n = 0;
            for (int i = 0; i < 8; ++i) n = (n << 8) | static_cast<std::uint8_t>(buffer_[2 + i]);
            header = 10;
        }
        if (n > kMaxMessageBytes) throw ProtocolError("websocket frame too large");
        const std::size_t mask_at = header;
        if (masked) header += 4;
        if (buffer_.size() < header + n) return std::nullopt;

        std::string payload = buffer_.substr(header, static_cast<std::size_t>(n));
        if (masked) {
            for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = static_cast<char>(payload[i] ^ buffer_[mask_at + i % 4]);
        }
        buffer_.erase(0, header + static_cast<std::size_t>(n));

        if (opcode >= 0x8) return WebSocketFrame{opcode, std::move(payload)};
        if (opcode != 0x0) {
            if (!fragments_.empty() || fragment_opcode_ != 0) throw ProtocolError("interleaved websocket message");
            if (fin) return WebSocketFrame{opcode, std::move(payload)};
            fragment_opcode_ = opcode;
            fragments_ = std::move(payload);
            continue;
        }
        if (fragment_opcode_ == 0) throw ProtocolError("continuation frame without a message");
        fragments_ += payload;
        if (fragments_.size() > kMaxMessageBytes) throw ProtocolError("websocket message too large");
        if (fin) {
            WebSocketFrame f{fragment_opcode_, std::move(fragments_)};
            fragments_.clear();
            fragment_opcode_ = 0;
            return f;
        }
    }
}

// ---------------------------------------------------------------------------

Message snapshot_message(const Snapshot& snapshot) {
    return {"snapshot", snapshot.session, snapshot.tick, to_json(snapshot)};
}

Message error_message(const std::string& session, std::uint64_t seq, const std::string& kind, const std::string& text) {
    return {"error", session, seq, {{"kind", kind}, {"message", text}}};
}

std::vector<Message> ProtocolHandler::handle(const Message& request) {
    try {
        if (request.type == "create") return {create(request)};
        if (request.type == "controls") return {controls(request)};
        throw ProtocolError(fmt::format("unexpected message type '{}'", request.type));
    } catch (const Error& e) {
        return {error_message(request.session, request.seq, e.kind(), e.what())};
    }
}

Message ProtocolHandler::create(const Message& request) {
    std::string status = "created";
    SessionInfo info;
    if (const auto it = request.payload.find("join"); it != request.payload.end()) {
        if (!it->is_string()) throw ProtocolError("join must name a session");
        info = service_.info(it->get<std::string>());
        status = "joined";
    } else {
        info = service_.create_session(request.payload);
    }
    if (std::find(subscriptions_.begin(), subscriptions_.end(), info.id) == subscriptions_.end()) {
        subscriptions_.push_back(info.id);
    }
    return {"ack",
            info.id,
            request.seq,
            {{"status", status},
             {"session", info.id},
             {"ports", info.ports},
             {"actuators", info.actuators},
             {"tick_rate", info.tick_rate},
             {"roles", roles_to_json(info.roles)}}};
}

Message ProtocolHandler::controls(const Message& request) {
    if (request.session.empty()) throw ProtocolError("controls need a session");
    ControlFrame frame;
    frame.seq = request.seq;
    if (const auto it = request.payload.find("timestamp"); it != request.payload.end() && it->is_number()) {
        frame.timestamp = it->get<double>();
    }
    const auto roles = request.payload.find("roles");
    if (roles == request.payload.end()) throw InvalidControlsError("controls payload needs 'roles'");
    frame.roles = roles_from_json(*roles);
    const Ack ack = service_.apply_controls(request.session, frame);
    return {"ack",
            request.session,
            request.seq,
            {{"status", ack.status == AckStatus::Applied ? "applied" : "stale"},
             {"applied_seq", ack.applied_seq},
             {"effective_tick", ack.effective_tick}}};
}

}  // namespace flowbots::teleop
