#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowbots/assembly.hpp"
#include "flowbots/errors.hpp"

namespace flowbots::teleop {

using json = nlohmann::json;

class InvalidControlsError : public Error {
public:
    explicit InvalidControlsError(const std::string& message) : Error("invalid_controls", message) {}
};

class NotFoundError : public Error {
public:
    explicit NotFoundError(const std::string& message) : Error("not_found", message) {}
};

class InvalidSpecError : public Error {
public:
    explicit InvalidSpecError(const std::string& message) : Error("invalid_spec", message) {}
};

class SessionFailedError : public Error {
public:
    explicit SessionFailedError(const std::string& message) : Error("session_failed", message) {}
};

// Operator input. `roles` may name a subset of ports; the rest keep their
// current role.
struct ControlFrame {
    std::uint64_t seq = 0;
    double timestamp = 0.0;  // s, client clock, informational
    RoleMap roles;
};

struct LimbState {
    std::string name;
    double curvature = 0.0;  // 1/m
    double delta_p = 0.0;    // Pa
    double tip_flow = 0.0;   // m^3/s
};

struct Snapshot {
    std::string session;
    std::uint64_t tick = 0;
    double time = 0.0;  // s
    std::uint64_t applied_seq = 0;
    RoleMap roles;
    std::vector<LimbState> limbs;
    double source_flow = 0.0;  // m^3/s
    double sink_flow = 0.0;
    PowerAudit audit;
    std::string pattern;
};

enum class AckStatus { Applied, Stale };

struct Ack {
    AckStatus status = AckStatus::Applied;
    std::uint64_t seq = 0;             // the frame's sequence number
    std::uint64_t applied_seq = 0;     // latest accepted sequence number
    std::uint64_t effective_tick = 0;  // first tick that sees the frame
};

// Every port vented fully open, no supply.
RoleMap neutral_roles(const Assembly& assembly);

// The simulation owned by one session. Not thread-safe; the service wraps it.
class Session {
public:
    Session(std::string id, Assembly assembly, double tick_rate = 50.0, SolverSettings settings = {});

    const std::string& id() const { return id_; }
    const Assembly& assembly() const { return assembly_; }
    double tick_rate() const { return tick_rate_; }
    double dt() const { return dt_; }
    std::uint64_t ticks() const { return tick_; }

    // Validates and queues a frame for the next tick. Throws
    // InvalidControlsError, keeping the previous controls.
    Ack submit(const ControlFrame& frame);

    // Applies queued controls and advances one step of 1 / tick_rate.
    const Snapshot& tick();

    const Snapshot& snapshot() const { return snapshot_; }
    const RoleMap& pending_roles() const { return pending_roles_; }

private:
    void publish();

    std::string id_;
    Assembly assembly_;
    double tick_rate_;
    double dt_;
    SolverSettings settings_;
    std::unique_ptr<TransientSimulator> sim_;
    std::uint64_t tick_ = 0;
    std::uint64_t last_seq_ = 0;     // latest accepted
    std::uint64_t applied_seq_ = 0;  // latest in force
    RoleMap roles_;          // in force
    RoleMap pending_roles_;  // accepted, applied at the next tick
    bool pending_ = false;
    Snapshot snapshot_;
};

json to_json(const Snapshot& snapshot);
Snapshot snapshot_from_json(const json& j);
json roles_to_json(const RoleMap& roles);
RoleMap roles_from_json(const json& j);  // throws InvalidControlsError

// ---------------------------------------------------------------------------

// JSON-lines log of sessions, applied frames and snapshots.
class Recorder {
public:
    explicit Recorder(const std::filesystem::path& path);
    void write(const json& line);

private:
    std::mutex mutex_;
    std::ofstream out_;
};

struct ServiceOptions {
    double tick_rate = 50.0;
    bool realtime = true;  // false: sessions advance only through Service::advance
    SolverSettings solver;
    std::optional<std::filesystem::path> record;
};

struct SessionInfo {
    std::string id;
    std::vector<std::string> ports;
    std::vector<std::string> actuators;
    double tick_rate = 0.0;
    RoleMap roles;
};

// Sessions keyed by id. Controls are ingested on the caller's thread, the
// simulation advances on one stepping thread per session, and snapshots are
// published as immutable values; a reader that falls behind gets the latest.
class Service {
public:
    explicit Service(ServiceOptions options = {});
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // `spec` uses the scenario assembly syntax. Throws InvalidSpecError.
    SessionInfo create_session(const json& spec);
    SessionInfo info(const std::string& id) const;
    Ack apply_controls(const std::string& id, const ControlFrame& frame);

    using SnapshotPtr = std::shared_ptr<const Snapshot>;
    SnapshotPtr latest(const std::string& id) const;
    // Blocks until a snapshot newer than `after_tick` exists or the timeout
    // passes; returns the latest one either way (null if none is newer).
    SnapshotPtr wait_newer(const std::string& id, std::uint64_t after_tick,
                           std::chrono::milliseconds timeout) const;

    // Manual stepping; only valid when realtime is off.
    void advance(const std::string& id, std::uint64_t ticks = 1);

    void close_session(const std::string& id);
    void stop();

    const ServiceOptions& options() const { return options_; }

private:
    struct Entry;
    std::shared_ptr<Entry> find(const std::string& id) const;
    void step_entry(Entry& entry);
    void run_loop(const std::shared_ptr<Entry>& entry);

    ServiceOptions options_;
    std::unique_ptr<Recorder> recorder_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::uint64_t next_id_ = 1;
};

// ---------------------------------------------------------------------------
// Offline replay of a recorded log through simulate_assembly.

struct ReplayReport {
    std::string session;
    std::size_t snapshots = 0;
    double max_curvature_error = 0.0;  // 1/m, largest |streamed - replayed|
};

std::vector<ReplayReport> replay_log(std::istream& log, const SolverSettings& settings = {});

}  // namespace flowbots::teleop
