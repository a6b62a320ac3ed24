#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "flowbots/scenario.hpp"
#include "flowbots/teleop.hpp"

namespace flowbots::teleop {

Recorder::Recorder(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw InputError(fmt::format("cannot open record file '{}'", path.string()));
}

void Recorder::write(const json& line) {
    const std::string text = line.dump();
    const std::lock_guard lock(mutex_);
    out_ << text << '\n';
    out_.flush();
}

// ---------------------------------------------------------------------------

struct Service::Entry {
    explicit Entry(Session s) : session(std::move(s)) {}

    mutable std::mutex mutex;
    mutable std::condition_variable changed;
    Session session;
    SnapshotPtr latest;
    std::string failure;
    bool stopping = false;
    std::thread thread;
};

Service::Service(ServiceOptions options) : options_(std::move(options)) {
    if (!(options_.tick_rate > 0.0)) throw DomainError("tick rate must be positive");
    if (options_.record) recorder_ = std::make_unique<Recorder>(*options_.record);
}

Service::~Service() { stop(); }

SessionInfo Service::create_session(const json& spec) {
    Assembly assembly;
    try {
        assembly = cli::parse_assembly_spec(spec.dump());
    } catch (const Error& e) {
        throw InvalidSpecError(e.what());
    }

    std::string id;
    {
        const std::lock_guard lock(mutex_);
        id = fmt::format("s{}", next_id_++);
    }
    auto entry = std::make_shared<Entry>(Session(id, std::move(assembly), options_.tick_rate, options_.solver));
    entry->latest = std::make_shared<const Snapshot>(entry->session.snapshot());
    if (recorder_) {
        recorder_->write({{"type", "create"}, {"session", id}, {"tick_rate", options_.tick_rate}, {"spec", spec}});
        recorder_->write({{"type", "snapshot"}, {"session", id}, {"payload", to_json(*entry->latest)}});
    }
    {
        const std::lock_guard lock(mutex_);
        sessions_[id] = entry;
    }
    if (options_.realtime) entry->thread = std::thread([this, entry] { run_loop(entry); });
    return info(id);
}

std::shared_ptr<Service::Entry> Service::find(const std::string& id) const {
    const std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFoundError(fmt::format("no session '{}'", id));
    return it->second;
}

SessionInfo Service::info(const std::string& id) const {
    const auto entry = find(id);
    const std::lock_guard lock(entry->mutex);
    const Session& s = entry->session;
    return {id, s.assembly().port_names(), s.assembly().actuator_names(), s.tick_rate(), s.pending_roles()};
}

Ack Service::apply_controls(const std::string& id, const ControlFrame& frame) {
    const auto entry = find(id);
    const std::lock_guard lock(entry->mutex);
    if (!entry->failure.empty()) throw SessionFailedError(entry->failure);
    const Ack ack = entry->session.submit(frame);
    if (recorder_ && ack.status == AckStatus::Applied) {
        // The merged role set is logged so a replay needs no history.
        recorder_->write({{"type", "controls"},
                          {"session", id},
                          {"seq", frame.seq},
                          {"tick", ack.effective_tick},
                          {"roles", roles_to_json(entry->session.pending_roles())}});
    }
    return ack;
}

Service::SnapshotPtr Service::latest(const std::string& id) const {
    const auto entry = find(id);
    const std::lock_guard lock(entry->mutex);
    return entry->latest;
}

Service::SnapshotPtr Service::wait_newer(const std::string& id, std::uint64_t after_tick,
                                         std::chrono::milliseconds timeout) const {
    const auto entry = find(id);
    std::unique_lock lock(entry->mutex);
    entry->changed.wait_for(lock, timeout, [&] { return entry->stopping || entry->latest->tick > after_tick; });
    return entry->latest->tick > after_tick ? entry->latest : nullptr;
}

void Service::step_entry(Entry& entry) {
    const std::lock_guard lock(entry.mutex);
    if (!entry.failure.empty() || entry.stopping) return;
    try {
        entry.latest = std::make_shared<const Snapshot>(entry.session.tick());
    } catch (const Error& e) {
        entry.failure = fmt::format("{}: {}", e.kind(), e.what());
        if (recorder_) {
            recorder_->write({{"type", "error"}, {"session", entry.session.id()}, {"message", entry.failure}});
        }
    }
    if (recorder_ && entry.failure.empty()) {
        recorder_->write({{"type", "snapshot"}, {"session", entry.session.id()}, {"payload", to_json(*entry.latest)}});
    }
    entry.changed.notify_all();
}

void Service::advance(const std::string& id, std::uint64_t ticks) {
    if (options_.realtime) throw std::logic_error("advance() needs a service without the realtime loop");
    const auto entry = find(id);
    for (std::uint64_t i = 0; i < ticks; ++i) step_entry(*entry);
    const std::lock_guard lock(entry->mutex);
    if (!entry->failure.empty()) throw SessionFailedError(entry->failure);
}

void Service::run_loop(const std::shared_ptr<Entry>& entry) {
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / options_.tick_rate));
    const auto start = clock::now();
    for (std::uint64_t k = 1;; ++k) {
        {
            std::unique_lock lock(entry->mutex);
            entry->changed.wait_until(lock, start + static_cast<long>(k) * period, [&] { return entry->stopping; });
            if (entry->stopping || !entry->failure.empty()) return;
        }
        step_entry(*entry);
    }
}

void Service::close_session(const std::string& id) {
    std::shared_ptr<Entry> entry;
    {
        const std::lock_guard lock(mutex_);
        const auto it = sessions_.find(id);
        if (it == sessions_.end()) throw NotFoundError(fmt::format("no session '{}'", id));
        entry = it->second;
        sessions_.erase(it);
    }
    {
        const std::lock_guard lock(entry->mutex);
        entry->stopping = true;
    }
    entry->changed.notify_all();
    if (entry->thread.joinable()) entry->thread.join();
}

void Service::stop() {
    std::vector<std::string> ids;
    {
        const std::lock_guard lock(mutex_);
        for (const auto& [id, _] : sessions_) ids.push_back(id);
    }
    for (const auto& id : ids) {
        try {
            close_session(id);
        } catch (const NotFoundError&) {
        }
    }
}

// ---------------------------------------------------------------------------

std::vector<ReplayReport> replay_log(std::istream& log, const SolverSettings& settings) {
    struct Recorded {
        json spec;
        double tick_rate = 0.0;
        RoleSchedule schedule;
        std::vector<Snapshot> snapshots;
    };
    std::map<std::string, Recorded> sessions;
    std::vector<std::string> order;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(log, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(fmt::format("line {}: {}", line_no, e.what()), line_no);
        }
        const std::string type = j.at("type").get<std::string>();
        const std::string id = j.at("session").get<std::string>();
        if (type == "create") {
            order.push_back(id);
            sessions[id].spec = j.at("spec");
            sessions[id].tick_rate = j.at("tick_rate").get<double>();
            continue;
        }
        const auto it = sessions.find(id);
        if (it == sessions.end()) throw ParseError(fmt::format("line {}: session '{}' not created", line_no, id), line_no);
        Recorded& r = it->second;
        if (type == "controls") {
            const double dt = 1.0 / r.tick_rate;
            r.schedule.emplace_back(static_cast<double>(j.at("tick").get<std::uint64_t>()) * dt,
                                    roles_from_json(j.at("roles")));
        } else if (type == "snapshot") {
            r.snapshots.push_back(snapshot_from_json(j.at("payload")));
        }
    }

    std::vector<ReplayReport> out;
    for (const auto& id : order) {
        Recorded& r = sessions[id];
        const Assembly assembly = cli::parse_assembly_spec(r.spec.dump());
        const double dt = 1.0 / r.tick_rate;
        RoleSchedule schedule{{0.0, neutral_roles(assembly)}};
        schedule.insert(schedule.end(), r.schedule.begin(), r.schedule.end());
        std::uint64_t last = 0;
        for (const auto& s : r.snapshots) last = std::max(last, s.tick);
        const TransientTrace trace = simulate_assembly(assembly, schedule, static_cast<double>(last) * dt, dt, settings);

        ReplayReport report{id, r.snapshots.size(), 0.0};
        for (const auto& s : r.snapshots) {
            const auto states = actuator_states(assembly, trace.snapshots.at(s.tick));
            for (std::size_t i = 0; i < states.size(); ++i) {
                report.max_curvature_error =
                    std::max(report.max_curvature_error, std::abs(states[i].curvature - s.limbs.at(i).curvature));
            }
        }
        out.push_back(report);
    }
    return out;
}

}  // namespace flowbots::teleop
