#include <chrono>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "flowbots/scenario.hpp"
#include "flowbots/teleop.hpp"

namespace flowbots::teleop {

RoleMap neutral_roles(const Assembly& assembly) {
    RoleMap roles;
    for (const auto& port : assembly.port_names()) roles[port] = Vent{1.0};
    return roles;
}

Session::Session(std::string id, Assembly assembly, double tick_rate, SolverSettings settings)
    : id_(std::move(id)), assembly_(std::move(assembly)), tick_rate_(tick_rate), settings_(settings) {
    if (!(tick_rate > 0.0) || !std::isfinite(tick_rate)) throw DomainError("tick rate must be positive");
    dt_ = 1.0 / tick_rate;
    roles_ = neutral_roles(assembly_);
    pending_roles_ = roles_;
    assembly_.roles = roles_;
    sim_ = std::make_unique<TransientSimulator>(build_assembly_network(assembly_, true), settings_);
    sim_->initialize();
    publish();
}

Ack Session::submit(const ControlFrame& frame) {
    if (frame.seq <= last_seq_) return {AckStatus::Stale, frame.seq, last_seq_, tick_ + 1};
    RoleMap merged = pending_roles_;
    for (const auto& [port, role] : frame.roles) {
        if (!merged.count(port)) throw InvalidControlsError(fmt::format("unknown port '{}'", port));
        merged[port] = role;
    }
    try {
        assembly_.validate_roles(merged, true);
    } catch (const Error& e) {
        throw InvalidControlsError(e.what());
    }
    pending_roles_ = std::move(merged);
    pending_ = true;
    last_seq_ = frame.seq;
    return {AckStatus::Applied, frame.seq, last_seq_, tick_ + 1};
}

const Snapshot& Session::tick() {
    if (pending_) {
        const Controls c = controls_for(assembly_, pending_roles_, true);
        for (const auto& [id, opening] : c.openings) sim_->set_opening(id, opening);
        for (const auto& [id, value] : c.source_values) sim_->set_source_value(id, value);
        roles_ = pending_roles_;
        applied_seq_ = last_seq_;
        pending_ = false;
    }
    // Step ends are k * dt by multiplication, matching simulate_transient.
    const double t_prev = static_cast<double>(tick_) * dt_;
    const double t = static_cast<double>(tick_ + 1) * dt_;
    sim_->step(t, t - t_prev);
    ++tick_;
    publish();
    return snapshot_;
}

void Session::publish() {
    const SteadyState& state = sim_->state();
    Snapshot s;
    s.session = id_;
    s.tick = tick_;
    s.time = static_cast<double>(tick_) * dt_;
    s.applied_seq = applied_seq_;
    s.roles = roles_;
    const auto names = assembly_.actuator_names();
    const auto states = actuator_states(assembly_, state);
    std::vector<double> kappa;
    for (std::size_t i = 0; i < names.size(); ++i) {
        s.limbs.push_back({names[i], states[i].curvature, states[i].delta_p_chambers, states[i].flow_through});
        kappa.push_back(states[i].curvature);
    }
    s.source_flow = state.flow("source");
    s.sink_flow = state.flow("sink");
    s.audit = power_audit(state, sim_->network());
    s.pattern = sign_pattern(kappa).to_string();
    snapshot_ = std::move(s);
}

// ---------------------------------------------------------------------------

json roles_to_json(const RoleMap& roles) {
    json j = json::object();
    for (const auto& [port, role] : roles) j[port] = to_string(role);
    return j;
}

RoleMap roles_from_json(const json& j) {
    if (!j.is_object()) throw InvalidControlsError("roles must be an object");
    RoleMap roles;
    for (const auto& [port, value] : j.items()) {
        if (!value.is_string()) throw InvalidControlsError(fmt::format("role of '{}' must be a string", port));
        try {
            roles[port] = cli::parse_role(value.get<std::string>());
        } catch (const Error& e) {
            throw InvalidControlsError(fmt::format("port '{}': {}", port, e.what()));
        }
    }
    return roles;
}

json to_json(const Snapshot& s) {
    json limbs = json::array();
    for (const auto& l : s.limbs) {
        limbs.push_back({{"name", l.name}, {"curvature", l.curvature}, {"delta_p", l.delta_p}, {"tip_flow", l.tip_flow}});
    }
    return {{"tick", s.tick},
            {"time", s.time},
            {"applied_seq", s.applied_seq},
            {"roles", roles_to_json(s.roles)},
            {"limbs", limbs},
            {"source_flow", s.source_flow},
            {"sink_flow", s.sink_flow},
            {"audit",
             {{"source_power", s.audit.source_power},
              {"dissipated_power", s.audit.dissipated_power},
              {"relative_mismatch", s.audit.relative_mismatch()}}},
            {"pattern", s.pattern}};
}

Snapshot snapshot_from_json(const json& j) {
    Snapshot s;
    s.tick = j.at("tick").get<std::uint64_t>();
    s.time = j.at("time").get<double>();
    s.applied_seq = j.at("applied_seq").get<std::uint64_t>();
    s.roles = roles_from_json(j.at("roles"));
    for (const auto& l : j.at("limbs")) {
        s.limbs.push_back({l.at("name").get<std::string>(), l.at("curvature").get<double>(),
                           l.at("delta_p").get<double>(), l.at("tip_flow").get<double>()});
    }
    s.source_flow = j.at("source_flow").get<double>();
    s.sink_flow = j.at("sink_flow").get<double>();
    s.audit.source_power = j.at("audit").at("source_power").get<double>();
    s.audit.dissipated_power = j.at("audit").at("dissipated_power").get<double>();
    s.pattern = j.at("pattern").get<std::string>();
    return s;
}

}  // namespace flowbots::teleop
