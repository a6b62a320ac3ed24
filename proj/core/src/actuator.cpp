#include "flowbots/actuator.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "flowbots/errors.hpp"

namespace flowbots {

namespace {

bool positive_finite(double v) { return v > 0.0 && std::isfinite(v); }

std::string node_l(int k) { return fmt::format("l{}", k); }
std::string node_r(int k) { return fmt::format("r{}", k); }

}  // namespace

void ActuatorModel::validate() const {
    if (segments_per_side < 1) throw DomainError("segments_per_side must be >= 1");
    if (!positive_finite(segment_channel.length) || !positive_finite(segment_channel.hydraulic_diameter)) {
        throw DomainError("segment channel geometry must be positive");
    }
    if (!positive_finite(tip_constriction.length) ||
        !positive_finite(tip_constriction.hydraulic_diameter)) {
        throw DomainError("tip constriction geometry must be positive");
    }
    if (!(tip_constriction.hydraulic_diameter < segment_channel.hydraulic_diameter)) {
        throw DomainError("tip diameter must be smaller than the segment channel diameter");
    }
    if (!positive_finite(curvature_gain)) throw DomainError("curvature_gain must be positive");
    if (!(std::abs(asymmetry_epsilon) < 0.5)) throw DomainError("|asymmetry_epsilon| must be < 0.5");
    if (!(parasitic_fraction >= 0.0 && parasitic_fraction < 1.0)) {
        throw DomainError("parasitic_fraction must lie in [0, 1)");
    }
    if (!(creep.amplitude >= 0.0) || !std::isfinite(creep.amplitude)) {
        throw DomainError("creep amplitude must be >= 0");
    }
    if (!positive_finite(creep.tau)) throw DomainError("creep tau must be positive");
    if (!positive_finite(chamber_compliance)) throw DomainError("chamber_compliance must be positive");
    if (!positive_finite(chamber_rest_volume)) throw DomainError("chamber_rest_volume must be positive");
}

ActuatorIds actuator_ids(const ActuatorModel& model, const std::string& prefix) {
    ActuatorIds ids;
    const bool parasitic = model.parasitic_fraction > 0.0;
    ids.left_port = prefix + "left";
    ids.right_port = prefix + "right";
    ids.region_left = prefix + (parasitic ? "l0" : "left");
    ids.region_right = prefix + (parasitic ? "r0" : "right");
    for (int k = 1; k <= model.segments_per_side; ++k) {
        ids.left_chambers.push_back(prefix + node_l(k));
        ids.right_chambers.push_back(prefix + node_r(k));
    }
    if (!model.tip_sealed) ids.tip = prefix + "tip";
    return ids;
}

double parasitic_length(const ActuatorModel& model) {
    const double p = model.parasitic_fraction;
    if (p <= 0.0) return 0.0;
    // Region resistance in units of one segment-diameter channel per metre.
    const double d_ratio = model.segment_channel.hydraulic_diameter / model.tip_constriction.hydraulic_diameter;
    const double tip_equiv = model.tip_constriction.length * std::pow(d_ratio, 4);
    const double region = tip_equiv + 2.0 * model.segments_per_side * model.segment_channel.length;
    // Two ports share p of the total: 2 R_p = p (2 R_p + R_region).
    return p / (2.0 * (1.0 - p)) * region;
}

Network build_actuator_network(const ActuatorModel& model, const Fluid& fluid) {
    model.validate();
    const int n = model.segments_per_side;
    const bool parasitic = model.parasitic_fraction > 0.0;
    const std::string l0 = parasitic ? "l0" : "left";
    const std::string r0 = parasitic ? "r0" : "right";

    Network net(fluid);
    net.add_reservoir("gnd");
    net.add_node("left");
    net.add_node("right");
    if (parasitic) {
        net.add_node(l0);
        net.add_node(r0);
    }
    for (int k = 1; k <= n; ++k) {
        net.add_node(node_l(k));
        net.add_node(node_r(k));
    }

    const Channel seg{model.segment_channel.length, model.segment_channel.hydraulic_diameter};
    const Channel par{parasitic_length(model), model.segment_channel.hydraulic_diameter};
    if (parasitic) net.add_element("par_left", "left", l0, par);
    for (int k = 1; k <= n; ++k) {
        net.add_element(fmt::format("seg_l{}", k), k == 1 ? l0 : node_l(k - 1), node_l(k), seg);
    }
    if (!model.tip_sealed) {
        net.add_element("tip", node_l(n), node_r(n),
                        Channel{model.tip_constriction.length, model.tip_constriction.hydraulic_diameter,
                                model.asymmetry_epsilon});
    }
    for (int k = n; k >= 1; --k) {
        net.add_element(fmt::format("seg_r{}", k), node_r(k), k == 1 ? r0 : node_r(k - 1), seg);
    }
    if (parasitic) net.add_element("par_right", r0, "right", par);

    const ComplianceChamber chamber{model.chamber_rest_volume, model.chamber_compliance, 0.0};
    for (int k = 1; k <= n; ++k) {
        net.add_element(fmt::format("cham_l{}", k), node_l(k), "gnd", chamber);
        net.add_element(fmt::format("cham_r{}", k), node_r(k), "gnd", chamber);
    }
    return net;
}

double chamber_pressure_difference(const SteadyState& solved, const ActuatorModel& model,
                                   const std::string& prefix) {
    const auto ids = actuator_ids(model, prefix);
    double left = 0.0;
    double right = 0.0;
    for (const auto& id : ids.left_chambers) left += solved.pressure(id);
    for (const auto& id : ids.right_chambers) right += solved.pressure(id);
    const double n = static_cast<double>(model.segments_per_side);
    return left / n - right / n;
}

ActuatorState actuator_state(const SteadyState& solved, const ActuatorModel& model,
                             const std::string& prefix) {
    ActuatorState s;
    s.delta_p_chambers = chamber_pressure_difference(solved, model, prefix);
    s.curvature = quasi_static_curvature(s.delta_p_chambers, model);
    const auto ids = actuator_ids(model, prefix);
    s.flow_through = ids.tip.empty() ? 0.0 : solved.flow(ids.tip);
    return s;
}

ActuatorModel static_variant(const ActuatorModel& model) {
    model.validate();
    ActuatorModel out = model;
    out.tip_sealed = true;
    return out;
}

// ---------------------------------------------------------------------------

Network build_rig_network(const ActuatorModel& model, const Fluid& fluid, double port_delta_p,
                          FlowDirection direction) {
    Network net = build_actuator_network(model, fluid);
    const bool fwd = direction == FlowDirection::Forward;
    net.add_element("source", "gnd", fwd ? "left" : "right", PressureSource{port_delta_p});
    net.add_element("return", "gnd", fwd ? "right" : "left", PressureSource{0.0});
    return net;
}

RigSolution solve_rig(const ActuatorModel& model, const Fluid& fluid, double port_delta_p,
                      FlowDirection direction, const SolverSettings& settings) {
    const Network net = build_rig_network(model, fluid, port_delta_p, direction);
    RigSolution out;
    out.state = solve_steady(net, settings);
    out.actuator = actuator_state(out.state, model);
    out.loop_flow = std::abs(out.state.flow("source"));
    out.audit = power_audit(out.state, net);
    return out;
}

// ---------------------------------------------------------------------------

double fill_volume(const ActuatorModel& model, const Fluid& fluid, double final_delta_p,
                   double ambient_pressure) {
    model.validate();
    const double dp = std::abs(final_delta_p);
    const double v0 = model.chamber_rest_volume;
    const double c = model.chamber_compliance;
    // Mass taken up per chamber, expressed as volume at ambient density.
    const double density_ratio =
        density_at(fluid, ambient_pressure + dp) / density_at(fluid, ambient_pressure);
    return model.segments_per_side * ((v0 + c * dp) * density_ratio - v0);
}

double fill_time_constant(const ActuatorModel& model, const Fluid& fluid, double loop_flow,
                          double final_delta_p, double ambient_pressure) {
    if (!(loop_flow > 0.0) || !std::isfinite(loop_flow)) {
        throw DomainError("loop flow must be positive");
    }
    return fill_volume(model, fluid, final_delta_p, ambient_pressure) / loop_flow;
}

ResponseCurve response_curve(const ActuatorModel& model, const Fluid& fluid, double loop_flow,
                             double final_curvature, double fps, double duration,
                             double ambient_pressure) {
    if (!positive_finite(fps)) throw DomainError("fps must be positive");
    if (!(duration >= 0.0) || !std::isfinite(duration)) throw DomainError("duration must be >= 0");
    const double final_dp = final_curvature / model.curvature_gain;
    ResponseCurve out;
    out.fps = fps;
    out.tau_fill = fill_time_constant(model, fluid, loop_flow, final_dp, ambient_pressure);
    const double a = model.creep.amplitude;
    const auto frames = static_cast<long long>(std::floor(duration * fps + 1e-9));
    out.times.reserve(frames + 1);
    out.curvature.reserve(frames + 1);
    for (long long k = 0; k <= frames; ++k) {
        const double t = static_cast<double>(k) / fps;
        const double fill = 1.0 - std::exp(-t / out.tau_fill);
        const double creep = 1.0 + a * (1.0 - std::exp(-t / model.creep.tau));
        out.times.push_back(t);
        out.curvature.push_back(final_curvature * fill * creep / (1.0 + a));
    }
    return out;
}

// ---------------------------------------------------------------------------

double direction_variance(const ActuatorModel& model, const Fluid& fluid, double port_delta_p,
                          const SolverSettings& settings) {
    const double fwd =
        std::abs(solve_rig(model, fluid, port_delta_p, FlowDirection::Forward, settings).actuator.curvature);
    const double rev =
        std::abs(solve_rig(model, fluid, port_delta_p, FlowDirection::Reverse, settings).actuator.curvature);
    const double lo = std::min(fwd, rev);
    if (!(lo > 0.0)) throw DomainError("zero curvature in one direction");
    return (std::max(fwd, rev) - lo) / lo;
}

ActuatorModel calibrate_asymmetry(const ActuatorModel& model, const Fluid& fluid,
                                  double port_delta_p, double target_variance,
                                  const SolverSettings& settings) {
    if (!(target_variance >= 0.0)) throw DomainError("target variance must be >= 0");
    ActuatorModel m = model;
    const auto variance_at = [&](double eps) {
        m.asymmetry_epsilon = eps;
        return direction_variance(m, fluid, port_delta_p, settings);
    };
    double lo = 0.0;
    double hi = std::nextafter(0.5, 0.0);
    if (variance_at(hi) < target_variance) {
        throw ConfigurationError(
            fmt::format("direction variance {} unreachable with |epsilon| < 0.5", target_variance));
    }
    for (int i = 0; i < 200 && hi - lo > 1e-13; ++i) {
        const double mid = 0.5 * (lo + hi);
        (variance_at(mid) < target_variance ? lo : hi) = mid;
    }
    m.asymmetry_epsilon = 0.5 * (lo + hi);
    return m;
}

double response_time_ratio(const ActuatorModel& model, const Fluid& liquid, const Fluid& gas,
                           double port_delta_p, const SolverSettings& settings) {
    const auto tau = [&](const Fluid& fluid) {
        const auto rig = solve_rig(model, fluid, port_delta_p, FlowDirection::Forward, settings);
        return fill_time_constant(model, fluid, rig.loop_flow, rig.actuator.delta_p_chambers,
                                  settings.ambient_pressure);
    };
    return tau(liquid) / tau(gas);
}

ActuatorModel calibrate_rest_volume(const ActuatorModel& model, const Fluid& liquid,
                                    const Fluid& gas, double port_delta_p, double target_ratio,
                                    const SolverSettings& settings) {
    if (!(target_ratio > 0.0)) throw DomainError("target ratio must be positive");
    ActuatorModel m = model;
    const auto ratio_at = [&](double v0) {
        m.chamber_rest_volume = v0;
        return response_time_ratio(m, liquid, gas, port_delta_p, settings);
    };
    // Bracket in log space; the ratio decreases with V0.
    double lo = 1e-15;
    double hi = 1.0;
    if (ratio_at(lo) < target_ratio || ratio_at(hi) > target_ratio) {
        throw ConfigurationError(fmt::format("response ratio {} not bracketed", target_ratio));
    }
    for (int i = 0; i < 200 && hi / lo > 1.0 + 1e-13; ++i) {
        const double mid = std::sqrt(lo * hi);
        (ratio_at(mid) > target_ratio ? lo : hi) = mid;
    }
    m.chamber_rest_volume = std::sqrt(lo * hi);
    return m;
}

}  // namespace flowbots
