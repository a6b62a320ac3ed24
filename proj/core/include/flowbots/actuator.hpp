#pragma once

#include <string>
#include <vector>

#include "flowbots/circuit.hpp"

namespace flowbots {

struct ChannelGeometry {
    double length = 0.0;              // m
    double hydraulic_diameter = 0.0;  // m
};

// Phenomenological viscoelastic creep after the fill transient.
struct Creep {
    double amplitude = 0.05;
    double tau = 2.0;  // s
};

// Bidirectional actuator: two chamber chains joined by a narrow tip channel.
//
// Fragment layout (node ids, before any assembly prefix):
//
//   left -par_left- l0 -seg_l1- l1 ... -seg_lN- lN -tip- rN -seg_rN- ... r1 -seg_r1- r0 -par_right- right
//
// Chambers `cham_lK` / `cham_rK` hang from lK / rK to the `gnd` reservoir.
// With parasitic_fraction == 0 the parasitic channels are omitted and l0/r0
// coincide with the ports.
struct ActuatorModel {
    int segments_per_side = 3;
    ChannelGeometry segment_channel{0.005, 5.0e-3};
    ChannelGeometry tip_constriction{0.01, 6.0e-4};
    double curvature_gain = 2.0e-4;       // (1/m) / Pa
    double asymmetry_epsilon = 0.0;       // |eps| < 0.5; tip resistance x(1+eps) left->right, x(1-eps) right->left
    double parasitic_fraction = 0.09;     // share of port-to-port loss outside the chamber region
    Creep creep;
    double chamber_compliance = 3.0e-11;  // m^3 / Pa, per chamber
    double chamber_rest_volume = 1.0e-6;  // m^3, per chamber
    bool tip_sealed = false;              // static (non-recirculating) variant

    void validate() const;
};

struct ActuatorState {
    double delta_p_chambers = 0.0;  // Pa, mean left minus mean right
    double curvature = 0.0;         // 1/m
    double flow_through = 0.0;      // m^3/s, tip flow, positive left -> right
};

// Node/element ids of one actuator inside a larger network.
struct ActuatorIds {
    std::string left_port;
    std::string right_port;
    std::string region_left;   // l0 (or the left port when p == 0)
    std::string region_right;
    std::vector<std::string> left_chambers;   // l1..lN, port side first
    std::vector<std::string> right_chambers;  // r1..rN
    std::string tip;                          // empty for the static variant
};

ActuatorIds actuator_ids(const ActuatorModel& model, const std::string& prefix = "");

// Parasitic channel length that makes the port channels carry fraction p of
// the port-to-port loss in the symmetric linear reference. Fluid independent.
double parasitic_length(const ActuatorModel& model);

// Circuit fragment with interior ports `left`, `right` and reservoir `gnd`.
Network build_actuator_network(const ActuatorModel& model, const Fluid& fluid);

double chamber_pressure_difference(const SteadyState& solved, const ActuatorModel& model,
                                   const std::string& prefix = "");

inline double quasi_static_curvature(double delta_p, const ActuatorModel& model) {
    return model.curvature_gain * delta_p;
}

ActuatorState actuator_state(const SteadyState& solved, const ActuatorModel& model,
                             const std::string& prefix = "");

ActuatorModel static_variant(const ActuatorModel& model);

// ---------------------------------------------------------------------------
// Single-actuator rig: an ideal pressure difference across the two ports.

enum class FlowDirection { Forward, Reverse };  // forward = left -> right

struct RigSolution {
    SteadyState state;
    ActuatorState actuator;
    double loop_flow = 0.0;  // m^3/s through the source, >= 0
    PowerAudit audit;
};

Network build_rig_network(const ActuatorModel& model, const Fluid& fluid, double port_delta_p,
                          FlowDirection direction);

RigSolution solve_rig(const ActuatorModel& model, const Fluid& fluid, double port_delta_p,
                      FlowDirection direction, const SolverSettings& settings = {});

// ---------------------------------------------------------------------------
// Response dynamics

// Volume, at ambient density, that the chambers must take in to reach a
// chamber asymmetry of |final_delta_p|. Gas compression adds V0 dp / p_abs.
double fill_volume(const ActuatorModel& model, const Fluid& fluid, double final_delta_p,
                   double ambient_pressure = SolverSettings{}.ambient_pressure);

double fill_time_constant(const ActuatorModel& model, const Fluid& fluid, double loop_flow,
                          double final_delta_p,
                          double ambient_pressure = SolverSettings{}.ambient_pressure);

struct ResponseCurve {
    double fps = 240.0;
    double tau_fill = 0.0;
    std::vector<double> times;      // s
    std::vector<double> curvature;  // 1/m
};

// kappa(t) = kappa_fill(t) (1 + a (1 - exp(-t/tau_creep))) / (1 + a), with a
// first-order fill of time constant tau_fill; kappa(inf) = final_curvature.
ResponseCurve response_curve(const ActuatorModel& model, const Fluid& fluid, double loop_flow,
                             double final_curvature, double fps, double duration,
                             double ambient_pressure = SolverSettings{}.ambient_pressure);

// ---------------------------------------------------------------------------
// Calibration helpers

// Relative |kappa| difference between flow directions, (max - min) / min.
double direction_variance(const ActuatorModel& model, const Fluid& fluid, double port_delta_p,
                          const SolverSettings& settings = {});

// Bisection over asymmetry_epsilon in [0, 0.5) for a target direction variance.
// Throws ConfigurationError when the target is out of reach.
ActuatorModel calibrate_asymmetry(const ActuatorModel& model, const Fluid& fluid,
                                  double port_delta_p, double target_variance,
                                  const SolverSettings& settings = {});

// Fill-time ratio tau_liquid / tau_gas at equal port pressure difference.
double response_time_ratio(const ActuatorModel& model, const Fluid& liquid, const Fluid& gas,
                           double port_delta_p, const SolverSettings& settings = {});

// Bisection over chamber_rest_volume so that response_time_ratio hits target.
// The gas term V0 dp / p_abs is the only V0 dependence, so the ratio falls
// monotonically with V0.
ActuatorModel calibrate_rest_volume(const ActuatorModel& model, const Fluid& liquid,
                                    const Fluid& gas, double port_delta_p, double target_ratio,
                                    const SolverSettings& settings = {});

}  // namespace flowbots
