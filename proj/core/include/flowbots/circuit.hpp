#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "flowbots/fluids.hpp"

namespace flowbots {

// ---------------------------------------------------------------------------
// Nodes

struct Interior {};

struct Reservoir {
    double pressure = 0.0;  // Pa, gauge
};

struct Node {
    std::string id;
    std::variant<Interior, Reservoir> kind = Interior{};

    bool is_reservoir() const { return std::holds_alternative<Reservoir>(kind); }
};

// ---------------------------------------------------------------------------
// Element laws. Signed flow Q is positive from `from` to `to`; the pressure
// drop of a passive element is p_from - p_to.

// Laminar Hagen-Poiseuille channel. `asymmetry` scales the resistance by
// (1 + asymmetry) for forward flow and (1 - asymmetry) for reverse flow.
struct Channel {
    double length = 0.0;             // m
    double hydraulic_diameter = 0.0; // m
    double asymmetry = 0.0;
};

// Orifice: dp = rho Q |Q| / (2 (Cd A opening)^2).
struct Constriction {
    double reference_area = 0.0;  // m^2
    double opening = 1.0;         // [0, 1]; 0 is closed
    double discharge_coefficient = 0.61;
};

// Linear fluidic diode. Forward (from -> to) resistance is base_resistance,
// reverse resistance is base_resistance * diodicity.
struct TeslaValve {
    double base_resistance = 0.0;  // Pa s / m^3
    double diodicity = 1.0;        // > 1
};

// Positive-displacement pump pushing q_set from `from` to `to`.
struct FlowSource {
    double q_set = 0.0;  // m^3/s
};

// Regulator holding p_to - p_from = p_set.
struct PressureSource {
    double p_set = 0.0;  // Pa
};

// Elastic chamber between `from` (chamber side) and `to` (usually a
// reservoir). Stored volume V = rest_volume + compliance * (p_from - p_to).
// Carries no flow at steady state.
struct ComplianceChamber {
    double rest_volume = 0.0;       // m^3
    double compliance = 0.0;        // m^3 / Pa
    double initial_pressure = 0.0;  // Pa, gauge difference at t = 0
};

using ElementLaw =
    std::variant<Channel, Constriction, TeslaValve, FlowSource, PressureSource, ComplianceChamber>;

struct Element {
    std::string id;
    std::string from;
    std::string to;
    ElementLaw law;

    bool is_passive() const;  // channel, constriction or tesla valve
    bool is_source() const;   // flow or pressure source
    bool is_chamber() const { return std::holds_alternative<ComplianceChamber>(law); }
};

// ---------------------------------------------------------------------------

struct SolverSettings {
    double tol_kcl = 1e-9;        // m^3/s, max |net inflow| at interior nodes
    double tol_energy = 1e-6;     // relative source/dissipation mismatch
    int max_iter = 100;
    double epsilon_open = 1e-6;   // openings below this remove the edge
    double q_smooth = 1e-9;       // m^3/s, cubic blend half-width of the orifice law
    double ambient_pressure = 101325.0;  // Pa absolute, gauge zero
};

// A fluidic circuit. Node and element order is insertion order and is the
// order used by every solver and report, which keeps results deterministic.
class Network {
public:
    Network() : fluid_(water_20c()) {}
    explicit Network(Fluid fluid) : fluid_(std::move(fluid)) {}

    Network& add_node(const std::string& id);
    Network& add_reservoir(const std::string& id, double pressure = 0.0);
    Network& add_element(Element element);
    Network& add_element(const std::string& id, const std::string& from, const std::string& to,
                         ElementLaw law);

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Element>& elements() const { return elements_; }
    const Fluid& fluid() const { return fluid_; }
    void set_fluid(Fluid fluid) { fluid_ = std::move(fluid); }

    bool has_node(const std::string& id) const { return node_index_.count(id) != 0; }
    bool has_element(const std::string& id) const { return element_index_.count(id) != 0; }
    std::size_t node_index(const std::string& id) const;
    std::size_t element_index(const std::string& id) const;
    const Node& node(const std::string& id) const { return nodes_[node_index(id)]; }
    const Element& element(const std::string& id) const { return elements_[element_index(id)]; }
    Element& element(const std::string& id) { return elements_[element_index(id)]; }

    // Constriction opening; throws LookupError/ConfigurationError on misuse.
    void set_opening(const std::string& element_id, double opening);
    double opening(const std::string& element_id) const;

    // Source set-point (q_set or p_set, whichever the element holds).
    void set_source_value(const std::string& element_id, double value);

    // Adds every node and element of `other`, prefixing ids with `prefix`.
    // A node of `other` listed in `bindings` is not copied; its elements attach
    // to the mapped, already existing node of this network instead.
    void merge(const Network& other, const std::string& prefix,
               const std::map<std::string, std::string>& bindings = {});

    // Throws ConfigurationError / DomainError on any broken invariant.
    void validate() const;

private:
    Fluid fluid_;
    std::vector<Node> nodes_;
    std::vector<Element> elements_;
    std::unordered_map<std::string, std::size_t> node_index_;
    std::unordered_map<std::string, std::size_t> element_index_;
};

struct SteadyState {
    std::map<std::string, double> node_pressures;  // Pa, gauge
    std::map<std::string, double> element_flows;   // m^3/s, signed from -> to
    double residual_norm = 0.0;        // max |KCL residual|, m^3/s
    double element_residual = 0.0;     // max |element law residual|, Pa
    int iterations = 0;

    double pressure(const std::string& node_id) const;
    double flow(const std::string& element_id) const;
};

struct PowerAudit {
    double source_power = 0.0;      // W, including reservoir boundary exchange
    double dissipated_power = 0.0;  // W

    double relative_mismatch() const;
    bool balanced(double tol_energy) const;
};

// Laminar resistance 128 mu L / (pi d^4).
double channel_resistance(const Channel& channel, const Fluid& fluid);
// Fluid inertance rho L / A.
double channel_inertance(const Channel& channel, const Fluid& fluid);
// Quadratic coefficient k of dp = k Q |Q| at the current opening.
double constriction_coefficient(const Constriction& constriction, const Fluid& fluid);

// Signed pressure drop of a passive element carrying `flow`.
double element_pressure_drop(const Element& element, double flow, const Fluid& fluid,
                             double q_smooth = SolverSettings{}.q_smooth);

// Nonlinear nodal analysis by damped Newton.
SteadyState solve_steady(const Network& network, const SolverSettings& settings = {});

PowerAudit power_audit(const SteadyState& state, const Network& network);

// ---------------------------------------------------------------------------
// Transient

// Zero-order-hold schedule of constriction openings and source set-points.
// An event at time t applies to every step whose end time is >= t.
class ControlSchedule {
public:
    struct Event {
        double time = 0.0;
        std::map<std::string, double> openings;
        std::map<std::string, double> source_values;
    };

    ControlSchedule() = default;
    explicit ControlSchedule(std::vector<Event> events);

    void add(double time, std::map<std::string, double> openings,
             std::map<std::string, double> source_values = {});
    const std::vector<Event>& events() const { return events_; }
    bool empty() const { return events_.empty(); }

    // Overrides in force at time t (later events win).
    std::map<std::string, double> openings_at(double t) const;
    std::map<std::string, double> source_values_at(double t) const;

    // Applies the overrides in force at time t to `network`.
    void apply(double t, Network& network) const;

private:
    std::vector<Event> events_;
};

struct TransientOptions {
    bool channel_inertance = true;
};

struct TransientTrace {
    std::vector<double> times;
    std::vector<SteadyState> snapshots;
    // Per snapshot: compliance chamber id -> stored volume, m^3.
    std::vector<std::map<std::string, double>> chamber_volumes;
};

// Stateful backward-Euler integrator. Each step re-solves the algebraic
// network with chamber and inertance terms discretized implicitly.
class TransientSimulator {
public:
    TransientSimulator(Network network, SolverSettings settings = {},
                       TransientOptions options = {});

    // Consistent state at t = 0: chambers held at their initial pressures.
    const SteadyState& initialize();

    // Advances one step of length dt ending at t_end. Throws ConvergenceError
    // carrying t_end when Newton fails.
    const SteadyState& step(double t_end, double dt);

    void set_opening(const std::string& element_id, double opening) {
        network_.set_opening(element_id, opening);
    }
    void set_source_value(const std::string& element_id, double value) {
        network_.set_source_value(element_id, value);
    }
    void apply(const ControlSchedule& schedule, double t) { schedule.apply(t, network_); }

    const Network& network() const { return network_; }
    const SteadyState& state() const { return state_; }
    double time() const { return time_; }
    std::map<std::string, double> chamber_volumes() const;

private:
    Network network_;
    SolverSettings settings_;
    TransientOptions options_;
    SteadyState state_;
    double time_ = 0.0;
    bool initialized_ = false;
    std::vector<double> chamber_mass_;  // per element, rho * V (only chambers used)
    std::vector<double> prev_flow_;     // per element
};

TransientTrace simulate_transient(const Network& network, const ControlSchedule& schedule,
                                  double t_end, double dt, const SolverSettings& settings = {},
                                  const TransientOptions& options = {});

}  // namespace flowbots
