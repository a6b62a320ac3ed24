#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "flowbots/actuator.hpp"
#include "flowbots/circuit.hpp"

namespace flowbots {

// ---------------------------------------------------------------------------
// Port roles

enum class SupplyDirection { Forward, Reverse };  // forward pushes into the port

struct Supply {
    SupplyDirection direction = SupplyDirection::Forward;
};
struct Vent {
    double opening = 1.0;
};
struct Blocked {};

using PortRole = std::variant<Supply, Vent, Blocked>;
using RoleMap = std::map<std::string, PortRole>;  // full port name -> role

std::string to_string(const PortRole& role);
bool operator==(const Supply& a, const Supply& b);
bool operator==(const Vent& a, const Vent& b);
bool operator==(const Blocked&, const Blocked&);

// ---------------------------------------------------------------------------

struct SourceSpec {
    enum class Kind { Pressure, Flow };
    Kind kind = Kind::Pressure;
    double value = 2.0e5;  // Pa or m^3/s
};

struct Plumbing {
    double vent_area = 1.0e-5;  // m^2, full-open vent orifice
    double vent_cd = 0.61;
    double valve_area = 1.0;    // m^2, supply valves (near lossless)
};

struct ActuatorPlacement {
    std::string name;        // full name, also the node prefix (name + ".")
    ActuatorModel model;
    std::string left_port;   // local port name within the circuit
    std::string right_port;
};

// One independently controlled group of ports (the gripper has one, the
// quadruped one per limb pair).
struct Circuit {
    std::string prefix;               // "" or e.g. "front."
    std::vector<std::string> ports;   // local names
    std::vector<ActuatorPlacement> actuators;
};

enum class AssemblyKind { Rig, Gripper, Quadruped };

// Network layout: reservoir `gnd`; manifolds `supply` (pump outlet) and
// `suction` (pump inlet) driven by elements `source` (gnd -> supply) and
// `sink` (suction -> gnd). Each port p has node `port.<p>` with valves
// `feed.<p>` (supply -> port), `drain.<p>` (port -> suction) and the vent
// orifice `vent.<p>` (port -> gnd). With a flow source, `bypass.supply` /
// `bypass.suction` short an idle manifold to the reservoir. Every control is therefore an
// opening or a source set-point and can be scheduled.
struct Assembly {
    AssemblyKind kind = AssemblyKind::Rig;
    Fluid fluid = water_20c();
    SourceSpec source;
    Plumbing plumbing;
    std::vector<Circuit> circuits;
    RoleMap roles;

    std::vector<std::string> port_names() const;      // full names, declaration order
    std::vector<std::string> actuator_names() const;
    std::vector<const ActuatorPlacement*> placements() const;

    // Throws ConfigurationError unless each circuit has exactly one supply
    // (zero supplies are accepted when allow_idle is set).
    void validate(bool allow_idle = false) const;
    void validate_roles(const RoleMap& roles, bool allow_idle = false) const;
};

Assembly make_rig(const ActuatorModel& model, const Fluid& fluid, const SourceSpec& source = {});
// Actuator A joins ports `middle` (its left) and `left` (its right); B joins
// `middle` and `right`. Supply at the middle drives both fingers forward.
Assembly make_gripper(const ActuatorModel& a, const ActuatorModel& b, const Fluid& fluid,
                      const SourceSpec& source = {});
// Two gripper circuits `front.` and `rear.` sharing one source.
Assembly make_quadruped(const ActuatorModel& front, const ActuatorModel& rear, const Fluid& fluid,
                        const SourceSpec& source = {});

// Number of independent control inputs (ports).
int control_fan_in(const Assembly& assembly);

// Openings and set-points realising a role assignment.
struct Controls {
    std::map<std::string, double> openings;
    std::map<std::string, double> source_values;

    void apply(Network& network) const;
};

Controls controls_for(const Assembly& assembly, const RoleMap& roles, bool allow_idle = false);

// Network with the assembly's current roles applied.
Network build_assembly_network(const Assembly& assembly, bool allow_idle = false);

// ---------------------------------------------------------------------------
// Solving

struct SignPattern {
    std::vector<int> signs;  // -1, 0, +1 per actuator

    std::string to_string() const;
    auto operator<=>(const SignPattern&) const = default;
};

inline constexpr double kDefaultKappaZero = 1e-3;  // 1/m

SignPattern sign_pattern(const std::vector<double>& curvature, double kappa_zero = kDefaultKappaZero);
// Parses "+-0" style strings.
SignPattern parse_sign_pattern(const std::string& text);

struct AssemblySolution {
    SteadyState state;
    std::vector<std::string> actuator_names;
    std::vector<ActuatorState> actuators;
    SignPattern pattern;
    PowerAudit audit;

    std::vector<double> curvature() const;
    const ActuatorState& actuator(const std::string& name) const;
};

std::vector<ActuatorState> actuator_states(const Assembly& assembly, const SteadyState& state);

AssemblySolution solve_assembly(const Assembly& assembly, const SolverSettings& settings = {},
                                double kappa_zero = kDefaultKappaZero);

// Zero-order-hold role changes; converted to openings/set-points for the
// transient integrator.
using RoleSchedule = std::vector<std::pair<double, RoleMap>>;

ControlSchedule control_schedule(const Assembly& assembly, const RoleSchedule& schedule,
                                 bool allow_idle = false);

TransientTrace simulate_assembly(const Assembly& assembly, const RoleSchedule& schedule, double t_end,
                                 double dt, const SolverSettings& settings = {},
                                 const TransientOptions& options = {});

// ---------------------------------------------------------------------------
// Enumeration

struct EnumerationOptions {
    std::vector<double> opening_grid{0.0, 0.25, 0.5, 0.75, 1.0};
    double kappa_zero = kDefaultKappaZero;
    unsigned workers = 1;
};

struct ConfigurationResult {
    RoleMap roles;
    std::optional<SignPattern> pattern;  // empty when the solve failed
    std::vector<double> curvature;       // 1/m per actuator
    std::string error_kind;
    std::string error_message;
};

struct Enumeration {
    std::vector<std::string> ports;
    std::vector<std::string> actuators;
    std::vector<ConfigurationResult> configurations;
    std::vector<std::size_t> distinct;  // first configuration of each pattern, sorted by pattern

    std::vector<SignPattern> patterns() const;
    const ConfigurationResult* find(const SignPattern& pattern) const;
};

// Per port the candidate roles are, in order: supply forward, supply reverse,
// vent at each grid opening (ascending), blocked. Assignments are visited in
// lexicographic order with the first port most significant; only those with
// exactly one supply per circuit are solved.
Enumeration enumerate_configurations(const Assembly& assembly, const EnumerationOptions& options = {},
                                     const SolverSettings& settings = {});

// ---------------------------------------------------------------------------
// Presets

struct Preset {
    std::string label;
    std::string description;
    RoleMap roles;
    SignPattern expected;
};

// Reconstructed gripper states (a)-(i): seven parallel, two series. The
// original plumbing is only shown graphically, so these are illustrative.
std::vector<Preset> gripper_presets();

// Alternating swim gait: phase one drives the front pair forward and the rear
// pair in reverse (parallel mode), phase two swaps them.
RoleSchedule swim_gait(double half_period, int cycles);

}  // namespace flowbots
