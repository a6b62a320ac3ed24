#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "flowbots/actuator.hpp"
#include "flowbots/assembly.hpp"
#include "flowbots/circuit.hpp"
#include "flowbots/mocap.hpp"

namespace flowbots::cli {

inline constexpr std::string_view kScenarioSchema = "flowbots.scenario/1";

inline constexpr double kPascalPerBar = 1.0e5;

// Actuator inserted into a declared network between two existing nodes.
struct NetworkActuator {
    std::string name;  // node/element prefix is name + "."
    ActuatorModel model;
    std::string left;
    std::string right;
    std::string ground;
};

struct NetworkSubject {
    Network network;
    std::vector<NetworkActuator> actuators;
    ControlSchedule schedule;
};

struct RigSubject {
    ActuatorModel model;
    Fluid fluid;
    double port_delta_p = 0.0;  // Pa
    FlowDirection direction = FlowDirection::Forward;
};

struct DemoPresets {
    std::vector<std::string> labels;
    double hold = 1.0;  // s per preset
};

struct DemoSwimGait {
    double half_period = 1.0;
    int cycles = 2;
};

struct AssemblySubject {
    Assembly assembly;
    RoleSchedule schedule;
    std::optional<std::variant<DemoPresets, DemoSwimGait>> demo;
    EnumerationOptions enumeration;
};

struct SweepSubject {
    ActuatorModel model;
    std::vector<Fluid> fluids;
    double p_min = 1.25e5;  // Pa
    double p_max = 2.5e5;
    double step = 0.25e5;
    std::vector<FlowDirection> directions{FlowDirection::Forward, FlowDirection::Reverse};
    int repeats = 1;
    double fps = 240.0;
    double duration = 6.0;      // s of synthetic recording per cell
    double arc_length = 0.08;   // m, marker arc used for the synthetic track
    double marker_noise = 0.0;  // mm, Gaussian, seeded by --seed

    std::vector<double> pressures() const;
};

struct MocapSubject {
    std::filesystem::path input;  // resolved against the scenario directory
    double sample_rate = 240.0;
    int window = 20;
    mocap::ResponseOptions response;
};

struct TransientSpec {
    double t_end = 0.0;
    double dt = 0.02;
};

using Subject = std::variant<NetworkSubject, RigSubject, AssemblySubject, SweepSubject, MocapSubject>;

struct Scenario {
    std::string name;
    std::string description;
    std::map<std::string, Fluid> fluids;             // includes the built-ins "water" and "air"
    std::map<std::string, ActuatorModel> actuators;  // includes "default"
    SolverSettings solver;
    std::optional<TransientSpec> transient;
    Subject subject;
};

// Parses the JSON text of a scenario. Pressures are given in bar. Unknown
// keys, dangling references and a missing or foreign `schema` throw
// ConfigurationError; malformed JSON throws ParseError with the line.
Scenario parse_scenario(std::string_view text, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

// "supply+", "supply-", "vent" (fully open), "vent:<opening>", "blocked".
PortRole parse_role(std::string_view text);

// Assembly built from a JSON object in the scenario `assembly` syntax; the
// teleop service accepts the same object in `create` messages.
Assembly parse_assembly_spec(std::string_view json_text);

std::string_view subject_name(const Subject& subject);

}  // namespace flowbots::cli
