#include "flowbots/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "flowbots/csv.hpp"
#include "flowbots/errors.hpp"

namespace flowbots::cli {

namespace {

using json = nlohmann::json;

std::string join_path(const std::string& parent, const std::string& key) {
    return parent.empty() ? key : parent + "." + key;
}

std::string_view type_name(const json& j) { return j.type_name(); }

// Strict view of a JSON object: every key must be consumed before finish().
class Obj {
public:
    Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j.is_object()) {
            throw ConfigurationError(fmt::format("{}: expected an object, got {}", label(), type_name(j)));
        }
    }

    const std::string& path() const { return path_; }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json* get(const std::string& key) {
        const auto it = j_.find(key);
        if (it == j_.end()) return nullptr;
        used_.insert(key);
        return &*it;
    }

    const json& require(const std::string& key) {
        const json* v = get(key);
        if (!v) throw ConfigurationError(fmt::format("{}: missing key '{}'", label(), key));
        return *v;
    }

    double number(const std::string& key, double fallback) {
        const json* v = get(key);
        return v ? as_number(*v, key) : fallback;
    }
    double number(const std::string& key) { return as_number(require(key), key); }

    int integer(const std::string& key, int fallback) {
        const json* v = get(key);
        if (!v) return fallback;
        if (!v->is_number_integer()) throw type_error(key, "an integer", *v);
        return v->get<int>();
    }

    bool boolean(const std::string& key, bool fallback) {
        const json* v = get(key);
        if (!v) return fallback;
        if (!v->is_boolean()) throw type_error(key, "a boolean", *v);
        return v->get<bool>();
    }

    std::string string(const std::string& key, const std::string& fallback) {
        const json* v = get(key);
        return v ? as_string(*v, key) : fallback;
    }
    std::string string(const std::string& key) { return as_string(require(key), key); }

    Obj object(const std::string& key) { return Obj(require(key), join_path(path_, key)); }

    const json& array(const std::string& key) {
        const json& v = require(key);
        if (!v.is_array()) throw type_error(key, "an array", v);
        return v;
    }

    void finish() const {
        for (const auto& [key, _] : j_.items()) {
            if (!used_.count(key)) {
                throw ConfigurationError(fmt::format("{}: unknown key '{}'", label(), key));
            }
        }
    }

    std::string child(const std::string& key) const { return join_path(path_, key); }

private:
    std::string label() const { return path_.empty() ? "scenario" : path_; }

    ConfigurationError type_error(const std::string& key, std::string_view want, const json& got) const {
        return ConfigurationError(
            fmt::format("{}: expected {}, got {}", join_path(path_, key), want, type_name(got)));
    }

    double as_number(const json& v, const std::string& key) const {
        if (!v.is_number()) throw type_error(key, "a number", v);
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw type_error(key, "a finite number", v);
        return d;
    }

    std::string as_string(const json& v, const std::string& key) const {
        if (!v.is_string()) throw type_error(key, "a string", v);
        return v.get<std::string>();
    }

    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

// ---------------------------------------------------------------------------

struct Library {
    std::map<std::string, Fluid> fluids{{"water", water_20c()}, {"air", air_20c()}};
    std::map<std::string, ActuatorModel> actuators{{"default", ActuatorModel{}}};
};

Fluid parse_fluid_block(const json& j, const std::string& path, const std::string& name) {
    Obj o(j, path);
    Fluid f;
    const std::string base = o.string("base", "");
    if (!base.empty()) {
        if (base == "water") {
            f = water_20c();
        } else if (base == "air") {
            f = air_20c();
        } else {
            throw ConfigurationError(fmt::format("{}: base must be 'water' or 'air'", o.child("base")));
        }
    } else {
        f.density_ref = o.number("density");
        f.dynamic_viscosity = o.number("viscosity");
    }
    f.name = name;
    f.density_ref = o.number("density", f.density_ref);
    f.dynamic_viscosity = o.number("viscosity", f.dynamic_viscosity);
    const bool compressible = o.boolean("compressible", f.is_compressible());
    if (compressible) {
        IdealGas gas = f.is_compressible() ? std::get<IdealGas>(f.compressibility) : IdealGas{};
        gas.specific_gas_constant = o.number("gas_constant", gas.specific_gas_constant);
        gas.temperature = o.number("temperature", gas.temperature);
        f.compressibility = gas;
    } else {
        f.compressibility = Incompressible{};
    }
    o.finish();
    f.validate();
    return f;
}

ActuatorModel parse_actuator_block(const json& j, const std::string& path, const Library& lib) {
    Obj o(j, path);
    const std::string base = o.string("base", "default");
    const auto it = lib.actuators.find(base);
    if (it == lib.actuators.end()) {
        throw ConfigurationError(fmt::format("{}: unknown actuator '{}'", o.child("base"), base));
    }
    ActuatorModel m = it->second;
    m.segments_per_side = o.integer("segments_per_side", m.segments_per_side);
    m.segment_channel.length = o.number("segment_length", m.segment_channel.length);
    m.segment_channel.hydraulic_diameter = o.number("segment_diameter", m.segment_channel.hydraulic_diameter);
    m.tip_constriction.length = o.number("tip_length", m.tip_constriction.length);
    m.tip_constriction.hydraulic_diameter = o.number("tip_diameter", m.tip_constriction.hydraulic_diameter);
    m.curvature_gain = o.number("curvature_gain", m.curvature_gain);
    m.asymmetry_epsilon = o.number("asymmetry", m.asymmetry_epsilon);
    m.parasitic_fraction = o.number("parasitic_fraction", m.parasitic_fraction);
    m.creep.amplitude = o.number("creep_amplitude", m.creep.amplitude);
    m.creep.tau = o.number("creep_tau", m.creep.tau);
    m.chamber_compliance = o.number("chamber_compliance", m.chamber_compliance);
    m.chamber_rest_volume = o.number("chamber_rest_volume", m.chamber_rest_volume);
    m.tip_sealed = o.boolean("tip_sealed", m.tip_sealed);
    o.finish();
    m.validate();
    return m;
}

// A reference by name or an inline block.
Fluid resolve_fluid(const json& j, const std::string& path, const Library& lib) {
    if (j.is_string()) {
        const auto it = lib.fluids.find(j.get<std::string>());
        if (it == lib.fluids.end()) {
            throw ConfigurationError(fmt::format("{}: unknown fluid '{}'", path, j.get<std::string>()));
        }
        return it->second;
    }
    return parse_fluid_block(j, path, path);
}

ActuatorModel resolve_actuator(const json& j, const std::string& path, const Library& lib) {
    if (j.is_string()) {
        const auto it = lib.actuators.find(j.get<std::string>());
        if (it == lib.actuators.end()) {
            throw ConfigurationError(fmt::format("{}: unknown actuator '{}'", path, j.get<std::string>()));
        }
        return it->second;
    }
    return parse_actuator_block(j, path, lib);
}

Fluid fluid_field(Obj& o, const Library& lib) {
    const json* v = o.get("fluid");
    return v ? resolve_fluid(*v, o.child("fluid"), lib) : lib.fluids.at("water");
}

ActuatorModel actuator_field(Obj& o, const std::string& key, const Library& lib,
                             const ActuatorModel& fallback) {
    const json* v = o.get(key);
    return v ? resolve_actuator(*v, o.child(key), lib) : fallback;
}

FlowDirection parse_direction(const std::string& text, const std::string& path) {
    if (text == "forward") return FlowDirection::Forward;
    if (text == "reverse") return FlowDirection::Reverse;
    throw ConfigurationError(fmt::format("{}: direction must be 'forward' or 'reverse'", path));
}

std::map<std::string, double> number_map(const json& j, const std::string& path, double scale) {
    Obj o(j, path);
    std::map<std::string, double> out;
    for (const auto& [key, _] : j.items()) out[key] = scale * o.number(key);
    o.finish();
    return out;
}

// ---------------------------------------------------------------------------

SolverSettings parse_solver(const json& j) {
    Obj o(j, "solver");
    SolverSettings s;
    s.tol_kcl = o.number("tol_kcl", s.tol_kcl);
    s.tol_energy = o.number("tol_energy", s.tol_energy);
    s.max_iter = o.integer("max_iter", s.max_iter);
    s.epsilon_open = o.number("epsilon_open", s.epsilon_open);
    s.q_smooth = o.number("q_smooth", s.q_smooth);
    s.ambient_pressure = kPascalPerBar * o.number("ambient_pressure", s.ambient_pressure / kPascalPerBar);
    o.finish();
    if (!(s.tol_kcl > 0.0) || !(s.tol_energy > 0.0) || s.max_iter < 1 || !(s.epsilon_open >= 0.0) ||
        !(s.q_smooth > 0.0) || !(s.ambient_pressure > 0.0)) {
        throw DomainError("solver settings must be positive");
    }
    return s;
}

TransientSpec parse_transient(const json& j) {
    Obj o(j, "transient");
    TransientSpec t;
    t.t_end = o.number("t_end", t.t_end);
    t.dt = o.number("dt", t.dt);
    o.finish();
    if (!(t.dt > 0.0) || !(t.t_end >= 0.0)) throw DomainError("transient: need dt > 0 and t_end >= 0");
    return t;
}

ElementLaw parse_law(Obj& o, const std::string& type) {
    if (type == "channel") {
        return Channel{o.number("length"), o.number("diameter"), o.number("asymmetry", 0.0)};
    }
    if (type == "constriction") {
        return Constriction{o.number("area"), o.number("opening", 1.0), o.number("cd", 0.61)};
    }
    if (type == "tesla_valve") return TeslaValve{o.number("resistance"), o.number("diodicity")};
    if (type == "flow_source") return FlowSource{o.number("flow")};
    if (type == "pressure_source") return PressureSource{kPascalPerBar * o.number("pressure")};
    if (type == "chamber") {
        return ComplianceChamber{o.number("rest_volume"), o.number("compliance"),
                                 kPascalPerBar * o.number("initial_pressure", 0.0)};
    }
    throw ConfigurationError(fmt::format("{}: unknown element type '{}'", o.child("type"), type));
}

NetworkSubject parse_network(const json& j, const Library& lib) {
    Obj o(j, "network");
    NetworkSubject out;
    out.network = Network(fluid_field(o, lib));
    const json& nodes = o.array("nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        Obj n(nodes[i], fmt::format("network.nodes[{}]", i));
        const std::string id = n.string("id");
        if (n.boolean("reservoir", false)) {
            out.network.add_reservoir(id, kPascalPerBar * n.number("pressure", 0.0));
        } else {
            out.network.add_node(id);
        }
        n.finish();
    }
    const json& elements = o.array("elements");
    for (std::size_t i = 0; i < elements.size(); ++i) {
        Obj e(elements[i], fmt::format("network.elements[{}]", i));
        const std::string id = e.string("id");
        const std::string from = e.string("from");
        const std::string to = e.string("to");
        const std::string type = e.string("type");
        ElementLaw law = parse_law(e, type);
        e.finish();
        out.network.add_element(id, from, to, std::move(law));
    }
    if (const json* acts = o.get("actuators")) {
        if (!acts->is_array()) throw ConfigurationError("network.actuators: expected an array");
        for (std::size_t i = 0; i < acts->size(); ++i) {
            Obj a((*acts)[i], fmt::format("network.actuators[{}]", i));
            NetworkActuator na;
            na.name = a.string("name");
            na.model = actuator_field(a, "model", lib, lib.actuators.at("default"));
            na.left = a.string("left");
            na.right = a.string("right");
            na.ground = a.string("ground");
            a.finish();
            for (const auto& node : {na.left, na.right, na.ground}) {
                if (!out.network.has_node(node)) {
                    throw ConfigurationError(fmt::format("{}: unknown node '{}'", a.path(), node));
                }
            }
            out.network.merge(build_actuator_network(na.model, out.network.fluid()), na.name + ".",
                              {{"gnd", na.ground}, {"left", na.left}, {"right", na.right}});
            out.actuators.push_back(std::move(na));
        }
    }
    if (const json* sched = o.get("schedule")) {
        if (!sched->is_array()) throw ConfigurationError("network.schedule: expected an array");
        for (std::size_t i = 0; i < sched->size(); ++i) {
            const std::string path = fmt::format("network.schedule[{}]", i);
            Obj ev((*sched)[i], path);
            const double t = ev.number("time");
            std::map<std::string, double> openings;
            std::map<std::string, double> values;
            if (const json* v = ev.get("openings")) openings = number_map(*v, path + ".openings", 1.0);
            if (const json* v = ev.get("pressures")) values = number_map(*v, path + ".pressures", kPascalPerBar);
            if (const json* v = ev.get("flows")) {
                for (const auto& [k, q] : number_map(*v, path + ".flows", 1.0)) values[k] = q;
            }
            ev.finish();
            for (const auto& [id, _] : openings) {
                if (!out.network.has_element(id)) {
                    throw ConfigurationError(fmt::format("{}: unknown element '{}'", path, id));
                }
            }
            for (const auto& [id, _] : values) {
                if (!out.network.has_element(id) || !out.network.element(id).is_source()) {
                    throw ConfigurationError(fmt::format("{}: '{}' is not a source", path, id));
                }
            }
            out.schedule.add(t, std::move(openings), std::move(values));
        }
    }
    o.finish();
    out.network.validate();
    return out;
}

RigSubject parse_rig(const json& j, const Library& lib) {
    Obj o(j, "rig");
    RigSubject r;
    r.model = actuator_field(o, "actuator", lib, lib.actuators.at("default"));
    r.fluid = fluid_field(o, lib);
    r.port_delta_p = kPascalPerBar * o.number("pressure");
    r.direction = parse_direction(o.string("direction", "forward"), o.child("direction"));
    o.finish();
    return r;
}

RoleMap parse_roles(const json& j, const std::string& path) {
    Obj o(j, path);
    RoleMap roles;
    for (const auto& [port, _] : j.items()) {
        const std::string text = o.string(port);
        try {
            roles[port] = parse_role(text);
        } catch (const Error& e) {
            throw ConfigurationError(fmt::format("{}: {}", o.child(port), e.what()));
        }
    }
    o.finish();
    return roles;
}

Assembly parse_assembly(Obj& o, const Library& lib) {
    const std::string kind = o.string("kind");
    const Fluid fluid = fluid_field(o, lib);
    const ActuatorModel base = actuator_field(o, "actuator", lib, lib.actuators.at("default"));
    std::map<std::string, ActuatorModel> slots;
    if (const json* v = o.get("actuators")) {
        Obj s(*v, o.child("actuators"));
        for (const auto& [slot, _] : v->items()) slots[slot] = actuator_field(s, slot, lib, base);
        s.finish();
    }
    const auto slot = [&](const std::string& name) {
        const auto it = slots.find(name);
        if (it == slots.end()) return base;
        ActuatorModel m = it->second;
        slots.erase(it);
        return m;
    };

    SourceSpec source;
    if (const json* v = o.get("source")) {
        Obj s(*v, o.child("source"));
        const std::string k = s.string("kind", "pressure");
        if (k == "pressure") {
            source.kind = SourceSpec::Kind::Pressure;
            source.value = kPascalPerBar * s.number("pressure", source.value / kPascalPerBar);
        } else if (k == "flow") {
            source.kind = SourceSpec::Kind::Flow;
            source.value = s.number("flow");
        } else {
            throw ConfigurationError(fmt::format("{}: kind must be 'pressure' or 'flow'", s.child("kind")));
        }
        s.finish();
        if (!(source.value >= 0.0)) throw DomainError("source value must be >= 0");
    }

    Assembly a;
    if (kind == "rig") {
        a = make_rig(slot("act"), fluid, source);
    } else if (kind == "gripper") {
        const ActuatorModel ma = slot("A");
        a = make_gripper(ma, slot("B"), fluid, source);
    } else if (kind == "quadruped") {
        const ActuatorModel front = slot("front");
        a = make_quadruped(front, slot("rear"), fluid, source);
    } else {
        throw ConfigurationError(
            fmt::format("{}: kind must be 'rig', 'gripper' or 'quadruped'", o.child("kind")));
    }
    if (!slots.empty()) {
        throw ConfigurationError(
            fmt::format("{}: no actuator slot '{}' in a {}", o.child("actuators"), slots.begin()->first, kind));
    }

    if (const json* v = o.get("plumbing")) {
        Obj p(*v, o.child("plumbing"));
        a.plumbing.vent_area = p.number("vent_area", a.plumbing.vent_area);
        a.plumbing.vent_cd = p.number("vent_cd", a.plumbing.vent_cd);
        a.plumbing.valve_area = p.number("valve_area", a.plumbing.valve_area);
        p.finish();
        if (!(a.plumbing.vent_area > 0.0) || !(a.plumbing.vent_cd > 0.0) || !(a.plumbing.valve_area > 0.0)) {
            throw DomainError("plumbing areas and discharge coefficient must be positive");
        }
    }
    if (const json* v = o.get("roles")) {
        const RoleMap given = parse_roles(*v, o.child("roles"));
        for (const auto& [port, role] : given) {
            if (!a.roles.count(port)) {
                throw ConfigurationError(fmt::format("{}: unknown port '{}'", o.child("roles"), port));
            }
            a.roles[port] = role;
        }
    }
    return a;
}

AssemblySubject parse_assembly_subject(const json& j, const Library& lib) {
    Obj o(j, "assembly");
    AssemblySubject out;
    out.assembly = parse_assembly(o, lib);
    if (const json* sched = o.get("schedule")) {
        if (!sched->is_array()) throw ConfigurationError("assembly.schedule: expected an array");
        for (std::size_t i = 0; i < sched->size(); ++i) {
            const std::string path = fmt::format("assembly.schedule[{}]", i);
            Obj ev((*sched)[i], path);
            const double t = ev.number("time");
            // Each event overrides the roles in force after the previous one.
            RoleMap roles = out.schedule.empty() ? out.assembly.roles : out.schedule.back().second;
            for (const auto& [port, role] : parse_roles(ev.require("roles"), path + ".roles")) {
                if (!roles.count(port)) {
                    throw ConfigurationError(fmt::format("{}: unknown port '{}'", path, port));
                }
                roles[port] = role;
            }
            ev.finish();
            out.assembly.validate_roles(roles, true);
            out.schedule.emplace_back(t, std::move(roles));
        }
    }
    if (const json* v = o.get("demo")) {
        Obj d(*v, "assembly.demo");
        if (const json* g = d.get("swim_gait")) {
            if (out.assembly.kind != AssemblyKind::Quadruped) {
                throw ConfigurationError("assembly.demo.swim_gait needs a quadruped");
            }
            Obj s(*g, "assembly.demo.swim_gait");
            DemoSwimGait gait;
            gait.half_period = s.number("half_period", gait.half_period);
            gait.cycles = s.integer("cycles", gait.cycles);
            s.finish();
            if (!(gait.half_period > 0.0) || gait.cycles < 0) throw DomainError("swim_gait: bad period or cycles");
            out.demo = gait;
        } else {
            if (out.assembly.kind != AssemblyKind::Gripper) {
                throw ConfigurationError("assembly.demo.presets needs a gripper");
            }
            DemoPresets p;
            std::set<std::string> known;
            for (const auto& pr : gripper_presets()) known.insert(pr.label);
            const json& labels = d.require("presets");
            if (labels.is_string() && labels.get<std::string>() == "all") {
                for (const auto& pr : gripper_presets()) p.labels.push_back(pr.label);
            } else if (labels.is_array()) {
                for (const auto& l : labels) {
                    if (!l.is_string() || !known.count(l.get<std::string>())) {
                        throw ConfigurationError(fmt::format("assembly.demo.presets: unknown preset {}", l.dump()));
                    }
                    p.labels.push_back(l.get<std::string>());
                }
            } else {
                throw ConfigurationError("assembly.demo.presets: expected \"all\" or an array of labels");
            }
            p.hold = d.number("hold", p.hold);
            if (!(p.hold > 0.0)) throw DomainError("assembly.demo.hold must be positive");
            out.demo = p;
        }
        d.finish();
    }
    if (const json* v = o.get("enumeration")) {
        Obj e(*v, "assembly.enumeration");
        if (const json* g = e.get("grid")) {
            if (!g->is_array()) throw ConfigurationError("assembly.enumeration.grid: expected an array");
            out.enumeration.opening_grid.clear();
            for (const auto& x : *g) {
                if (!x.is_number()) throw ConfigurationError("assembly.enumeration.grid: expected numbers");
                out.enumeration.opening_grid.push_back(x.get<double>());
            }
        }
        out.enumeration.kappa_zero = e.number("kappa_zero", out.enumeration.kappa_zero);
        out.enumeration.workers = static_cast<unsigned>(std::max(1, e.integer("workers", 1)));
        e.finish();
    }
    o.finish();
    out.assembly.validate(true);
    return out;
}

SweepSubject parse_sweep(const json& j, const Library& lib) {
    Obj o(j, "sweep");
    SweepSubject s;
    s.model = actuator_field(o, "actuator", lib, lib.actuators.at("default"));
    if (const json* v = o.get("fluids")) {
        if (!v->is_array() || v->empty()) throw ConfigurationError("sweep.fluids: expected a non-empty array");
        for (std::size_t i = 0; i < v->size(); ++i) {
            s.fluids.push_back(resolve_fluid((*v)[i], fmt::format("sweep.fluids[{}]", i), lib));
        }
    } else {
        s.fluids = {lib.fluids.at("water"), lib.fluids.at("air")};
    }
    s.p_min = kPascalPerBar * o.number("p_min", s.p_min / kPascalPerBar);
    s.p_max = kPascalPerBar * o.number("p_max", s.p_max / kPascalPerBar);
    s.step = kPascalPerBar * o.number("step", s.step / kPascalPerBar);
    const std::string dirs = o.string("directions", "both");
    if (dirs == "both") {
        s.directions = {FlowDirection::Forward, FlowDirection::Reverse};
    } else {
        s.directions = {parse_direction(dirs, "sweep.directions")};
    }
    s.repeats = o.integer("repeats", s.repeats);
    s.fps = o.number("fps", s.fps);
    s.duration = o.number("duration", s.duration);
    s.arc_length = o.number("arc_length", s.arc_length);
    s.marker_noise = o.number("marker_noise", s.marker_noise);
    o.finish();
    if (!(s.p_min < s.p_max) || !(s.step > 0.0)) throw DomainError("sweep: need p_min < p_max and step > 0");
    if (s.repeats < 1 || !(s.fps > 0.0) || !(s.duration > 0.0) || !(s.arc_length > 0.0) ||
        !(s.marker_noise >= 0.0)) {
        throw DomainError("sweep: repeats, fps, duration and arc_length must be positive");
    }
    return s;
}

MocapSubject parse_mocap(const json& j, const std::filesystem::path& base_dir) {
    Obj o(j, "mocap");
    MocapSubject m;
    const std::filesystem::path input = o.string("input");
    m.input = input.is_absolute() || base_dir.empty() ? input : base_dir / input;
    m.sample_rate = o.number("sample_rate", m.sample_rate);
    m.window = o.integer("window", m.window);
    m.response.rate_threshold = o.number("rate_threshold", m.response.rate_threshold);
    m.response.window = o.number("settle_window", m.response.window);
    m.response.start_fraction = o.number("start_fraction", m.response.start_fraction);
    o.finish();
    if (!(m.sample_rate > 0.0) || m.window < 1) throw DomainError("mocap: bad sample rate or window");
    return m;
}

json parse_json(std::string_view text) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        for (std::size_t i = 0; i < end; ++i) line += text[i] == '\n' ? 1 : 0;
        throw ParseError(fmt::format("line {}: malformed JSON ({})", line, e.what()), line);
    }
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<double> SweepSubject::pressures() const {
    const auto n = static_cast<long>(std::floor((p_max - p_min) / step + 1e-9));
    std::vector<double> out;
    for (long i = 0; i <= n; ++i) out.push_back(p_min + static_cast<double>(i) * step);
    return out;
}

PortRole parse_role(std::string_view text) {
    if (text == "supply+" || text == "supply") return Supply{SupplyDirection::Forward};
    if (text == "supply-") return Supply{SupplyDirection::Reverse};
    if (text == "blocked") return Blocked{};
    if (text == "vent") return Vent{1.0};
    if (text.rfind("vent:", 0) == 0) {
        const double opening = parse_number(text.substr(5), 0);
        if (!(opening >= 0.0 && opening <= 1.0)) throw DomainError("vent opening must lie in [0, 1]");
        return Vent{opening};
    }
    throw ConfigurationError(fmt::format("unknown port role '{}'", text));
}

Assembly parse_assembly_spec(std::string_view json_text) {
    const json j = parse_json(json_text);
    const Library lib;
    Obj o(j, "assembly");
    Assembly a = parse_assembly(o, lib);
    o.finish();
    a.validate(true);
    return a;
}

Scenario parse_scenario(std::string_view text, const std::filesystem::path& base_dir) {
    const json j = parse_json(text);
    Obj root(j, "");
    const std::string schema = root.string("schema");
    if (schema != kScenarioSchema) {
        throw ConfigurationError(fmt::format("unsupported schema '{}', expected '{}'", schema, kScenarioSchema));
    }
    Scenario s;
    s.name = root.string("name", "");
    s.description = root.string("description", "");

    Library lib;
    if (const json* v = root.get("fluids")) {
        Obj f(*v, "fluids");
        for (const auto& [name, block] : v->items()) {
            f.get(name);
            if (lib.fluids.count(name)) {
                throw ConfigurationError(fmt::format("fluids.{}: redefines a built-in fluid", name));
            }
            lib.fluids[name] = parse_fluid_block(block, "fluids." + name, name);
        }
    }
    if (const json* v = root.get("actuators")) {
        Obj a(*v, "actuators");
        for (const auto& [name, block] : v->items()) {
            a.get(name);
            if (lib.actuators.count(name)) {
                throw ConfigurationError(fmt::format("actuators.{}: redefines a built-in actuator", name));
            }
        }
        // Blocks may only derive from "default", so declaration order is irrelevant.
        for (const auto& [name, block] : v->items()) {
            lib.actuators[name] = parse_actuator_block(block, "actuators." + name, Library{});
        }
    }
    if (const json* v = root.get("solver")) s.solver = parse_solver(*v);
    if (const json* v = root.get("transient")) s.transient = parse_transient(*v);

    int subjects = 0;
    if (const json* v = root.get("network")) {
        s.subject = parse_network(*v, lib);
        ++subjects;
    }
    if (const json* v = root.get("rig")) {
        s.subject = parse_rig(*v, lib);
        ++subjects;
    }
    if (const json* v = root.get("assembly")) {
        s.subject = parse_assembly_subject(*v, lib);
        ++subjects;
    }
    if (const json* v = root.get("sweep")) {
        s.subject = parse_sweep(*v, lib);
        ++subjects;
    }
    if (const json* v = root.get("mocap")) {
        s.subject = parse_mocap(*v, base_dir);
        ++subjects;
    }
    root.finish();
    if (subjects != 1) {
        throw ConfigurationError(fmt::format(
            "scenario needs exactly one of network, rig, assembly, sweep, mocap (found {})", subjects));
    }
    s.fluids = std::move(lib.fluids);
    s.actuators = std::move(lib.actuators);
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(fmt::format("cannot read scenario '{}'", path.string()));
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path.parent_path());
}

std::string_view subject_name(const Subject& subject) {
    struct Visitor {
        std::string_view operator()(const NetworkSubject&) const { return "network"; }
        std::string_view operator()(const RigSubject&) const { return "rig"; }
        std::string_view operator()(const AssemblySubject&) const { return "assembly"; }
        std::string_view operator()(const SweepSubject&) const { return "sweep"; }
        std::string_view operator()(const MocapSubject&) const { return "mocap"; }
    };
    return std::visit(Visitor{}, subject);
}

}  // namespace flowbots::cli
