#include "flowbots/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <fmt/format.h>

#include "flowbots/errors.hpp"

namespace flowbots {

namespace {

const std::string kGround = "gnd";
const std::string kSupply = "supply";
const std::string kSuction = "suction";

std::string port_node(const std::string& port) { return "port." + port; }

bool is_supply(const PortRole& r, SupplyDirection dir) {
    const auto* s = std::get_if<Supply>(&r);
    return s != nullptr && s->direction == dir;
}

}  // namespace

std::string to_string(const PortRole& role) {
    if (const auto* s = std::get_if<Supply>(&role)) {
        return s->direction == SupplyDirection::Forward ? "supply+" : "supply-";
    }
    if (const auto* v = std::get_if<Vent>(&role)) return fmt::format("vent:{}", v->opening);
    return "blocked";
}

bool operator==(const Supply& a, const Supply& b) { return a.direction == b.direction; }
bool operator==(const Vent& a, const Vent& b) { return a.opening == b.opening; }
bool operator==(const Blocked&, const Blocked&) { return true; }

// ---------------------------------------------------------------------------

std::vector<std::string> Assembly::port_names() const {
    std::vector<std::string> out;
    for (const auto& c : circuits) {
        for (const auto& p : c.ports) out.push_back(c.prefix + p);
    }
    return out;
}

std::vector<std::string> Assembly::actuator_names() const {
    std::vector<std::string> out;
    for (const auto& c : circuits) {
        for (const auto& a : c.actuators) out.push_back(a.name);
    }
    return out;
}

std::vector<const ActuatorPlacement*> Assembly::placements() const {
    std::vector<const ActuatorPlacement*> out;
    for (const auto& c : circuits) {
        for (const auto& a : c.actuators) out.push_back(&a);
    }
    return out;
}

void Assembly::validate_roles(const RoleMap& r, bool allow_idle) const {
    const auto names = port_names();
    for (const auto& [port, role] : r) {
        if (std::find(names.begin(), names.end(), port) == names.end()) {
            throw ConfigurationError("role given for unknown port '" + port + "'");
        }
        if (const auto* v = std::get_if<Vent>(&role); v && !(v->opening >= 0.0 && v->opening <= 1.0)) {
            throw DomainError("vent opening for '" + port + "' must lie in [0, 1]");
        }
    }
    for (const auto& c : circuits) {
        int supplies = 0;
        for (const auto& p : c.ports) {
            const auto it = r.find(c.prefix + p);
            if (it == r.end()) throw ConfigurationError("no role for port '" + c.prefix + p + "'");
            supplies += std::holds_alternative<Supply>(it->second) ? 1 : 0;
        }
        if (supplies > 1 || (supplies == 0 && !allow_idle)) {
            throw ConfigurationError(fmt::format("circuit '{}' needs exactly one supply port, has {}",
                                                 c.prefix, supplies));
        }
    }
}

void Assembly::validate(bool allow_idle) const {
    fluid.validate();
    if (circuits.empty()) throw ConfigurationError("assembly has no circuits");
    if (!(plumbing.vent_area > 0.0) || !(plumbing.vent_cd > 0.0) || !(plumbing.valve_area > 0.0)) {
        throw DomainError("plumbing areas and discharge coefficient must be positive");
    }
    if (!std::isfinite(source.value)) throw DomainError("source value must be finite");
    for (const auto& c : circuits) {
        for (const auto& a : c.actuators) {
            a.model.validate();
            for (const auto* port : {&a.left_port, &a.right_port}) {
                if (std::find(c.ports.begin(), c.ports.end(), *port) == c.ports.end()) {
                    throw ConfigurationError("actuator '" + a.name + "' uses unknown port '" + *port + "'");
                }
            }
        }
    }
    validate_roles(roles, allow_idle);
}

namespace {

Assembly base_assembly(AssemblyKind kind, const Fluid& fluid, const SourceSpec& source) {
    Assembly a;
    a.kind = kind;
    a.fluid = fluid;
    a.source = source;
    return a;
}

Circuit gripper_circuit(const std::string& prefix, const ActuatorModel& a, const ActuatorModel& b) {
    Circuit c;
    c.prefix = prefix;
    c.ports = {"left", "middle", "right"};
    c.actuators = {ActuatorPlacement{prefix + "A", a, "middle", "left"},
                   ActuatorPlacement{prefix + "B", b, "middle", "right"}};
    return c;
}

void parallel_forward(RoleMap& roles, const std::string& prefix) {
    roles[prefix + "left"] = Vent{1.0};
    roles[prefix + "middle"] = Supply{SupplyDirection::Forward};
    roles[prefix + "right"] = Vent{1.0};
}

}  // namespace

Assembly make_rig(const ActuatorModel& model, const Fluid& fluid, const SourceSpec& source) {
    Assembly a = base_assembly(AssemblyKind::Rig, fluid, source);
    a.circuits.push_back(Circuit{"", {"left", "right"}, {ActuatorPlacement{"act", model, "left", "right"}}});
    a.roles = {{"left", Supply{}}, {"right", Vent{1.0}}};
    return a;
}

Assembly make_gripper(const ActuatorModel& a, const ActuatorModel& b, const Fluid& fluid,
                      const SourceSpec& source) {
    Assembly g = base_assembly(AssemblyKind::Gripper, fluid, source);
    g.circuits.push_back(gripper_circuit("", a, b));
    parallel_forward(g.roles, "");
    return g;
}

Assembly make_quadruped(const ActuatorModel& front, const ActuatorModel& rear, const Fluid& fluid,
                        const SourceSpec& source) {
    Assembly q = base_assembly(AssemblyKind::Quadruped, fluid, source);
    q.circuits.push_back(gripper_circuit("front.", front, front));
    q.circuits.push_back(gripper_circuit("rear.", rear, rear));
    parallel_forward(q.roles, "front.");
    parallel_forward(q.roles, "rear.");
    return q;
}

int control_fan_in(const Assembly& assembly) {
    return static_cast<int>(assembly.port_names().size());
}

// ---------------------------------------------------------------------------

void Controls::apply(Network& network) const {
    for (const auto& [id, v] : openings) network.set_opening(id, v);
    for (const auto& [id, v] : source_values) network.set_source_value(id, v);
}

Controls controls_for(const Assembly& assembly, const RoleMap& roles, bool allow_idle) {
    assembly.validate_roles(roles, allow_idle);
    Controls c;
    bool any_forward = false;
    bool any_reverse = false;
    for (const auto& port : assembly.port_names()) {
        const PortRole& role = roles.at(port);
        const bool fwd = is_supply(role, SupplyDirection::Forward);
        const bool rev = is_supply(role, SupplyDirection::Reverse);
        any_forward = any_forward || fwd;
        any_reverse = any_reverse || rev;
        const auto* vent = std::get_if<Vent>(&role);
        c.openings["feed." + port] = fwd ? 1.0 : 0.0;
        c.openings["drain." + port] = rev ? 1.0 : 0.0;
        c.openings["vent." + port] = vent ? vent->opening : 0.0;
    }
    c.source_values["source"] = any_forward ? assembly.source.value : 0.0;
    c.source_values["sink"] = any_reverse ? assembly.source.value : 0.0;
    // An idle pressure source already pins its manifold; only an idle flow
    // source needs the bypass as a return path.
    const bool flow = assembly.source.kind == SourceSpec::Kind::Flow;
    c.openings["bypass.supply"] = flow && !any_forward ? 1.0 : 0.0;
    c.openings["bypass.suction"] = flow && !any_reverse ? 1.0 : 0.0;
    return c;
}

Network build_assembly_network(const Assembly& assembly, bool allow_idle) {
    assembly.validate(allow_idle);
    Network net(assembly.fluid);
    net.add_reservoir(kGround);
    net.add_node(kSupply);
    net.add_node(kSuction);
    if (assembly.source.kind == SourceSpec::Kind::Pressure) {
        net.add_element("source", kGround, kSupply, PressureSource{0.0});
        net.add_element("sink", kSuction, kGround, PressureSource{0.0});
    } else {
        net.add_element("source", kGround, kSupply, FlowSource{0.0});
        net.add_element("sink", kSuction, kGround, FlowSource{0.0});
    }
    const auto& pl = assembly.plumbing;
    const Constriction valve{pl.valve_area, 0.0, pl.vent_cd};
    net.add_element("bypass.supply", kSupply, kGround, valve);
    net.add_element("bypass.suction", kSuction, kGround, valve);
    for (const auto& port : assembly.port_names()) {
        const std::string node = port_node(port);
        net.add_node(node);
        net.add_element("feed." + port, kSupply, node, valve);
        net.add_element("drain." + port, node, kSuction, valve);
        net.add_element("vent." + port, node, kGround, Constriction{pl.vent_area, 0.0, pl.vent_cd});
    }
    for (const auto& c : assembly.circuits) {
        for (const auto& a : c.actuators) {
            const Network fragment = build_actuator_network(a.model, assembly.fluid);
            net.merge(fragment, a.name + ".",
                      {{"gnd", kGround},
                       {"left", port_node(c.prefix + a.left_port)},
                       {"right", port_node(c.prefix + a.right_port)}});
        }
    }
    controls_for(assembly, assembly.roles, allow_idle).apply(net);
    return net;
}

// ---------------------------------------------------------------------------

std::string SignPattern::to_string() const {
    std::string s;
    for (int v : signs) s += v > 0 ? '+' : (v < 0 ? '-' : '0');
    return s;
}

SignPattern sign_pattern(const std::vector<double>& curvature, double kappa_zero) {
    SignPattern p;
    for (double k : curvature) p.signs.push_back(std::abs(k) < kappa_zero ? 0 : (k > 0.0 ? 1 : -1));
    return p;
}

SignPattern parse_sign_pattern(const std::string& text) {
    SignPattern p;
    for (char ch : text) {
        switch (ch) {
            case '+': p.signs.push_back(1); break;
            case '-': p.signs.push_back(-1); break;
            case '0': p.signs.push_back(0); break;
            default: throw ParseError(fmt::format("bad sign character '{}' in '{}'", ch, text), 0);
        }
    }
    return p;
}

std::vector<double> AssemblySolution::curvature() const {
    std::vector<double> out;
    for (const auto& a : actuators) out.push_back(a.curvature);
    return out;
}

const ActuatorState& AssemblySolution::actuator(const std::string& name) const {
    const auto it = std::find(actuator_names.begin(), actuator_names.end(), name);
    if (it == actuator_names.end()) throw LookupError("unknown actuator '" + name + "'");
    return actuators[static_cast<std::size_t>(it - actuator_names.begin())];
}

std::vector<ActuatorState> actuator_states(const Assembly& assembly, const SteadyState& state) {
    std::vector<ActuatorState> out;
    for (const auto* a : assembly.placements()) {
        out.push_back(actuator_state(state, a->model, a->name + "."));
    }
    return out;
}

AssemblySolution solve_assembly(const Assembly& assembly, const SolverSettings& settings,
                                double kappa_zero) {
    const Network net = build_assembly_network(assembly);
    AssemblySolution out;
    out.state = solve_steady(net, settings);
    out.actuator_names = assembly.actuator_names();
    out.actuators = actuator_states(assembly, out.state);
    out.pattern = sign_pattern(out.curvature(), kappa_zero);
    out.audit = power_audit(out.state, net);
    return out;
}

ControlSchedule control_schedule(const Assembly& assembly, const RoleSchedule& schedule,
                                 bool allow_idle) {
    ControlSchedule out;
    for (const auto& [t, roles] : schedule) {
        auto c = controls_for(assembly, roles, allow_idle);
        out.add(t, std::move(c.openings), std::move(c.source_values));
    }
    return out;
}

TransientTrace simulate_assembly(const Assembly& assembly, const RoleSchedule& schedule, double t_end,
                                 double dt, const SolverSettings& settings,
                                 const TransientOptions& options) {
    const Network net = build_assembly_network(assembly, true);
    return simulate_transient(net, control_schedule(assembly, schedule, true), t_end, dt, settings,
                              options);
}

// ---------------------------------------------------------------------------

std::vector<SignPattern> Enumeration::patterns() const {
    std::vector<SignPattern> out;
    for (auto i : distinct) out.push_back(*configurations[i].pattern);
    return out;
}

const ConfigurationResult* Enumeration::find(const SignPattern& pattern) const {
    for (auto i : distinct) {
        if (*configurations[i].pattern == pattern) return &configurations[i];
    }
    return nullptr;
}

Enumeration enumerate_configurations(const Assembly& assembly, const EnumerationOptions& options,
                                     const SolverSettings& settings) {
    if (options.opening_grid.empty()) throw DomainError("opening grid must not be empty");
    std::vector<double> grid = options.opening_grid;
    for (double g : grid) {
        if (!(g >= 0.0 && g <= 1.0)) throw DomainError("opening grid values must lie in [0, 1]");
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    std::vector<PortRole> candidates{Supply{SupplyDirection::Forward}, Supply{SupplyDirection::Reverse}};
    for (double g : grid) candidates.emplace_back(Vent{g});
    candidates.emplace_back(Blocked{});

    Enumeration out;
    out.ports = assembly.port_names();
    out.actuators = assembly.actuator_names();
    const std::size_t n_ports = out.ports.size();

    // Odometer over candidate indices, first port most significant.
    std::vector<std::size_t> idx(n_ports, 0);
    std::vector<RoleMap> admissible;
    for (bool more = true; more;) {
        RoleMap roles;
        for (std::size_t i = 0; i < n_ports; ++i) roles[out.ports[i]] = candidates[idx[i]];
        bool ok = true;
        for (const auto& c : assembly.circuits) {
            int supplies = 0;
            for (const auto& p : c.ports) supplies += std::holds_alternative<Supply>(roles[c.prefix + p]) ? 1 : 0;
            ok = ok && supplies == 1;
        }
        if (ok) admissible.push_back(std::move(roles));
        more = false;
        for (std::size_t i = n_ports; i-- > 0;) {
            if (++idx[i] < candidates.size()) {
                more = true;
                break;
            }
            idx[i] = 0;
        }
    }

    out.configurations.resize(admissible.size());
    const auto run = [&](std::size_t begin, std::size_t stride) {
        for (std::size_t i = begin; i < admissible.size(); i += stride) {
            ConfigurationResult r;
            r.roles = admissible[i];
            Assembly a = assembly;
            a.roles = admissible[i];
            try {
                const auto sol = solve_assembly(a, settings, options.kappa_zero);
                r.curvature = sol.curvature();
                r.pattern = sol.pattern;
            } catch (const Error& e) {
                r.error_kind = e.kind();
                r.error_message = e.what();
            }
            out.configurations[i] = std::move(r);
        }
    };
    const unsigned workers = std::max(1U, options.workers);
    if (workers == 1) {
        run(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w, workers);
        for (auto& t : pool) t.join();
    }

    std::map<SignPattern, std::size_t> first;
    for (std::size_t i = 0; i < out.configurations.size(); ++i) {
        const auto& p = out.configurations[i].pattern;
        if (p && !first.count(*p)) first.emplace(*p, i);
    }
    for (const auto& [p, i] : first) out.distinct.push_back(i);
    return out;
}

// ---------------------------------------------------------------------------

std::vector<Preset> gripper_presets() {
    const PortRole fwd = Supply{SupplyDirection::Forward};
    const PortRole rev = Supply{SupplyDirection::Reverse};
    const PortRole closed = Vent{0.0};
    const PortRole open = Vent{1.0};
    const auto preset = [](std::string label, std::string text, PortRole l, PortRole m, PortRole r,
                           const std::string& pattern) {
        return Preset{std::move(label), std::move(text),
                      RoleMap{{"left", std::move(l)}, {"middle", std::move(m)}, {"right", std::move(r)}},
                      parse_sign_pattern(pattern)};
    };
    return {
        preset("a", "parallel, both vents closed", closed, fwd, closed, "00"),
        preset("b", "parallel, left vent open", open, fwd, closed, "+0"),
        preset("c", "parallel, right vent open", closed, fwd, open, "0+"),
        preset("d", "parallel, both vents open", open, fwd, open, "++"),
        preset("e", "parallel, left open, right at quarter opening", open, fwd, Vent{0.25}, "++"),
        preset("f", "parallel reversed, both vents open", open, rev, open, "--"),
        preset("g", "parallel reversed, left vent open", open, rev, closed, "-0"),
        preset("h", "series, supply at left, vent at right", fwd, Blocked{}, open, "-+"),
        preset("i", "series, supply at right, vent at left", open, Blocked{}, fwd, "+-"),
    };
}

RoleSchedule swim_gait(double half_period, int cycles) {
    if (!(half_period > 0.0)) throw DomainError("half period must be positive");
    if (cycles < 1) throw DomainError("cycles must be >= 1");
    const auto phase = [](SupplyDirection front, SupplyDirection rear) {
        RoleMap r;
        for (const auto& [prefix, dir] : {std::pair{std::string("front."), front}, std::pair{std::string("rear."), rear}}) {
            r[prefix + "left"] = Vent{1.0};
            r[prefix + "middle"] = Supply{dir};
            r[prefix + "right"] = Vent{1.0};
        }
        return r;
    };
    RoleSchedule out;
    for (int k = 0; k < 2 * cycles; ++k) {
        const bool first = k % 2 == 0;
        out.emplace_back(k * half_period,
                         first ? phase(SupplyDirection::Forward, SupplyDirection::Reverse)
                               : phase(SupplyDirection::Reverse, SupplyDirection::Forward));
    }
    return out;
}

}  // namespace flowbots
