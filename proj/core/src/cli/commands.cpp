#include "flowbots/commands.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "flowbots/csv.hpp"
#include "flowbots/errors.hpp"

namespace flowbots::cli {

namespace {

using json = nlohmann::json;

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json audit_json(const PowerAudit& audit) {
    return {{"source_power_w", audit.source_power},
            {"dissipated_power_w", audit.dissipated_power},
            {"relative_mismatch", audit.relative_mismatch()}};
}

json state_json(const SteadyState& state) {
    return {{"iterations", state.iterations},
            {"kcl_residual_m3s", state.residual_norm},
            {"element_residual_pa", state.element_residual}};
}

void add_state_files(Output& out, const Network& net, const SteadyState& state) {
    CsvWriter nodes({"node", "pressure_pa"});
    for (const auto& n : net.nodes()) nodes.field(n.id).field(state.pressure(n.id)).end_row();
    CsvWriter elements({"element", "from", "to", "flow_m3s"});
    for (const auto& e : net.elements()) {
        elements.field(e.id).field(e.from).field(e.to).field(state.flow(e.id)).end_row();
    }
    out.push_back({"nodes.csv", nodes.str()});
    out.push_back({"elements.csv", elements.str()});
}

std::string actuator_csv(const std::vector<std::string>& names, const std::vector<ActuatorState>& states) {
    CsvWriter w({"actuator", "delta_p_pa", "curvature_1pm", "tip_flow_m3s"});
    for (std::size_t i = 0; i < names.size(); ++i) {
        w.field(names[i]).field(states[i].delta_p_chambers).field(states[i].curvature).field(states[i].flow_through);
        w.end_row();
    }
    return w.str();
}

// Transient trace of an assembly: curvature and chamber asymmetry per actuator.
std::string assembly_trace_csv(const Assembly& assembly, const TransientTrace& trace,
                               const std::vector<std::string>& labels = {}) {
    std::vector<std::string> header{"t"};
    if (!labels.empty()) header.emplace_back("label");
    const auto names = assembly.actuator_names();
    for (const auto& n : names) header.push_back(n + ".curvature_1pm");
    for (const auto& n : names) header.push_back(n + ".delta_p_pa");
    header.emplace_back("source_flow_m3s");
    header.emplace_back("pattern");
    CsvWriter w(header);
    for (std::size_t k = 0; k < trace.times.size(); ++k) {
        const auto states = actuator_states(assembly, trace.snapshots[k]);
        std::vector<double> kappa;
        w.field(trace.times[k]);
        if (!labels.empty()) w.field(labels[k]);
        for (const auto& s : states) {
            w.field(s.curvature);
            kappa.push_back(s.curvature);
        }
        for (const auto& s : states) w.field(s.delta_p_chambers);
        w.field(trace.snapshots[k].flow("source"));
        w.field(sign_pattern(kappa).to_string());
        w.end_row();
    }
    return w.str();
}

const TransientSpec& need_transient(const Scenario& s) {
    if (!s.transient) throw ConfigurationError("simulate needs a 'transient' block");
    return *s.transient;
}

}  // namespace

std::string_view direction_name(FlowDirection direction) {
    return direction == FlowDirection::Forward ? "forward" : "reverse";
}

// ---------------------------------------------------------------------------

Output run_solve(const Scenario& scenario) {
    Output out;
    json summary{{"command", "solve"}, {"subject", subject_name(scenario.subject)}};
    if (const auto* n = std::get_if<NetworkSubject>(&scenario.subject)) {
        Network net = n->network;
        n->schedule.apply(0.0, net);
        const SteadyState state = solve_steady(net, scenario.solver);
        add_state_files(out, net, state);
        if (!n->actuators.empty()) {
            std::vector<std::string> names;
            std::vector<ActuatorState> states;
            for (const auto& a : n->actuators) {
                names.push_back(a.name);
                states.push_back(actuator_state(state, a.model, a.name + "."));
            }
            out.push_back({"actuators.csv", actuator_csv(names, states)});
        }
        summary["solver"] = state_json(state);
        summary["audit"] = audit_json(power_audit(state, net));
    } else if (const auto* r = std::get_if<RigSubject>(&scenario.subject)) {
        const RigSolution sol = solve_rig(r->model, r->fluid, r->port_delta_p, r->direction, scenario.solver);
        add_state_files(out, build_rig_network(r->model, r->fluid, r->port_delta_p, r->direction), sol.state);
        out.push_back({"actuators.csv", actuator_csv({"act"}, {sol.actuator})});
        summary["solver"] = state_json(sol.state);
        summary["audit"] = audit_json(sol.audit);
        summary["loop_flow_m3s"] = sol.loop_flow;
        summary["tau_fill_s"] = sol.loop_flow > 0.0
                                    ? fill_time_constant(r->model, r->fluid, sol.loop_flow,
                                                         sol.actuator.delta_p_chambers,
                                                         scenario.solver.ambient_pressure)
                                    : 0.0;
    } else if (const auto* a = std::get_if<AssemblySubject>(&scenario.subject)) {
        const AssemblySolution sol = solve_assembly(a->assembly, scenario.solver);
        add_state_files(out, build_assembly_network(a->assembly), sol.state);
        out.push_back({"actuators.csv", actuator_csv(sol.actuator_names, sol.actuators)});
        json roles = json::object();
        for (const auto& [port, role] : a->assembly.roles) roles[port] = to_string(role);
        summary["roles"] = roles;
        summary["pattern"] = sol.pattern.to_string();
        summary["solver"] = state_json(sol.state);
        summary["audit"] = audit_json(sol.audit);
    } else {
        throw ConfigurationError("solve needs a network, rig or assembly subject");
    }
    out.push_back({"summary.json", dump(summary)});
    return out;
}

Output run_simulate(const Scenario& scenario) {
    Output out;
    if (const auto* n = std::get_if<NetworkSubject>(&scenario.subject)) {
        const TransientSpec& t = need_transient(scenario);
        const TransientTrace trace = simulate_transient(n->network, n->schedule, t.t_end, t.dt, scenario.solver);
        std::vector<std::string> header{"t"};
        for (const auto& node : n->network.nodes()) header.push_back("p:" + node.id + "_pa");
        for (const auto& e : n->network.elements()) header.push_back("q:" + e.id + "_m3s");
        CsvWriter w(header);
        for (std::size_t k = 0; k < trace.times.size(); ++k) {
            w.field(trace.times[k]);
            for (const auto& node : n->network.nodes()) w.field(trace.snapshots[k].pressure(node.id));
            for (const auto& e : n->network.elements()) w.field(trace.snapshots[k].flow(e.id));
            w.end_row();
        }
        out.push_back({"trace.csv", w.str()});
    } else if (const auto* a = std::get_if<AssemblySubject>(&scenario.subject)) {
        const TransientSpec& t = need_transient(scenario);
        const TransientTrace trace = simulate_assembly(a->assembly, a->schedule, t.t_end, t.dt, scenario.solver);
        out.push_back({"trace.csv", assembly_trace_csv(a->assembly, trace)});
    } else {
        throw ConfigurationError("simulate needs a network or assembly subject");
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<mocap::MarkerFrame> synthesize_track(const ResponseCurve& curve, double arc_length,
                                                 double noise_mm, std::mt19937_64& rng) {
    std::normal_distribution<double> noise(0.0, noise_mm > 0.0 ? noise_mm : 1.0);
    std::vector<mocap::MarkerFrame> frames;
    frames.reserve(curve.times.size());
    for (std::size_t k = 0; k < curve.times.size(); ++k) {
        const auto pts = mocap::synthesize_markers(curve.curvature[k], arc_length);
        mocap::MarkerFrame f;
        f.t = curve.times[k];
        for (std::size_t i = 0; i < f.points.size(); ++i) {
            f.points[i] = pts[i];
            if (noise_mm > 0.0) {
                f.points[i].x += noise(rng);
                f.points[i].y += noise(rng);
            }
        }
        frames.push_back(f);
    }
    return frames;
}

MocapAnalysis analyse_track(const std::vector<mocap::MarkerFrame>& frames, double sample_rate, int window,
                            const mocap::ResponseOptions& options) {
    MocapAnalysis a;
    a.raw = mocap::fit_series(frames, sample_rate);
    a.smoothed = mocap::smooth(a.raw, window);
    a.response = mocap::extract_response(a.smoothed, options);
    return a;
}

std::vector<SweepRow> sweep_rows(const SweepSubject& sweep, const SolverSettings& settings, std::uint64_t seed) {
    std::vector<SweepRow> rows;
    std::uint64_t cell = 0;
    for (const auto& fluid : sweep.fluids) {
        for (const auto direction : sweep.directions) {
            for (const double p : sweep.pressures()) {
                for (int rep = 0; rep < sweep.repeats; ++rep, ++cell) {
                    SweepRow row;
                    row.fluid = fluid.name;
                    row.direction = direction;
                    row.port_delta_p = p;
                    row.repeat = rep;
                    try {
                        const RigSolution sol = solve_rig(sweep.model, fluid, p, direction, settings);
                        row.delta_p_chambers = sol.actuator.delta_p_chambers;
                        row.curvature = sol.actuator.curvature;
                        row.loop_flow = sol.loop_flow;
                        const ResponseCurve curve =
                            response_curve(sweep.model, fluid, sol.loop_flow, sol.actuator.curvature, sweep.fps,
                                           sweep.duration, settings.ambient_pressure);
                        row.tau_fill = curve.tau_fill;
                        // Each cell draws from its own stream so rows do not depend on each other.
                        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                                          static_cast<std::uint32_t>(cell)};
                        std::mt19937_64 rng(seq);
                        const auto frames = synthesize_track(curve, sweep.arc_length, sweep.marker_noise, rng);
                        row.response_time = analyse_track(frames, sweep.fps).response.response_time;
                    } catch (const Error& e) {
                        row.error = fmt::format("{}: {}", e.kind(), e.what());
                    }
                    rows.push_back(std::move(row));
                }
            }
        }
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    CsvWriter w({"fluid", "direction", "port_delta_p_pa", "repeat", "delta_p_chambers_pa", "curvature_1pm",
                 "loop_flow_m3s", "tau_fill_s", "response_time_s", "error"});
    for (const auto& r : rows) {
        w.field(r.fluid).field(direction_name(r.direction)).field(r.port_delta_p).field(r.repeat);
        if (r.error.empty()) {
            w.field(r.delta_p_chambers).field(r.curvature).field(r.loop_flow).field(r.tau_fill).field(r.response_time);
        } else {
            // Partial results of a failed cell are not trustworthy.
            for (int i = 0; i < 5; ++i) w.empty();
        }
        w.field(r.error).end_row();
    }
    return w.str();
}

Output run_sweep(const Scenario& scenario, const RunContext& context) {
    const auto* s = std::get_if<SweepSubject>(&scenario.subject);
    if (!s) throw ConfigurationError("sweep needs a sweep subject");
    return {{"sweep.csv", sweep_csv(sweep_rows(*s, scenario.solver, context.seed))}};
}

// ---------------------------------------------------------------------------

Output run_demo(const Scenario& scenario) {
    const auto* a = std::get_if<AssemblySubject>(&scenario.subject);
    if (!a || !a->demo) throw ConfigurationError("demo needs an assembly subject with a 'demo' block");
    const double dt = scenario.transient ? scenario.transient->dt : TransientSpec{}.dt;

    RoleSchedule schedule;
    std::vector<std::pair<double, std::string>> marks;  // label in force from time t
    double t_end = 0.0;
    if (const auto* p = std::get_if<DemoPresets>(&*a->demo)) {
        const auto presets = gripper_presets();
        for (std::size_t i = 0; i < p->labels.size(); ++i) {
            const double t = static_cast<double>(i) * p->hold;
            for (const auto& pr : presets) {
                if (pr.label == p->labels[i]) schedule.emplace_back(t, pr.roles);
            }
            marks.emplace_back(t, p->labels[i]);
        }
        t_end = static_cast<double>(p->labels.size()) * p->hold;
    } else {
        const auto& g = std::get<DemoSwimGait>(*a->demo);
        schedule = swim_gait(g.half_period, g.cycles);
        for (std::size_t i = 0; i < schedule.size(); ++i) {
            marks.emplace_back(schedule[i].first, i % 2 == 0 ? "stroke_a" : "stroke_b");
        }
        t_end = 2.0 * g.half_period * g.cycles;
    }

    const TransientTrace trace = simulate_assembly(a->assembly, schedule, t_end, dt, scenario.solver);
    // Same zero-order-hold rule as the schedule: a mark at t covers steps ending at or after t.
    std::vector<std::string> labels;
    for (const double t : trace.times) {
        std::string label = "initial";
        for (const auto& [tm, l] : marks) {
            if (t >= tm) label = l;
        }
        labels.push_back(label);
    }
    return {{"demo.csv", assembly_trace_csv(a->assembly, trace, labels)}};
}

Output run_enumerate(const Scenario& scenario) {
    const auto* a = std::get_if<AssemblySubject>(&scenario.subject);
    if (!a) throw ConfigurationError("enumerate needs an assembly subject");
    const Enumeration en = enumerate_configurations(a->assembly, a->enumeration, scenario.solver);

    std::vector<std::string> header{"index"};
    for (const auto& p : en.ports) header.push_back(p);
    header.emplace_back("pattern");
    for (const auto& n : en.actuators) header.push_back(n + ".curvature_1pm");
    header.emplace_back("error");
    CsvWriter w(header);
    std::size_t failed = 0;
    for (std::size_t i = 0; i < en.configurations.size(); ++i) {
        const auto& c = en.configurations[i];
        w.field(i);
        for (const auto& p : en.ports) w.field(to_string(c.roles.at(p)));
        if (c.pattern) {
            w.field(c.pattern->to_string());
            for (double k : c.curvature) w.field(k);
            w.empty();
        } else {
            ++failed;
            w.empty();
            for (std::size_t k = 0; k < en.actuators.size(); ++k) w.empty();
            w.field(fmt::format("{}: {}", c.error_kind, c.error_message));
        }
        w.end_row();
    }
    json patterns = json::array();
    for (const auto i : en.distinct) {
        json roles = json::object();
        for (const auto& [port, role] : en.configurations[i].roles) roles[port] = to_string(role);
        patterns.push_back({{"pattern", en.configurations[i].pattern->to_string()}, {"index", i}, {"roles", roles}});
    }
    const json summary{{"command", "enumerate"},
                       {"fan_in", control_fan_in(a->assembly)},
                       {"configurations", en.configurations.size()},
                       {"failed", failed},
                       {"patterns", patterns}};
    return {{"enumeration.csv", w.str()}, {"summary.json", dump(summary)}};
}

// ---------------------------------------------------------------------------

Output run_mocap(const MocapSubject& subject, std::string_view marker_csv) {
    const auto frames = read_marker_csv(marker_csv);
    const MocapAnalysis a = analyse_track(frames, subject.sample_rate, subject.window, subject.response);
    // Emitted in SI: curvature 1/m.
    CsvWriter w({"t", "curvature"});
    for (std::size_t k = 0; k < a.smoothed.size(); ++k) {
        w.field(a.smoothed.t[k]).field(1000.0 * a.smoothed.curvature[k]).end_row();
    }
    const json summary{{"start_time", a.response.start_time},
                       {"end_time", a.response.end_time},
                       {"response_time", a.response.response_time},
                       {"final_curvature", 1000.0 * a.response.final_curvature}};
    return {{"curvature.csv", w.str()}, {"summary.json", dump(summary)}};
}

Output run_mocap(const Scenario& scenario) {
    const auto* m = std::get_if<MocapSubject>(&scenario.subject);
    if (!m) throw ConfigurationError("mocap needs a mocap subject");
    std::ifstream in(m->input, std::ios::binary);
    if (!in) throw InputError(fmt::format("cannot read marker track '{}'", m->input.string()));
    std::ostringstream buf;
    buf << in.rdbuf();
    return run_mocap(*m, buf.str());
}

void write_outputs(const Output& output, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& f : output) {
        std::ofstream os(dir / f.name, std::ios::binary | std::ios::trunc);
        if (!os) throw InputError(fmt::format("cannot write '{}'", (dir / f.name).string()));
        os << f.content;
    }
}

}  // namespace flowbots::cli
