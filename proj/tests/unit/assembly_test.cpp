#include <chrono>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "flowbots/assembly.hpp"
#include "flowbots/errors.hpp"

namespace flowbots {
namespace {

double relative(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

const PortRole kForward = Supply{SupplyDirection::Forward};
const PortRole kReverse = Supply{SupplyDirection::Reverse};

Assembly gripper() { return make_gripper(ActuatorModel{}, ActuatorModel{}, water_20c()); }

Assembly ideal_vent_gripper() {
    Assembly g = gripper();
    g.plumbing.vent_area = 1.0;
    return g;
}

RoleMap roles(PortRole l, PortRole m, PortRole r, const std::string& prefix = "") {
    return {{prefix + "left", std::move(l)}, {prefix + "middle", std::move(m)}, {prefix + "right", std::move(r)}};
}

AssemblySolution solve_with(Assembly a, const RoleMap& r) {
    a.roles = r;
    return solve_assembly(a);
}

TEST(Assembly, ControlFanIn) {
    EXPECT_EQ(control_fan_in(make_rig(ActuatorModel{}, water_20c())), 2);
    EXPECT_EQ(control_fan_in(gripper()), 3);
    EXPECT_EQ(control_fan_in(make_quadruped(ActuatorModel{}, ActuatorModel{}, water_20c())), 6);
}

TEST(Assembly, RigForwardBendsPositive) {
    const auto sol = solve_assembly(make_rig(ActuatorModel{}, water_20c()));
    EXPECT_EQ(sol.pattern.to_string(), "+");
    EXPECT_TRUE(sol.audit.balanced(1e-6));
}

TEST(Assembly, SupplyCountEnforced) {
    Assembly g = gripper();
    g.roles = roles(Vent{1.0}, Vent{1.0}, Vent{1.0});
    EXPECT_THROW(build_assembly_network(g), ConfigurationError);
    EXPECT_NO_THROW(build_assembly_network(g, true));
    g.roles = roles(kForward, kForward, Vent{1.0});
    EXPECT_THROW(build_assembly_network(g), ConfigurationError);
    g.roles = roles(kForward, kReverse, Vent{1.0});
    EXPECT_THROW(solve_assembly(g), ConfigurationError);
}

TEST(Assembly, UnknownOrMissingPortRejected) {
    Assembly g = gripper();
    g.roles["thumb"] = Vent{1.0};
    EXPECT_THROW(build_assembly_network(g), ConfigurationError);
    g = gripper();
    g.roles.erase("right");
    EXPECT_THROW(build_assembly_network(g), ConfigurationError);
    g = gripper();
    g.roles["left"] = Vent{1.5};
    EXPECT_THROW(build_assembly_network(g), DomainError);
}

TEST(Assembly, FlowSourceWithNoExitIsOpenCircuit) {
    Assembly g = gripper();
    g.source = SourceSpec{SourceSpec::Kind::Flow, 1e-5};
    g.roles = roles(Blocked{}, kForward, Blocked{});
    EXPECT_THROW(solve_assembly(g), OpenCircuitError);
    g.roles = roles(Vent{1.0}, kForward, Blocked{});
    const auto sol = solve_assembly(g);
    EXPECT_NEAR(sol.state.flow("source"), 1e-5, 1e-15);
    EXPECT_EQ(sol.pattern.to_string(), "+0");
}

TEST(Assembly, IdleAssemblyIsAtRest) {
    Assembly g = gripper();
    g.source = SourceSpec{SourceSpec::Kind::Flow, 1e-5};
    g.roles = roles(Vent{1.0}, Blocked{}, Vent{1.0});
    const Network net = build_assembly_network(g, true);
    const auto state = solve_steady(net);
    for (const auto& s : actuator_states(g, state)) EXPECT_NEAR(s.curvature, 0.0, 1e-12);
}

TEST(Gripper, ParallelSymmetricSplit) {
    const auto sol = solve_assembly(gripper());
    EXPECT_LT(relative(sol.actuator("A").curvature, sol.actuator("B").curvature), 1e-9);
    EXPECT_LT(relative(sol.actuator("A").delta_p_chambers, sol.actuator("B").delta_p_chambers), 1e-9);
    EXPECT_EQ(sol.pattern.to_string(), "++");
}

TEST(Gripper, MirroredOpeningsGiveMirroredCurvature) {
    for (double x : {0.1, 0.25, 0.6}) {
        for (double y : {0.3, 1.0}) {
            const auto s1 = solve_with(gripper(), roles(Vent{x}, kForward, Vent{y}));
            const auto s2 = solve_with(gripper(), roles(Vent{y}, kForward, Vent{x}));
            EXPECT_LT(relative(s1.actuator("A").curvature, s2.actuator("B").curvature), 1e-9);
            EXPECT_LT(relative(s1.actuator("B").curvature, s2.actuator("A").curvature), 1e-9);
        }
    }
}

TEST(Gripper, SeriesHalvesChamberPressure) {
    const double ps = 2e5;
    const auto par = solve_with(ideal_vent_gripper(), roles(Vent{1.0}, kForward, Vent{1.0}));
    const auto ser = solve_with(ideal_vent_gripper(), roles(kForward, Blocked{}, Vent{1.0}));
    const double port_a = ser.state.pressure("port.left") - ser.state.pressure("port.middle");
    const double port_b = ser.state.pressure("port.middle") - ser.state.pressure("port.right");
    EXPECT_LT(relative(port_a, ps / 2.0), 1e-6);
    EXPECT_LT(relative(port_b, ps / 2.0), 1e-6);
    EXPECT_LT(relative(std::abs(ser.actuator("A").delta_p_chambers), par.actuator("A").delta_p_chambers / 2.0),
              1e-6);
    EXPECT_LT(relative(std::abs(ser.actuator("B").delta_p_chambers), par.actuator("B").delta_p_chambers / 2.0),
              1e-6);
    EXPECT_EQ(ser.pattern.to_string(), "-+");
}

TEST(Gripper, SeriesStrictlyAttenuates) {
    for (double vent : {0.25, 1.0}) {
        const auto par = solve_with(gripper(), roles(Vent{vent}, kForward, Vent{vent}));
        const auto ser = solve_with(gripper(), roles(kForward, Blocked{}, Vent{vent}));
        EXPECT_LT(std::abs(ser.actuator("A").delta_p_chambers), std::abs(par.actuator("A").delta_p_chambers));
        EXPECT_LT(std::abs(ser.actuator("B").delta_p_chambers), std::abs(par.actuator("B").delta_p_chambers));
    }
}

TEST(Gripper, ClosedVentFingerRelaxes) {
    const auto sol = solve_with(gripper(), roles(Vent{1.0}, kForward, Vent{0.0}));
    EXPECT_NEAR(sol.actuator("B").flow_through, 0.0, 1e-15);
    EXPECT_LT(std::abs(sol.actuator("B").curvature), kDefaultKappaZero);
    EXPECT_GT(sol.actuator("A").curvature, 1.0);
}

TEST(Gripper, PresetsRealiseTheirPatterns) {
    const auto presets = gripper_presets();
    ASSERT_EQ(presets.size(), 9U);
    for (const auto& p : presets) {
        const auto sol = solve_with(gripper(), p.roles);
        EXPECT_EQ(sol.pattern, p.expected) << p.label << " " << sol.pattern.to_string();
    }
}

TEST(SignPattern, DeadBandAndParsing) {
    EXPECT_EQ(sign_pattern({0.5e-3, -2e-3, 3.0}).to_string(), "0-+");
    EXPECT_EQ(parse_sign_pattern("+-0").signs, (std::vector<int>{1, -1, 0}));
    EXPECT_THROW(parse_sign_pattern("+x"), ParseError);
}

// ---------------------------------------------------------------------------
// Enumeration

TEST(Enumeration, BinaryGridReachesAllQuadrants) {
    EnumerationOptions opt;
    opt.opening_grid = {0.0, 1.0};
    const auto e = enumerate_configurations(gripper(), opt);
    // Supply position x direction x (two vents + blocked) for the other two ports.
    EXPECT_EQ(e.configurations.size(), 3U * 2U * 3U * 3U);
    EXPECT_GE(e.distinct.size(), 5U);
    for (const char* target : {"++", "+-", "-+", "--"}) {
        EXPECT_NE(e.find(parse_sign_pattern(target)), nullptr) << target;
    }
}

TEST(Enumeration, FullGridCountOrderingAndDeterminism) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto e1 = enumerate_configurations(gripper());
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_LT(seconds, 60.0);
    ASSERT_EQ(e1.configurations.size(), 216U);
    // First assignment: supply forward at left, then right cycles fastest.
    EXPECT_EQ(to_string(e1.configurations[0].roles.at("left")), "supply+");
    EXPECT_EQ(to_string(e1.configurations[0].roles.at("middle")), "vent:0");
    EXPECT_EQ(to_string(e1.configurations[0].roles.at("right")), "vent:0");
    EXPECT_EQ(to_string(e1.configurations[1].roles.at("right")), "vent:0.25");

    EnumerationOptions threaded;
    threaded.workers = 3;
    const auto e2 = enumerate_configurations(gripper(), threaded);
    ASSERT_EQ(e1.configurations.size(), e2.configurations.size());
    for (std::size_t i = 0; i < e1.configurations.size(); ++i) {
        EXPECT_EQ(e1.configurations[i].curvature, e2.configurations[i].curvature);
        EXPECT_EQ(e1.configurations[i].error_kind, e2.configurations[i].error_kind);
    }
    EXPECT_EQ(e1.distinct, e2.distinct);
    for (std::size_t k = 1; k < e1.distinct.size(); ++k) {
        EXPECT_LT(*e1.configurations[e1.distinct[k - 1]].pattern, *e1.configurations[e1.distinct[k]].pattern);
    }
}

TEST(Enumeration, SingleOpeningParallelIsSymmetric) {
    EnumerationOptions opt;
    opt.opening_grid = {0.5};
    const auto e = enumerate_configurations(gripper(), opt);
    for (const auto& c : e.configurations) {
        if (!std::holds_alternative<Supply>(c.roles.at("middle"))) continue;
        if (!std::holds_alternative<Vent>(c.roles.at("left")) || !std::holds_alternative<Vent>(c.roles.at("right"))) {
            continue;
        }
        const bool fwd = c.roles.at("middle") == kForward;
        EXPECT_EQ(c.pattern->to_string(), fwd ? "++" : "--");
    }
}

TEST(Enumeration, ReversingSupplyNegatesPattern) {
    EnumerationOptions opt;
    opt.opening_grid = {0.0, 0.5, 1.0};
    const auto e = enumerate_configurations(gripper(), opt);
    std::size_t checked = 0;
    for (const auto& c : e.configurations) {
        if (!c.pattern) continue;
        RoleMap flipped = c.roles;
        for (auto& [port, role] : flipped) {
            if (auto* s = std::get_if<Supply>(&role)) {
                s->direction = s->direction == SupplyDirection::Forward ? SupplyDirection::Reverse
                                                                        : SupplyDirection::Forward;
            }
        }
        for (const auto& d : e.configurations) {
            if (d.roles != flipped) continue;
            ASSERT_TRUE(d.pattern.has_value());
            for (std::size_t k = 0; k < c.curvature.size(); ++k) {
                EXPECT_NEAR(d.curvature[k], -c.curvature[k], 1e-9 * std::max(1.0, std::abs(c.curvature[k])));
            }
            ++checked;
        }
    }
    EXPECT_EQ(checked, e.configurations.size());
}

TEST(Enumeration, FailuresAreRecordedNotThrown) {
    Assembly g = gripper();
    g.source = SourceSpec{SourceSpec::Kind::Flow, 1e-5};
    EnumerationOptions opt;
    opt.opening_grid = {0.0, 1.0};
    const auto e = enumerate_configurations(g, opt);
    std::size_t failures = 0;
    for (const auto& c : e.configurations) {
        if (c.pattern) continue;
        ++failures;
        EXPECT_EQ(c.error_kind, "open_circuit");
    }
    EXPECT_GT(failures, 0U);
}

TEST(Enumeration, RejectsBadGrid) {
    EnumerationOptions opt;
    opt.opening_grid = {};
    EXPECT_THROW(enumerate_configurations(gripper(), opt), DomainError);
    opt.opening_grid = {1.2};
    EXPECT_THROW(enumerate_configurations(gripper(), opt), DomainError);
}

// ---------------------------------------------------------------------------
// Quadruped

Assembly quadruped(double vent_area = 1e-5) {
    Assembly q = make_quadruped(ActuatorModel{}, ActuatorModel{}, water_20c());
    q.plumbing.vent_area = vent_area;
    return q;
}

TEST(Quadruped, SymmetricParallelLimbsAgree) {
    const auto sol = solve_assembly(quadruped());
    const double k = sol.actuator("front.A").curvature;
    for (const auto& name : sol.actuator_names) EXPECT_LT(relative(sol.actuator(name).curvature, k), 1e-9);
    EXPECT_EQ(sol.pattern.to_string(), "++++");
}

TEST(Quadruped, SeriesFrontHalfOfParallelRear) {
    Assembly q = quadruped(1.0);
    q.roles = roles(kForward, Blocked{}, Vent{1.0}, "front.");
    for (auto& [k, v] : roles(Vent{1.0}, kForward, Vent{1.0}, "rear.")) q.roles[k] = v;
    const auto sol = solve_assembly(q);
    EXPECT_LT(relative(std::abs(sol.actuator("front.A").curvature), sol.actuator("rear.A").curvature / 2.0), 1e-6);
    EXPECT_LT(relative(std::abs(sol.actuator("front.B").curvature), sol.actuator("rear.B").curvature / 2.0), 1e-6);
}

TEST(Quadruped, PairsRunInOppositeDirections) {
    Assembly q = quadruped();
    q.roles = swim_gait(1.0, 1).front().second;
    const auto sol = solve_assembly(q);
    EXPECT_EQ(sol.pattern.to_string(), "++--");
}

TEST(Quadruped, SwimGaitAlternatesPatterns) {
    const Assembly q = quadruped();
    const double half = 1.0;
    const auto gait = swim_gait(half, 2);
    ASSERT_EQ(gait.size(), 4U);
    const auto trace = simulate_assembly(q, gait, 4.0, 0.02);
    std::vector<std::string> at_phase_end;
    for (std::size_t i = 0; i < trace.times.size(); ++i) {
        const double t = trace.times[i];
        const double frac = std::fmod(t, half);
        if (t > 0.0 && (std::abs(frac) < 1e-9 || std::abs(frac - half) < 1e-9)) {
            std::vector<double> kappa;
            for (const auto& s : actuator_states(q, trace.snapshots[i])) kappa.push_back(s.curvature);
            at_phase_end.push_back(sign_pattern(kappa).to_string());
        }
    }
    // Sample at t = 1, 2, 3, 4: the control for step ending at t = k is the
    // phase that started at t = k, so the pattern leads by one tick.
    ASSERT_EQ(at_phase_end.size(), 4U);
    std::set<std::string> seen(at_phase_end.begin(), at_phase_end.end());
    EXPECT_EQ(seen, (std::set<std::string>{"++--", "--++"}));
    for (std::size_t k = 1; k < at_phase_end.size(); ++k) EXPECT_NE(at_phase_end[k], at_phase_end[k - 1]);
}

}  // namespace
}  // namespace flowbots
