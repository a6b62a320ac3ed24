#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "flowbots/actuator.hpp"
#include "flowbots/assembly.hpp"
#include "flowbots/commands.hpp"
#include "flowbots/mocap.hpp"

namespace {

using namespace flowbots;

void BM_SolveRig(benchmark::State& state) {
    const Assembly rig = make_rig(ActuatorModel{}, water_20c());
    for (auto _ : state) benchmark::DoNotOptimize(solve_assembly(rig));
}
BENCHMARK(BM_SolveRig);

void BM_SolveQuadruped(benchmark::State& state) {
    Assembly q = make_quadruped(ActuatorModel{}, ActuatorModel{}, water_20c());
    q.roles = swim_gait(1.0, 1).front().second;
    for (auto _ : state) benchmark::DoNotOptimize(solve_assembly(q));
}
BENCHMARK(BM_SolveQuadruped);

void BM_SimulateGripperPresets(benchmark::State& state) {
    const Assembly g = make_gripper(ActuatorModel{}, ActuatorModel{}, water_20c());
    RoleSchedule schedule;
    double t = 0.0;
    for (const auto& p : gripper_presets()) {
        schedule.emplace_back(t, p.roles);
        t += 0.5;
    }
    for (auto _ : state) benchmark::DoNotOptimize(simulate_assembly(g, schedule, t, 0.02));
}
BENCHMARK(BM_SimulateGripperPresets)->Unit(benchmark::kMillisecond);

void BM_EnumerateGripper(benchmark::State& state) {
    const Assembly g = make_gripper(ActuatorModel{}, ActuatorModel{}, water_20c());
    EnumerationOptions options;
    options.workers = static_cast<unsigned>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(enumerate_configurations(g, options));
}
BENCHMARK(BM_EnumerateGripper)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_FitArc(benchmark::State& state) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> noise(0.0, 0.2);
    auto pts = mocap::synthesize_markers(20.0, 0.08);
    for (auto& p : pts) {
        p.x += noise(rng);
        p.y += noise(rng);
    }
    for (auto _ : state) benchmark::DoNotOptimize(mocap::fit_arc(pts));
}
BENCHMARK(BM_FitArc);

void BM_Sweep(benchmark::State& state) {
    cli::SweepSubject sweep;
    sweep.fluids = {water_20c(), air_20c()};
    for (auto _ : state) benchmark::DoNotOptimize(cli::sweep_rows(sweep, {}, 0));
}
BENCHMARK(BM_Sweep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
