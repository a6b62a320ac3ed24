#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "flowbots/scenario.hpp"

namespace flowbots::cli {

struct RunContext {
    std::uint64_t seed = 0;  // only drives synthetic marker noise
};

struct OutputFile {
    std::string name;  // relative file name
    std::string content;

    bool operator==(const OutputFile&) const = default;
};
using Output = std::vector<OutputFile>;

// Each command renders its results in memory; write_outputs puts them on disk.
// CSV columns carry SI units in their names.
Output run_solve(const Scenario& scenario);
Output run_simulate(const Scenario& scenario);
Output run_sweep(const Scenario& scenario, const RunContext& context = {});
Output run_demo(const Scenario& scenario);
Output run_enumerate(const Scenario& scenario);
Output run_mocap(const Scenario& scenario);
Output run_mocap(const MocapSubject& subject, std::string_view marker_csv);

void write_outputs(const Output& output, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Building blocks, exposed for tests and benchmarks.

struct SweepRow {
    std::string fluid;
    FlowDirection direction = FlowDirection::Forward;
    double port_delta_p = 0.0;  // Pa
    int repeat = 0;
    double delta_p_chambers = 0.0;  // Pa
    double curvature = 0.0;         // 1/m
    double loop_flow = 0.0;         // m^3/s
    double tau_fill = 0.0;          // s
    double response_time = 0.0;     // s, from the synthetic marker pipeline
    std::string error;              // "<kind>: <message>" when the cell failed
};

std::vector<SweepRow> sweep_rows(const SweepSubject& sweep, const SolverSettings& settings,
                                 std::uint64_t seed);
std::string sweep_csv(const std::vector<SweepRow>& rows);

// Marker frames for a modelled curvature trace, with optional isotropic
// Gaussian noise (mm) on every coordinate.
std::vector<mocap::MarkerFrame> synthesize_track(const ResponseCurve& curve, double arc_length,
                                                 double noise_mm, std::mt19937_64& rng);

// Fit, smooth and extract; curvatures in the result are 1/mm.
struct MocapAnalysis {
    mocap::CurvatureSeries raw;
    mocap::CurvatureSeries smoothed;
    mocap::Response response;
};
MocapAnalysis analyse_track(const std::vector<mocap::MarkerFrame>& frames, double sample_rate,
                            int window = 20, const mocap::ResponseOptions& options = {});

std::string_view direction_name(FlowDirection direction);

}  // namespace flowbots::cli
