#include <csignal>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "flowbots/commands.hpp"
#include "flowbots/errors.hpp"
#include "flowbots/protocol.hpp"
#include "flowbots/scenario.hpp"
#include "flowbots/teleop.hpp"

namespace {

using flowbots::cli::Output;
using json = nlohmann::json;

int fail(const std::string& kind, const std::string& message, std::optional<std::size_t> line = {}) {
    json err{{"error", kind}, {"message", message}};
    if (line) err["line"] = *line;
    std::cerr << err.dump() << '\n';
    return 1;
}

void emit(const Output& output, const std::string& out_dir) {
    flowbots::cli::write_outputs(output, out_dir);
    for (const auto& f : output) std::cout << (std::filesystem::path(out_dir) / f.name).string() << '\n';
}

int serve(const std::string& bind, std::uint16_t port, double tick_rate, const std::string& record) {
    // Block the stop signals before any thread starts so only sigwait sees them.
    sigset_t stop_signals;
    sigemptyset(&stop_signals);
    sigaddset(&stop_signals, SIGINT);
    sigaddset(&stop_signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

    flowbots::teleop::ServiceOptions options;
    options.tick_rate = tick_rate;
    if (!record.empty()) options.record = record;
    flowbots::teleop::Service service(options);
    flowbots::teleop::Server server(service, bind, port);
    server.start();
    std::cout << json{{"listening", bind}, {"port", server.port()}}.dump() << std::endl;

    int sig = 0;
    sigwait(&stop_signals, &sig);
    server.stop();
    service.stop();
    return 0;
}

int replay(const std::string& path) {
    std::ifstream in(path);
    if (!in) return fail("input", "cannot read replay log '" + path + "'");
    bool ok = true;
    for (const auto& r : flowbots::teleop::replay_log(in)) {
        ok = ok && r.max_curvature_error <= 1e-9;
        std::cout << json{{"session", r.session},
                          {"snapshots", r.snapshots},
                          {"max_curvature_error", r.max_curvature_error}}
                         .dump()
                  << '\n';
    }
    return ok ? 0 : fail("replay_mismatch", "replayed curvature differs from the log by more than 1e-9");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fluidic network and soft actuator simulator"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string scenario_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    app.add_option("--scenario", scenario_path, "Scenario file (JSON)");
    app.add_option("--out", out_dir, "Output directory")->capture_default_str();
    app.add_option("--seed", seed, "Seed for synthetic marker noise")->capture_default_str();

    auto* solve = app.add_subcommand("solve", "Steady solve of a network, rig or assembly");
    auto* simulate = app.add_subcommand("simulate", "Transient run of a network or assembly schedule");
    auto* sweep = app.add_subcommand("sweep", "Pressure x direction x fluid sweep");
    auto* demo = app.add_subcommand("demo", "Gripper preset walk-through or quadruped gait");
    auto* enumerate = app.add_subcommand("enumerate", "All port-role configurations of an assembly");

    auto* mocap = app.add_subcommand("mocap", "Curvature and response time from a marker track");
    std::string mocap_input;
    double mocap_rate = 240.0;
    int mocap_window = 20;
    mocap->add_option("--input", mocap_input, "Marker CSV (t,x1,y1,...,x4,y4; mm)");
    mocap->add_option("--rate", mocap_rate, "Sample rate, Hz")->capture_default_str();
    mocap->add_option("--window", mocap_window, "Smoothing window, frames")->capture_default_str();

    auto* serve_cmd = app.add_subcommand("serve", "Teleoperation service");
    std::string bind = "127.0.0.1";
    std::uint16_t port = 7878;
    double tick_rate = 50.0;
    std::string record;
    std::string replay_path;
    serve_cmd->add_option("--bind", bind, "Bind address")->capture_default_str();
    serve_cmd->add_option("--port", port, "TCP port (0 picks one)")->capture_default_str();
    serve_cmd->add_option("--tick-rate", tick_rate, "Simulation ticks per second")->capture_default_str();
    serve_cmd->add_option("--record", record, "Write a replayable JSON-lines log");
    serve_cmd->add_option("--replay", replay_path, "Check a recorded log offline and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what());
    }

    try {
        if (serve_cmd->parsed()) {
            if (!replay_path.empty()) return replay(replay_path);
            return serve(bind, port, tick_rate, record);
        }
        if (mocap->parsed() && scenario_path.empty()) {
            if (mocap_input.empty()) return fail("usage", "mocap needs --input or a scenario with a mocap subject");
            flowbots::cli::MocapSubject subject;
            subject.input = mocap_input;
            subject.sample_rate = mocap_rate;
            subject.window = mocap_window;
            std::ifstream in(mocap_input, std::ios::binary);
            if (!in) return fail("input", "cannot read marker track '" + mocap_input + "'");
            const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
            emit(flowbots::cli::run_mocap(subject, text), out_dir);
            return 0;
        }
        if (scenario_path.empty()) return fail("usage", "--scenario is required");
        auto scenario = flowbots::cli::load_scenario(scenario_path);
        if (solve->parsed()) emit(flowbots::cli::run_solve(scenario), out_dir);
        if (simulate->parsed()) emit(flowbots::cli::run_simulate(scenario), out_dir);
        if (sweep->parsed()) emit(flowbots::cli::run_sweep(scenario, {seed}), out_dir);
        if (demo->parsed()) emit(flowbots::cli::run_demo(scenario), out_dir);
        if (enumerate->parsed()) emit(flowbots::cli::run_enumerate(scenario), out_dir);
        if (mocap->parsed()) {
            if (auto* m = std::get_if<flowbots::cli::MocapSubject>(&scenario.subject); m && !mocap_input.empty()) {
                m->input = mocap_input;
            }
            emit(flowbots::cli::run_mocap(scenario), out_dir);
        }
        return 0;
    } catch (const flowbots::ParseError& e) {
        return fail(e.kind(), e.what(), e.line());
    } catch (const flowbots::Error& e) {
        return fail(e.kind(), e.what());
    } catch (const std::exception& e) {
        return fail("internal", e.what());
    }
}
