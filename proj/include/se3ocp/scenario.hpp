#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "se3ocp/convergence.hpp"
#include "se3ocp/impulsive.hpp"
#include "se3ocp/report.hpp"
#include "se3ocp/shooting.hpp"

namespace se3ocp {

enum class ScenarioKind { Simulate, Tpbvp, ImpulsiveRelaxed, Smooth };

const char* to_string(ScenarioKind k);

struct OutputPaths {
    std::string dir = "out";
    std::string trajectory = "trajectory.csv";
    std::string report = "report.json";
    std::string iterations = "iterations.json";
};

struct ConvergenceSpec {
    double horizon = 1.0;
    std::vector<double> step_sizes;
    std::vector<Order> orders{Order::Second, Order::First};
};

/// One scenario file after parsing and validation.
struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::Simulate;
    BodyParams body = BodyParams::dumbbell();
    GravityParams gravity;
    StepSize h{0.01};
    int N = 0;
    RigidBodyState initial;

    // simulate
    Order order = Order::Second;
    ControlSample control;

    // tpbvp and smooth (explicit target)
    std::optional<RigidBodyState> desired;

    // smooth (inclination target): the uncontrolled endpoint turned about node_axis
    std::optional<double> inclination_deg;
    Vec3 node_axis = Vec3::UnitX();
    Mat3 W_f = Mat3::Identity();
    Mat3 W_m = Mat3::Identity();
    double guess_amplitude = 1e-3;

    // impulsive_relaxed
    RelaxedOrbit relaxed;

    SolverConfig shooting;
    TpbvpOptions tpbvp;
    SqpOptions sqp;

    std::optional<ConvergenceSpec> convergence;
    OutputPaths output;
    std::uint64_t seed = 0;
};

/// Parses TOML text. Throws ConfigError naming the offending key (dotted
/// path) for syntax errors, unknown keys, wrong types and values outside
/// their domain.
ScenarioConfig parse_scenario(std::string_view text, std::string_view source = "config");

ScenarioConfig load_scenario(const std::filesystem::path& path);

ImpulsiveProblem impulsive_problem(const ScenarioConfig& cfg);

/// The target is computed here when given as an inclination change.
SmoothProblem smooth_problem(const ScenarioConfig& cfg);

struct RunOutcome {
    RunReport report;
    Trajectory trajectory;
    /// Control shown on each trajectory row.
    std::vector<ControlSample> row_controls;
    IterationTable iterations;
};

/// Executes the scenario. Solver failures are reported in report.status with
/// converged = false; configuration problems throw ConfigError.
RunOutcome run_scenario(const ScenarioConfig& cfg);

/// Writes trajectory CSV (if any), report JSON and iteration JSON into dir,
/// creating it if needed.
void write_artifacts(const ScenarioConfig& cfg, const RunOutcome& out, const std::filesystem::path& dir);

/// Runs convergence_study for every configured order. Throws ConfigError if
/// the file has no [convergence] table.
std::vector<ConvergenceTable> run_convergence(const ScenarioConfig& cfg);

std::string convergence_json(const std::vector<ConvergenceTable>& tables);

}  // namespace se3ocp
