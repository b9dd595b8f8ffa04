#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "se3ocp/errors.hpp"
#include "se3ocp/scenario.hpp"
#include "test_support.hpp"

using namespace se3ocp;
using se3ocp::testing::kMu;
using se3ocp::testing::kTwoPi;

namespace {

namespace fs = std::filesystem;

const fs::path kPresets = SE3OCP_PRESET_DIR;
const std::string kCli = SE3OCP_CLI;

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("se3ocp_cli_test_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string preset_text(const std::string& name) { return slurp(kPresets / (name + ".toml")); }

std::string replaced(std::string text, const std::string& from, const std::string& to) {
    const std::size_t at = text.find(from);
    EXPECT_NE(at, std::string::npos) << from;
    if (at != std::string::npos) text.replace(at, from.size(), to);
    return text;
}

std::string config_error_field(const std::string& text) {
    try {
        parse_scenario(text);
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "";
}

int run_cli(const std::string& args) {
    const int status = std::system((kCli + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kMinimal = R"(
scenario = "simulate"
[body]
kind = "point_mass"
inertia = [1.0, 2.0, 3.0]
[integration]
h = 0.01
N = 5
[initial]
x = [1.0, 0.0, 0.0]
)";

}  // namespace

TEST(ScenarioConfig, EveryPresetParses) {
    for (const char* name : {"simulate", "tpbvp", "impulsive", "smooth", "convergence"}) {
        EXPECT_NO_THROW(load_scenario(kPresets / (std::string(name) + ".toml"))) << name;
    }
}

TEST(ScenarioConfig, StateAlternativesAgree) {
    const ScenarioConfig cfg = load_scenario(kPresets / "smooth.toml");
    EXPECT_EQ(cfg.N, 250);
    EXPECT_NEAR(cfg.h.value(), 0.001, 1e-18);
    EXPECT_EQ(cfg.initial.gamma, Vec3(0, kTwoPi, 0));
    EXPECT_TRUE(cfg.initial.Pi.isApprox(cfg.body.inertia() * Vec3(0, 0, kTwoPi), 1e-15));
    EXPECT_TRUE(cfg.W_m.isApprox(cfg.body.inertia_inverse()));
    EXPECT_DOUBLE_EQ(cfg.gravity.mu, kMu);
}

TEST(ScenarioConfig, ErrorsNameTheField) {
    EXPECT_EQ(config_error_field(replaced(kMinimal, "h = 0.01", "h = -0.01")), "integration.h");
    EXPECT_EQ(config_error_field(replaced(kMinimal, "N = 5", "N = -1")), "integration.N");
    EXPECT_EQ(config_error_field(replaced(kMinimal, "N = 5", "N = 5.5")), "integration.N");
    EXPECT_EQ(config_error_field(replaced(kMinimal, "[initial]", "[initial]\nspeed = 3")), "initial.speed");
    EXPECT_EQ(config_error_field(replaced(kMinimal, "x = [1.0, 0.0, 0.0]", "x = [1.0, 0.0]")), "initial.x");
    EXPECT_EQ(config_error_field(replaced(kMinimal, "inertia = [1.0, 2.0, 3.0]", "inertia = [1.0, -2.0, 3.0]")),
              "body.inertia");
    EXPECT_EQ(config_error_field(replaced(kMinimal, "\"simulate\"", "\"orbit\"")), "scenario");
    EXPECT_EQ(config_error_field(std::string(kMinimal) + "[gravity]\nmu = -1.0\n"), "gravity.mu");
    EXPECT_EQ(config_error_field("scenario = \"simulate\"\n[integration\n"), "config");
    EXPECT_EQ(config_error_field(std::string(kMinimal) + "[target]\nr_d = 2.0\n"), "target");
}

TEST(ScenarioConfig, InclinationMustLieStrictlyBetweenZeroAndHalfTurn) {
    const std::string text = preset_text("smooth");
    for (const char* bad : {"0.0", "180.0", "-10.0", "200.0"}) {
        EXPECT_EQ(config_error_field(replaced(text, "inclination_deg = 60.0", std::string("inclination_deg = ") + bad)),
                  "smooth.inclination_deg")
            << bad;
    }
    EXPECT_EQ(config_error_field(replaced(text, "inclination_deg = 60.0", "inclination_deg = 179.0")), "");
}

TEST(ScenarioConfig, InclinationTargetTurnsTheCoastEndpoint) {
    const ScenarioConfig cfg = load_scenario(kPresets / "smooth.toml");
    const SmoothProblem prob = smooth_problem(cfg);
    const Vec3 n0 = cfg.initial.x.cross(cfg.initial.gamma).normalized();
    const Vec3 n1 = prob.desired.x.cross(prob.desired.gamma).normalized();
    EXPECT_NEAR(std::acos(n0.dot(n1)), se3ocp::testing::kPi / 3, 1e-12);
    EXPECT_NEAR(prob.desired.x.norm(), 1.0, 1e-2);
}

TEST(RunScenario, ZeroStepSimulationWritesOneRow) {
    ScenarioConfig cfg = parse_scenario(replaced(kMinimal, "N = 5", "N = 0"));
    const RunOutcome out = run_scenario(cfg);
    const fs::path dir = scratch("n0");
    write_artifacts(cfg, out, dir);
    std::istringstream csv(slurp(dir / "trajectory.csv"));
    std::string line;
    int lines = 0;
    while (std::getline(csv, line)) ++lines;
    EXPECT_EQ(lines, 2);
    EXPECT_TRUE(out.report.converged);
}

TEST(RunScenario, ConstantControlRowsMatchTheOrder) {
    std::string text = replaced(kMinimal, "[initial]", "[control]\nuf = [0.5, 0.0, 0.0]\n[initial]");
    const RunOutcome second = run_scenario(parse_scenario(text));
    ASSERT_EQ(second.row_controls.size(), 6u);
    EXPECT_EQ(second.row_controls.front().uf.x(), 0.5);
    const RunOutcome first = run_scenario(parse_scenario(replaced(text, "N = 5", "N = 5\norder = 1")));
    ASSERT_EQ(first.row_controls.size(), 6u);
    EXPECT_EQ(first.row_controls.front().uf.x(), 0.0);
    EXPECT_EQ(first.row_controls.back().uf.x(), 0.5);
}

TEST(RunScenario, RadiusDoublingTpbvpPreset) {
    const ScenarioConfig cfg = load_scenario(kPresets / "tpbvp.toml");
    const RunOutcome out = run_scenario(cfg);
    ASSERT_TRUE(out.report.converged) << out.report.message;
    ASSERT_TRUE(out.report.violation.has_value());
    EXPECT_LE(*out.report.violation, 1e-10);
    EXPECT_NEAR(out.trajectory.back().x.norm(), 2.0, 1e-10);
}

TEST(RunScenario, ReportQuantitiesSurviveTheCsvRoundTrip) {
    const ScenarioConfig cfg = load_scenario(kPresets / "tpbvp.toml");
    const RunOutcome out = run_scenario(cfg);
    const fs::path dir = scratch("roundtrip");
    write_artifacts(cfg, out, dir);

    std::ifstream csv(dir / "trajectory.csv");
    const Trajectory traj = read_trajectory_csv(csv);
    ASSERT_EQ(traj.size(), out.trajectory.size());
    const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
    EXPECT_EQ(report["schema"], 1);

    auto vec = [&](const char* key) {
        const auto& a = report["details"][key];
        return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
    };
    const Vec3 gammaN = vec("gammaN_plus");
    const Vec3 PiN = vec("PiN_plus");
    const double cost = impulse_cost(cfg.initial, traj.front(), traj.back(), gammaN, PiN);
    EXPECT_NEAR(cost, report["performance_index"].get<double>(), 1e-12);

    RigidBodyState closed = traj.back();
    closed.gamma = gammaN;
    closed.Pi = PiN;
    EXPECT_NEAR(state_violation(closed, *cfg.desired), report["violation"].get<double>(), 1e-12);

    const InvariantDiagnostics d = invariant_diagnostics(cfg.body, cfg.gravity, traj);
    EXPECT_NEAR(d.energy_drift, report["invariants"]["energy_drift"].get<double>(), 1e-12);
    EXPECT_NEAR(d.orthonormality, report["invariants"]["orthonormality"].get<double>(), 1e-12);
    EXPECT_NEAR(d.angular_momentum_drift, report["invariants"]["angular_momentum_drift"].get<double>(), 1e-12);
}

TEST(RunScenario, SmoothControlsRoundTripToThePerformanceIndex) {
    const ScenarioConfig cfg = load_scenario(kPresets / "smooth.toml");
    const RunOutcome out = run_scenario(cfg);
    ASSERT_TRUE(out.report.converged);
    const fs::path dir = scratch("smooth");
    write_artifacts(cfg, out, dir);

    std::istringstream csv(slurp(dir / "trajectory.csv"));
    std::string line;
    std::getline(csv, line);
    std::vector<ControlSample> controls;
    while (std::getline(csv, line)) {
        std::vector<double> c;
        std::istringstream row(line);
        for (std::string cell; std::getline(row, cell, ',');) c.push_back(std::stod(cell));
        ASSERT_EQ(c.size(), 30u);
        controls.push_back({Vec3(c[20], c[21], c[22]), Vec3(c[23], c[24], c[25])});
    }
    controls.erase(controls.begin());
    const double j = control_effort(cfg.h, controls, cfg.W_f, cfg.W_m);
    EXPECT_NEAR(j, *out.report.performance_index, 1e-12 * j);

    const auto log = nlohmann::json::parse(slurp(dir / "iterations.json"));
    EXPECT_EQ(log["records"].size(), out.iterations.rows.size());
    EXPECT_EQ(log["records"].back()["outer_index"].get<int>(), out.report.iterations);
}

TEST(RunScenario, SameSeedGivesByteIdenticalArtifacts) {
    for (const char* name : {"simulate", "smooth"}) {
        const ScenarioConfig cfg = load_scenario(kPresets / (std::string(name) + ".toml"));
        const fs::path a = scratch(std::string(name) + "_a");
        const fs::path b = scratch(std::string(name) + "_b");
        write_artifacts(cfg, run_scenario(cfg), a);
        write_artifacts(cfg, run_scenario(cfg), b);
        for (const char* file : {"trajectory.csv", "report.json", "iterations.json"}) {
            EXPECT_EQ(slurp(a / file), slurp(b / file)) << name << " " << file;
        }
    }
}

TEST(RunScenario, SeedSelectsTheInitialGuess) {
    ScenarioConfig cfg = load_scenario(kPresets / "smooth.toml");
    cfg.shooting.max_outer = 1;
    const RunOutcome a = run_scenario(cfg);
    cfg.seed = 5;
    const RunOutcome b = run_scenario(cfg);
    EXPECT_NE(a.iterations.rows.front()[3], b.iterations.rows.front()[3]);
}

TEST(RunScenario, NonConvergenceIsReportedNotThrown) {
    ScenarioConfig cfg = load_scenario(kPresets / "tpbvp.toml");
    cfg.tpbvp.max_iterations = 1;
    const RunOutcome out = run_scenario(cfg);
    EXPECT_FALSE(out.report.converged);
    EXPECT_EQ(out.report.status, "no_convergence");
}

TEST(Convergence, PresetOrders) {
    const std::vector<ConvergenceTable> tables = run_convergence(load_scenario(kPresets / "convergence.toml"));
    ASSERT_EQ(tables.size(), 2u);
    EXPECT_EQ(tables[0].order, Order::Second);
    EXPECT_NEAR(*tables[0].fitted_order, 2.0, 0.2);
    EXPECT_NEAR(*tables[1].fitted_order, 1.0, 0.2);
}

TEST(Convergence, FreeParticleIsExact) {
    const BodyParams p = BodyParams::point_mass(2.0, Mat3::Identity());
    RigidBodyState s0;
    s0.x = Vec3(1, 2, 3);
    s0.gamma = Vec3(0.4, -0.2, 0.1);
    const std::vector<double> h{0.1, 0.05, 0.025};
    for (Order o : {Order::First, Order::Second}) {
        const ConvergenceTable t = convergence_study(p, GravityParams{0.0}, s0, 1.0, h, o);
        EXPECT_TRUE(t.exact);
        EXPECT_FALSE(t.fitted_order.has_value());
        EXPECT_TRUE(t.reference.x.isApprox(s0.x + s0.gamma / 2.0, 1e-14));
    }
}

TEST(Convergence, RejectsBadStepLists) {
    const BodyParams p = BodyParams::point_mass(1.0, Mat3::Identity());
    RigidBodyState s0;
    s0.x = Vec3(1, 0, 0);
    const std::vector<double> two{0.1, 0.05};
    const std::vector<double> uneven{0.1, 0.05, 0.02};
    const std::vector<double> fractional{0.3, 0.15, 0.075};
    EXPECT_THROW(convergence_study(p, GravityParams{}, s0, 1.0, two, Order::Second), std::invalid_argument);
    EXPECT_THROW(convergence_study(p, GravityParams{}, s0, 1.0, uneven, Order::Second), std::invalid_argument);
    EXPECT_THROW(convergence_study(p, GravityParams{}, s0, 1.0, fractional, Order::Second), std::invalid_argument);
}

TEST(Cli, ExitCodes) {
    const fs::path dir = scratch("exit");
    fs::create_directories(dir);
    EXPECT_EQ(run_cli("simulate --config " + (kPresets / "simulate.toml").string() + " --out " + (dir / "ok").string()), 0);

    std::ofstream(dir / "neg.toml") << replaced(kMinimal, "h = 0.01", "h = -0.01");
    EXPECT_EQ(run_cli("simulate --config " + (dir / "neg.toml").string() + " --out " + (dir / "neg").string()), 1);
    EXPECT_EQ(run_cli("tpbvp --config " + (kPresets / "simulate.toml").string() + " --out " + (dir / "x").string()), 1);
    EXPECT_EQ(run_cli("simulate --config " + (dir / "missing.toml").string()), 1);

    std::ofstream(dir / "short.toml") << replaced(preset_text("smooth"), "max_outer = 40", "max_outer = 1");
    EXPECT_EQ(run_cli("smooth --config " + (dir / "short.toml").string() + " --out " + (dir / "short").string()), 2);
    EXPECT_TRUE(fs::exists(dir / "short" / "report.json"));
}

TEST(Cli, EnvironmentOverridesTheConfiguredDirectory) {
    const fs::path dir = scratch("env");
    const std::string config = (kPresets / "simulate.toml").string();
    const int status = std::system(("SE3OCP_OUT_DIR=" + dir.string() + " " + kCli + " simulate --config " + config +
                                    " > /dev/null 2>&1")
                                       .c_str());
    ASSERT_TRUE(WIFEXITED(status));
    EXPECT_EQ(WEXITSTATUS(status), 0);
    EXPECT_TRUE(fs::exists(dir / "trajectory.csv"));
    EXPECT_TRUE(fs::exists(dir / "report.json"));
    EXPECT_TRUE(fs::exists(dir / "iterations.json"));
}

TEST(Cli, SeedFlagOverridesTheConfig) {
    const fs::path dir = scratch("seed");
    const std::string base = "smooth --config " + (kPresets / "smooth.toml").string();
    ASSERT_EQ(run_cli(base + " --seed 11 --out " + (dir / "a").string()), 0);
    const auto report = nlohmann::json::parse(slurp(dir / "a" / "report.json"));
    EXPECT_EQ(report["seed"].get<std::uint64_t>(), 11u);
}
