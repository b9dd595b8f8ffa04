// Scenario runner: se3ocp <simulate|tpbvp|impulsive|smooth|convergence> --config FILE [--out DIR] [--seed N]

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "se3ocp/errors.hpp"
#include "se3ocp/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNoConvergence = 2;

constexpr const char* kOutDirEnv = "SE3OCP_OUT_DIR";

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Options& o) {
    sub->add_option("--config", o.config, "scenario TOML file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory (overrides " + std::string(kOutDirEnv) + " and the config)");
    sub->add_option("--seed", o.seed, "seed of the initial multiplier guess");
}

// --out, then the environment, then [output].dir.
std::filesystem::path output_dir(const Options& o, const se3ocp::ScenarioConfig& cfg) {
    if (!o.out.empty()) return o.out;
    if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
    return cfg.output.dir;
}

void print_number(const char* label, const std::optional<double>& v) {
    std::cout << "  " << label << ": " << (v ? se3ocp::format_double(*v) : std::string("n/a")) << '\n';
}

int run(const std::string& command, const Options& o) {
    using namespace se3ocp;
    ScenarioConfig cfg = load_scenario(o.config);
    if (o.seed) cfg.seed = *o.seed;
    const std::filesystem::path dir = output_dir(o, cfg);

    if (command == "convergence") {
        const std::vector<ConvergenceTable> tables = run_convergence(cfg);
        std::filesystem::create_directories(dir);
        std::ofstream(dir / "convergence.json", std::ios::binary) << convergence_json(tables);
        for (const ConvergenceTable& t : tables) {
            std::cout << "order " << static_cast<int>(t.order) << " integrator\n";
            std::cout << "  h                       steps   error\n";
            for (const ConvergenceRow& r : t.rows) {
                std::printf("  %-23.17g %-7d %.6e\n", r.h, r.steps, r.error);
            }
            if (t.exact) {
                std::cout << "  fitted order: exact (errors at round-off level)\n";
            } else {
                std::printf("  fitted order: %.4f\n", *t.fitted_order);
            }
        }
        return kExitOk;
    }

    const ScenarioKind expected = command == "simulate"  ? ScenarioKind::Simulate
                                  : command == "tpbvp"   ? ScenarioKind::Tpbvp
                                  : command == "smooth"  ? ScenarioKind::Smooth
                                                         : ScenarioKind::ImpulsiveRelaxed;
    if (cfg.kind != expected) {
        throw ConfigError("scenario", std::string("the ") + command + " command needs scenario = \"" +
                                          to_string(expected) + "\"");
    }
    const RunOutcome out = run_scenario(cfg);
    write_artifacts(cfg, out, dir);

    const RunReport& r = out.report;
    std::cout << r.scenario << ": " << r.status << '\n';
    print_number("performance index", r.performance_index);
    print_number("violation", r.violation);
    std::cout << "  iterations: " << r.iterations << '\n';
    std::cout << "  orthonormality: " << format_double(r.invariants.orthonormality) << '\n';
    std::cout << "  wall time [s]: " << r.wall_time << '\n';
    if (!r.message.empty()) std::cout << "  " << r.message << '\n';
    std::cout << "  output: " << dir.string() << '\n';
    return r.converged ? kExitOk : kExitNoConvergence;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rigid-body simulation and optimal control on SE(3)"};
    app.require_subcommand(1);
    Options opts;
    for (const char* name : {"simulate", "tpbvp", "impulsive", "smooth", "convergence"}) {
        add_common(app.add_subcommand(name), opts);
    }
    app.get_subcommand("simulate")->description("uncontrolled or constant-control simulation");
    app.get_subcommand("tpbvp")->description("two-impulse transfer to a fixed terminal state");
    app.get_subcommand("impulsive")->description("two-impulse transfer into a relaxed terminal orbit");
    app.get_subcommand("smooth")->description("minimum-effort smooth control by shooting");
    app.get_subcommand("convergence")->description("integrator self-convergence study");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        return run(command, opts);
    } catch (const se3ocp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const se3ocp::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNoConvergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
}
