#include "se3ocp/scenario.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>
#include <toml.hpp>

#include "se3ocp/errors.hpp"

namespace se3ocp {

namespace {

// A TOML table being consumed; every key must be read before finish().
class Section {
public:
    Section(const toml::table* t, std::string path) : t_(t), path_(std::move(path)) {}

    bool present() const { return t_ != nullptr; }
    bool has(std::string_view key) const { return t_ && t_->contains(key); }

    std::string field(std::string_view key) const {
        if (key.empty()) return path_;
        return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
    }

    const toml::node* node(std::string_view key) {
        if (!t_) return nullptr;
        const toml::node* n = t_->get(key);
        if (n) used_.insert(std::string(key));
        return n;
    }

    std::optional<double> maybe_number(std::string_view key) {
        const toml::node* n = node(key);
        if (!n) return std::nullopt;
        const auto v = n->value<double>();
        if (!v || n->is_boolean()) throw ConfigError(field(key), "expected a number");
        if (!std::isfinite(*v)) throw ConfigError(field(key), "must be finite");
        return v;
    }

    double number(std::string_view key, double fallback) { return maybe_number(key).value_or(fallback); }

    double required_number(std::string_view key) {
        const auto v = maybe_number(key);
        if (!v) throw ConfigError(field(key), "missing");
        return *v;
    }

    std::optional<std::int64_t> maybe_integer(std::string_view key) {
        const toml::node* n = node(key);
        if (!n) return std::nullopt;
        if (!n->is_integer()) throw ConfigError(field(key), "expected an integer");
        return n->value<std::int64_t>();
    }

    int integer(std::string_view key, int fallback, int lo, int hi) {
        const auto v = maybe_integer(key);
        if (!v) return fallback;
        if (*v < lo || *v > hi) {
            throw ConfigError(field(key), "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        }
        return static_cast<int>(*v);
    }

    std::optional<std::string> maybe_string(std::string_view key) {
        const toml::node* n = node(key);
        if (!n) return std::nullopt;
        if (!n->is_string()) throw ConfigError(field(key), "expected a string");
        return n->value<std::string>();
    }

    std::vector<double> numbers(std::string_view key, const toml::array& arr) {
        std::vector<double> out;
        for (const toml::node& e : arr) {
            const auto v = e.value<double>();
            if (!v || e.is_boolean() || !std::isfinite(*v)) throw ConfigError(field(key), "expected finite numbers");
            out.push_back(*v);
        }
        return out;
    }

    std::optional<std::vector<double>> maybe_array(std::string_view key) {
        const toml::node* n = node(key);
        if (!n) return std::nullopt;
        if (!n->is_array()) throw ConfigError(field(key), "expected an array");
        return numbers(key, *n->as_array());
    }

    std::optional<Vec3> maybe_vec3(std::string_view key) {
        const auto v = maybe_array(key);
        if (!v) return std::nullopt;
        if (v->size() != 3) throw ConfigError(field(key), "expected 3 numbers");
        return Vec3((*v)[0], (*v)[1], (*v)[2]);
    }

    Vec3 vec3(std::string_view key, const Vec3& fallback) { return maybe_vec3(key).value_or(fallback); }

    Vec3 unit(std::string_view key, const Vec3& fallback) {
        const Vec3 v = vec3(key, fallback);
        if (!(v.norm() > 0.0)) throw ConfigError(field(key), "must be nonzero");
        return v.normalized();
    }

    Section sub(std::string_view key) {
        const toml::node* n = node(key);
        if (!n) return Section(nullptr, field(key));
        if (!n->is_table()) throw ConfigError(field(key), "expected a table");
        return Section(n->as_table(), field(key));
    }

    void finish() const {
        if (!t_) return;
        for (auto&& [k, v] : *t_) {
            if (!used_.count(std::string(k.str()))) throw ConfigError(field(k.str()), "unknown key");
        }
    }

private:
    const toml::table* t_;
    std::string path_;
    std::set<std::string> used_;
};

ScenarioKind parse_kind(Section& top) {
    const auto s = top.maybe_string("scenario");
    if (!s) throw ConfigError("scenario", "missing");
    if (*s == "simulate") return ScenarioKind::Simulate;
    if (*s == "tpbvp") return ScenarioKind::Tpbvp;
    if (*s == "impulsive_relaxed") return ScenarioKind::ImpulsiveRelaxed;
    if (*s == "smooth") return ScenarioKind::Smooth;
    throw ConfigError("scenario", "expected simulate, tpbvp, impulsive_relaxed or smooth");
}

BodyParams parse_body(Section s) {
    const std::string kind = s.maybe_string("kind").value_or("dumbbell");
    BodyParams out = BodyParams::dumbbell();
    try {
        if (kind == "dumbbell") {
            const double mass = s.number("mass", 1.0);
            const double length = s.number("length", 0.02);
            const double radius = s.number("sphere_radius", 0.005);
            if (!(mass > 0.0)) throw ConfigError(s.field("mass"), "must be positive");
            if (!(length > 0.0)) throw ConfigError(s.field("length"), "must be positive");
            if (!(radius > 0.0)) throw ConfigError(s.field("sphere_radius"), "must be positive");
            out = BodyParams::dumbbell(mass, length, radius);
        } else if (kind == "point_mass") {
            const double mass = s.number("mass", 1.0);
            if (!(mass > 0.0)) throw ConfigError(s.field("mass"), "must be positive");
            const Vec3 j = s.vec3("inertia", Vec3(1.0, 1.0, 1.0));
            if (!(j.minCoeff() > 0.0)) throw ConfigError(s.field("inertia"), "principal moments must be positive");
            out = BodyParams::point_mass(mass, j.asDiagonal());
        } else {
            throw ConfigError(s.field("kind"), "expected dumbbell or point_mass");
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(s.field(""), e.what());
    }
    s.finish();
    return out;
}

// Velocity and body angular velocity are accepted as alternatives to the momenta.
RigidBodyState parse_state(Section s, const BodyParams& body) {
    if (!s.present()) throw ConfigError(s.field(""), "missing");
    RigidBodyState out;
    out.x = s.vec3("x", Vec3::Zero());
    out.R = exp_so3(s.vec3("attitude", Vec3::Zero()));
    const auto gamma = s.maybe_vec3("gamma");
    const auto velocity = s.maybe_vec3("velocity");
    if (gamma && velocity) throw ConfigError(s.field("velocity"), "give either gamma or velocity");
    out.gamma = gamma ? *gamma : velocity ? Vec3(body.mass() * *velocity) : Vec3::Zero();
    const auto pi = s.maybe_vec3("Pi");
    const auto omega = s.maybe_vec3("omega");
    if (pi && omega) throw ConfigError(s.field("omega"), "give either Pi or omega");
    out.Pi = pi ? *pi : omega ? Vec3(body.inertia() * *omega) : Vec3::Zero();
    s.finish();
    return out;
}

Mat3 parse_weight(Section& s, std::string_view key, const BodyParams& body) {
    const toml::node* n = s.node(key);
    if (!n) return Mat3::Identity();
    if (n->is_string()) {
        const std::string v = *n->value<std::string>();
        if (v == "identity") return Mat3::Identity();
        if (v == "inverse_mass") return Mat3::Identity() / body.mass();
        if (v == "inverse_inertia") return body.inertia_inverse();
        throw ConfigError(s.field(key), "expected identity, inverse_mass, inverse_inertia or 3 diagonal entries");
    }
    const auto d = s.maybe_vec3(key);
    if (!(d->minCoeff() > 0.0)) throw ConfigError(s.field(key), "diagonal entries must be positive");
    return d->asDiagonal();
}

void parse_integration(Section s, ScenarioConfig& cfg) {
    const auto h = s.maybe_number("h");
    const auto horizon = s.maybe_number("horizon");
    const int min_n = cfg.kind == ScenarioKind::Simulate ? 0 : cfg.kind == ScenarioKind::Smooth ? 2 : 1;
    const auto n = s.maybe_integer("N");
    if (!n) throw ConfigError(s.field("N"), "missing");
    if (*n < min_n || *n > 100000000) throw ConfigError(s.field("N"), "must be at least " + std::to_string(min_n));
    cfg.N = static_cast<int>(*n);
    if (h && horizon) throw ConfigError(s.field("horizon"), "give either h or horizon");
    if (!h && !horizon) throw ConfigError(s.field("h"), "missing");
    if (h && !(*h > 0.0)) throw ConfigError(s.field("h"), "must be positive");
    if (horizon && !(*horizon > 0.0)) throw ConfigError(s.field("horizon"), "must be positive");
    if (horizon && cfg.N == 0) throw ConfigError(s.field("horizon"), "needs N >= 1; give h instead");
    cfg.h = StepSize(h ? *h : *horizon / cfg.N);
    if (cfg.kind == ScenarioKind::Simulate) {
        const int order = s.integer("order", 2, 1, 2);
        cfg.order = order == 1 ? Order::First : Order::Second;
    }
    s.finish();
}

void parse_solver(Section s, ScenarioConfig& cfg) {
    switch (cfg.kind) {
        case ScenarioKind::Simulate:
            break;
        case ScenarioKind::Tpbvp:
            cfg.tpbvp.tolerance = s.number("tolerance", cfg.tpbvp.tolerance);
            cfg.tpbvp.max_iterations = s.integer("max_iterations", cfg.tpbvp.max_iterations, 1, 100000);
            if (!(cfg.tpbvp.tolerance > 0.0)) throw ConfigError(s.field("tolerance"), "must be positive");
            break;
        case ScenarioKind::ImpulsiveRelaxed: {
            SqpOptions& o = cfg.sqp;
            o.violation_tolerance = s.number("violation_tolerance", o.violation_tolerance);
            o.stationarity_tolerance = s.number("stationarity_tolerance", o.stationarity_tolerance);
            o.smoothing = s.number("smoothing", o.smoothing);
            o.max_iterations = s.integer("max_iterations", o.max_iterations, 1, 100000);
            if (!(o.violation_tolerance > 0.0)) throw ConfigError(s.field("violation_tolerance"), "must be positive");
            if (!(o.stationarity_tolerance > 0.0)) {
                throw ConfigError(s.field("stationarity_tolerance"), "must be positive");
            }
            if (!(o.smoothing > 0.0)) throw ConfigError(s.field("smoothing"), "must be positive");
            break;
        }
        case ScenarioKind::Smooth: {
            SolverConfig& o = cfg.shooting;
            o.eps_stop = s.number("eps_stop", o.eps_stop);
            o.alpha = s.number("alpha", o.alpha);
            o.backtrack = s.number("backtrack", o.backtrack);
            o.max_outer = s.integer("max_outer", o.max_outer, 1, 100000);
            o.max_inner = s.integer("max_inner", o.max_inner, 1, 1000);
            o.max_condition = s.number("max_condition", o.max_condition);
            if (!(o.eps_stop > 0.0)) throw ConfigError(s.field("eps_stop"), "must be positive");
            if (!(o.alpha > 0.0 && o.alpha < 0.5)) throw ConfigError(s.field("alpha"), "must lie in (0, 0.5)");
            if (!(o.backtrack > 1.0)) throw ConfigError(s.field("backtrack"), "must exceed 1");
            if (!(o.max_condition >= 1.0)) throw ConfigError(s.field("max_condition"), "must be at least 1");
            break;
        }
    }
    s.finish();
}

void parse_smooth(Section s, ScenarioConfig& cfg) {
    cfg.inclination_deg = s.maybe_number("inclination_deg");
    if (cfg.inclination_deg && !(*cfg.inclination_deg > 0.0 && *cfg.inclination_deg < 180.0)) {
        throw ConfigError(s.field("inclination_deg"), "must lie in (0, 180)");
    }
    cfg.node_axis = s.unit("node_axis", Vec3::UnitX());
    cfg.W_f = parse_weight(s, "W_f", cfg.body);
    cfg.W_m = parse_weight(s, "W_m", cfg.body);
    cfg.guess_amplitude = s.number("guess_amplitude", cfg.guess_amplitude);
    if (!(cfg.guess_amplitude >= 0.0)) throw ConfigError(s.field("guess_amplitude"), "must be non-negative");
    s.finish();
}

void parse_target(Section s, ScenarioConfig& cfg) {
    if (!s.present()) throw ConfigError(s.field(""), "missing");
    RelaxedOrbit& o = cfg.relaxed;
    o.r_d = s.required_number("r_d");
    if (!(o.r_d > 0.0)) throw ConfigError(s.field("r_d"), "must be positive");
    o.e_n = s.unit("e_n", Vec3::UnitZ());
    o.body_axis = s.unit("body_axis", Vec3::UnitZ());
    o.spin_rate = s.number("spin_rate", 0.0);
    s.finish();
}

void parse_convergence(Section s, ScenarioConfig& cfg) {
    ConvergenceSpec c;
    c.horizon = s.required_number("horizon");
    if (!(c.horizon > 0.0)) throw ConfigError(s.field("horizon"), "must be positive");
    const auto h = s.maybe_array("h");
    const auto steps = s.maybe_array("steps");
    if (h && steps) throw ConfigError(s.field("steps"), "give either h or steps");
    if (!h && !steps) throw ConfigError(s.field("steps"), "missing");
    if (h) c.step_sizes = *h;
    if (steps) {
        for (double n : *steps) {
            if (!(n >= 1.0) || n != std::floor(n)) throw ConfigError(s.field("steps"), "expected positive integers");
            c.step_sizes.push_back(c.horizon / n);
        }
    }
    if (c.step_sizes.size() < 3) throw ConfigError(s.field(h ? "h" : "steps"), "needs at least three entries");
    if (const auto orders = s.maybe_array("orders")) {
        c.orders.clear();
        for (double o : *orders) {
            if (o != 1.0 && o != 2.0) throw ConfigError(s.field("orders"), "entries must be 1 or 2");
            c.orders.push_back(o == 1.0 ? Order::First : Order::Second);
        }
    }
    cfg.convergence = c;
    s.finish();
}

void parse_output(Section s, OutputPaths& out) {
    out.dir = s.maybe_string("dir").value_or(out.dir);
    out.trajectory = s.maybe_string("trajectory").value_or(out.trajectory);
    out.report = s.maybe_string("report").value_or(out.report);
    out.iterations = s.maybe_string("iterations").value_or(out.iterations);
    s.finish();
}

std::vector<double> flat(const Vec3& v) { return {v(0), v(1), v(2)}; }

std::vector<ControlSample> shifted_controls(const std::vector<ControlSample>& controls) {
    std::vector<ControlSample> rows{ControlSample{}};
    rows.insert(rows.end(), controls.begin(), controls.end());
    return rows;
}

IterationTable impulsive_table(const std::vector<ImpulsiveIteration>& log) {
    IterationTable t;
    t.columns = {{"iteration", ColumnType::Integer}, {"cost"}, {"violation"}, {"stationarity"}, {"step_length"}};
    for (const ImpulsiveIteration& it : log) {
        t.rows.push_back({static_cast<double>(it.iteration), it.cost, it.violation, it.stationarity, it.step_length});
    }
    return t;
}

RunReport base_report(const ScenarioConfig& cfg) {
    RunReport r;
    r.scenario = to_string(cfg.kind);
    r.seed = cfg.seed;
    r.N = cfg.N;
    r.h = cfg.h.value();
    return r;
}

void fill_impulsive(const ScenarioConfig& cfg, const ImpulsiveProblem& prob, const ImpulsiveSolution& sol,
                    RunOutcome& out) {
    RunReport& r = out.report;
    out.trajectory = sol.trajectory;
    out.row_controls.assign(sol.trajectory.size(), ControlSample{});
    const RigidBodyState& first = sol.trajectory.front();
    const RigidBodyState& last = sol.trajectory.back();
    r.performance_index = impulse_cost(prob.initial, first, last, sol.gammaN_plus, sol.PiN_plus);
    if (cfg.kind == ScenarioKind::Tpbvp) {
        RigidBodyState closed = last;
        closed.gamma = sol.gammaN_plus;
        closed.Pi = sol.PiN_plus;
        r.violation = state_violation(closed, std::get<FullState>(prob.terminal).desired);
    } else {
        r.violation = relaxed_violation(last, cfg.relaxed);
    }
    r.iterations = sol.iterations;
    r.invariants = invariant_diagnostics(prob.body, prob.gravity, sol.trajectory);
    r.details = {{"gamma0_plus", flat(first.gamma)},
                 {"Pi0_plus", flat(first.Pi)},
                 {"gammaN_plus", flat(sol.gammaN_plus)},
                 {"PiN_plus", flat(sol.PiN_plus)},
                 {"solver_cost", {sol.cost}},
                 {"solver_violation", {sol.violation}},
                 {"stationarity", {sol.stationarity}}};
    out.iterations = impulsive_table(sol.log);
}

void run_simulate(const ScenarioConfig& cfg, RunOutcome& out) {
    const std::size_t n = static_cast<std::size_t>(cfg.N);
    const std::vector<ControlSample> controls(cfg.order == Order::Second ? n + 1 : n, cfg.control);
    out.trajectory = simulate(cfg.body, cfg.gravity, cfg.h, cfg.initial, controls, cfg.order);
    out.row_controls = cfg.order == Order::Second ? controls : shifted_controls(controls);
    out.report.status = "completed";
    out.report.converged = true;
    out.report.invariants = invariant_diagnostics(cfg.body, cfg.gravity, out.trajectory);
    out.iterations.columns = {{"iteration", ColumnType::Integer}};
}

void run_tpbvp(const ScenarioConfig& cfg, RunOutcome& out) {
    const ImpulsiveProblem prob = impulsive_problem(cfg);
    const ImpulsiveSolution sol = solve_tpbvp(prob, cfg.tpbvp);
    fill_impulsive(cfg, prob, sol, out);
    out.report.status = "converged";
    out.report.converged = true;
}

void run_impulsive(const ScenarioConfig& cfg, RunOutcome& out) {
    const ImpulsiveProblem prob = impulsive_problem(cfg);
    const ImpulsiveSolution sol = solve_impulsive(prob, cfg.sqp);
    fill_impulsive(cfg, prob, sol, out);
    out.report.status = "converged";
    out.report.converged = true;
}

void run_smooth(const ScenarioConfig& cfg, RunOutcome& out) {
    const SmoothProblem prob = smooth_problem(cfg);
    const MultiplierVector guess = default_multiplier_guess(cfg.seed, cfg.guess_amplitude);
    const ShootingResult res = solve_shooting(prob, guess, cfg.shooting);
    RunReport& r = out.report;
    r.status = to_string(res.status);
    r.converged = res.status == ShootingStatus::Converged;
    out.trajectory = res.extremal.states;
    out.row_controls = shifted_controls(res.extremal.controls);
    r.performance_index = control_effort(prob.h, res.extremal.controls, prob.W_f, prob.W_m);
    r.violation = state_violation(out.trajectory.back(), prob.desired);
    r.iterations = res.outer_iterations;
    r.evaluations = static_cast<int>(res.log.size()) - 1;
    r.invariants = invariant_diagnostics(prob.body, prob.gravity, out.trajectory);
    r.details = {{"lambda0", std::vector<double>(res.lambda0.data(), res.lambda0.data() + 12)},
                 {"terminal_error", {res.error}},
                 {"extremal_residual", {extremal_residuals(prob, res.extremal).max()}}};

    IterationTable& t = out.iterations;
    t.columns = {{"outer_index", ColumnType::Integer},
                 {"inner_index", ColumnType::Integer},
                 {"c"},
                 {"error"},
                 {"accepted", ColumnType::Boolean}};
    for (const IterationRecord& rec : res.log) {
        t.rows.push_back({static_cast<double>(rec.outer_index), static_cast<double>(rec.inner_index), rec.c,
                          rec.error, rec.accepted ? 1.0 : 0.0});
    }
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << text;
    if (!os) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

const char* to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::Simulate:
            return "simulate";
        case ScenarioKind::Tpbvp:
            return "tpbvp";
        case ScenarioKind::ImpulsiveRelaxed:
            return "impulsive_relaxed";
        case ScenarioKind::Smooth:
            return "smooth";
    }
    return "unknown";
}

ScenarioConfig parse_scenario(std::string_view text, std::string_view source) {
    toml::table root;
    try {
        root = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << "line " << e.source().begin.line << ": " << e.description();
        throw ConfigError(std::string(source), os.str());
    }
    Section top(&root, "");
    ScenarioConfig cfg;
    cfg.kind = parse_kind(top);
    if (const auto seed = top.maybe_integer("seed")) {
        if (*seed < 0) throw ConfigError("seed", "must be non-negative");
        cfg.seed = static_cast<std::uint64_t>(*seed);
    }
    cfg.body = parse_body(top.sub("body"));
    {
        Section g = top.sub("gravity");
        cfg.gravity.mu = g.number("mu", cfg.gravity.mu);
        if (!(cfg.gravity.mu >= 0.0)) throw ConfigError("gravity.mu", "must be non-negative");
        g.finish();
    }
    if (top.has("convergence")) {
        if (cfg.kind != ScenarioKind::Simulate) throw ConfigError("convergence", "only valid with scenario = simulate");
        parse_convergence(top.sub("convergence"), cfg);
    }
    if (top.has("integration") || !cfg.convergence) {
        parse_integration(top.sub("integration"), cfg);
    } else {
        cfg.N = -1;
    }
    cfg.initial = parse_state(top.sub("initial"), cfg.body);

    if (cfg.kind == ScenarioKind::Simulate) {
        Section c = top.sub("control");
        cfg.control.uf = c.vec3("uf", Vec3::Zero());
        cfg.control.um = c.vec3("um", Vec3::Zero());
        c.finish();
    }
    if (cfg.kind == ScenarioKind::Tpbvp) cfg.desired = parse_state(top.sub("desired"), cfg.body);
    if (cfg.kind == ScenarioKind::Smooth) {
        parse_smooth(top.sub("smooth"), cfg);
        if (top.has("desired")) {
            if (cfg.inclination_deg) throw ConfigError("desired", "give either desired or smooth.inclination_deg");
            cfg.desired = parse_state(top.sub("desired"), cfg.body);
        } else if (!cfg.inclination_deg) {
            throw ConfigError("desired", "missing (or give smooth.inclination_deg)");
        }
    }
    if (cfg.kind == ScenarioKind::ImpulsiveRelaxed) parse_target(top.sub("target"), cfg);
    parse_solver(top.sub("solver"), cfg);
    parse_output(top.sub("output"), cfg.output);
    top.finish();
    return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("config", "cannot open " + path.string());
    std::ostringstream text;
    text << is.rdbuf();
    return parse_scenario(text.str(), path.string());
}

ImpulsiveProblem impulsive_problem(const ScenarioConfig& cfg) {
    TerminalSpec terminal = cfg.relaxed;
    if (cfg.kind == ScenarioKind::Tpbvp) {
        if (!cfg.desired) throw ConfigError("desired", "missing");
        terminal = FullState{*cfg.desired};
    } else if (cfg.kind != ScenarioKind::ImpulsiveRelaxed) {
        throw ConfigError("scenario", "expected tpbvp or impulsive_relaxed");
    }
    if (cfg.N < 1) throw ConfigError("integration.N", "must be at least 1");
    ImpulsiveProblem prob{cfg.body, cfg.gravity, cfg.h, cfg.N, cfg.initial, terminal};
    try {
        prob.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("target", e.what());
    }
    return prob;
}

SmoothProblem smooth_problem(const ScenarioConfig& cfg) {
    if (cfg.kind != ScenarioKind::Smooth) throw ConfigError("scenario", "expected smooth");
    if (cfg.N < 2) throw ConfigError("integration.N", "must be at least 2");
    RigidBodyState desired;
    if (cfg.desired) {
        desired = *cfg.desired;
    } else {
        const std::vector<ControlSample> none(static_cast<std::size_t>(cfg.N));
        const RigidBodyState end = simulate(cfg.body, cfg.gravity, cfg.h, cfg.initial, none, Order::First).back();
        const Rotation q = exp_so3(*cfg.inclination_deg * std::numbers::pi / 180.0 * cfg.node_axis);
        desired = end;
        desired.x = q * end.x;
        desired.gamma = q * end.gamma;
        desired.R = q * end.R;
    }
    SmoothProblem prob{cfg.body, cfg.gravity, cfg.h, cfg.N, cfg.initial, desired, cfg.W_f, cfg.W_m};
    try {
        prob.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("integration", e.what());
    } catch (const SingularWeight& e) {
        throw ConfigError("smooth", e.what());
    }
    return prob;
}

RunOutcome run_scenario(const ScenarioConfig& cfg) {
    if (cfg.N < 0) throw ConfigError("integration", "missing");
    RunOutcome out;
    out.report = base_report(cfg);
    const auto start = std::chrono::steady_clock::now();
    try {
        switch (cfg.kind) {
            case ScenarioKind::Simulate:
                run_simulate(cfg, out);
                break;
            case ScenarioKind::Tpbvp:
                run_tpbvp(cfg, out);
                break;
            case ScenarioKind::ImpulsiveRelaxed:
                run_impulsive(cfg, out);
                break;
            case ScenarioKind::Smooth:
                run_smooth(cfg, out);
                break;
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const NoConvergence& e) {
        out.report.status = "no_convergence";
        out.report.converged = false;
        out.report.iterations = e.iterations();
        out.report.details = {{"solver_residual", {e.residual()}}};
        out.report.message = e.what();
    } catch (const Error& e) {
        out.report.status = "failed";
        out.report.converged = false;
        out.report.message = e.what();
    }
    out.report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

void write_artifacts(const ScenarioConfig& cfg, const RunOutcome& out, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    if (!out.trajectory.empty()) {
        std::ostringstream csv;
        write_trajectory_csv(csv, cfg.body, cfg.gravity, cfg.h, out.trajectory, out.row_controls);
        write_file(dir / cfg.output.trajectory, csv.str());
    }
    write_file(dir / cfg.output.report, report_json(out.report));
    write_file(dir / cfg.output.iterations, iterations_json(out.report.scenario, out.iterations));
}

std::vector<ConvergenceTable> run_convergence(const ScenarioConfig& cfg) {
    if (!cfg.convergence) throw ConfigError("convergence", "missing");
    std::vector<ConvergenceTable> out;
    for (Order order : cfg.convergence->orders) {
        try {
            out.push_back(convergence_study(cfg.body, cfg.gravity, cfg.initial, cfg.convergence->horizon,
                                            cfg.convergence->step_sizes, order));
        } catch (const std::invalid_argument& e) {
            throw ConfigError("convergence", e.what());
        }
    }
    return out;
}

std::string convergence_json(const std::vector<ConvergenceTable>& tables) {
    using Json = nlohmann::ordered_json;
    Json arr = Json::array();
    for (const ConvergenceTable& t : tables) {
        Json rows = Json::array();
        for (const ConvergenceRow& r : t.rows) rows.push_back({{"h", r.h}, {"steps", r.steps}, {"error", r.error}});
        Json jt;
        jt["order"] = static_cast<int>(t.order);
        jt["rows"] = rows;
        jt["fitted_order"] = t.fitted_order ? Json(*t.fitted_order) : Json(nullptr);
        jt["exact"] = t.exact;
        arr.push_back(jt);
    }
    Json j;
    j["schema"] = kReportSchema;
    j["scenario"] = "convergence";
    j["tables"] = arr;
    return j.dump(2) + "\n";
}

}  // namespace se3ocp
