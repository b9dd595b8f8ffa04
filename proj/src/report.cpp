#include "se3ocp/report.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "se3ocp/linearize.hpp"

namespace se3ocp {

namespace {

using Json = nlohmann::ordered_json;

constexpr int kColumns = 30;

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json optional_number(const std::optional<double>& v) { return v ? number(*v) : Json(nullptr); }

void put(std::ostream& os, double v) { os << ',' << format_double(v); }

void put(std::ostream& os, const Vec3& v) {
    for (int i = 0; i < 3; ++i) put(os, v(i));
}

Vec3 take3(const std::array<double, kColumns>& c, int at) { return Vec3(c[at], c[at + 1], c[at + 2]); }

}  // namespace

InvariantDiagnostics invariant_diagnostics(const BodyParams& p, const GravityParams& g, const Trajectory& traj) {
    InvariantDiagnostics d;
    if (traj.empty()) return d;
    const ConservedQuantities c0 = conserved_quantities(p, g, traj.front());
    for (const RigidBodyState& s : traj) {
        const ConservedQuantities c = conserved_quantities(p, g, s);
        d.energy_drift = std::max(d.energy_drift, std::abs(c.energy - c0.energy));
        d.angular_momentum_drift =
            std::max(d.angular_momentum_drift, (c.angular_momentum - c0.angular_momentum).norm());
        d.orthonormality = std::max(d.orthonormality, orthonormality_error(s.R.matrix()));
    }
    return d;
}

double impulse_cost(const RigidBodyState& before, const RigidBodyState& first, const RigidBodyState& last,
                    const Vec3& gammaN_plus, const Vec3& PiN_plus) {
    return (first.gamma - before.gamma).norm() + (first.Pi - before.Pi).norm() + (gammaN_plus - last.gamma).norm() +
           (PiN_plus - last.Pi).norm();
}

double state_violation(const RigidBodyState& last, const RigidBodyState& desired) {
    return boundary_error(last, desired).lpNorm<Eigen::Infinity>();
}

double relaxed_violation(const RigidBodyState& last, const RelaxedOrbit& orbit) {
    const Vec3 n = orbit.e_n.normalized();
    const double radius = std::abs(last.x.norm() - orbit.r_d);
    const double plane = std::abs(n.dot(last.x));
    const double align = std::abs(1.0 - (last.R * orbit.body_axis.normalized()).dot(n));
    return std::max({radius, plane, align});
}

double control_effort(StepSize h, std::span<const ControlSample> controls, const Mat3& W_f, const Mat3& W_m) {
    double j = 0.0;
    for (const ControlSample& u : controls) j += 0.5 * h.value() * (u.uf.dot(W_f * u.uf) + u.um.dot(W_m * u.um));
    return j;
}

std::string format_double(double v) {
    std::array<char, 40> buf{};
    const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
    return std::string(buf.data(), r.ptr);
}

void write_trajectory_csv(std::ostream& os, const BodyParams& p, const GravityParams& g, StepSize h,
                          const Trajectory& traj, std::span<const ControlSample> row_controls) {
    if (row_controls.size() != traj.size()) throw std::invalid_argument("one control per trajectory row required");
    os << "k,t,x1,x2,x3,gamma1,gamma2,gamma3";
    for (int i = 1; i <= 3; ++i)
        for (int j = 1; j <= 3; ++j) os << ",R" << i << j;
    os << ",Pi1,Pi2,Pi3,uf1,uf2,uf3,um1,um2,um3,energy,angmom1,angmom2,angmom3\n";
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const RigidBodyState& s = traj[k];
        const ConservedQuantities c = conserved_quantities(p, g, s);
        os << k;
        put(os, static_cast<double>(k) * h.value());
        put(os, s.x);
        put(os, s.gamma);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) put(os, s.R(i, j));
        put(os, s.Pi);
        put(os, row_controls[k].uf);
        put(os, row_controls[k].um);
        put(os, c.energy);
        put(os, c.angular_momentum);
        os << '\n';
    }
}

Trajectory read_trajectory_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("trajectory CSV is empty");
    Trajectory out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::array<double, kColumns> c{};
        std::size_t pos = 0;
        for (int i = 0; i < kColumns; ++i) {
            const std::size_t end = std::min(line.find(',', pos), line.size());
            const auto r = std::from_chars(line.data() + pos, line.data() + end, c[i]);
            if (r.ec != std::errc()) throw std::runtime_error("malformed trajectory CSV row: " + line);
            pos = end + 1;
        }
        RigidBodyState s;
        s.x = take3(c, 2);
        s.gamma = take3(c, 5);
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = c[8 + 3 * i + j];
        s.R = Rotation(r);
        s.Pi = take3(c, 17);
        out.push_back(s);
    }
    return out;
}

std::string report_json(const RunReport& r) {
    Json j;
    j["schema"] = kReportSchema;
    j["scenario"] = r.scenario;
    j["status"] = r.status;
    j["converged"] = r.converged;
    j["seed"] = r.seed;
    j["N"] = r.N;
    j["h"] = number(r.h);
    j["performance_index"] = optional_number(r.performance_index);
    j["violation"] = optional_number(r.violation);
    j["iterations"] = r.iterations;
    j["evaluations"] = r.evaluations;
    j["invariants"] = {{"energy_drift", number(r.invariants.energy_drift)},
                       {"orthonormality", number(r.invariants.orthonormality)},
                       {"angular_momentum_drift", number(r.invariants.angular_momentum_drift)}};
    Json details = Json::object();
    for (const auto& [name, values] : r.details) {
        Json arr = Json::array();
        for (double v : values) arr.push_back(number(v));
        details[name] = values.size() == 1 ? arr[0] : arr;
    }
    j["details"] = details;
    if (!r.message.empty()) j["message"] = r.message;
    return j.dump(2) + "\n";
}

std::string iterations_json(const std::string& scenario, const IterationTable& t) {
    Json records = Json::array();
    for (const std::vector<double>& row : t.rows) {
        Json rec = Json::object();
        for (std::size_t i = 0; i < t.columns.size() && i < row.size(); ++i) {
            const IterationColumn& col = t.columns[i];
            switch (col.type) {
                case ColumnType::Real:
                    rec[col.name] = number(row[i]);
                    break;
                case ColumnType::Integer:
                    rec[col.name] = static_cast<long long>(row[i]);
                    break;
                case ColumnType::Boolean:
                    rec[col.name] = row[i] != 0.0;
                    break;
            }
        }
        records.push_back(rec);
    }
    Json j;
    j["schema"] = kReportSchema;
    j["scenario"] = scenario;
    j["records"] = records;
    return j.dump(2) + "\n";
}

}  // namespace se3ocp
