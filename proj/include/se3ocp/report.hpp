#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "se3ocp/dynamics.hpp"
#include "se3ocp/impulsive.hpp"

namespace se3ocp {

/// Largest deviation from the initial sample along a trajectory.
struct InvariantDiagnostics {
    double energy_drift = 0.0;
    /// max_k ||R_k^T R_k - I||_F
    double orthonormality = 0.0;
    double angular_momentum_drift = 0.0;
};

InvariantDiagnostics invariant_diagnostics(const BodyParams& p, const GravityParams& g, const Trajectory& traj);

// Quantities recomputed from trajectory samples rather than copied from a
// solver.

/// |gamma0+ - gamma0| + |Pi0+ - Pi0| + |gammaN+ - gammaN| + |PiN+ - PiN|, where
/// first and last are the post-impulse initial and pre-impulse final samples.
double impulse_cost(const RigidBodyState& before, const RigidBodyState& first, const RigidBodyState& last,
                    const Vec3& gammaN_plus, const Vec3& PiN_plus);

/// Infinity norm of the full boundary_error.
double state_violation(const RigidBodyState& last, const RigidBodyState& desired);

/// max(||x| - r_d|, |e_n . x|, |1 - (R b) . e_n|).
double relaxed_violation(const RigidBodyState& last, const RelaxedOrbit& orbit);

/// sum_k h/2 (uf^T W_f uf + um^T W_m um)
double control_effort(StepSize h, std::span<const ControlSample> controls, const Mat3& W_f, const Mat3& W_m);

/// Per-iteration solver records as named numeric columns.
enum class ColumnType { Real, Integer, Boolean };

struct IterationColumn {
    std::string name;
    ColumnType type = ColumnType::Real;
};

struct IterationTable {
    std::vector<IterationColumn> columns;
    std::vector<std::vector<double>> rows;
};

struct RunReport {
    std::string scenario;
    std::string status;
    bool converged = false;
    std::uint64_t seed = 0;
    int N = 0;
    double h = 0.0;
    std::optional<double> performance_index;
    std::optional<double> violation;
    int iterations = 0;
    int evaluations = 0;
    InvariantDiagnostics invariants;
    /// Printed, never serialized: the JSON must not depend on the machine.
    double wall_time = 0.0;
    std::vector<std::pair<std::string, std::vector<double>>> details;
    std::string message;
};

/// %.17g through std::to_chars; identical on every platform.
std::string format_double(double v);

/// Header plus one row per state:
/// k,t,x(3),gamma(3),R(9 row-major),Pi(3),uf(3),um(3),energy,angmom(3).
/// row_controls[k] is the control shown on row k.
void write_trajectory_csv(std::ostream& os, const BodyParams& p, const GravityParams& g, StepSize h,
                          const Trajectory& traj, std::span<const ControlSample> row_controls);

/// Parses a file written by write_trajectory_csv back into states.
Trajectory read_trajectory_csv(std::istream& is);

inline constexpr int kReportSchema = 1;

std::string report_json(const RunReport& r);
std::string iterations_json(const std::string& scenario, const IterationTable& t);

}  // namespace se3ocp
