#pragma once

#include <variant>
#include <vector>

#include "se3ocp/dynamics.hpp"
#include "se3ocp/linearize.hpp"

namespace se3ocp {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Reach a fully specified terminal state.
struct FullState {
    RigidBodyState desired;
};

/// Enter a circular orbit of radius r_d in the plane with normal e_n, with
/// body_axis aligned to e_n and spinning about it at spin_rate.
struct RelaxedOrbit {
    double r_d = 1.0;
    Vec3 e_n = Vec3::UnitZ();
    Vec3 body_axis = Vec3::UnitZ();
    double spin_rate = 0.0;
};

using TerminalSpec = std::variant<FullState, RelaxedOrbit>;

/// Two impulses at t = 0 and t = N h with an uncontrolled coast in between.
struct ImpulsiveProblem {
    BodyParams body;
    GravityParams gravity;
    StepSize h;
    int N;
    RigidBodyState initial;
    TerminalSpec terminal;

    /// Throws std::invalid_argument on N < 1, an invalid gravity field or a
    /// malformed terminal spec.
    void validate() const;
};

/// Post-impulse initial momenta.
struct ImpulsiveDecision {
    Vec3 gamma0_plus = Vec3::Zero();
    Vec3 Pi0_plus = Vec3::Zero();

    /// [gamma0_plus; Pi0_plus], the column order of momentum_columns().
    Vec6 stacked() const;
    static ImpulsiveDecision from_stacked(const Vec6& y);
};

/// The decision that applies no initial impulse.
ImpulsiveDecision no_impulse(const ImpulsiveProblem& prob);

/// Uncontrolled second order coast s_0^+ .. s_N from the post-impulse state.
Trajectory coast(const ImpulsiveProblem& prob, const ImpulsiveDecision& d);

/// Post-impulse terminal momenta (gamma_N^+, Pi_N^+) implied by the terminal spec.
/// For RelaxedOrbit: gamma_N^+ = m sqrt(mu / r_d) e_n x x_N/|x_N| and
/// Pi_N^+ = J spin_rate R_N^T e_n.
std::pair<Vec3, Vec3> terminal_momenta(const ImpulsiveProblem& prob, const RigidBodyState& terminal);

/// |Pi0+ - Pi0| + |gamma0+ - gamma0| + |Pi_N+ - Pi_N| + |gamma_N+ - gamma_N|.
double impulsive_cost(const ImpulsiveProblem& prob, const ImpulsiveDecision& d);

/// FullState: the 12-vector boundary_error(x_N, desired).
/// RelaxedOrbit: [|x_N| - r_d; e_n . x_N; 1 - (R_N body_axis) . e_n].
Eigen::VectorXd terminal_constraints(const ImpulsiveProblem& prob, const ImpulsiveDecision& d);

/// Value and gradient with respect to [gamma0+; Pi0+] of the cost and of each
/// terminal constraint, chained through Phi. Norm terms use the subgradient 0
/// at a zero argument.
struct GradientData {
    double cost;
    Vec6 cost_gradient;
    Eigen::VectorXd constraints;
    /// One row per constraint.
    Eigen::Matrix<double, Eigen::Dynamic, 6> constraint_jacobian;
};

GradientData cost_and_constraint_gradients(const ImpulsiveProblem& prob, const ImpulsiveDecision& d);

struct ImpulsiveIteration {
    int iteration;
    double cost;
    double violation;
    double stationarity;
    double step_length;
};

struct ImpulsiveSolution {
    ImpulsiveDecision decision;
    /// Coast s_0^+ .. s_N (pre-impulse at N).
    Trajectory trajectory;
    Vec3 gammaN_plus;
    Vec3 PiN_plus;
    double cost;
    /// Infinity norm of the reported constraint residual.
    double violation;
    double stationarity;
    int iterations;
    std::vector<ImpulsiveIteration> log;
};

struct TpbvpOptions {
    double tolerance = 1e-12;
    int max_iterations = 50;
};

/// Newton iteration on [x_d - x_N; log(R_N^T R_d)] over [gamma0+; Pi0+] with
/// the 6x6 position/attitude rows of the Phi momentum columns. The terminal
/// impulse then closes the momenta to those of the desired state.
///
/// Starts from whichever of the current momenta and an analytic guess (a
/// transfer ellipse through x_0 with apoapsis |x_d|, and the rigid rotation
/// J log(R_0^T R_d) / (N h)) has the smaller residual, or from guess.
/// Throws NoConvergence with the final residual.
ImpulsiveSolution solve_tpbvp(const ImpulsiveProblem& prob, const TpbvpOptions& opt = {});
ImpulsiveSolution solve_tpbvp(const ImpulsiveProblem& prob, const ImpulsiveDecision& guess,
                              const TpbvpOptions& opt = {});

struct SqpOptions {
    double violation_tolerance = 1e-10;
    double stationarity_tolerance = 1e-8;
    /// Norms are smoothed as sqrt(|v|^2 + eps^2) inside the optimizer.
    double smoothing = 1e-9;
    int max_iterations = 200;
};

/// Damped Lagrange-Newton SQP for the RelaxedOrbit problem. The alignment
/// condition is imposed through the two components of R_N body_axis
/// orthogonal to e_n, which keeps the constraint Jacobian full rank at a
/// feasible point. Throws NoConvergence or InfeasibleSubproblem.
ImpulsiveSolution solve_impulsive(const ImpulsiveProblem& prob, const SqpOptions& opt = {});
ImpulsiveSolution solve_impulsive(const ImpulsiveProblem& prob, const ImpulsiveDecision& guess,
                                  const SqpOptions& opt = {});

/// Hohmann-like initial momentum: speed from the vis-viva equation for the
/// ellipse with periapsis |x_0| and apoapsis target_radius, directed along
/// normal x x_0. Falls back to the current orbit normal if normal is zero.
Vec3 transfer_momentum_guess(const BodyParams& p, const GravityParams& g, const Vec3& x0, double target_radius,
                             const Vec3& normal);

}  // namespace se3ocp
