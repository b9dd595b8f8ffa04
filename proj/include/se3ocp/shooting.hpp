#pragma once

#include <cstdint>
#include <vector>

#include "se3ocp/dynamics.hpp"
#include "se3ocp/linearize.hpp"

namespace se3ocp {

/// Minimum-effort transfer between two fixed states with the first order
/// integrator: J = sum_k h/2 (uf_{k+1}^T W_f uf_{k+1} + um_{k+1}^T W_m um_{k+1}).
struct SmoothProblem {
    BodyParams body;
    GravityParams gravity;
    StepSize h;
    int N;
    RigidBodyState initial;
    RigidBodyState desired;
    Mat3 W_f = Mat3::Identity();
    Mat3 W_m = Mat3::Identity();

    /// Throws std::invalid_argument on N < 2 or an invalid gravity field, and
    /// SingularWeight unless both weights are symmetric positive definite.
    void validate() const;
};

/// Newton-Armijo settings. A trial step c is accepted once
/// Error_trial <= (1 - 2 alpha c) Error; otherwise c is divided by backtrack.
struct SolverConfig {
    double eps_stop = 1e-10;
    double alpha = 1e-4;
    double backtrack = 10.0;
    int max_outer = 100;
    int max_inner = 25;
    /// Seed of the default initial multiplier.
    std::uint64_t seed = 0;
    /// Psi12 systems with an (equilibrated) condition number above this are
    /// solved in the least-squares sense.
    double max_condition = 1e12;

    /// Throws std::invalid_argument unless 0 < alpha < 1/2, backtrack > 1,
    /// eps_stop > 0 and the iteration limits are positive.
    void validate() const;
};

/// Uniform in [-amplitude, amplitude]^12 from a 64-bit Mersenne Twister with
/// the given seed. The mapping from raw draws is fixed here so the guess is
/// identical across standard libraries.
MultiplierVector default_multiplier_guess(std::uint64_t seed, double amplitude = 1e-3);

/// A solution of the discrete necessary conditions from lambda_0.
struct ExtremalTrajectory {
    /// s_0 .. s_N
    Trajectory states;
    /// lambda_0 .. lambda_{N-1}
    std::vector<MultiplierVector> multipliers;
    /// u_1 .. u_N, with u_{k+1} = -W^-1 lambda_k.
    std::vector<ControlSample> controls;
    /// F_0 .. F_{N-1}
    std::vector<Rotation> relative_rotations;
};

/// Marches state and multiplier forward:
///   s_{k+1} = step1(s_k, u_{k+1}),  u^f_{k+1} = -W_f^-1 lambda^2_k,  u^m_{k+1} = -W_m^-1 lambda^4_k,
///   lambda_{k+1} = A_{k+1}^{-T} lambda_k.
/// Throws StepTooLarge, NoConvergence or SingularJacobian.
ExtremalTrajectory propagate_extremal(const SmoothProblem& prob, const MultiplierVector& lambda0);

double performance_index(const ExtremalTrajectory& traj, StepSize h, const Mat3& W_f, const Mat3& W_m);

/// Largest residual of each family of necessary conditions along a
/// trajectory, each relative to max(1, |reference|).
struct ExtremalResiduals {
    double position = 0.0;
    double linear_momentum = 0.0;
    double relative_rotation = 0.0;
    double attitude = 0.0;
    double angular_momentum = 0.0;
    double control = 0.0;
    double multiplier = 0.0;

    double max() const;
};

/// Re-evaluates every condition independently of propagate_extremal; the
/// multiplier condition is checked in its backward form
/// lambda_k = A_{k+1}^T lambda_{k+1}.
ExtremalResiduals extremal_residuals(const SmoothProblem& prob, const ExtremalTrajectory& traj);

/// One line-search trial (or the initial evaluation, inner_index 0).
struct IterationRecord {
    int outer_index;
    /// Running count of error evaluations.
    int inner_index;
    double c;
    double error;
    /// The trial that ended an outer iteration.
    bool accepted;
};

using IterationLog = std::vector<IterationRecord>;

enum class ShootingStatus { Converged, MaxIterations, LineSearchFailed };

const char* to_string(ShootingStatus s);

struct ShootingResult {
    ShootingStatus status;
    /// Best (last accepted) iterate.
    MultiplierVector lambda0;
    ExtremalTrajectory extremal;
    /// |boundary_error(s_N, desired)|
    double error;
    int outer_iterations;
    double performance;
    /// Equilibrated condition number of Psi12 at each outer iteration.
    std::vector<double> conditions;
    IterationLog log;
};

/// Newton-Armijo shooting on lambda_0: direction D z_N with D = Psi12^-1
/// and z_N = boundary_error(s_N, desired). Trials that leave the solvable
/// region count as failed. Non-convergence is reported in status with the
/// best iterate; throws SingularJacobian if Psi12 is numerically zero.
ShootingResult solve_shooting(const SmoothProblem& prob, const MultiplierVector& guess,
                              const SolverConfig& cfg = {});

}  // namespace se3ocp
