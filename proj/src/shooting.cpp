#include "se3ocp/shooting.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "se3ocp/errors.hpp"

namespace se3ocp {

namespace {

const ControlSample kNone;

template <class A, class B>
double relative(const A& actual, const B& reference) {
    return (actual - reference).norm() / std::max(1.0, reference.norm());
}

Mat12 first_order_jacobian(const SmoothProblem& prob, const RigidBodyState& s) {
    return step_jacobian(prob.body, prob.gravity, prob.h, s, kNone, kNone, Order::First);
}

MultiplierVector solve_transposed(const Mat12& a, const MultiplierVector& rhs) {
    const Eigen::PartialPivLU<Mat12> lu(a.transpose());
    const double rcond = lu.rcond();
    if (!(rcond > 1e-14)) {
        std::ostringstream os;
        os << "step Jacobian is singular in the multiplier update (rcond " << rcond << ")";
        throw SingularJacobian(os.str(), rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity());
    }
    return lu.solve(rhs);
}

double terminal_error(const SmoothProblem& prob, const ExtremalTrajectory& traj) {
    return boundary_error(traj.states.back(), prob.desired).norm();
}

struct Direction {
    Vec12 d;
    double condition;
};

// Solves psi12 d = z after row and column equilibration; the momentum and
// attitude blocks differ by the inertia scale. Above max_condition the
// truncated least-squares solution is used instead.
Direction newton_direction(const Mat12& psi12, const Vec12& z, double max_condition) {
    if (!psi12.allFinite()) throw SingularJacobian("Psi12 has non-finite entries", std::numeric_limits<double>::infinity());
    Vec12 row = psi12.cwiseAbs().rowwise().maxCoeff();
    for (int i = 0; i < 12; ++i) row(i) = row(i) > 0.0 ? row(i) : 1.0;
    const Mat12 rows_scaled = row.cwiseInverse().asDiagonal() * psi12;
    Vec12 col = rows_scaled.cwiseAbs().colwise().maxCoeff().transpose();
    for (int j = 0; j < 12; ++j) col(j) = col(j) > 0.0 ? col(j) : 1.0;
    const Mat12 s = rows_scaled * col.cwiseInverse().asDiagonal();

    const Eigen::JacobiSVD<Mat12> svd(s, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto sv = svd.singularValues();
    if (!(sv(0) > 0.0)) throw SingularJacobian("Psi12 is zero", std::numeric_limits<double>::infinity());
    const double condition = sv(11) > 0.0 ? sv(0) / sv(11) : std::numeric_limits<double>::infinity();

    const Vec12 rhs = z.cwiseQuotient(row);
    Vec12 y;
    if (condition <= max_condition) {
        y = s.partialPivLu().solve(rhs);
    } else {
        y.setZero();
        for (int i = 0; i < 12 && sv(i) * max_condition > sv(0); ++i) {
            y += svd.matrixV().col(i) * (svd.matrixU().col(i).dot(rhs) / sv(i));
        }
    }
    return {y.cwiseQuotient(col), condition};
}

}  // namespace

void SmoothProblem::validate() const {
    if (N < 2) throw std::invalid_argument("smooth problem needs N >= 2");
    gravity.validate();
    control_injection(h, W_f, W_m);
}

void SolverConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("alpha must lie in (0, 1/2)");
    if (!(backtrack > 1.0)) throw std::invalid_argument("backtrack divisor must exceed 1");
    if (!(eps_stop > 0.0)) throw std::invalid_argument("eps_stop must be positive");
    if (max_outer < 1 || max_inner < 1) throw std::invalid_argument("iteration limits must be positive");
    if (!(max_condition >= 1.0)) throw std::invalid_argument("max_condition must be at least 1");
}

MultiplierVector default_multiplier_guess(std::uint64_t seed, double amplitude) {
    std::mt19937_64 rng(seed);
    MultiplierVector out;
    for (int i = 0; i < 12; ++i) {
        const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        out(i) = amplitude * (2.0 * unit - 1.0);
    }
    return out;
}

ExtremalTrajectory propagate_extremal(const SmoothProblem& prob, const MultiplierVector& lambda0) {
    prob.validate();
    const auto wf = prob.W_f.llt();
    const auto wm = prob.W_m.llt();
    const std::size_t n = static_cast<std::size_t>(prob.N);

    ExtremalTrajectory out;
    out.states.reserve(n + 1);
    out.multipliers.reserve(n);
    out.controls.reserve(n);
    out.relative_rotations.reserve(n);
    out.states.push_back(prob.initial);
    MultiplierVector lambda = lambda0;
    for (std::size_t k = 0; k < n; ++k) {
        out.multipliers.push_back(lambda);
        ControlSample u;
        u.uf = -wf.solve(segment(lambda, Block::LinearMomentum));
        u.um = -wm.solve(segment(lambda, Block::AngularMomentum));
        StepTrace tr = step1_trace(prob.body, prob.gravity, prob.h, out.states.back(), u);
        out.controls.push_back(u);
        out.relative_rotations.push_back(tr.F);
        out.states.push_back(tr.next);
        if (k + 1 < n) lambda = solve_transposed(first_order_jacobian(prob, out.states.back()), lambda);
    }
    return out;
}

double performance_index(const ExtremalTrajectory& traj, StepSize h, const Mat3& W_f, const Mat3& W_m) {
    double j = 0.0;
    for (const ControlSample& u : traj.controls) {
        j += 0.5 * h.value() * (u.uf.dot(W_f * u.uf) + u.um.dot(W_m * u.um));
    }
    return j;
}

double ExtremalResiduals::max() const {
    return std::max({position, linear_momentum, relative_rotation, attitude, angular_momentum, control, multiplier});
}

ExtremalResiduals extremal_residuals(const SmoothProblem& prob, const ExtremalTrajectory& traj) {
    const std::size_t n = traj.controls.size();
    if (traj.states.size() != n + 1 || traj.multipliers.size() != n || traj.relative_rotations.size() != n) {
        throw std::invalid_argument("extremal_residuals: inconsistent trajectory lengths");
    }
    const double h = prob.h.value();
    const double m = prob.body.mass();
    const Mat3 wf_inv = prob.W_f.inverse();
    const Mat3 wm_inv = prob.W_m.inverse();

    ExtremalResiduals r;
    auto raise = [](double& slot, double value) { slot = std::max(slot, value); };
    for (std::size_t k = 0; k < n; ++k) {
        const RigidBodyState& s = traj.states[k];
        const RigidBodyState& next = traj.states[k + 1];
        const Rotation& F = traj.relative_rotations[k];
        const ControlSample& u = traj.controls[k];
        const MultiplierVector& lambda = traj.multipliers[k];
        const ForceMoment fm = force_moment(prob.body, prob.gravity, next.R, next.x);

        raise(r.position, relative(next.x, Vec3(s.x + (h / m) * s.gamma)));
        raise(r.linear_momentum, relative(next.gamma, Vec3(s.gamma + h * fm.force + h * u.uf)));
        raise(r.relative_rotation, relative_rotation_residual(prob.body, prob.h, s.Pi, F) /
                                       std::max(1.0, h * s.Pi.norm()));
        raise(r.attitude, (next.R.matrix() - s.R.matrix() * F.matrix()).norm());
        raise(r.angular_momentum,
              relative(next.Pi, Vec3(F.matrix().transpose() * s.Pi + h * fm.moment + h * u.um)));
        raise(r.control, relative(u.uf, Vec3(-wf_inv * segment(lambda, Block::LinearMomentum))));
        raise(r.control, relative(u.um, Vec3(-wm_inv * segment(lambda, Block::AngularMomentum))));
        if (k + 1 < n) {
            const Mat12 a = first_order_jacobian(prob, next);
            raise(r.multiplier, relative(lambda, MultiplierVector(a.transpose() * traj.multipliers[k + 1])));
        }
    }
    return r;
}

const char* to_string(ShootingStatus s) {
    switch (s) {
        case ShootingStatus::Converged:
            return "converged";
        case ShootingStatus::MaxIterations:
            return "max_iterations";
        case ShootingStatus::LineSearchFailed:
            return "line_search_failed";
    }
    return "unknown";
}

ShootingResult solve_shooting(const SmoothProblem& prob, const MultiplierVector& guess, const SolverConfig& cfg) {
    prob.validate();
    cfg.validate();

    ShootingResult res;
    res.status = ShootingStatus::Converged;
    res.lambda0 = guess;
    res.extremal = propagate_extremal(prob, guess);
    res.error = terminal_error(prob, res.extremal);
    res.outer_iterations = 0;
    res.log.push_back({0, 0, 0.0, res.error, true});

    int evaluations = 0;
    while (res.error > cfg.eps_stop) {
        if (res.outer_iterations >= cfg.max_outer) {
            res.status = ShootingStatus::MaxIterations;
            break;
        }
        ++res.outer_iterations;
        const TransitionMatrices tm = propagate_psi(prob.body, prob.gravity, prob.h, res.extremal.states,
                                                    res.extremal.multipliers, prob.W_f, prob.W_m);
        const Vec12 z = boundary_error(res.extremal.states.back(), prob.desired);
        const Direction dir = newton_direction(tm.psi12(), z, cfg.max_condition);
        res.conditions.push_back(dir.condition);

        bool accepted = false;
        double c = 1.0;
        for (int inner = 0; inner < cfg.max_inner && !accepted; ++inner, c /= cfg.backtrack) {
            const MultiplierVector trial = res.lambda0 + c * dir.d;
            ++evaluations;
            ExtremalTrajectory ext;
            double error = std::numeric_limits<double>::infinity();
            try {
                ext = propagate_extremal(prob, trial);
                error = terminal_error(prob, ext);
            } catch (const Error&) {
                // Left the solvable region; treated as a failed trial.
            }
            accepted = error <= (1.0 - 2.0 * cfg.alpha * c) * res.error;
            res.log.push_back({res.outer_iterations, evaluations, c, error, accepted});
            if (accepted) {
                res.lambda0 = trial;
                res.extremal = std::move(ext);
                res.error = error;
            }
        }
        if (!accepted) {
            res.status = ShootingStatus::LineSearchFailed;
            break;
        }
    }
    res.performance = performance_index(res.extremal, prob.h, prob.W_f, prob.W_m);
    return res;
}

}  // namespace se3ocp
