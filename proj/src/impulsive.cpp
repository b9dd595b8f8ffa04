#include "se3ocp/impulsive.hpp"

#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "se3ocp/errors.hpp"

namespace se3ocp {

namespace {

using Mat36 = Eigen::Matrix<double, 3, 6>;
using MatX6 = Eigen::Matrix<double, Eigen::Dynamic, 6>;

const ControlSample kNoControl;

const FullState* full_state(const ImpulsiveProblem& prob) { return std::get_if<FullState>(&prob.terminal); }
const RelaxedOrbit* relaxed(const ImpulsiveProblem& prob) { return std::get_if<RelaxedOrbit>(&prob.terminal); }

RigidBodyState post_impulse_initial(const ImpulsiveProblem& prob, const ImpulsiveDecision& d) {
    RigidBodyState s = prob.initial;
    s.gamma = d.gamma0_plus;
    s.Pi = d.Pi0_plus;
    return s;
}

Mat12 coast_phi(const ImpulsiveProblem& prob, const Trajectory& traj) {
    Mat12 phi = Mat12::Identity();
    for (int k = 0; k < prob.N; ++k) {
        phi = step_jacobian(prob.body, prob.gravity, prob.h, traj[k], kNoControl, kNoControl, Order::Second) * phi;
    }
    return phi;
}

// Rows of the Phi momentum columns for one perturbation block.
Mat36 rows(const Eigen::Matrix<double, 12, 6>& m, Block b) { return m.middleRows<3>(static_cast<int>(b)); }

// The four impulse vectors (gamma0, Pi0, gammaN, PiN) and their Jacobians
// with respect to [gamma0+; Pi0+].
struct Impulses {
    Trajectory traj;
    Vec3 gammaN_plus;
    Vec3 PiN_plus;
    std::array<Vec3, 4> v;
    std::array<Mat36, 4> jac;
    Eigen::Matrix<double, 12, 6> sens;
};

Impulses evaluate_impulses(const ImpulsiveProblem& prob, const ImpulsiveDecision& d, bool with_jacobian) {
    Impulses out;
    out.traj = coast(prob, d);
    const RigidBodyState& sN = out.traj.back();
    std::tie(out.gammaN_plus, out.PiN_plus) = terminal_momenta(prob, sN);
    out.v = {d.gamma0_plus - prob.initial.gamma, d.Pi0_plus - prob.initial.Pi, out.gammaN_plus - sN.gamma,
             out.PiN_plus - sN.Pi};
    if (!with_jacobian) return out;

    out.sens = momentum_columns(coast_phi(prob, out.traj));
    Mat3 dgamma_dx = Mat3::Zero();
    Mat3 dPi_dzeta = Mat3::Zero();
    if (const RelaxedOrbit* ro = relaxed(prob)) {
        const double r = sN.x.norm();
        const Vec3 xhat = sN.x / r;
        const double speed = prob.body.mass() * std::sqrt(prob.gravity.mu / ro->r_d);
        dgamma_dx = speed * hat(ro->e_n) * (Mat3::Identity() - xhat * xhat.transpose()) / r;
        dPi_dzeta = ro->spin_rate * prob.body.inertia() * hat(sN.R.transpose() * ro->e_n);
    }
    out.jac[0] << Mat3::Identity(), Mat3::Zero();
    out.jac[1] << Mat3::Zero(), Mat3::Identity();
    out.jac[2] = dgamma_dx * rows(out.sens, Block::Position) - rows(out.sens, Block::LinearMomentum);
    out.jac[3] = dPi_dzeta * rows(out.sens, Block::Attitude) - rows(out.sens, Block::AngularMomentum);
    return out;
}

// Alignment residual directions: an orthonormal pair spanning the plane orthogonal to e_n.
std::pair<Vec3, Vec3> tangent_basis(const Vec3& e_n) {
    const Vec3 t1 = e_n.unitOrthogonal();
    return {t1, e_n.cross(t1)};
}

// Constraints used by the SQP: radius, plane and the two tangential
// components of R_N b. Jacobian rows are with respect to [gamma0+; Pi0+].
void relaxed_solver_constraints(const RelaxedOrbit& ro, const Impulses& im, Eigen::Vector4d& c,
                                Eigen::Matrix<double, 4, 6>* jac) {
    const RigidBodyState& sN = im.traj.back();
    const Vec3 axis = sN.R * ro.body_axis;
    const auto [t1, t2] = tangent_basis(ro.e_n);
    c << sN.x.norm() - ro.r_d, ro.e_n.dot(sN.x), t1.dot(axis), t2.dot(axis);
    if (jac == nullptr) return;
    const Mat36 dx = rows(im.sens, Block::Position);
    // d(R b) = -R hat(b) zeta
    const Mat36 daxis = -sN.R.matrix() * hat(ro.body_axis) * rows(im.sens, Block::Attitude);
    jac->row(0) = (sN.x / sN.x.norm()).transpose() * dx;
    jac->row(1) = ro.e_n.transpose() * dx;
    jac->row(2) = t1.transpose() * daxis;
    jac->row(3) = t2.transpose() * daxis;
}

double smooth_norm(const Vec3& v, double eps) { return std::sqrt(v.squaredNorm() + eps * eps); }

Vec3 smooth_norm_gradient(const Vec3& v, double eps) { return v / smooth_norm(v, eps); }

Mat3 smooth_norm_hessian(const Vec3& v, double eps) {
    const double s = smooth_norm(v, eps);
    return (Mat3::Identity() - v * v.transpose() / (s * s)) / s;
}

Vec3 subgradient(const Vec3& v) {
    const double n = v.norm();
    return n > 0.0 ? Vec3(v / n) : Vec3::Zero();
}

double exact_cost(const std::array<Vec3, 4>& v) { return v[0].norm() + v[1].norm() + v[2].norm() + v[3].norm(); }

void require_convergence(bool ok, const char* what, double residual, int iterations) {
    if (ok) return;
    std::ostringstream os;
    os << what << " did not converge after " << iterations << " iterations (residual " << residual << ")";
    throw NoConvergence(os.str(), residual, iterations);
}

ImpulsiveSolution make_solution(const ImpulsiveProblem& prob, const ImpulsiveDecision& d, Impulses im) {
    ImpulsiveSolution sol;
    sol.decision = d;
    sol.gammaN_plus = im.gammaN_plus;
    sol.PiN_plus = im.PiN_plus;
    sol.cost = exact_cost(im.v);
    sol.trajectory = std::move(im.traj);
    sol.violation = terminal_constraints(prob, d).lpNorm<Eigen::Infinity>();
    sol.stationarity = 0.0;
    sol.iterations = 0;
    return sol;
}

// ---- TPBVP ----------------------------------------------------------------

struct TpbvpResidual {
    Vec6 r;
    Trajectory traj;
};

TpbvpResidual tpbvp_residual(const ImpulsiveProblem& prob, const RigidBodyState& desired, const ImpulsiveDecision& d) {
    TpbvpResidual out;
    out.traj = coast(prob, d);
    const RigidBodyState& sN = out.traj.back();
    out.r << desired.x - sN.x, log_so3(sN.R.transpose() * desired.R);
    return out;
}

Mat6 tpbvp_jacobian(const ImpulsiveProblem& prob, const Trajectory& traj, const Vec6& r) {
    const Eigen::Matrix<double, 12, 6> m = momentum_columns(coast_phi(prob, traj));
    Mat6 jac;
    jac.topRows<3>() = -rows(m, Block::Position);
    // log(exp(-zeta) exp(v)) = v - Jl^-1(v) zeta
    jac.bottomRows<3>() = -left_jacobian_inverse(r.tail<3>()) * rows(m, Block::Attitude);
    return jac;
}

ImpulsiveDecision tpbvp_guess(const ImpulsiveProblem& prob, const RigidBodyState& desired) {
    const RigidBodyState& s0 = prob.initial;
    const double horizon = prob.N * prob.h.value();
    ImpulsiveDecision d;
    if (prob.gravity.mu > 0.0 && s0.x.norm() > 0.0) {
        d.gamma0_plus =
            transfer_momentum_guess(prob.body, prob.gravity, s0.x, desired.x.norm(), s0.x.cross(desired.x));
        if (s0.x.cross(desired.x).norm() <= 1e-12 * s0.x.norm() * desired.x.norm()) {
            d.gamma0_plus = transfer_momentum_guess(prob.body, prob.gravity, s0.x, desired.x.norm(),
                                                    s0.x.cross(s0.gamma));
        }
    } else {
        d.gamma0_plus = prob.body.mass() * (desired.x - s0.x) / horizon;
    }
    d.Pi0_plus = prob.body.inertia() * log_so3(s0.R.transpose() * desired.R) / horizon;
    return d;
}

// ---- SQP ------------------------------------------------------------------

struct SqpPoint {
    Vec6 y;
    Impulses im;
    double f;
    Vec6 grad;
    Eigen::Vector4d c;
    Eigen::Matrix<double, 4, 6> jc;
};

SqpPoint sqp_evaluate(const ImpulsiveProblem& prob, const RelaxedOrbit& ro, const Vec6& y, double eps,
                      bool with_jacobian) {
    SqpPoint p;
    p.y = y;
    p.im = evaluate_impulses(prob, ImpulsiveDecision::from_stacked(y), with_jacobian);
    p.f = 0.0;
    p.grad.setZero();
    for (int i = 0; i < 4; ++i) {
        p.f += smooth_norm(p.im.v[i], eps);
        if (with_jacobian) p.grad += p.im.jac[i].transpose() * smooth_norm_gradient(p.im.v[i], eps);
    }
    relaxed_solver_constraints(ro, p.im, p.c, with_jacobian ? &p.jc : nullptr);
    return p;
}

double merit(const SqpPoint& p, double rho) { return p.f + rho * p.c.lpNorm<1>(); }

// Decision-space finite-difference steps: momentum scales differ by orders
// of magnitude between the translational and rotational blocks.
Vec6 fd_steps(const ImpulsiveProblem& prob, const Vec6& y) {
    const double m = prob.body.mass();
    const double j = prob.body.inertia().trace() / 3.0;
    Vec6 s;
    s.head<3>().setConstant(1e-6 * std::max(m, y.head<3>().norm()));
    s.tail<3>().setConstant(1e-6 * std::max(j, y.tail<3>().norm()));
    return s;
}

// Hessian of the smoothed Lagrangian f + lambda^T c.
Mat6 lagrangian_hessian(const ImpulsiveProblem& prob, const RelaxedOrbit& ro, const SqpPoint& p,
                        const Eigen::Vector4d& lambda, double eps) {
    Mat6 h = Mat6::Zero();
    std::array<Vec3, 4> g;
    for (int i = 0; i < 4; ++i) {
        g[i] = smooth_norm_gradient(p.im.v[i], eps);
        h += p.im.jac[i].transpose() * smooth_norm_hessian(p.im.v[i], eps) * p.im.jac[i];
    }
    // Curvature of the maps y -> impulse and y -> constraint with the outer
    // gradients frozen.
    auto frozen = [&](const Vec6& y) {
        const SqpPoint q = sqp_evaluate(prob, ro, y, eps, true);
        Vec6 out = q.jc.transpose() * lambda;
        for (int i = 0; i < 4; ++i) out += q.im.jac[i].transpose() * g[i];
        return out;
    };
    const Vec6 step = fd_steps(prob, p.y);
    Mat6 curv;
    for (int j = 0; j < 6; ++j) {
        Vec6 e = Vec6::Zero();
        e(j) = step(j);
        curv.col(j) = (frozen(p.y + e) - frozen(p.y - e)) / (2.0 * step(j));
    }
    h += 0.5 * (curv + curv.transpose());
    return 0.5 * (h + h.transpose());
}

Eigen::Vector4d least_squares_multipliers(const SqpPoint& p) {
    return -p.jc.transpose().jacobiSvd(Eigen::ComputeFullU | Eigen::ComputeFullV).solve(p.grad);
}

constexpr double kMaxScaledStep = 0.5;

// Momentum scales: orbital linear momentum, and the angular momentum that
// turns the body by one radian over the horizon.
Vec6 decision_scale(const ImpulsiveProblem& prob) {
    const double m = prob.body.mass();
    const double r0 = prob.initial.x.norm();
    const double speed = prob.gravity.mu > 0.0 && r0 > 0.0 ? std::sqrt(prob.gravity.mu / r0) : 1.0;
    const double gamma_scale = std::max(m * speed, prob.initial.gamma.norm());
    const double j = prob.body.inertia().eigenvalues().real().maxCoeff();
    Vec6 s;
    s << Vec3::Constant(gamma_scale), Vec3::Constant(j / (prob.N * prob.h.value()));
    return s;
}

// Levenberg-Marquardt on 1/2 |c|^2 in scaled variables, ignoring the cost,
// until the constraints are small enough for the SQP model to be trusted.
SqpPoint restore_feasibility(const ImpulsiveProblem& prob, const RelaxedOrbit& ro, SqpPoint p, const Vec6& scale,
                             double eps) {
    constexpr double kTarget = 1e-6;
    double damping = 1e-3;
    for (int it = 0; it < 200 && p.c.lpNorm<Eigen::Infinity>() > kTarget; ++it) {
        const Eigen::Matrix<double, 4, 6> js = p.jc * scale.asDiagonal();
        const Mat6 normal = js.transpose() * js;
        const Vec6 g = js.transpose() * p.c;
        bool accepted = false;
        for (int tries = 0; tries < 30 && !accepted; ++tries) {
            const Vec6 d = -(normal + damping * Mat6::Identity()).ldlt().solve(g);
            const double cap = std::max(1.0, d.lpNorm<Eigen::Infinity>() / kMaxScaledStep);
            try {
                SqpPoint q = sqp_evaluate(prob, ro, p.y + scale.cwiseProduct(d) / cap, eps, true);
                if (q.c.norm() < p.c.norm()) {
                    p = std::move(q);
                    damping = std::max(1e-12, damping / 10.0);
                    accepted = true;
                    break;
                }
            } catch (const Error&) {
            }
            damping *= 10.0;
        }
        if (!accepted) {
            throw InfeasibleSubproblem("could not reduce the terminal constraint violation from the initial guess");
        }
    }
    return p;
}

struct SqpStep {
    Vec6 d;
    int rank;
};

// Composite step: a minimum-norm normal step toward the linearized
// constraints plus a Newton step on the reduced Hessian in the null space of
// the numerically nonsingular part of jc. Coincides with the KKT solution
// when jc has full row rank.
SqpStep composite_step(const Mat6& h, const Vec6& grad, const Eigen::Matrix<double, 4, 6>& jc,
                       const Eigen::Vector4d& c) {
    Eigen::JacobiSVD<Eigen::Matrix<double, 4, 6>> svd(jc, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto sv = svd.singularValues();
    int rank = 0;
    for (int i = 0; i < 4; ++i) rank += sv(i) > 1e-8 * sv(0) ? 1 : 0;

    Vec6 dn = Vec6::Zero();
    for (int i = 0; i < rank; ++i) dn -= svd.matrixV().col(i) * (svd.matrixU().col(i).dot(c) / sv(i));
    const Eigen::MatrixXd z = svd.matrixV().rightCols(6 - rank);
    Eigen::MatrixXd reduced = z.transpose() * h * z;
    reduced = 0.5 * (reduced + reduced.transpose());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(reduced);
    // Only shift an indefinite or nearly singular reduced Hessian.
    const double floor = 1e-12 * std::max(1.0, h.norm());
    const double shift = std::max(0.0, floor - eig.eigenvalues().minCoeff());
    const Eigen::MatrixXd shifted = reduced + shift * Eigen::MatrixXd::Identity(6 - rank, 6 - rank);
    const Eigen::VectorXd g = z.transpose() * (grad + h * dn);
    const Vec6 dt = -z * shifted.ldlt().solve(g);
    return {dn + dt, rank};
}

// Rigid-rotation kick that turns R_N body_axis toward e_n over the horizon,
// added to the initial angular momentum to break the in-plane symmetry.
Vec3 alignment_kick(const ImpulsiveProblem& prob, const RelaxedOrbit& ro, const ImpulsiveDecision& d) {
    const RigidBodyState sN = coast(prob, d).back();
    const Vec3 axis = sN.R * ro.body_axis;
    const Vec3 cross = axis.cross(ro.e_n);
    const double angle = std::atan2(cross.norm(), axis.dot(ro.e_n));
    if (cross.norm() <= 1e-12) return Vec3::Zero();
    const Vec3 spatial = angle * cross.normalized();
    return prob.body.inertia() * (prob.initial.R.transpose() * spatial) / (prob.N * prob.h.value());
}

// The state on the relaxed orbit nearest to s: position projected into the
// plane at radius r_d, attitude turned by the smallest rotation that aligns
// body_axis with e_n, momenta from the closure.
RigidBodyState relaxed_target(const ImpulsiveProblem& prob, const RelaxedOrbit& ro, const RigidBodyState& s) {
    RigidBodyState t;
    Vec3 in_plane = s.x - ro.e_n.dot(s.x) * ro.e_n;
    if (in_plane.norm() <= 1e-12 * std::max(1.0, s.x.norm())) in_plane = tangent_basis(ro.e_n).first;
    t.x = ro.r_d * in_plane.normalized();
    const Vec3 axis = s.R * ro.body_axis;
    const Vec3 cross = axis.cross(ro.e_n);
    const double angle = std::atan2(cross.norm(), axis.dot(ro.e_n));
    const Vec3 turn = cross.norm() > 0.0 ? Vec3(angle * cross.normalized()) : Vec3(Vec3::Zero());
    t.R = exp_so3(turn) * s.R;
    const auto [gamma, Pi] = terminal_momenta(prob, t);
    t.gamma = gamma;
    t.Pi = Pi;
    return t;
}

}  // namespace

void ImpulsiveProblem::validate() const {
    gravity.validate();
    if (N < 1) throw std::invalid_argument("N must be at least 1");
    if (const RelaxedOrbit* ro = relaxed(*this)) {
        if (!(ro->r_d > 0.0)) throw std::invalid_argument("r_d must be positive");
        if (std::abs(ro->e_n.norm() - 1.0) > 1e-12) throw std::invalid_argument("e_n must be a unit vector");
        if (std::abs(ro->body_axis.norm() - 1.0) > 1e-12) {
            throw std::invalid_argument("body_axis must be a unit vector");
        }
        if (!std::isfinite(ro->spin_rate)) throw std::invalid_argument("spin_rate must be finite");
    }
}

Vec6 ImpulsiveDecision::stacked() const {
    Vec6 y;
    y << gamma0_plus, Pi0_plus;
    return y;
}

ImpulsiveDecision ImpulsiveDecision::from_stacked(const Vec6& y) { return {y.head<3>(), y.tail<3>()}; }

ImpulsiveDecision no_impulse(const ImpulsiveProblem& prob) { return {prob.initial.gamma, prob.initial.Pi}; }

Trajectory coast(const ImpulsiveProblem& prob, const ImpulsiveDecision& d) {
    const std::vector<ControlSample> none(static_cast<std::size_t>(prob.N) + 1);
    return simulate(prob.body, prob.gravity, prob.h, post_impulse_initial(prob, d), none, Order::Second);
}

std::pair<Vec3, Vec3> terminal_momenta(const ImpulsiveProblem& prob, const RigidBodyState& terminal) {
    if (const FullState* fs = full_state(prob)) return {fs->desired.gamma, fs->desired.Pi};
    const RelaxedOrbit& ro = *relaxed(prob);
    const double speed = prob.body.mass() * std::sqrt(prob.gravity.mu / ro.r_d);
    const Vec3 gamma = speed * ro.e_n.cross(terminal.x.normalized());
    const Vec3 Pi = ro.spin_rate * (prob.body.inertia() * (terminal.R.transpose() * ro.e_n));
    return {gamma, Pi};
}

double impulsive_cost(const ImpulsiveProblem& prob, const ImpulsiveDecision& d) {
    return exact_cost(evaluate_impulses(prob, d, false).v);
}

Eigen::VectorXd terminal_constraints(const ImpulsiveProblem& prob, const ImpulsiveDecision& d) {
    const Trajectory traj = coast(prob, d);
    const RigidBodyState& sN = traj.back();
    if (const FullState* fs = full_state(prob)) {
        RigidBodyState plus = sN;
        std::tie(plus.gamma, plus.Pi) = terminal_momenta(prob, sN);
        return boundary_error(plus, fs->desired);
    }
    const RelaxedOrbit& ro = *relaxed(prob);
    Eigen::VectorXd c(3);
    c << sN.x.norm() - ro.r_d, ro.e_n.dot(sN.x), 1.0 - (sN.R * ro.body_axis).dot(ro.e_n);
    return c;
}

GradientData cost_and_constraint_gradients(const ImpulsiveProblem& prob, const ImpulsiveDecision& d) {
    const Impulses im = evaluate_impulses(prob, d, true);
    GradientData out;
    out.cost = exact_cost(im.v);
    out.cost_gradient.setZero();
    for (int i = 0; i < 4; ++i) out.cost_gradient += im.jac[i].transpose() * subgradient(im.v[i]);

    const RigidBodyState& sN = im.traj.back();
    if (const FullState* fs = full_state(prob)) {
        RigidBodyState plus = sN;
        plus.gamma = im.gammaN_plus;
        plus.Pi = im.PiN_plus;
        out.constraints = boundary_error(plus, fs->desired);
        out.constraint_jacobian = MatX6::Zero(12, 6);
        out.constraint_jacobian.middleRows<3>(0) = -rows(im.sens, Block::Position);
        out.constraint_jacobian.middleRows<3>(6) =
            -left_jacobian_inverse(segment(out.constraints, Block::Attitude)) * rows(im.sens, Block::Attitude);
        return out;
    }
    const RelaxedOrbit& ro = *relaxed(prob);
    out.constraints = terminal_constraints(prob, d);
    out.constraint_jacobian.resize(3, 6);
    const Mat36 dx = rows(im.sens, Block::Position);
    out.constraint_jacobian.row(0) = (sN.x / sN.x.norm()).transpose() * dx;
    out.constraint_jacobian.row(1) = ro.e_n.transpose() * dx;
    out.constraint_jacobian.row(2) =
        ro.e_n.transpose() * sN.R.matrix() * hat(ro.body_axis) * rows(im.sens, Block::Attitude);
    return out;
}

Vec3 transfer_momentum_guess(const BodyParams& p, const GravityParams& g, const Vec3& x0, double target_radius,
                             const Vec3& normal) {
    const double r0 = x0.norm();
    const double speed = std::sqrt(g.mu / r0) * std::sqrt(2.0 * target_radius / (r0 + target_radius));
    return p.mass() * speed * normal.normalized().cross(x0 / r0);
}

ImpulsiveSolution solve_tpbvp(const ImpulsiveProblem& prob, const TpbvpOptions& opt) {
    prob.validate();
    const FullState* fs = full_state(prob);
    if (fs == nullptr) throw std::invalid_argument("solve_tpbvp needs a FullState terminal spec");

    ImpulsiveDecision start = no_impulse(prob);
    if (tpbvp_residual(prob, fs->desired, start).r.lpNorm<Eigen::Infinity>() > opt.tolerance) {
        const ImpulsiveDecision guess = tpbvp_guess(prob, fs->desired);
        try {
            if (tpbvp_residual(prob, fs->desired, guess).r.norm() <
                tpbvp_residual(prob, fs->desired, start).r.norm()) {
                start = guess;
            }
        } catch (const Error&) {
            // The analytic guess may violate the step guard; keep the current momenta.
        }
    }
    return solve_tpbvp(prob, start, opt);
}

ImpulsiveSolution solve_tpbvp(const ImpulsiveProblem& prob, const ImpulsiveDecision& guess, const TpbvpOptions& opt) {
    prob.validate();
    const FullState* fs = full_state(prob);
    if (fs == nullptr) throw std::invalid_argument("solve_tpbvp needs a FullState terminal spec");
    const RigidBodyState& desired = fs->desired;

    ImpulsiveDecision d = guess;
    TpbvpResidual res = tpbvp_residual(prob, desired, d);

    std::vector<ImpulsiveIteration> log;
    int it = 0;
    for (; it < opt.max_iterations && res.r.lpNorm<Eigen::Infinity>() > opt.tolerance; ++it) {
        const Mat6 jac = tpbvp_jacobian(prob, res.traj, res.r);
        const Vec6 step = -jac.jacobiSvd(Eigen::ComputeFullU | Eigen::ComputeFullV).solve(res.r);
        double alpha = 1.0;
        bool accepted = false;
        for (; alpha >= 1e-6; alpha *= 0.5) {
            const ImpulsiveDecision trial = ImpulsiveDecision::from_stacked(d.stacked() + alpha * step);
            try {
                TpbvpResidual next = tpbvp_residual(prob, desired, trial);
                if (next.r.norm() < res.r.norm()) {
                    d = trial;
                    res = std::move(next);
                    accepted = true;
                    break;
                }
            } catch (const Error&) {
                // Trial left the solvable region; shorten the step.
            }
        }
        log.push_back({it + 1, 0.0, res.r.lpNorm<Eigen::Infinity>(), 0.0, accepted ? alpha : 0.0});
        if (!accepted) break;
    }
    const double residual = res.r.lpNorm<Eigen::Infinity>();
    require_convergence(residual <= opt.tolerance, "two point boundary value problem", residual, it);

    ImpulsiveSolution sol = make_solution(prob, d, evaluate_impulses(prob, d, false));
    for (auto& entry : log) entry.cost = sol.cost;
    sol.iterations = it;
    sol.log = std::move(log);
    return sol;
}

ImpulsiveSolution solve_impulsive(const ImpulsiveProblem& prob, const SqpOptions& opt) {
    prob.validate();
    const RelaxedOrbit* ro = relaxed(prob);
    if (ro == nullptr) throw std::invalid_argument("solve_impulsive needs a RelaxedOrbit terminal spec");
    ImpulsiveDecision guess = no_impulse(prob);
    const Vec3& x0 = prob.initial.x;
    if (prob.gravity.mu > 0.0 && x0.norm() > 0.0) {
        const Vec3 normal = x0.cross(ro->e_n).norm() > 0.0 && std::abs(ro->e_n.dot(x0)) < 1e-12 * x0.norm()
                                ? ro->e_n
                                : Vec3(x0.cross(prob.initial.gamma));
        guess.gamma0_plus = transfer_momentum_guess(prob.body, prob.gravity, x0, ro->r_d, normal);
    }
    // Warm start from the fixed-endpoint problem whose target is the coast
    // endpoint moved onto the relaxed orbit; its solution is feasible.
    try {
        ImpulsiveProblem fixed = prob;
        fixed.terminal = FullState{relaxed_target(prob, *ro, coast(prob, guess).back())};
        return solve_impulsive(prob, solve_tpbvp(fixed).decision, opt);
    } catch (const Error&) {
    }
    guess.Pi0_plus += alignment_kick(prob, *ro, guess);
    return solve_impulsive(prob, guess, opt);
}

ImpulsiveSolution solve_impulsive(const ImpulsiveProblem& prob, const ImpulsiveDecision& guess,
                                  const SqpOptions& opt) {
    prob.validate();
    const RelaxedOrbit* ro = relaxed(prob);
    if (ro == nullptr) throw std::invalid_argument("solve_impulsive needs a RelaxedOrbit terminal spec");
    const double eps = opt.smoothing;

    // Zero-impulse pre-check: the uncontrolled coast already meets the target.
    {
        const ImpulsiveDecision zero = no_impulse(prob);
        Impulses im = evaluate_impulses(prob, zero, false);
        Eigen::Vector4d c;
        relaxed_solver_constraints(*ro, im, c, nullptr);
        const double scale = std::max(1.0, prob.initial.gamma.norm());
        if (c.lpNorm<Eigen::Infinity>() <= opt.violation_tolerance && im.v[2].norm() <= 1e-12 * scale &&
            im.v[3].norm() <= 1e-12 * std::max(1.0, prob.initial.Pi.norm())) {
            return make_solution(prob, zero, std::move(im));
        }
    }

    const Vec6 scale = decision_scale(prob);
    SqpPoint p = restore_feasibility(prob, *ro, sqp_evaluate(prob, *ro, guess.stacked(), eps, true), scale, eps);
    double rho = 1.0;
    std::vector<ImpulsiveIteration> log;
    double stationarity = 0.0;
    int it = 0;
    for (;; ++it) {
        const Eigen::Vector4d lambda_ls = least_squares_multipliers(p);
        stationarity = (p.grad + p.jc.transpose() * lambda_ls).lpNorm<Eigen::Infinity>();
        const double violation = p.c.lpNorm<Eigen::Infinity>();
        if (violation <= opt.violation_tolerance && stationarity <= opt.stationarity_tolerance) break;
        if (it >= opt.max_iterations) break;

        Mat6 h = lagrangian_hessian(prob, *ro, p, lambda_ls, eps);
        // The step is computed in scaled variables y = S y_hat and capped there
        // so the linearization is not trusted beyond O(1) scaled changes.
        const SqpStep step =
            composite_step(scale.asDiagonal() * h * scale.asDiagonal(), scale.cwiseProduct(p.grad),
                           p.jc * scale.asDiagonal(), p.c);
        const double cap = std::max(1.0, step.d.lpNorm<Eigen::Infinity>() / kMaxScaledStep);
        const Vec6 d = scale.cwiseProduct(step.d) / cap;
        const Eigen::Vector4d lambda =
            -p.jc.transpose().jacobiSvd(Eigen::ComputeFullU | Eigen::ComputeFullV).solve(Vec6(p.grad + h * d));

        // Recomputed every iteration: a penalty ratcheted up far from the solution
        // would block progress on the cost near it.
        rho = 2.0 * lambda.lpNorm<Eigen::Infinity>() + 1e-6;
        const double phi0 = merit(p, rho);
        const double slope = p.grad.dot(d) - rho * p.c.lpNorm<1>() / cap;

        double alpha = 1.0;
        bool accepted = false;
        auto try_point = [&](const Vec6& y) -> bool {
            try {
                SqpPoint q = sqp_evaluate(prob, *ro, y, eps, false);
                if (merit(q, rho) <= phi0 + 1e-4 * alpha * std::min(slope, 0.0)) {
                    p = sqp_evaluate(prob, *ro, y, eps, true);
                    return true;
                }
            } catch (const Error&) {
                // Outside the solvable region.
            }
            return false;
        };
        if (try_point(p.y + d)) {
            accepted = true;
        } else {
            // Second-order correction against the Maratos effect.
            try {
                const SqpPoint q = sqp_evaluate(prob, *ro, p.y + d, eps, false);
                const Vec6 soc = -p.jc.transpose() * (p.jc * p.jc.transpose()).ldlt().solve(q.c);
                accepted = try_point(p.y + d + soc);
            } catch (const Error&) {
            }
            for (alpha = 0.5; !accepted && alpha >= 1e-12; alpha *= 0.5) accepted = try_point(p.y + alpha * d);
        }
        log.push_back({it + 1, p.f, p.c.lpNorm<Eigen::Infinity>(), stationarity, accepted ? alpha : 0.0});
        if (!accepted && step.rank < 4 && p.c.lpNorm<Eigen::Infinity>() > opt.violation_tolerance) {
            throw InfeasibleSubproblem("linearized terminal constraints are rank deficient and no step reduces "
                                       "the violation");
        }
        if (!accepted) break;
    }
    const double violation = p.c.lpNorm<Eigen::Infinity>();
    require_convergence(violation <= opt.violation_tolerance && stationarity <= opt.stationarity_tolerance,
                        "impulsive SQP", std::max(violation, stationarity), it);

    const ImpulsiveDecision best = ImpulsiveDecision::from_stacked(p.y);
    ImpulsiveSolution out = make_solution(prob, best, std::move(p.im));
    out.stationarity = stationarity;
    out.iterations = it;
    out.log = std::move(log);
    return out;
}

}  // namespace se3ocp
