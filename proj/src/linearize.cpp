#include "se3ocp/linearize.hpp"

#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "se3ocp/errors.hpp"

namespace se3ocp {

namespace {

using Row3 = Eigen::Matrix<double, 3, 12>;

Row3 select(Block b) {
    Row3 r = Row3::Zero();
    r.block<3, 3>(0, static_cast<int>(b)).setIdentity();
    return r;
}

Mat12 stack(const Row3& dx, const Row3& dgamma, const Row3& zeta, const Row3& dPi) {
    Mat12 a;
    a.block<3, 12>(0, 0) = dx;
    a.block<3, 12>(3, 0) = dgamma;
    a.block<3, 12>(6, 0) = zeta;
    a.block<3, 12>(9, 0) = dPi;
    return a;
}

// d vee(F J_d - J_d F^T) / d xi for F -> F exp(xi).
Mat3 implicit_solve_derivative(const Mat3& F, const Mat3& jd) {
    const Mat3 fj = F * jd;
    return (fj.trace() * Mat3::Identity() - fj) * F;
}

Mat12 analytic_step2(const BodyParams& p, const GravityParams& g, StepSize h, const RigidBodyState& s,
                     const ControlSample& u_k, const ControlSample& u_kp1) {
    const double dt = h.value();
    const double m = p.mass();
    const StepTrace tr = step2_trace(p, g, h, s, u_k, u_kp1);
    const Mat3& F = tr.F.matrix();
    const ForceMomentJacobian jk = force_moment_jacobian(p, g, s.R, s.x);
    const ForceMomentJacobian j1 = force_moment_jacobian(p, g, tr.next.R, tr.next.x);
    const Mat3 g_inv = implicit_solve_derivative(F, p.nonstandard_inertia()).inverse();

    const Row3 X = select(Block::Position);
    const Row3 G = select(Block::LinearMomentum);
    const Row3 Z = select(Block::Attitude);
    const Row3 P = select(Block::AngularMomentum);

    const Row3 dx1 = X + (dt / m) * G + (0.5 * dt * dt / m) * (jk.force_x * X + jk.force_zeta * Z);
    const Row3 drhs = P + 0.5 * dt * (jk.moment_x * X + jk.moment_zeta * Z);
    const Row3 xi = dt * g_inv * drhs;
    const Row3 zeta1 = F.transpose() * Z + xi;
    const Row3 dgamma1 = G + 0.5 * dt * (jk.force_x * X + jk.force_zeta * Z) +
                         0.5 * dt * (j1.force_x * dx1 + j1.force_zeta * zeta1);
    const Row3 dPi1 = hat(F.transpose() * tr.rhs) * xi + F.transpose() * drhs +
                      0.5 * dt * (j1.moment_x * dx1 + j1.moment_zeta * zeta1);
    return stack(dx1, dgamma1, zeta1, dPi1);
}

Mat12 analytic_step1(const BodyParams& p, const GravityParams& g, StepSize h, const RigidBodyState& s,
                     const ControlSample& u_kp1) {
    const double dt = h.value();
    const StepTrace tr = step1_trace(p, g, h, s, u_kp1);
    const Mat3& F = tr.F.matrix();
    const ForceMomentJacobian j1 = force_moment_jacobian(p, g, tr.next.R, tr.next.x);
    const Mat3 g_inv = implicit_solve_derivative(F, p.nonstandard_inertia()).inverse();

    const Row3 X = select(Block::Position);
    const Row3 G = select(Block::LinearMomentum);
    const Row3 Z = select(Block::Attitude);
    const Row3 P = select(Block::AngularMomentum);

    const Row3 dx1 = X + (dt / p.mass()) * G;
    const Row3 xi = dt * g_inv * P;
    const Row3 zeta1 = F.transpose() * Z + xi;
    const Row3 dgamma1 = G + dt * (j1.force_x * dx1 + j1.force_zeta * zeta1);
    const Row3 dPi1 =
        hat(F.transpose() * s.Pi) * xi + F.transpose() * P + dt * (j1.moment_x * dx1 + j1.moment_zeta * zeta1);
    return stack(dx1, dgamma1, zeta1, dPi1);
}

RigidBodyState take_step(const BodyParams& p, const GravityParams& g, StepSize h, const RigidBodyState& s,
                         const ControlSample& u_k, const ControlSample& u_kp1, Order order) {
    return order == Order::Second ? step2(p, g, h, s, u_k, u_kp1) : step1(p, g, h, s, u_kp1);
}

Mat12 fd_step_jacobian(const BodyParams& p, const GravityParams& g, StepSize h, const RigidBodyState& s,
                       const ControlSample& u_k, const ControlSample& u_kp1, Order order) {
    const RigidBodyState nominal = take_step(p, g, h, s, u_k, u_kp1, order);
    Mat12 a;
    for (int j = 0; j < 12; ++j) {
        Vec12 e = Vec12::Zero();
        e(j) = kStateFdStep;
        const Vec12 plus = difference(take_step(p, g, h, perturb(s, e), u_k, u_kp1, order), nominal);
        const Vec12 minus = difference(take_step(p, g, h, perturb(s, -e), u_k, u_kp1, order), nominal);
        a.col(j) = (plus - minus) / (2.0 * kStateFdStep);
    }
    return a;
}

void require_spd(const Mat3& w, const char* name) {
    const bool symmetric = (w - w.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * w.norm();
    Eigen::LLT<Mat3> llt(w);
    if (!w.allFinite() || !symmetric || llt.info() != Eigen::Success) {
        throw SingularWeight(std::string(name) + " must be symmetric positive definite");
    }
}

Mat12 inverse_transpose(const Mat12& a) {
    Eigen::PartialPivLU<Mat12> lu(a.transpose());
    const double rcond = lu.rcond();
    if (!(rcond > 1e-14)) {
        std::ostringstream os;
        os << "step Jacobian is singular (rcond " << rcond << ")";
        throw SingularJacobian(os.str(), rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity());
    }
    return lu.inverse();
}

}  // namespace

RigidBodyState perturb(const RigidBodyState& s, const PerturbationVector& z) {
    RigidBodyState out;
    out.x = s.x + segment(z, Block::Position);
    out.gamma = s.gamma + segment(z, Block::LinearMomentum);
    out.R = s.R * exp_so3(segment(z, Block::Attitude));
    out.Pi = s.Pi + segment(z, Block::AngularMomentum);
    return out;
}

PerturbationVector difference(const RigidBodyState& a, const RigidBodyState& b) {
    PerturbationVector z;
    // Equal attitudes give an exactly zero zeta rather than round-off from R^T R.
    const Vec3 zeta = a.R.matrix() == b.R.matrix() ? Vec3::Zero() : log_so3(b.R.transpose() * a.R);
    z << a.x - b.x, a.gamma - b.gamma, zeta, a.Pi - b.Pi;
    return z;
}

Mat12 step_jacobian(const BodyParams& p, const GravityParams& g, StepSize h, const RigidBodyState& s,
                    const ControlSample& u_k, const ControlSample& u_kp1, Order order, JacobianMethod method) {
    if (method == JacobianMethod::FiniteDifference) return fd_step_jacobian(p, g, h, s, u_k, u_kp1, order);
    return order == Order::Second ? analytic_step2(p, g, h, s, u_k, u_kp1) : analytic_step1(p, g, h, s, u_kp1);
}

Mat12 control_injection(StepSize h, const Mat3& W_f, const Mat3& W_m) {
    require_spd(W_f, "W_f");
    require_spd(W_m, "W_m");
    Mat12 a = Mat12::Zero();
    a.block<3, 3>(3, 3) = -h.value() * W_f.inverse();
    a.block<3, 3>(9, 9) = -h.value() * W_m.inverse();
    return a;
}

Mat12 multiplier_state_jacobian(const BodyParams& p, const GravityParams& g, StepSize h,
                                const RigidBodyState& s, const MultiplierVector& lambda) {
    const ControlSample none;
    Mat12 out;
    for (int j = 0; j < 12; ++j) {
        Vec12 e = Vec12::Zero();
        e(j) = kStateFdStep;
        const Mat12 a_plus = step_jacobian(p, g, h, perturb(s, e), none, none, Order::First);
        const Mat12 a_minus = step_jacobian(p, g, h, perturb(s, -e), none, none, Order::First);
        out.col(j) = (a_plus - a_minus).transpose() * lambda / (2.0 * kStateFdStep);
    }
    return out;
}

Mat12 propagate_phi(std::span<const Mat12> jacobians) {
    if (jacobians.empty()) throw std::invalid_argument("propagate_phi: empty Jacobian sequence");
    Mat12 phi = Mat12::Identity();
    for (const Mat12& a : jacobians) phi = a * phi;
    return phi;
}

Eigen::Matrix<double, 12, 6> momentum_columns(const Mat12& phi) {
    Eigen::Matrix<double, 12, 6> out;
    out << phi.middleCols<3>(static_cast<int>(Block::LinearMomentum)),
        phi.middleCols<3>(static_cast<int>(Block::AngularMomentum));
    return out;
}

TransitionMatrices propagate_psi(const BodyParams& p, const GravityParams& g, StepSize h,
                                 std::span<const RigidBodyState> states,
                                 std::span<const MultiplierVector> multipliers, const Mat3& W_f,
                                 const Mat3& W_m) {
    if (states.size() < 2 || multipliers.size() + 1 != states.size()) {
        throw std::invalid_argument("propagate_psi: need states s_0..s_N and multipliers lambda_0..lambda_{N-1}");
    }
    const std::size_t n = multipliers.size();
    const ControlSample none;
    const Mat12 a12 = control_injection(h, W_f, W_m);

    std::vector<Mat12> a(n + 1);
    for (std::size_t k = 0; k <= n; ++k) a[k] = step_jacobian(p, g, h, states[k], none, none, Order::First);

    TransitionMatrices out{Mat12::Identity(), Mat24::Identity()};
    for (std::size_t k = 0; k < n; ++k) {
        const Mat12 a_next_inv_t = inverse_transpose(a[k + 1]);
        // lambda_{k+1}; the last one is only needed for dlambda_N.
        const MultiplierVector lambda_next = k + 1 < n ? multipliers[k + 1] : MultiplierVector(a_next_inv_t * multipliers[k]);
        const Mat12 a21 = multiplier_state_jacobian(p, g, h, states[k + 1], lambda_next);

        Mat24 step;
        step.topLeftCorner<12, 12>() = a[k];
        step.topRightCorner<12, 12>() = a12;
        step.bottomLeftCorner<12, 12>() = -a_next_inv_t * a21 * a[k];
        step.bottomRightCorner<12, 12>() = a_next_inv_t * (Mat12::Identity() - a21 * a12);
        out.psi = step * out.psi;
        out.phi = a[k] * out.phi;
    }
    return out;
}

PerturbationVector boundary_error(const RigidBodyState& state, const RigidBodyState& desired) {
    return difference(desired, state);
}

}  // namespace se3ocp
