#include "se3ocp/dynamics.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "se3ocp/errors.hpp"

namespace se3ocp {

namespace {

constexpr double kMinSphereDistance = 1e-9;
constexpr int kMaxRotationIterations = 50;
constexpr double kRotationFdStep = 1e-7;
constexpr double kRotationResidualTolerance = 1e-13;
// Newton stops once the update is at round-off level.
constexpr double kRotationStepTolerance = 1e-14;
constexpr double kSolvabilityMargin = 1.0;

double sphere_weight(const BodyParams& p, const GravityParams& g) {
    return g.mu * p.mass() / static_cast<double>(p.sphere_offsets().size());
}

Vec3 sphere_position(const Rotation& R, const Vec3& x, const Vec3& rho) {
    const Vec3 d = x + R * rho;
    const double r = d.norm();
    if (!(r >= kMinSphereDistance)) {
        std::ostringstream os;
        os << "gravity potential is singular: sphere at distance " << r << " from the center";
        throw SingularPotential(os.str());
    }
    return d;
}

Vec3 implicit_residual(const Mat3& jd, const Mat3& F, const Vec3& target) {
    const Mat3 a = F * jd;
    const Mat3 skew = a - a.transpose();
    return Vec3(0.5 * (skew(2, 1) - skew(1, 2)), 0.5 * (skew(0, 2) - skew(2, 0)),
                0.5 * (skew(1, 0) - skew(0, 1))) -
           target;
}

}  // namespace

BodyParams::BodyParams(double mass, const Mat3& inertia, std::vector<Vec3> sphere_offsets)
    : mass_(mass), inertia_(inertia), rho_(std::move(sphere_offsets)) {
    if (!(mass > 0.0) || !std::isfinite(mass)) throw std::invalid_argument("body mass must be positive");
    if (rho_.empty()) throw std::invalid_argument("body needs at least one sphere");
    if (!inertia.allFinite() || (inertia - inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12 * inertia.norm()) {
        throw std::invalid_argument("inertia must be symmetric");
    }
    Eigen::LLT<Mat3> llt(inertia);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("inertia must be positive definite");
    inertia_inv_ = inertia.inverse();
    jd_ = 0.5 * inertia.trace() * Mat3::Identity() - inertia;
}

BodyParams BodyParams::dumbbell(double mass, double length, double sphere_radius) {
    // Each sphere: (2/5)(m/2) r^2 about its own center; the rod adds (m/2)(l/2)^2
    // per sphere about the transverse axes.
    const double own = 0.4 * mass * sphere_radius * sphere_radius;
    const double axial = own;
    const double transverse = own + 0.25 * mass * length * length;
    Mat3 J = Vec3(axial, transverse, transverse).asDiagonal();
    return BodyParams(mass, J, {Vec3(0.5 * length, 0, 0), Vec3(-0.5 * length, 0, 0)});
}

BodyParams BodyParams::point_mass(double mass, const Mat3& inertia) {
    return BodyParams(mass, inertia, {Vec3::Zero(), Vec3::Zero()});
}

void GravityParams::validate() const {
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw std::invalid_argument("gravity mu must be non-negative");
}

StepSize::StepSize(double h) : h_(h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("step size must be positive");
}

double potential_energy(const BodyParams& p, const GravityParams& g, const Rotation& R, const Vec3& x) {
    const double c = sphere_weight(p, g);
    double u = 0.0;
    for (const Vec3& rho : p.sphere_offsets()) u -= c / sphere_position(R, x, rho).norm();
    return u;
}

ForceMoment force_moment(const BodyParams& p, const GravityParams& g, const Rotation& R, const Vec3& x) {
    if (g.mu == 0.0) return {Vec3::Zero(), Vec3::Zero()};
    const double c = sphere_weight(p, g);
    Vec3 f = Vec3::Zero();
    Mat3 dU_dR = Mat3::Zero();
    for (const Vec3& rho : p.sphere_offsets()) {
        const Vec3 d = sphere_position(R, x, rho);
        const double r = d.norm();
        const Vec3 w = (c / (r * r * r)) * d;
        f -= w;
        dU_dR += w * rho.transpose();
    }
    Vec3 M = Vec3::Zero();
    for (int i = 0; i < 3; ++i) {
        M += Vec3(R.matrix().row(i)).cross(Vec3(dU_dR.row(i)));
    }
    return {f, M};
}

ForceMomentJacobian force_moment_jacobian(const BodyParams& p, const GravityParams& g, const Rotation& R,
                                          const Vec3& x) {
    ForceMomentJacobian jac{Mat3::Zero(), Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};
    if (g.mu == 0.0) return jac;
    const double c = sphere_weight(p, g);
    const Mat3& Rm = R.matrix();
    for (const Vec3& rho : p.sphere_offsets()) {
        const Vec3 d = sphere_position(R, x, rho);
        const double r = d.norm();
        const double r3 = r * r * r;
        const Vec3 fq = (-c / r3) * d;
        // d f_q / d d
        const Mat3 K = (-c / r3) * (Mat3::Identity() - (3.0 / (r * r)) * d * d.transpose());
        const Mat3 rho_hat = hat(rho);
        // d d_q = dx - R hat(rho) zeta
        const Mat3 dd_dzeta = -Rm * rho_hat;
        jac.force_x += K;
        jac.force_zeta += K * dd_dzeta;
        jac.moment_x += rho_hat * Rm.transpose() * K;
        jac.moment_zeta += rho_hat * (hat(Rm.transpose() * fq) + Rm.transpose() * K * dd_dzeta);
    }
    return jac;
}

Rotation solve_relative_rotation(const BodyParams& p, StepSize h, const Vec3& rhs) {
    const Mat3& jd = p.nonstandard_inertia();
    const Vec3 target = h.value() * rhs;
    const Vec3 phi0 = p.inertia_inverse() * target;
    if (!(phi0.norm() < kSolvabilityMargin)) {
        std::ostringstream os;
        os << "step too large: h |J^-1 Pi| = " << phi0.norm() << " >= " << kSolvabilityMargin;
        throw StepTooLarge(os.str());
    }
    const double tol = kRotationResidualTolerance * std::max(1.0, target.norm());
    auto residual = [&](const Vec3& phi) { return implicit_residual(jd, exp_so3(phi).matrix(), target); };

    // About a principal axis the exact angle is asin(|phi0|).
    Vec3 phi = phi0.norm() > 0.0 ? Vec3(std::asin(phi0.norm()) / phi0.norm() * phi0) : phi0;
    Vec3 r = residual(phi);
    if (r.norm() <= kRotationStepTolerance * std::max(1.0, target.norm())) return exp_so3(phi);
    for (int it = 0; it < kMaxRotationIterations; ++it) {
        Mat3 jac;
        for (int j = 0; j < 3; ++j) {
            Vec3 e = Vec3::Zero();
            e(j) = kRotationFdStep;
            jac.col(j) = (residual(phi + e) - residual(phi - e)) / (2.0 * kRotationFdStep);
        }
        const Vec3 full = -jac.partialPivLu().solve(r);
        if (!full.allFinite()) break;
        // Backtrack until the residual decreases; accept the full step at the round-off floor.
        Vec3 dphi = full;
        Vec3 r_new = residual(phi + dphi);
        for (int b = 0; b < 30 && r_new.norm() > r.norm() && r.norm() > tol; ++b) {
            dphi *= 0.5;
            r_new = residual(phi + dphi);
        }
        phi += dphi;
        // Done once the residual is within tolerance and Newton has either
        // converged in phi or stalled at the round-off floor.
        const bool stalled = r_new.norm() > 1e-3 * r.norm();
        r = r_new;
        if (r.norm() <= tol && (dphi.norm() <= kRotationStepTolerance || stalled)) return exp_so3(phi);
    }
    std::ostringstream os;
    os << "implicit rotation solve did not converge (residual " << r.norm() << ")";
    throw NoConvergence(os.str(), r.norm(), kMaxRotationIterations);
}

double relative_rotation_residual(const BodyParams& p, StepSize h, const Vec3& rhs, const Rotation& F) {
    return implicit_residual(p.nonstandard_inertia(), F.matrix(), h.value() * rhs).norm();
}

StepTrace step2_trace(const BodyParams& p, const GravityParams& g, StepSize h, const RigidBodyState& s,
                      const ControlSample& u_k, const ControlSample& u_kp1) {
    const double dt = h.value();
    const double m = p.mass();
    const ForceMoment fm_k = force_moment(p, g, s.R, s.x);

    const Vec3 rhs = s.Pi + 0.5 * dt * (fm_k.moment + u_k.um);
    const Rotation F = solve_relative_rotation(p, h, rhs);

    RigidBodyState next;
    next.x = s.x + (dt / m) * s.gamma + (0.5 * dt * dt / m) * (fm_k.force + u_k.uf);
    next.R = s.R * F;

    const ForceMoment fm_kp1 = force_moment(p, g, next.R, next.x);
    next.gamma = s.gamma + 0.5 * dt * (fm_k.force + u_k.uf) + 0.5 * dt * (fm_kp1.force + u_kp1.uf);
    next.Pi = F.matrix().transpose() * rhs + 0.5 * dt * (fm_kp1.moment + u_kp1.um);
    return {next, F, rhs};
}

StepTrace step1_trace(const BodyParams& p, const GravityParams& g, StepSize h, const RigidBodyState& s,
                      const ControlSample& u_kp1) {
    const double dt = h.value();
    const Rotation F = solve_relative_rotation(p, h, s.Pi);

    RigidBodyState next;
    next.x = s.x + (dt / p.mass()) * s.gamma;
    next.R = s.R * F;

    const ForceMoment fm_kp1 = force_moment(p, g, next.R, next.x);
    next.gamma = s.gamma + dt * fm_kp1.force + dt * u_kp1.uf;
    next.Pi = F.matrix().transpose() * s.Pi + dt * fm_kp1.moment + dt * u_kp1.um;
    return {next, F, s.Pi};
}

RigidBodyState step2(const BodyParams& p, const GravityParams& g, StepSize h, const RigidBodyState& s,
                     const ControlSample& u_k, const ControlSample& u_kp1) {
    return step2_trace(p, g, h, s, u_k, u_kp1).next;
}

RigidBodyState step1(const BodyParams& p, const GravityParams& g, StepSize h, const RigidBodyState& s,
                     const ControlSample& u_kp1) {
    return step1_trace(p, g, h, s, u_kp1).next;
}

Trajectory simulate(const BodyParams& p, const GravityParams& g, StepSize h, const RigidBodyState& s0,
                    std::span<const ControlSample> controls, Order order) {
    Trajectory traj;
    if (order == Order::Second) {
        if (controls.empty()) throw std::invalid_argument("second order simulation needs N+1 control samples");
        const std::size_t n = controls.size() - 1;
        traj.reserve(n + 1);
        traj.push_back(s0);
        for (std::size_t k = 0; k < n; ++k) traj.push_back(step2(p, g, h, traj.back(), controls[k], controls[k + 1]));
    } else {
        const std::size_t n = controls.size();
        traj.reserve(n + 1);
        traj.push_back(s0);
        for (std::size_t k = 0; k < n; ++k) traj.push_back(step1(p, g, h, traj.back(), controls[k]));
    }
    return traj;
}

ConservedQuantities conserved_quantities(const BodyParams& p, const GravityParams& g, const RigidBodyState& s) {
    const double kinetic =
        0.5 * s.gamma.squaredNorm() / p.mass() + 0.5 * s.Pi.dot(p.inertia_inverse() * s.Pi);
    const double potential = g.mu > 0.0 ? potential_energy(p, g, s.R, s.x) : 0.0;
    return {kinetic + potential, s.x.cross(s.gamma) + s.R * s.Pi};
}

}  // namespace se3ocp
