#pragma once

#include <span>
#include <vector>

#include "se3ocp/liegroup.hpp"

namespace se3ocp {

/// Mass properties of the rigid body and the positions of the spheres that
/// carry its mass in the gravity model (body frame).
///
/// Each of the n spheres carries m/n of the mass. A point mass is modelled
/// by spheres at the origin.
class BodyParams {
public:
    /// Throws std::invalid_argument unless mass > 0, inertia is symmetric
    /// positive definite and at least one sphere is given.
    BodyParams(double mass, const Mat3& inertia, std::vector<Vec3> sphere_offsets);

    /// Two spheres of mass m/2 and radius sphere_radius at +-(length/2) e1.
    static BodyParams dumbbell(double mass = 1.0, double length = 0.02, double sphere_radius = 0.005);

    /// Gravity acts on the center of mass only; inertia is kept for the attitude.
    static BodyParams point_mass(double mass, const Mat3& inertia);

    double mass() const { return mass_; }
    const Mat3& inertia() const { return inertia_; }
    const Mat3& inertia_inverse() const { return inertia_inv_; }
    /// J_d = tr(J)/2 I - J
    const Mat3& nonstandard_inertia() const { return jd_; }
    const std::vector<Vec3>& sphere_offsets() const { return rho_; }

private:
    double mass_;
    Mat3 inertia_;
    Mat3 inertia_inv_;
    Mat3 jd_;
    std::vector<Vec3> rho_;
};

/// Central gravity field; mu = G M of the attracting body. mu == 0 switches
/// gravity off (free body).
struct GravityParams {
    double mu = 4.0 * 3.14159265358979323846 * 3.14159265358979323846;

    /// Throws std::invalid_argument if mu is negative or not finite.
    void validate() const;
};

/// Fixed integration step, h > 0.
class StepSize {
public:
    explicit StepSize(double h);
    double value() const { return h_; }

private:
    double h_;
};

/// A point of T*SE(3): attitude, inertial position, body angular momentum,
/// inertial linear momentum.
struct RigidBodyState {
    Rotation R;
    Vec3 x = Vec3::Zero();
    Vec3 Pi = Vec3::Zero();
    Vec3 gamma = Vec3::Zero();
};

/// Control force (inertial frame) and moment (body frame) at one time index.
struct ControlSample {
    Vec3 uf = Vec3::Zero();
    Vec3 um = Vec3::Zero();
};

enum class Order { First = 1, Second = 2 };

using Trajectory = std::vector<RigidBodyState>;

struct ForceMoment {
    Vec3 force;
    Vec3 moment;
};

/// Derivatives of force and moment for the perturbation x -> x + dx, R -> R exp(zeta).
struct ForceMomentJacobian {
    Mat3 force_x;
    Mat3 force_zeta;
    Mat3 moment_x;
    Mat3 moment_zeta;
};

/// U = -(mu m / n) sum_q 1/|x + R rho_q|. Throws SingularPotential if any
/// sphere is closer than 1e-9 to the origin.
double potential_energy(const BodyParams& p, const GravityParams& g, const Rotation& R, const Vec3& x);

/// f = -dU/dx and M = sum_i r_i x u_i with r_i, u_i the rows of R and dU/dR.
ForceMoment force_moment(const BodyParams& p, const GravityParams& g, const Rotation& R, const Vec3& x);

ForceMomentJacobian force_moment_jacobian(const BodyParams& p, const GravityParams& g, const Rotation& R,
                                          const Vec3& x);

/// Solves h hat(rhs) = F J_d - J_d F^T for F in SO(3).
///
/// Newton iteration on F = exp(phi), starting from phi = h J^-1 rhs, with a
/// central-difference Jacobian and backtracking. Throws StepTooLarge if
/// h |J^-1 rhs| >= 1 (about a principal axis the solution is asin(h Pi_i / J_i))
/// and NoConvergence after 50 iterations.
Rotation solve_relative_rotation(const BodyParams& p, StepSize h, const Vec3& rhs);

/// Residual |vee(F J_d - J_d F^T) - h rhs|.
double relative_rotation_residual(const BodyParams& p, StepSize h, const Vec3& rhs, const Rotation& F);

/// One step together with the quantities the linearization needs.
struct StepTrace {
    RigidBodyState next;
    Rotation F;
    /// Momentum argument of the implicit solve (Pi_k + h/2 (M_k + u^m_k) or Pi_k).
    Vec3 rhs;
};

/// Second order integrator: u_k and u_{k+1} enter symmetrically.
StepTrace step2_trace(const BodyParams& p, const GravityParams& g, StepSize h, const RigidBodyState& s,
                      const ControlSample& u_k, const ControlSample& u_kp1);

/// First order integrator used by the optimality conditions; only u_{k+1} enters.
StepTrace step1_trace(const BodyParams& p, const GravityParams& g, StepSize h, const RigidBodyState& s,
                      const ControlSample& u_kp1);

RigidBodyState step2(const BodyParams& p, const GravityParams& g, StepSize h, const RigidBodyState& s,
                     const ControlSample& u_k, const ControlSample& u_kp1);

RigidBodyState step1(const BodyParams& p, const GravityParams& g, StepSize h, const RigidBodyState& s,
                     const ControlSample& u_kp1);

/// Iterates step1 or step2.
///
/// For Order::Second, controls holds u_0..u_N (N+1 samples); for
/// Order::First it holds u_1..u_N (N samples). The last sample of a second
/// order run is u_N and is used for the final momentum update; callers
/// decide whether it is zero. Returns N+1 states.
Trajectory simulate(const BodyParams& p, const GravityParams& g, StepSize h, const RigidBodyState& s0,
                    std::span<const ControlSample> controls, Order order);

struct ConservedQuantities {
    double energy;
    /// x cross gamma + R Pi
    Vec3 angular_momentum;
};

ConservedQuantities conserved_quantities(const BodyParams& p, const GravityParams& g, const RigidBodyState& s);

}  // namespace se3ocp
