#pragma once

#include <span>

#include "se3ocp/dynamics.hpp"

namespace se3ocp {

using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat12 = Eigen::Matrix<double, 12, 12>;
using Vec24 = Eigen::Matrix<double, 24, 1>;
using Mat24 = Eigen::Matrix<double, 24, 24>;

/// z = [dx; dgamma; zeta; dPi], with the attitude perturbed as R exp(zeta).
using PerturbationVector = Vec12;
/// lambda = [lambda1; lambda2; lambda3; lambda4], paired with z.
using MultiplierVector = Vec12;

/// Offsets of the 3-blocks inside a PerturbationVector.
enum class Block : int { Position = 0, LinearMomentum = 3, Attitude = 6, AngularMomentum = 9 };

inline Mat3 block(const Mat12& m, Block row, Block col) {
    return m.block<3, 3>(static_cast<int>(row), static_cast<int>(col));
}

inline Vec3 segment(const Vec12& v, Block b) { return v.segment<3>(static_cast<int>(b)); }

/// s (+) z: additive in x, gamma, Pi; R -> R exp(zeta).
RigidBodyState perturb(const RigidBodyState& s, const PerturbationVector& z);

/// a (-) b, the inverse of perturb: perturb(b, difference(a, b)) == a.
PerturbationVector difference(const RigidBodyState& a, const RigidBodyState& b);

enum class JacobianMethod { Analytic, FiniteDifference };

/// Default central-difference step in perturbation coordinates.
inline constexpr double kStateFdStep = 1e-6;

/// Jacobian A_k of one integrator step in perturbation coordinates,
/// z_{k+1} = A_k z_k, with the controls held fixed.
///
/// The analytic form follows the constrained variation
/// xi_k = -F_k^T zeta_k + zeta_{k+1} of the relative rotation; the finite
/// difference form perturbs the full nonlinear step. u_k is ignored for
/// Order::First.
Mat12 step_jacobian(const BodyParams& p, const GravityParams& g, StepSize h, const RigidBodyState& s,
                    const ControlSample& u_k, const ControlSample& u_kp1, Order order,
                    JacobianMethod method = JacobianMethod::Analytic);

/// -h diag[0, W_f^-1, 0, W_m^-1]. Throws SingularWeight unless both weights
/// are symmetric positive definite.
Mat12 control_injection(StepSize h, const Mat3& W_f, const Mat3& W_m);

/// d(A^T(s) lambda)/dz at s for the first order step, by central differences
/// of the analytic A in the perturbed point's own coordinates.
Mat12 multiplier_state_jacobian(const BodyParams& p, const GravityParams& g, StepSize h,
                                const RigidBodyState& s, const MultiplierVector& lambda);

/// A_{N-1} ... A_1 A_0. Throws std::invalid_argument on an empty sequence.
Mat12 propagate_phi(std::span<const Mat12> jacobians);

/// Columns of Phi multiplying (dgamma_0, dPi_0), i.e. [Phi^{i2} Phi^{i4}].
Eigen::Matrix<double, 12, 6> momentum_columns(const Mat12& phi);

struct TransitionMatrices {
    /// Product of the plain step Jacobians along the nominal.
    Mat12 phi;
    /// Maps [z_0; dlambda_0] to [z_N; dlambda_N].
    Mat24 psi;

    Mat12 psi11() const { return psi.topLeftCorner<12, 12>(); }
    Mat12 psi12() const { return psi.topRightCorner<12, 12>(); }
    Mat12 psi21() const { return psi.bottomLeftCorner<12, 12>(); }
    Mat12 psi22() const { return psi.bottomRightCorner<12, 12>(); }
};

/// Coupled state/multiplier sensitivity along a first order extremal.
///
/// states holds s_0..s_N and multipliers lambda_0..lambda_{N-1}. The
/// backward multiplier linearization
///   dlambda_k = A21_{k+1} z_{k+1} + A_{k+1}^T dlambda_{k+1}
/// is turned into the forward recursion
///   dlambda_{k+1} = A_{k+1}^{-T} (dlambda_k - A21_{k+1} z_{k+1})
/// and composed with z_{k+1} = A_k z_k + A12 dlambda_k.
TransitionMatrices propagate_psi(const BodyParams& p, const GravityParams& g, StepSize h,
                                 std::span<const RigidBodyState> states,
                                 std::span<const MultiplierVector> multipliers, const Mat3& W_f,
                                 const Mat3& W_m);

/// Desired-minus-actual terminal error:
/// [x_d - x; gamma_d - gamma; log(R^T R_d); Pi_d - Pi].
PerturbationVector boundary_error(const RigidBodyState& state, const RigidBodyState& desired);

}  // namespace se3ocp
