#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "se3ocp/dynamics.hpp"
#include "se3ocp/errors.hpp"
#include "se3ocp/linearize.hpp"
#include "test_support.hpp"

using namespace se3ocp;
using se3ocp::testing::circular_dumbbell_state;
using se3ocp::testing::Gen;
using se3ocp::testing::generic_dumbbell_state;
using se3ocp::testing::kMu;
using se3ocp::testing::kPi;
using se3ocp::testing::kTwoPi;

namespace {

const GravityParams kGravity{kMu};
const GravityParams kNoGravity{0.0};

BodyParams point_mass() { return BodyParams::point_mass(1.0, Vec3(1.0, 2.0, 3.0).asDiagonal()); }

RigidBodyState circular_point_mass(double mu) {
    RigidBodyState s;
    s.x = Vec3(1, 0, 0);
    s.gamma = Vec3(0, std::sqrt(mu), 0);
    return s;
}

Trajectory coast(const BodyParams& p, const GravityParams& g, double h, const RigidBodyState& s0, int n,
                 Order order) {
    const std::vector<ControlSample> u(order == Order::Second ? n + 1 : n);
    return simulate(p, g, StepSize(h), s0, u, order);
}

double state_error(const RigidBodyState& a, const RigidBodyState& b) { return difference(a, b).norm(); }

}  // namespace

TEST(BodyParams, NonstandardInertiaAndDumbbellGeometry) {
    const BodyParams p = BodyParams::dumbbell(1.0, 0.02, 0.005);
    const Mat3& J = p.inertia();
    EXPECT_EQ(p.nonstandard_inertia(), 0.5 * J.trace() * Mat3::Identity() - J);
    EXPECT_DOUBLE_EQ(J(0, 0), 1e-5);
    EXPECT_DOUBLE_EQ(J(1, 1), 1e-5 + 1e-4);
    EXPECT_DOUBLE_EQ(J(2, 2), 1e-5 + 1e-4);
    ASSERT_EQ(p.sphere_offsets().size(), 2u);
    EXPECT_EQ(p.sphere_offsets()[0], Vec3(0.01, 0, 0));
}

TEST(BodyParams, RejectsInvalidInertia) {
    EXPECT_THROW(BodyParams(1.0, Vec3(1, -1, 1).asDiagonal(), {Vec3::Zero()}), std::invalid_argument);
    Mat3 asym = Mat3::Identity();
    asym(0, 1) = 0.1;
    EXPECT_THROW(BodyParams(1.0, asym, {Vec3::Zero()}), std::invalid_argument);
    EXPECT_THROW(BodyParams(0.0, Mat3::Identity(), {Vec3::Zero()}), std::invalid_argument);
    EXPECT_THROW(StepSize(-0.1), std::invalid_argument);
}

TEST(Potential, DumbbellDirectSubstitution) {
    const BodyParams p = BodyParams::dumbbell(1.0, 0.02, 0.005);
    const double u = potential_energy(p, kGravity, Rotation::identity(), Vec3(1, 0, 0));
    EXPECT_NEAR(u, -(kMu / 2.0) * (1.0 / 1.01 + 1.0 / 0.99), 1e-13);
}

TEST(Potential, PointMassScalesAsInverseDistance) {
    const BodyParams p = point_mass();
    const double u1 = potential_energy(p, kGravity, Rotation::identity(), Vec3(0.3, -0.7, 0.5));
    const double u2 = potential_energy(p, kGravity, Rotation::identity(), Vec3(0.6, -1.4, 1.0));
    EXPECT_NEAR(u2, 0.5 * u1, 1e-14 * std::abs(u1));
}

TEST(Potential, HalfTurnAboutPositionAxisSwapsSpheres) {
    const BodyParams p = BodyParams::dumbbell();
    // R rotates by pi about e3 and x lies on e3: R rho^1 = rho^2.
    const Rotation R = exp_so3(Vec3(0, 0, kPi));
    const Vec3 x(0, 0, 1.5);
    const double direct = -(kMu / 2.0) * 2.0 / std::sqrt(1.5 * 1.5 + 0.01 * 0.01);
    EXPECT_NEAR(potential_energy(p, kGravity, R, x), potential_energy(p, kGravity, Rotation::identity(), x), 1e-13);
    EXPECT_NEAR(potential_energy(p, kGravity, R, x), direct, 1e-13);
}

TEST(Potential, SingularAtCenter) {
    const BodyParams p = point_mass();
    EXPECT_THROW(potential_energy(p, kGravity, Rotation::identity(), Vec3::Zero()), SingularPotential);
    EXPECT_THROW(force_moment(p, kGravity, Rotation::identity(), Vec3(1e-10, 0, 0)), SingularPotential);
}

TEST(ForceMoment, KeplerLimit) {
    const ForceMoment fm = force_moment(point_mass(), kGravity, Rotation::identity(), Vec3(1, 0, 0));
    EXPECT_LE((fm.force - Vec3(-kMu, 0, 0)).norm(), 1e-13);
    EXPECT_EQ(fm.moment, Vec3::Zero());
}

TEST(ForceMoment, CollinearDumbbellHasNoTorque) {
    const ForceMoment fm = force_moment(BodyParams::dumbbell(), kGravity, Rotation::identity(), Vec3(1, 0, 0));
    EXPECT_LE(fm.moment.norm(), 1e-18);
    EXPECT_NEAR(fm.force.x(), -(kMu / 2.0) * (1.0 / (1.01 * 1.01) + 1.0 / (0.99 * 0.99)), 1e-12);
}

TEST(ForceMoment, MatchesFiniteDifferencesOfPotential) {
    const BodyParams p = BodyParams::dumbbell(1.0, 0.3, 0.05);  // long arm so the torque is sizeable
    Gen gen(11);
    const double eps = 1e-6;
    for (int trial = 0; trial < 50; ++trial) {
        const Rotation R = gen.rotation();
        const Vec3 x = gen.unit() * gen.uniform(0.8, 2.0);
        const ForceMoment fm = force_moment(p, kGravity, R, x);
        Vec3 f_fd, m_fd;
        for (int i = 0; i < 3; ++i) {
            Vec3 e = Vec3::Zero();
            e(i) = eps;
            f_fd(i) = -(potential_energy(p, kGravity, R, x + e) - potential_energy(p, kGravity, R, x - e)) / (2 * eps);
            m_fd(i) = -(potential_energy(p, kGravity, R * exp_so3(e), x) -
                        potential_energy(p, kGravity, R * exp_so3(-e), x)) /
                      (2 * eps);
        }
        EXPECT_LE((fm.force - f_fd).norm(), 1e-6 * fm.force.norm());
        EXPECT_LE((fm.moment - m_fd).norm(), 1e-6 * std::max(fm.moment.norm(), 1e-3));
    }
}

TEST(ForceMoment, JacobianMatchesFiniteDifferences) {
    const BodyParams p = BodyParams::dumbbell(1.0, 0.3, 0.05);
    Gen gen(12);
    const double eps = 1e-6;
    for (int trial = 0; trial < 20; ++trial) {
        const Rotation R = gen.rotation();
        const Vec3 x = gen.unit() * gen.uniform(0.8, 2.0);
        const ForceMomentJacobian jac = force_moment_jacobian(p, kGravity, R, x);
        for (int i = 0; i < 3; ++i) {
            Vec3 e = Vec3::Zero();
            e(i) = eps;
            const ForceMoment xp = force_moment(p, kGravity, R, x + e), xm = force_moment(p, kGravity, R, x - e);
            const ForceMoment zp = force_moment(p, kGravity, R * exp_so3(e), x);
            const ForceMoment zm = force_moment(p, kGravity, R * exp_so3(-e), x);
            EXPECT_LE((jac.force_x.col(i) - (xp.force - xm.force) / (2 * eps)).norm(), 1e-6 * jac.force_x.norm());
            EXPECT_LE((jac.moment_x.col(i) - (xp.moment - xm.moment) / (2 * eps)).norm(),
                      1e-6 * jac.moment_x.norm());
            EXPECT_LE((jac.force_zeta.col(i) - (zp.force - zm.force) / (2 * eps)).norm(),
                      1e-6 * jac.force_zeta.norm());
            EXPECT_LE((jac.moment_zeta.col(i) - (zp.moment - zm.moment) / (2 * eps)).norm(),
                      1e-6 * jac.moment_zeta.norm());
        }
    }
}

TEST(ForceMoment, TotalTorqueAboutOriginVanishes) {
    const BodyParams p = BodyParams::dumbbell(1.0, 0.3, 0.05);
    Gen gen(13);
    for (int trial = 0; trial < 100; ++trial) {
        const Rotation R = gen.rotation();
        const Vec3 x = gen.unit() * gen.uniform(0.8, 2.0);
        const ForceMoment fm = force_moment(p, kGravity, R, x);
        EXPECT_LE((x.cross(fm.force) + R * fm.moment).norm(), 1e-13);
    }
}

TEST(RelativeRotation, ZeroMomentumGivesIdentity) {
    const Rotation F = solve_relative_rotation(BodyParams::dumbbell(), StepSize(1e-3), Vec3::Zero());
    EXPECT_EQ(F.matrix(), Mat3::Identity());
}

TEST(RelativeRotation, PrincipalAxisClosedForm) {
    const BodyParams p(1.0, Vec3(2.0, 3.0, 4.0).asDiagonal(), {Vec3::Zero()});
    const StepSize h(0.1);
    const double pi1 = 15.0;
    const Rotation F = solve_relative_rotation(p, h, Vec3(pi1, 0, 0));
    // vee(F J_d - J_d F^T) = sin(theta) J1 e1 for F = exp(theta e1).
    const double theta = std::asin(h.value() * pi1 / 2.0);
    EXPECT_LE((F.matrix() - exp_so3(Vec3(theta, 0, 0)).matrix()).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LE(relative_rotation_residual(p, h, Vec3(pi1, 0, 0), F), 1e-13);
}

TEST(RelativeRotation, ResidualPropertyForRandomInputs) {
    Gen gen(21);
    for (int trial = 0; trial < 1000; ++trial) {
        const Rotation Q = gen.rotation();
        const Vec3 d(gen.uniform(0.5, 3.0), gen.uniform(0.5, 3.0), gen.uniform(0.5, 3.0));
        const Mat3 J = Q.matrix() * d.asDiagonal() * Q.matrix().transpose();
        const BodyParams p(1.0, 0.5 * (J + J.transpose()), {Vec3::Zero()});
        const StepSize h(gen.uniform(0.01, 0.2));
        // Scale rhs into the solvability margin h |J^-1 rhs| < 1.
        Vec3 rhs = gen.vec();
        rhs *= gen.uniform(0.0, 0.95) / (h.value() * (p.inertia_inverse() * rhs).norm());
        const Rotation F = solve_relative_rotation(p, h, rhs);
        EXPECT_LE(relative_rotation_residual(p, h, rhs, F), 1e-13 * std::max(1.0, h.value() * rhs.norm()));
    }
}

TEST(RelativeRotation, RejectsStepOutsideMargin) {
    const BodyParams p(1.0, Mat3::Identity(), {Vec3::Zero()});
    EXPECT_THROW(solve_relative_rotation(p, StepSize(1.0), Vec3(2.0, 0, 0)), StepTooLarge);
}

TEST(Step2, FreeBodyPrincipalSpin) {
    const BodyParams p = point_mass();
    RigidBodyState s;
    s.x = Vec3(0.1, 0.2, 0.3);
    s.gamma = Vec3(0.5, -0.25, 1.0);
    s.Pi = Vec3(0, 6.0, 0);
    const double h = 0.01;
    const Trajectory traj = coast(p, kNoGravity, h, s, 500, Order::Second);
    for (std::size_t k = 0; k < traj.size(); ++k) {
        EXPECT_NEAR(traj[k].Pi.norm(), 6.0, 1e-14);
        EXPECT_LE((traj[k].x - (s.x + (k * h) * s.gamma)).norm(), 1e-13);
    }
    // Pure spin about e2; each step turns by asin(h Pi_2 / J_2).
    const Rotation expected = exp_so3(Vec3(0, std::remainder(500 * std::asin(h * 6.0 / 2.0), 2 * kPi), 0));
    EXPECT_LE((traj.back().R.matrix() - expected.matrix()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Step2, TimeReversible) {
    const BodyParams p = BodyParams::dumbbell(1.0, 0.3, 0.05);
    const RigidBodyState s = generic_dumbbell_state(p, kMu);
    const ControlSample none;
    const StepSize h(1e-3);
    RigidBodyState s1 = step2(p, kGravity, h, s, none, none);
    s1.Pi = -s1.Pi;
    s1.gamma = -s1.gamma;
    RigidBodyState back = step2(p, kGravity, h, s1, none, none);
    back.Pi = -back.Pi;
    back.gamma = -back.gamma;
    EXPECT_LE(state_error(back, s), 1e-12);
}

TEST(Step2, KeplerCircularOrbitSecondOrder) {
    const BodyParams p = point_mass();
    const RigidBodyState s0 = circular_point_mass(kMu);
    double err[2];
    for (int i = 0; i < 2; ++i) {
        const int n = 500 << i;
        err[i] = (coast(p, kGravity, 1.0 / n, s0, n, Order::Second).back().x - s0.x).norm();
    }
    EXPECT_LT(err[0], 1e-3);
    EXPECT_GT(err[0] / err[1], 3.5);
    EXPECT_LT(err[0] / err[1], 4.5);
}

TEST(Step2, SecondOrderOnGenericDumbbell) {
    const BodyParams p = BodyParams::dumbbell(1.0, 0.3, 0.05);
    const RigidBodyState s0 = generic_dumbbell_state(p, kMu);
    const double horizon = 0.2;
    const RigidBodyState ref = coast(p, kGravity, horizon / 6400, s0, 6400, Order::Second).back();
    const double e1 = state_error(coast(p, kGravity, horizon / 100, s0, 100, Order::Second).back(), ref);
    const double e2 = state_error(coast(p, kGravity, horizon / 200, s0, 200, Order::Second).back(), ref);
    EXPECT_GT(e1 / e2, 3.5);
    EXPECT_LT(e1 / e2, 4.5);
}

TEST(Step1, AgreesWithStep2ToSecondOrderPerStep) {
    const BodyParams p = BodyParams::dumbbell(1.0, 0.3, 0.05);
    const RigidBodyState s = generic_dumbbell_state(p, kMu);
    const ControlSample none;
    double gap[2];
    for (int i = 0; i < 2; ++i) {
        const StepSize h(1e-3 / (1 << i));
        gap[i] = state_error(step1(p, kGravity, h, s, none), step2(p, kGravity, h, s, none, none));
    }
    EXPECT_GT(gap[0] / gap[1], 3.5);
    EXPECT_LT(gap[0] / gap[1], 4.5);
}

TEST(Step1, FreeBodyPrincipalSpin) {
    RigidBodyState s;
    s.x = Vec3(1, 0, 0);
    s.Pi = Vec3(0, 0, 9.0);
    const Trajectory traj = coast(point_mass(), kNoGravity, 0.01, s, 300, Order::First);
    for (const RigidBodyState& st : traj) EXPECT_NEAR(st.Pi.norm(), 9.0, 1e-14);
}

TEST(Step1, FirstOrderConvergence) {
    const BodyParams p = BodyParams::dumbbell(1.0, 0.3, 0.05);
    const RigidBodyState s0 = generic_dumbbell_state(p, kMu);
    const double horizon = 0.2;
    const RigidBodyState ref = coast(p, kGravity, horizon / 6400, s0, 6400, Order::Second).back();
    const double e1 = state_error(coast(p, kGravity, horizon / 200, s0, 200, Order::First).back(), ref);
    const double e2 = state_error(coast(p, kGravity, horizon / 400, s0, 400, Order::First).back(), ref);
    EXPECT_GT(e1 / e2, 1.8);
    EXPECT_LT(e1 / e2, 2.2);
}

TEST(Simulate, ZeroStepsReturnsInitialState) {
    const RigidBodyState s0 = circular_point_mass(kMu);
    const std::vector<ControlSample> one(1);
    EXPECT_EQ(simulate(point_mass(), kGravity, StepSize(0.01), s0, one, Order::Second).size(), 1u);
    EXPECT_EQ(simulate(point_mass(), kGravity, StepSize(0.01), s0, {}, Order::First).size(), 1u);
}

TEST(Simulate, DeterministicWithControls) {
    const BodyParams p = BodyParams::dumbbell();
    const RigidBodyState s0 = circular_dumbbell_state(p, kMu);
    Gen gen(31);
    std::vector<ControlSample> u(201);
    for (ControlSample& c : u) c = {gen.vec(0.5), gen.vec(1e-4)};
    const Trajectory a = simulate(p, kGravity, StepSize(1e-3), s0, u, Order::Second);
    const Trajectory b = simulate(p, kGravity, StepSize(1e-3), s0, u, Order::Second);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a[k].x, b[k].x);
        EXPECT_EQ(a[k].gamma, b[k].gamma);
        EXPECT_EQ(a[k].Pi, b[k].Pi);
        EXPECT_EQ(a[k].R.matrix(), b[k].R.matrix());
    }
}

TEST(Simulate, KeplerRadiusStaysInSecondOrderBand) {
    const BodyParams p = point_mass();
    const RigidBodyState s0 = circular_point_mass(kMu);
    const int per_orbit = 200;
    const double h = 1.0 / per_orbit;
    const Trajectory traj = coast(p, kGravity, h, s0, 100 * per_orbit, Order::Second);
    double band = 0.0;
    for (const RigidBodyState& s : traj) band = std::max(band, std::abs(s.x.norm() - 1.0));
    // O(h^2) with the orbital rate as the scale: (2 pi h)^2 ~ 1e-3.
    EXPECT_LT(band, std::pow(kTwoPi * h, 2));
}

TEST(Conserved, RestingPointMassEnergy) {
    RigidBodyState s;
    s.x = Vec3(1, 0, 0);
    const ConservedQuantities c = conserved_quantities(point_mass(), kGravity, s);
    EXPECT_NEAR(c.energy, -kMu, 1e-13);
    EXPECT_EQ(c.angular_momentum, Vec3::Zero());
}

TEST(Conserved, FreeBodySpatialAngularMomentum) {
    const BodyParams p(1.0, Vec3(1.0, 2.0, 3.5).asDiagonal(), {Vec3::Zero()});
    RigidBodyState s;
    s.Pi = Vec3(1.0, 0.5, -0.7);  // generic: the body tumbles
    const Trajectory traj = coast(p, kNoGravity, 0.01, s, 2000, Order::Second);
    const Vec3 pi0 = traj.front().R * traj.front().Pi;
    for (const RigidBodyState& st : traj) EXPECT_LE((st.R * st.Pi - pi0).norm(), 1e-12);
}

TEST(Conserved, DumbbellTotalAngularMomentum) {
    const BodyParams p = BodyParams::dumbbell();
    const RigidBodyState s0 = generic_dumbbell_state(p, kMu);
    const Trajectory traj = coast(p, kGravity, 1e-3, s0, 10000, Order::Second);
    const Vec3 l0 = conserved_quantities(p, kGravity, s0).angular_momentum;
    double drift = 0.0;
    for (const RigidBodyState& s : traj) {
        drift = std::max(drift, (conserved_quantities(p, kGravity, s).angular_momentum - l0).norm());
    }
    EXPECT_LE(drift, 1e-10);
    EXPECT_LE(orthonormality_error(traj.back().R.matrix()), 1e-11);
}
