#include "se3ocp/liegroup.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "se3ocp/errors.hpp"

namespace se3ocp {

namespace {

// Below this angle the Rodrigues and log coefficients use their series.
constexpr double kSmallAngle = 1e-4;
// Within this distance of pi, log_so3 reads the axis off the symmetric part.
constexpr double kNearPi = 1e-2;

}  // namespace

Mat3 hat(const Vec3& v) {
    Mat3 m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return m;
}

Vec3 vee(const Mat3& m) {
    const Mat3 sym = 0.5 * (m + m.transpose());
    const double asym = sym.cwiseAbs().maxCoeff();
    if (!(asym <= kSkewTolerance)) {
        std::ostringstream os;
        os << "vee: matrix is not skew-symmetric (symmetric part " << asym << ")";
        throw NotSkew(os.str());
    }
    return Vec3(0.5 * (m(2, 1) - m(1, 2)), 0.5 * (m(0, 2) - m(2, 0)), 0.5 * (m(1, 0) - m(0, 1)));
}

double orthonormality_error(const Mat3& r) {
    return (r.transpose() * r - Mat3::Identity()).norm();
}

Rotation::Rotation(const Mat3& m) : m_(m) {
    const double err = orthonormality_error(m);
    if (!(err <= kOrthonormalityTolerance) || !(m.determinant() > 0.0)) {
        std::ostringstream os;
        os << "matrix is not a rotation: ||R^T R - I||_F = " << err << ", det = " << m.determinant();
        throw NotRotation(os.str());
    }
}

Rotation Rotation::transpose() const { return Rotation(m_.transpose(), Unchecked{}); }

Rotation Rotation::operator*(const Rotation& other) const { return Rotation(m_ * other.m_); }

Rotation exp_so3(const Vec3& v) {
    const double theta2 = v.squaredNorm();
    const double theta = std::sqrt(theta2);
    double a;  // sin(theta) / theta
    double b;  // (1 - cos(theta)) / theta^2
    if (theta < kSmallAngle) {
        a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
        b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
    } else {
        a = std::sin(theta) / theta;
        b = (1.0 - std::cos(theta)) / theta2;
    }
    const Mat3 k = hat(v);
    return Rotation(Mat3::Identity() + a * k + b * (k * k), Rotation::Unchecked{});
}

Vec3 log_so3(const Rotation& r) {
    const Mat3& m = r.matrix();
    const Vec3 w(0.5 * (m(2, 1) - m(1, 2)), 0.5 * (m(0, 2) - m(2, 0)), 0.5 * (m(1, 0) - m(0, 1)));
    const double s = w.norm();                     // sin(theta)
    const double c = 0.5 * (m.trace() - 1.0);      // cos(theta)
    const double theta = std::atan2(s, c);

    if (theta < kSmallAngle) {
        const double t2 = theta * theta;
        return (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0) * w;
    }
    if (theta < std::numbers::pi - kNearPi) {
        return (theta / s) * w;
    }

    // (R + R^T)/2 = cos(theta) I + (1 - cos(theta)) a a^T
    const Mat3 aat = (0.5 * (m + m.transpose()) - c * Mat3::Identity()) / (1.0 - c);
    int i = 0;
    aat.diagonal().maxCoeff(&i);
    Vec3 axis = aat.col(i) / std::sqrt(aat(i, i));
    axis.normalize();
    if (axis.dot(w) < 0.0) axis = -axis;
    return theta * axis;
}

Mat3 left_jacobian_inverse(const Vec3& v) {
    const double theta = v.norm();
    const Mat3 s = hat(v);
    const double c = theta < kSmallAngle
                         ? 1.0 / 12.0 + theta * theta / 720.0
                         : 1.0 / (theta * theta) - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
    return Mat3::Identity() - 0.5 * s + c * s * s;
}

}  // namespace se3ocp
