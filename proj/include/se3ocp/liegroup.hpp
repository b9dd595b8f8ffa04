#pragma once

#include <Eigen/Dense>

namespace se3ocp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Maximum |m + m^T|/2 entry accepted by vee().
inline constexpr double kSkewTolerance = 1e-10;
/// Maximum ||R^T R - I||_F accepted when constructing a Rotation.
inline constexpr double kOrthonormalityTolerance = 1e-10;

/// hat map: hat(v) * w == v.cross(w).
Mat3 hat(const Vec3& v);

/// Inverse of hat(). Throws NotSkew if the symmetric part exceeds kSkewTolerance.
/// Returns the vector of the skew part of m.
Vec3 vee(const Mat3& m);

/// ||R^T R - I||_F
double orthonormality_error(const Mat3& r);

/// An element of SO(3).
///
/// Construction validates orthonormality and orientation but never repairs
/// the matrix: a drifting integrator must show up as an error, not be hidden.
class Rotation {
public:
    Rotation() : m_(Mat3::Identity()) {}

    /// Throws NotRotation unless ||R^T R - I||_F <= kOrthonormalityTolerance and det(R) > 0.
    explicit Rotation(const Mat3& m);

    static Rotation identity() { return Rotation(); }

    const Mat3& matrix() const { return m_; }
    Rotation transpose() const;
    Rotation inverse() const { return transpose(); }

    double operator()(int i, int j) const { return m_(i, j); }

    Rotation operator*(const Rotation& other) const;
    Vec3 operator*(const Vec3& v) const { return m_ * v; }

private:
    struct Unchecked {};
    Rotation(const Mat3& m, Unchecked) : m_(m) {}

    friend Rotation exp_so3(const Vec3& v);

    Mat3 m_;
};

/// Rodrigues formula; exp_so3(0) == I.
Rotation exp_so3(const Vec3& v);

/// Principal logarithm; the result has norm in [0, pi].
/// Near theta = 0 a series is used, near theta = pi the axis comes from
/// the dominant diagonal of the symmetric part.
Vec3 log_so3(const Rotation& r);

/// Inverse left Jacobian: log(exp(d) exp(v)) = v + left_jacobian_inverse(v) d + O(|d|^2).
/// Valid for |v| < pi.
Mat3 left_jacobian_inverse(const Vec3& v);

}  // namespace se3ocp
