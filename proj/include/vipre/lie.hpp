// Copyright 2026 The vipre Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/Dense>

namespace vipre {

using Eigen::Matrix3d;
using Eigen::Vector3d;
using Matrix5d = Eigen::Matrix<double, 5, 5>;

// Series fallback thresholds, in u = dt * |omega|.
// so3 exp/log switch at 1e-4; the time-scaled Jacobian coefficients switch
// at 0.1 because the (0.5 u^2 + cos u - 1) numerator cancels to zero digits
// below u ~ 1e-3 while the degree-6 series is exact to machine precision up
// to u ~ 0.2. Their omega-derivatives cancel harder and switch at 0.35.
inline constexpr double kSo3SeriesEps = 1e-4;
inline constexpr double kJacSeriesEps = 0.1;
inline constexpr double kJacDerivSeriesEps = 0.35;

// ======================
// so(3) hat / vee
// ======================

inline Matrix3d so3_hat(const Vector3d& v) {
  Matrix3d m;
  // clang-format off
  m <<     0, -v.z(),  v.y(),
       v.z(),      0, -v.x(),
      -v.y(),  v.x(),      0;
  // clang-format on
  return m;
}

inline Vector3d so3_vee(const Matrix3d& m) {
  return Vector3d(m(2, 1), m(0, 2), m(1, 0));
}

// ======================
// Rotation3
// ======================

/// A validated 3x3 rotation matrix. Construction through from_matrix()
/// rejects non-orthonormal input; renormalized() is the only way to repair
/// a drifted matrix and must be called explicitly.
class Rotation3 {
 public:
  Rotation3() : m_(Matrix3d::Identity()) {}

  static Rotation3 identity() { return Rotation3(); }

  static Rotation3 from_matrix(const Matrix3d& m) {
    const double ortho = (m.transpose() * m - Matrix3d::Identity())
                             .cwiseAbs()
                             .maxCoeff();
    if (ortho > 1e-9 || std::abs(m.determinant() - 1.0) > 1e-9) {
      throw std::invalid_argument(
          "Rotation3::from_matrix: input is not a rotation matrix");
    }
    return Rotation3(m, unchecked_tag{});
  }

  /// Nearest rotation in Frobenius norm (polar factor via SVD).
  static Rotation3 renormalized(const Matrix3d& m) {
    Eigen::JacobiSVD<Matrix3d> svd(m,
                                   Eigen::ComputeFullU | Eigen::ComputeFullV);
    Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0) {
      Matrix3d flip = Matrix3d::Identity();
      flip(2, 2) = -1.0;
      r = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    return Rotation3(r, unchecked_tag{});
  }

  const Matrix3d& matrix() const { return m_; }

  Rotation3 transposed() const { return Rotation3(m_.transpose(), unchecked_tag{}); }

  Rotation3 operator*(const Rotation3& o) const {
    return Rotation3(m_ * o.m_, unchecked_tag{});
  }
  Vector3d operator*(const Vector3d& v) const { return m_ * v; }

 private:
  struct unchecked_tag {};
  Rotation3(const Matrix3d& m, unchecked_tag) : m_(m) {}
  Matrix3d m_;

  friend Rotation3 so3_exp(const Vector3d&);
  friend Rotation3 so3_exp_unchecked(const Matrix3d&);
};

/// Internal: wrap a matrix known-by-construction to be a rotation.
inline Rotation3 so3_exp_unchecked(const Matrix3d& m);

// ======================
// SO(3) exp / log
// ======================

inline Rotation3 so3_exp(const Vector3d& phi) {
  const double theta2 = phi.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Matrix3d w = so3_hat(phi);
  double a;  // sin(t)/t
  double b;  // (1-cos(t))/t^2
  if (theta < kSo3SeriesEps) {
    a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
    b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  Matrix3d r = Matrix3d::Identity() + a * w + b * (w * w);
  return so3_exp_unchecked(r);
}

inline Rotation3 so3_exp_unchecked(const Matrix3d& m) {
  return Rotation3(m, Rotation3::unchecked_tag{});
}

/// Principal logarithm, |result| <= pi. Near angle pi the axis is recovered
/// from the largest diagonal entry of R + I; its sign follows the skew part
/// when that is resolvable and otherwise the largest-magnitude axis
/// component is made positive.
inline Vector3d so3_log(const Rotation3& rot) {
  const Matrix3d& r = rot.matrix();
  const Vector3d w = 0.5 * so3_vee(r - r.transpose());  // sin(theta) * axis
  const double s = w.norm();
  const double c = 0.5 * (r.trace() - 1.0);
  const double theta = std::atan2(s, c);

  if (theta < kSo3SeriesEps) {
    // theta/sin(theta) = 1 + t^2/6 + 7 t^4/360
    const double t2 = theta * theta;
    return (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0) * w;
  }
  if (theta < 3.0) {
    return (theta / s) * w;
  }
  // Near pi: the symmetric part (R + R^T)/2 - cos(t) I = (1-cos t) n n^T is
  // well conditioned; the largest diagonal entry of R + I selects the axis
  // component used for the division.
  const Matrix3d b = r + Matrix3d::Identity();
  int k = 0;
  b.diagonal().maxCoeff(&k);
  const Matrix3d sym = 0.5 * (r + r.transpose()) - c * Matrix3d::Identity();
  Vector3d n = sym.col(k) / std::sqrt(sym(k, k) * (1.0 - c));
  n.normalize();
  if (s > 1e-13) {
    if (n.dot(w) < 0) n = -n;  // match the skew part for continuity
  } else {
    int km = 0;
    n.cwiseAbs().maxCoeff(&km);
    if (n(km) < 0) n = -n;  // fixed chart at exactly pi
  }
  return theta * n;
}

// ======================
// ExtendedPose (rotation, position, velocity)
// ======================

/// Group element of the direct product structure used for inertial
/// navigation: 5x5 matrices [R p v; 0 1 0; 0 0 1] under matrix product.
struct ExtendedPose {
  Rotation3 rotation;
  Vector3d position = Vector3d::Zero();
  Vector3d velocity = Vector3d::Zero();

  static ExtendedPose identity() { return ExtendedPose{}; }

  /// Dense 5x5 form, for oracle tests and debugging only.
  Matrix5d matrix() const {
    Matrix5d m = Matrix5d::Identity();
    m.block<3, 3>(0, 0) = rotation.matrix();
    m.block<3, 1>(0, 3) = position;
    m.block<3, 1>(0, 4) = velocity;
    return m;
  }
};

inline ExtendedPose se23_compose(const ExtendedPose& a, const ExtendedPose& b) {
  return ExtendedPose{a.rotation * b.rotation,
                      a.rotation * b.position + a.position,
                      a.rotation * b.velocity + a.velocity};
}

inline ExtendedPose se23_inverse(const ExtendedPose& x) {
  const Rotation3 rt = x.rotation.transposed();
  return ExtendedPose{rt, -(rt * x.position), -(rt * x.velocity)};
}

// ==========================================================
// Time-scaled rotation integrals J1, J2 and their derivatives
// ==========================================================
//
//   J1(dt, w) = integral_0^dt exp(s w^) ds
//   J2(dt, w) = integral_0^dt (dt - s) exp(s w^) ds
//
// Closed forms (u = dt |w|):
//   J1 = dt I + (1-cos u)/|w|^2 w^ + (u - sin u)/|w|^3 (w^)^2
//   J2 = dt^2/2 I + (u - sin u)/|w|^3 w^ + (u^2/2 + cos u - 1)/|w|^4 (w^)^2

namespace detail {

struct JacCoeffs {
  double c1;  // (1-cos u)/th^2
  double c2;  // (u-sin u)/th^3
  double c4;  // (u^2/2+cos u-1)/th^4
};

inline JacCoeffs jac_coeffs(double dt, double theta) {
  const double u = dt * theta;
  JacCoeffs c;
  if (u < kJacSeriesEps) {
    const double u2 = u * u, u4 = u2 * u2, u6 = u4 * u2;
    const double d2 = dt * dt;
    c.c1 = d2 * (0.5 - u2 / 24.0 + u4 / 720.0 - u6 / 40320.0);
    c.c2 = d2 * dt * (1.0 / 6.0 - u2 / 120.0 + u4 / 5040.0 - u6 / 362880.0);
    c.c4 = d2 * d2 *
           (1.0 / 24.0 - u2 / 720.0 + u4 / 40320.0 - u6 / 3628800.0);
  } else {
    const double th2 = theta * theta;
    c.c1 = (1.0 - std::cos(u)) / th2;
    c.c2 = (u - std::sin(u)) / (th2 * theta);
    c.c4 = (0.5 * u * u + std::cos(u) - 1.0) / (th2 * th2);
  }
  return c;
}

struct JacDerivCoeffs {
  double c1pt;  // c1'(theta)/theta
  double c2pt;  // c2'(theta)/theta
  double c4pt;  // c4'(theta)/theta
};

inline JacDerivCoeffs jac_deriv_coeffs(double dt, double theta) {
  const double u = dt * theta;
  JacDerivCoeffs c;
  if (u < kJacDerivSeriesEps) {
    const double u2 = u * u, u4 = u2 * u2, u6 = u4 * u2;
    const double d2 = dt * dt, d4 = d2 * d2;
    c.c1pt = d4 * (-1.0 / 12.0 + u2 / 180.0 - u4 / 6720.0 + u6 / 453600.0);
    c.c2pt =
        d4 * dt * (-1.0 / 60.0 + u2 / 1260.0 - u4 / 60480.0 + u6 / 4989600.0);
    c.c4pt = d4 * d2 *
             (-1.0 / 360.0 + u2 / 10080.0 - u4 / 604800.0 + u6 / 59875200.0);
  } else {
    const double th2 = theta * theta;
    const double th4 = th2 * th2;
    const double cu = std::cos(u), su = std::sin(u);
    c.c1pt = (dt * su * theta - 2.0 * (1.0 - cu)) / th4;
    c.c2pt = (dt * (1.0 - cu) * theta - 3.0 * (u - su)) / (th4 * theta);
    c.c4pt = ((dt * dt * theta - dt * su) * theta -
              4.0 * (0.5 * u * u + cu - 1.0)) /
             (th4 * th2);
  }
  return c;
}

}  // namespace detail

/// Both rotation integrals for one constant-rate step.
inline void right_jacobians(double dt, const Vector3d& omega, Matrix3d* j1,
                            Matrix3d* j2) {
  if (!(dt > 0)) throw std::invalid_argument("right_jacobians: dt must be > 0");
  const double theta = omega.norm();
  const auto c = detail::jac_coeffs(dt, theta);
  const Matrix3d w = so3_hat(omega);
  const Matrix3d w2 = w * w;
  *j1 = dt * Matrix3d::Identity() + c.c1 * w + c.c2 * w2;
  *j2 = 0.5 * dt * dt * Matrix3d::Identity() + c.c2 * w + c.c4 * w2;
}

/// d(J1(dt, w) a)/dw and d(J2(dt, w) a)/dw, exact termwise derivatives of
/// the closed forms. These feed the gyro columns of the covariance
/// propagation and the bias-correction chain rule.
inline void right_jacobian_gyro_derivatives(double dt, const Vector3d& omega,
                                            const Vector3d& a, Matrix3d* dj1a,
                                            Matrix3d* dj2a) {
  const double theta = omega.norm();
  const auto c = detail::jac_coeffs(dt, theta);
  const auto p = detail::jac_deriv_coeffs(dt, theta);
  const Matrix3d w = so3_hat(omega);
  const Vector3d wa = w * a;
  const Vector3d wwa = w * wa;
  // d((w^)^2 a)/dw = (w.a) I + w a^T - 2 a w^T
  const Matrix3d dwwa = omega.dot(a) * Matrix3d::Identity() +
                        omega * a.transpose() - 2.0 * a * omega.transpose();
  const Matrix3d ahat = so3_hat(a);
  *dj1a = -c.c1 * ahat + c.c2 * dwwa + p.c1pt * wa * omega.transpose() +
          p.c2pt * wwa * omega.transpose();
  *dj2a = -c.c2 * ahat + c.c4 * dwwa + p.c2pt * wa * omega.transpose() +
          p.c4pt * wwa * omega.transpose();
}

/// Right Jacobian of SO(3): d/dphi of exp on the right tangent.
inline Matrix3d so3_right_jacobian(const Vector3d& phi) {
  const double theta = phi.norm();
  const Matrix3d w = so3_hat(phi);
  const Matrix3d w2 = w * w;
  if (theta < kJacSeriesEps) {
    const double t2 = theta * theta;
    return Matrix3d::Identity() - (0.5 - t2 / 24.0 + t2 * t2 / 720.0) * w +
           (1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0) * w2;
  }
  const double t2 = theta * theta;
  return Matrix3d::Identity() - (1.0 - std::cos(theta)) / t2 * w +
         (theta - std::sin(theta)) / (t2 * theta) * w2;
}

inline Matrix3d so3_right_jacobian_inverse(const Vector3d& phi) {
  const double theta = phi.norm();
  const Matrix3d w = so3_hat(phi);
  const Matrix3d w2 = w * w;
  double c;
  if (theta < kJacSeriesEps) {
    const double t2 = theta * theta;
    c = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  } else {
    c = (1.0 / (theta * theta)) -
        (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  }
  return Matrix3d::Identity() + 0.5 * w + c * w2;
}

// ======================
// The two phases of the closed-form step
// ======================

/// exp(-T (G - D)) for gravity vector g: the left (gravity/time) phase.
/// Blocks: [I, -T^2/2 g, -T g; 0 1 0; 0 T 1]. The generator is nilpotent of
/// degree 3, so this is the exact exponential.
inline Matrix5d gravity_phase(double t, const Vector3d& g) {
  if (t < 0) throw std::invalid_argument("gravity_phase: T must be >= 0");
  Matrix5d m = Matrix5d::Identity();
  m.block<3, 1>(0, 3) = -0.5 * t * t * g;
  m.block<3, 1>(0, 4) = -t * g;
  m(4, 3) = t;
  return m;
}

/// One body-frame input step: exp(dt (U - B + D)) for unbiased rates.
/// Top row blocks are [exp(dt w^), J2 a, J1 a]; the (5,4) entry is dt.
struct InputPhaseStep {
  Rotation3 rotation_step;
  Vector3d p_column = Vector3d::Zero();
  Vector3d v_column = Vector3d::Zero();
  double dt = 0.0;

  Matrix5d matrix() const {
    Matrix5d m = Matrix5d::Identity();
    m.block<3, 3>(0, 0) = rotation_step.matrix();
    m.block<3, 1>(0, 3) = p_column;
    m.block<3, 1>(0, 4) = v_column;
    m(4, 3) = dt;
    return m;
  }
};

inline InputPhaseStep input_phase(double dt, const Vector3d& omega_unbiased,
                                  const Vector3d& accel_unbiased) {
  if (!(dt > 0)) throw std::invalid_argument("input_phase: dt must be > 0");
  Matrix3d j1, j2;
  right_jacobians(dt, omega_unbiased, &j1, &j2);
  InputPhaseStep s;
  s.rotation_step = so3_exp(dt * omega_unbiased);
  s.p_column = j2 * accel_unbiased;
  s.v_column = j1 * accel_unbiased;
  s.dt = dt;
  return s;
}

}  // namespace vipre
