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

// Independent reference implementations used only by tests. Everything here
// deliberately avoids the closed forms under test: rotations come from a
// generic dense matrix exponential, integrals from adaptive quadrature.

#pragma once

#include <cmath>
#include <functional>

#include <Eigen/Core>
#include <unsupported/Eigen/MatrixFunctions>

#include "vipre/lie.hpp"
#include "vipre/rng.hpp"

namespace vipre::testing {

/// Dense matrix exponential (scaling-and-squaring Pade), any square size.
template <typename Mat>
Mat dense_expm(const Mat& m) {
  return m.exp();
}

/// Adaptive Simpson quadrature of a matrix-valued function on [a, b].
template <typename Mat>
Mat adaptive_simpson(const std::function<Mat(double)>& f, double a, double b,
                     double tol, int depth = 24) {
  const Mat fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const Mat whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);

  std::function<Mat(double, double, Mat, Mat, Mat, Mat, double, int)> rec =
      [&](double lo, double hi, Mat flo, Mat fmid, Mat fhi, Mat acc,
          double eps, int d) -> Mat {
    const double mid = 0.5 * (lo + hi);
    const Mat fl = f(0.5 * (lo + mid));
    const Mat fr = f(0.5 * (mid + hi));
    const Mat left = (mid - lo) / 6.0 * (flo + 4.0 * fl + fmid);
    const Mat right = (hi - mid) / 6.0 * (fmid + 4.0 * fr + fhi);
    const Mat sum = left + right;
    if (d <= 0 || (sum - acc).cwiseAbs().maxCoeff() < 15.0 * eps) {
      return sum + (sum - acc) / 15.0;
    }
    return rec(lo, mid, flo, fl, fmid, left, eps * 0.5, d - 1) +
           rec(mid, hi, fmid, fr, fhi, right, eps * 0.5, d - 1);
  };
  return rec(a, b, fa, fm, fb, whole, tol, depth);
}

/// J1 = int_0^dt exp(s w^) ds via quadrature on the dense exponential.
inline Matrix3d quad_j1(double dt, const Vector3d& w, double tol = 1e-13) {
  const Matrix3d hatw = so3_hat(w);
  return adaptive_simpson<Matrix3d>(
      [&](double s) -> Matrix3d { return dense_expm<Matrix3d>(s * hatw); }, 0,
      dt, tol);
}

/// J2 = int_0^dt int_0^s exp(u w^) du ds = int_0^dt (dt-u) exp(u w^) du.
inline Matrix3d quad_j2(double dt, const Vector3d& w, double tol = 1e-13) {
  const Matrix3d hatw = so3_hat(w);
  return adaptive_simpson<Matrix3d>(
      [&](double u) -> Matrix3d {
        return (dt - u) * dense_expm<Matrix3d>(u * hatw);
      },
      0, dt, tol);
}

/// 5x5 generator dt (U - B + D) for unbiased body rates.
inline Matrix5d input_generator(double dt, const Vector3d& w,
                                const Vector3d& a) {
  Matrix5d m = Matrix5d::Zero();
  m.block<3, 3>(0, 0) = so3_hat(w);
  m.block<3, 1>(0, 4) = a;
  m(4, 3) = 1.0;
  return dt * m;
}

/// 5x5 generator -T (G - D).
inline Matrix5d gravity_generator(double t, const Vector3d& g) {
  Matrix5d m = Matrix5d::Zero();
  m.block<3, 1>(0, 4) = g;
  m(4, 3) = -1.0;
  return -t * m;
}

inline Rotation3 random_rotation(Rng& rng) {
  return so3_exp(rng.uniform(0.0, 3.0) * rng.normal3().normalized());
}

/// Central finite difference of a vector function of a 3-vector.
template <int N>
Eigen::Matrix<double, N, 3> central_diff3(
    const std::function<Eigen::Matrix<double, N, 1>(const Vector3d&)>& f,
    const Vector3d& x, double h) {
  Eigen::Matrix<double, N, 3> j;
  for (int k = 0; k < 3; ++k) {
    Vector3d e = Vector3d::Zero();
    e(k) = h;
    j.col(k) = (f(x + e) - f(x - e)) / (2.0 * h);
  }
  return j;
}

}  // namespace vipre::testing
