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

#include "vipre/imu.hpp"
#include "vipre/lie.hpp"
#include "vipre/state.hpp"

namespace vipre {

using Matrix15d = Eigen::Matrix<double, 15, 15>;
using Vector15d = Eigen::Matrix<double, 15, 1>;
using Matrix15x12d = Eigen::Matrix<double, 15, 12>;

enum class IntegrationMode {
  kExact,  // closed-form step: rotation integrated inside J1/J2
  kEuler   // rotation frozen within each step: J1 = dt I, J2 = dt^2/2 I
};

/// Accumulated relative motion (dR, dp, dv) over [t_i, t_j], its 15x15
/// error covariance ordered (e_R, e_p, e_v, e_bg, e_ba), and the first-order
/// bias-correction Jacobians, all linearized at bias_lin.
struct PreintegratedImu {
  Rotation3 delta_R;
  Vector3d delta_p = Vector3d::Zero();
  Vector3d delta_v = Vector3d::Zero();
  double delta_t = 0.0;
  ImuBias bias_lin;
  Matrix15d cov = Matrix15d::Zero();
  Matrix3d jac_dR_dbg = Matrix3d::Zero();
  Matrix3d jac_dp_dbg = Matrix3d::Zero();
  Matrix3d jac_dp_dba = Matrix3d::Zero();
  Matrix3d jac_dv_dbg = Matrix3d::Zero();
  Matrix3d jac_dv_dba = Matrix3d::Zero();
  IntegrationMode mode = IntegrationMode::kExact;
  ImuNoise noise;
};

/// Fresh window: identity deltas, zero covariance. The (R, p, v) blocks
/// start exactly known; bias uncertainty enters through the random-walk
/// noise as integration proceeds.
inline PreintegratedImu new_preintegration(
    const ImuBias& bias_lin, const ImuNoise& noise,
    IntegrationMode mode = IntegrationMode::kExact) {
  noise.validate();
  PreintegratedImu p;
  p.bias_lin = bias_lin;
  p.noise = noise;
  p.mode = mode;
  return p;
}

/// One measurement step of the mean, covariance and bias-Jacobian
/// recursions. Debug-only noise inflation scales the noise input matrix of
/// the covariance update (negative-control hook for consistency studies).
inline PreintegratedImu integrate(const PreintegratedImu& p,
                                  const CompensatedImuMeasurement& m,
                                  double debug_noise_inflation = 1.0) {
  const double dt = m.dt_to_next;
  if (!(dt > 0)) throw std::invalid_argument("integrate: dt must be > 0");
  if (!m.gyro.allFinite() || !m.accel.allFinite()) {
    throw std::invalid_argument("integrate: measurement has non-finite values");
  }

  const Vector3d w = m.gyro - p.bias_lin.gyro;
  const Vector3d a = m.accel - p.bias_lin.accel;

  Matrix3d j1, j2;
  if (p.mode == IntegrationMode::kExact) {
    right_jacobians(dt, w, &j1, &j2);
  } else {
    j1 = dt * Matrix3d::Identity();
    j2 = 0.5 * dt * dt * Matrix3d::Identity();
  }
  const Rotation3 step = so3_exp(dt * w);
  const Matrix3d& dR = p.delta_R.matrix();
  const Vector3d j1a = j1 * a;
  const Vector3d j2a = j2 * a;

  // Gyro-direction derivatives of the accumulated p/v columns. In Euler
  // mode J1, J2 do not depend on the rate and the blocks vanish.
  Matrix3d dj1a = Matrix3d::Zero();
  Matrix3d dj2a = Matrix3d::Zero();
  if (p.mode == IntegrationMode::kExact) {
    right_jacobian_gyro_derivatives(dt, w, a, &dj1a, &dj2a);
  }
  const Matrix3d gp = dR * dj2a;  // d(dR J2 a)/dw
  const Matrix3d gv = dR * dj1a;  // d(dR J1 a)/dw

  PreintegratedImu out = p;

  // --- covariance: e' = A e + B n, n = (n_w, n_a, tau_w, tau_a)
  Matrix15d A = Matrix15d::Identity();
  A.block<3, 3>(0, 0) = step.matrix().transpose();
  A.block<3, 3>(0, 9) = -dt * Matrix3d::Identity();
  A.block<3, 3>(3, 0) = -dR * so3_hat(j2a);
  A.block<3, 3>(3, 6) = dt * Matrix3d::Identity();
  A.block<3, 3>(3, 9) = -gp;
  A.block<3, 3>(3, 12) = -dR * j2;
  A.block<3, 3>(6, 0) = -dR * so3_hat(j1a);
  A.block<3, 3>(6, 9) = -gv;
  A.block<3, 3>(6, 12) = -dR * j1;

  Matrix15x12d B = Matrix15x12d::Zero();
  B.block<3, 3>(0, 0) = dt * Matrix3d::Identity();
  B.block<3, 3>(3, 0) = gp;
  B.block<3, 3>(3, 3) = dR * j2;
  B.block<3, 3>(6, 0) = gv;
  B.block<3, 3>(6, 3) = dR * j1;
  B.block<3, 3>(9, 6) = -dt * Matrix3d::Identity();
  B.block<3, 3>(12, 9) = -dt * Matrix3d::Identity();
  B *= debug_noise_inflation;

  const Matrix12d sigma_eta = discrete_noise_covariance(p.noise, dt);
  out.cov = A * p.cov * A.transpose() + B * sigma_eta * B.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose());

  // --- bias-correction Jacobians, chain rule with exact local derivatives.
  // The rotation step uses the full right Jacobian so the correction stays
  // first-order exact (the quadratic-remainder check depends on it).
  out.jac_dp_dbg = p.jac_dp_dbg + dt * p.jac_dv_dbg -
                   dR * so3_hat(j2a) * p.jac_dR_dbg - gp;
  out.jac_dp_dba = p.jac_dp_dba + dt * p.jac_dv_dba - dR * j2;
  out.jac_dv_dbg = p.jac_dv_dbg - dR * so3_hat(j1a) * p.jac_dR_dbg - gv;
  out.jac_dv_dba = p.jac_dv_dba - dR * j1;
  out.jac_dR_dbg = step.matrix().transpose() * p.jac_dR_dbg -
                   dt * so3_right_jacobian(dt * w);

  // --- mean
  out.delta_p = p.delta_p + dt * p.delta_v + dR * j2a;
  out.delta_v = p.delta_v + dR * j1a;
  out.delta_R = p.delta_R * step;
  out.delta_t = p.delta_t + dt;
  return out;
}

/// Propagate a keyframe state through the window: inverts the relative
/// construction, x_j = (R_i dR, p_i + T v_i + T^2/2 g + R_i dp,
/// v_i + T g + R_i dv). Bias is carried over unchanged.
inline NavState predict(const PreintegratedImu& p, const NavState& x_i,
                        const Vector3d& g) {
  const double t = p.delta_t;
  NavState x_j;
  x_j.rotation = x_i.rotation * p.delta_R;
  x_j.position = x_i.position + t * x_i.velocity + 0.5 * t * t * g +
                 x_i.rotation * p.delta_p;
  x_j.velocity = x_i.velocity + t * g + x_i.rotation * p.delta_v;
  x_j.bias = x_i.bias;
  return x_j;
}

struct CorrectedDeltas {
  Rotation3 delta_R;
  Vector3d delta_p;
  Vector3d delta_v;
};

/// First-order update of the deltas for a bias estimate that moved away
/// from the linearization point. Valid for |db| up to about 0.05; beyond
/// that re-integration is the only accurate option.
inline CorrectedDeltas bias_corrected_deltas(const PreintegratedImu& p,
                                             const ImuBias& new_bias) {
  const Vector3d dbg = new_bias.gyro - p.bias_lin.gyro;
  const Vector3d dba = new_bias.accel - p.bias_lin.accel;
  CorrectedDeltas c;
  c.delta_R = p.delta_R * so3_exp(p.jac_dR_dbg * dbg);
  c.delta_p = p.delta_p + p.jac_dp_dbg * dbg + p.jac_dp_dba * dba;
  c.delta_v = p.delta_v + p.jac_dv_dbg * dbg + p.jac_dv_dba * dba;
  return c;
}

struct InformationSqrt {
  Matrix15d w;           // upper triangular, w^T w = cov^-1
  double regularization;  // lambda added to the diagonal before inversion
};

/// Upper-triangular whitener W with W^T W = (cov + lambda I)^-1,
/// lambda = 1e-12 trace(cov)/15. Throws if the regularized matrix is still
/// conditioned worse than 1e14.
inline InformationSqrt information_sqrt(const PreintegratedImu& p) {
  const double lambda = 1e-12 * p.cov.trace() / 15.0;
  Matrix15d s = 0.5 * (p.cov + p.cov.transpose());
  s.diagonal().array() += lambda;

  Eigen::SelfAdjointEigenSolver<Matrix15d> eig(s);
  const double emin = eig.eigenvalues().minCoeff();
  const double emax = eig.eigenvalues().maxCoeff();
  if (!(emin > 0) || emax / emin > 1e14) {
    throw std::runtime_error(
        "information_sqrt: covariance badly conditioned after regularization");
  }

  const Matrix15d inv = s.llt().solve(Matrix15d::Identity());
  Eigen::LLT<Matrix15d> llt(0.5 * (inv + inv.transpose()));
  InformationSqrt out;
  out.w = llt.matrixL().transpose();
  out.regularization = lambda;
  return out;
}

}  // namespace vipre
