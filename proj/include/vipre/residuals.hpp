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

#include <optional>

#include <Eigen/Core>

#include "vipre/camera.hpp"
#include "vipre/lie.hpp"
#include "vipre/preintegration.hpp"
#include "vipre/state.hpp"

namespace vipre {

// Local 15-dof state parameterization per keyframe, used by all Jacobians:
// [phi (left rotation tangent), dp, dv, dbg, dba]. Retraction is
// R <- exp(phi) R with additive updates elsewhere.

// =====================
// IMU window residual
// =====================

/// 15-vector (e_R, e_p, e_v, e_bg, e_ba), estimate-minus-true convention:
///   e_R = log((R_i^T R_j)^T dR_hat)
///   e_p = dp_hat - R_i^T (p_j - p_i - T v_i - T^2/2 g)
///   e_v = dv_hat - R_i^T (v_j - v_i - T g)
/// with the deltas bias-corrected to x_i's bias estimate.
inline Vector15d imu_residual(const NavState& x_i, const NavState& x_j,
                              const PreintegratedImu& p, const Vector3d& g) {
  const double t = p.delta_t;
  const CorrectedDeltas d = bias_corrected_deltas(p, x_i.bias);
  const Matrix3d ri_t = x_i.rotation.matrix().transpose();

  Vector15d r;
  r.segment<3>(0) = so3_log(so3_exp_unchecked(
      x_j.rotation.matrix().transpose() * x_i.rotation.matrix() *
      d.delta_R.matrix()));
  r.segment<3>(3) =
      d.delta_p - ri_t * (x_j.position - x_i.position - t * x_i.velocity -
                          0.5 * t * t * g);
  r.segment<3>(6) =
      d.delta_v - ri_t * (x_j.velocity - x_i.velocity - t * g);
  r.segment<3>(9) = x_j.bias.gyro - x_i.bias.gyro;
  r.segment<3>(12) = x_j.bias.accel - x_i.bias.accel;
  return r;
}

struct ImuResidualJacobians {
  Matrix15d d_xi;  // wrt [phi_i, dp_i, dv_i, dbg_i, dba_i]
  Matrix15d d_xj;  // wrt [phi_j, dp_j, dv_j, dbg_j, dba_j]
};

inline ImuResidualJacobians imu_residual_jacobians(const NavState& x_i,
                                                   const NavState& x_j,
                                                   const PreintegratedImu& p,
                                                   const Vector3d& g) {
  const double t = p.delta_t;
  const CorrectedDeltas d = bias_corrected_deltas(p, x_i.bias);
  const Matrix3d ri_t = x_i.rotation.matrix().transpose();
  const Vector3d e_r = so3_log(so3_exp_unchecked(
      x_j.rotation.matrix().transpose() * x_i.rotation.matrix() *
      d.delta_R.matrix()));
  const Matrix3d jr_inv = so3_right_jacobian_inverse(e_r);
  // Left perturbation of R_i lands on the right of the log argument through
  // dRhat^T R_i^T; the gyro-bias column carries the exp-chain correction.
  const Matrix3d k = jr_inv * d.delta_R.matrix().transpose() * ri_t;
  const Vector3d dbg = x_i.bias.gyro - p.bias_lin.gyro;

  const Vector3d s =
      x_j.position - x_i.position - t * x_i.velocity - 0.5 * t * t * g;
  const Vector3d w = x_j.velocity - x_i.velocity - t * g;

  ImuResidualJacobians out;
  out.d_xi.setZero();
  out.d_xj.setZero();

  // e_R rows
  out.d_xi.block<3, 3>(0, 0) = k;
  out.d_xi.block<3, 3>(0, 9) =
      jr_inv * so3_right_jacobian(p.jac_dR_dbg * dbg) * p.jac_dR_dbg;
  out.d_xj.block<3, 3>(0, 0) = -k;

  // e_p rows
  out.d_xi.block<3, 3>(3, 0) = -ri_t * so3_hat(s);
  out.d_xi.block<3, 3>(3, 3) = ri_t;
  out.d_xi.block<3, 3>(3, 6) = t * ri_t;
  out.d_xi.block<3, 3>(3, 9) = p.jac_dp_dbg;
  out.d_xi.block<3, 3>(3, 12) = p.jac_dp_dba;
  out.d_xj.block<3, 3>(3, 3) = -ri_t;

  // e_v rows
  out.d_xi.block<3, 3>(6, 0) = -ri_t * so3_hat(w);
  out.d_xi.block<3, 3>(6, 6) = ri_t;
  out.d_xi.block<3, 3>(6, 9) = p.jac_dv_dbg;
  out.d_xi.block<3, 3>(6, 12) = p.jac_dv_dba;
  out.d_xj.block<3, 3>(6, 6) = -ri_t;

  // bias rows
  out.d_xi.block<3, 3>(9, 9) = -Matrix3d::Identity();
  out.d_xi.block<3, 3>(12, 12) = -Matrix3d::Identity();
  out.d_xj.block<3, 3>(9, 9) = Matrix3d::Identity();
  out.d_xj.block<3, 3>(12, 12) = Matrix3d::Identity();
  return out;
}

// =====================
// Reprojection residual
// =====================

/// Whitened pixel residual (observed - projected)/sigma, or nullopt when
/// the landmark is not visible from the observing camera.
inline std::optional<Vector2d> reprojection_residual(const Observation& obs,
                                                     const CameraRig& rig,
                                                     const NavState& x,
                                                     const Landmark& lm) {
  const auto px = project(rig, obs.camera_index, x.rotation, x.position,
                          lm.position);
  if (!px) return std::nullopt;
  return (obs.pixel - *px) / obs.sigma_px;
}

struct ReprojectionJacobians {
  Eigen::Matrix<double, 2, 3> d_phi;       // wrt body rotation tangent
  Eigen::Matrix<double, 2, 3> d_position;  // wrt body position
  Eigen::Matrix<double, 2, 3> d_landmark;  // wrt landmark position
};

/// Jacobians of the whitened residual. Only valid when the point projects.
inline std::optional<ReprojectionJacobians> reprojection_jacobians(
    const Observation& obs, const CameraRig& rig, const NavState& x,
    const Landmark& lm) {
  const PinholeCamera& cam =
      rig.cameras.at(static_cast<size_t>(obs.camera_index));
  const Vector3d q = point_in_camera(rig, obs.camera_index, x.rotation,
                                     x.position, lm.position);
  if (!project_point(cam, q)) return std::nullopt;

  Eigen::Matrix<double, 2, 3> dpi;
  const double iz = 1.0 / q.z();
  // clang-format off
  dpi << cam.fx * iz, 0,           -cam.fx * q.x() * iz * iz,
         0,           cam.fy * iz, -cam.fy * q.y() * iz * iz;
  // clang-format on

  const Matrix3d r_cw =
      cam.r_bc.matrix().transpose() * x.rotation.matrix().transpose();
  const Eigen::Matrix<double, 2, 3> front = (-1.0 / obs.sigma_px) * dpi;

  ReprojectionJacobians out;
  out.d_phi = front * r_cw * so3_hat(lm.position - x.position);
  out.d_position = front * (-r_cw);
  out.d_landmark = front * r_cw;
  return out;
}

// =====================
// Robust weighting
// =====================

/// IRLS weight of the Huber loss: 1 inside the inlier region, delta/norm
/// outside.
inline double huber_weight(double whitened_norm, double delta) {
  if (whitened_norm <= delta) return 1.0;
  return delta / whitened_norm;
}

/// Huber loss value matching huber_weight (rho(s) = s^2 inside,
/// delta (2 s - delta) outside); used for the solver's accepted cost.
inline double huber_loss(double whitened_norm, double delta) {
  if (whitened_norm <= delta) return whitened_norm * whitened_norm;
  return delta * (2.0 * whitened_norm - delta);
}

}  // namespace vipre
