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

#include "vipre/lie.hpp"

namespace vipre {

using Matrix12d = Eigen::Matrix<double, 12, 12>;

// ======================
// Measurement types
// ======================

/// Raw gyroscope/accelerometer sample as it comes off the sensor.
struct RawImuMeasurement {
  double t = 0.0;                      // s
  Vector3d gyro = Vector3d::Zero();    // rad/s
  Vector3d accel = Vector3d::Zero();   // m/s^2
};

/// Sample after intrinsic compensation: still biased, but skew-free and
/// scale-correct. Holds from its own timestamp until t + dt_to_next.
struct CompensatedImuMeasurement {
  double t = 0.0;
  Vector3d gyro = Vector3d::Zero();
  Vector3d accel = Vector3d::Zero();
  double dt_to_next = 0.0;  // > 0
};

struct ImuBias {
  Vector3d gyro = Vector3d::Zero();   // rad/s
  Vector3d accel = Vector3d::Zero();  // m/s^2
};

/// Continuous-time noise densities plus the nominal sample rate.
struct ImuNoise {
  double sigma_g = 0.0;   // rad/s/sqrt(Hz)
  double sigma_a = 0.0;   // m/s^2/sqrt(Hz)
  double sigma_bg = 0.0;  // rad/s^2/sqrt(Hz)
  double sigma_ba = 0.0;  // m/s^3/sqrt(Hz)
  double rate = 0.0;      // Hz

  void validate() const {
    if (!(sigma_g > 0 && sigma_a > 0 && sigma_bg > 0 && sigma_ba > 0 &&
          rate > 0)) {
      throw std::invalid_argument("ImuNoise: all parameters must be > 0");
    }
  }
};

// ======================
// Intrinsics
// ======================

/// Scale (S, diagonal), misalignment (M, lower unitriangular), g-sensitivity
/// (A, full) and gyro-to-accel frame rotation (C) of a consumer-grade IMU.
/// Forward model:
///   a_raw = S_a M_a a + b_a + n_a
///   w_raw = S_w M_w C_w w + A_w a + b_w + n_w
class ImuIntrinsics {
 public:
  ImuIntrinsics()
      : s_alpha_(Matrix3d::Identity()),
        m_alpha_(Matrix3d::Identity()),
        s_omega_(Matrix3d::Identity()),
        m_omega_(Matrix3d::Identity()),
        a_omega_(Matrix3d::Zero()),
        c_omega_(Rotation3::identity()) {
    finalize();
  }

  ImuIntrinsics(const Vector3d& s_alpha_diag, const Matrix3d& m_alpha,
                const Vector3d& s_omega_diag, const Matrix3d& m_omega,
                const Matrix3d& a_omega, const Rotation3& c_omega)
      : s_alpha_(s_alpha_diag.asDiagonal()),
        m_alpha_(m_alpha),
        s_omega_(s_omega_diag.asDiagonal()),
        m_omega_(m_omega),
        a_omega_(a_omega),
        c_omega_(c_omega) {
    check_scale(s_alpha_diag);
    check_scale(s_omega_diag);
    check_unitriangular(m_alpha);
    check_unitriangular(m_omega);
    finalize();
  }

  static ImuIntrinsics identity() { return ImuIntrinsics(); }

  const Matrix3d& s_alpha() const { return s_alpha_; }
  const Matrix3d& m_alpha() const { return m_alpha_; }
  const Matrix3d& s_omega() const { return s_omega_; }
  const Matrix3d& m_omega() const { return m_omega_; }
  const Matrix3d& a_omega() const { return a_omega_; }
  const Rotation3& c_omega() const { return c_omega_; }
  const Matrix3d& sm_alpha_inv() const { return sm_alpha_inv_; }
  const Matrix3d& sm_omega_inv() const { return sm_omega_inv_; }

 private:
  static void check_scale(const Vector3d& d) {
    if (!(d.minCoeff() > 0)) {
      throw std::invalid_argument("ImuIntrinsics: scale entries must be > 0");
    }
  }
  static void check_unitriangular(const Matrix3d& m) {
    const bool diag_ok = m(0, 0) == 1.0 && m(1, 1) == 1.0 && m(2, 2) == 1.0;
    const bool upper_ok = m(0, 1) == 0.0 && m(0, 2) == 0.0 && m(1, 2) == 0.0;
    if (!diag_ok || !upper_ok) {
      throw std::invalid_argument(
          "ImuIntrinsics: misalignment must be lower unitriangular");
    }
  }
  void finalize() {
    const Matrix3d sma = s_alpha_ * m_alpha_;
    const Matrix3d smw = s_omega_ * m_omega_;
    Eigen::JacobiSVD<Matrix3d> svd_a(sma);
    Eigen::JacobiSVD<Matrix3d> svd_w(smw);
    const double cond_a =
        svd_a.singularValues()(0) / svd_a.singularValues()(2);
    const double cond_w =
        svd_w.singularValues()(0) / svd_w.singularValues()(2);
    if (!(cond_a < 1e3) || !(cond_w < 1e3)) {
      throw std::invalid_argument("ImuIntrinsics: S*M badly conditioned");
    }
    sm_alpha_inv_ = sma.inverse();
    sm_omega_inv_ = smw.inverse();
  }

  Matrix3d s_alpha_, m_alpha_, s_omega_, m_omega_, a_omega_;
  Rotation3 c_omega_;
  Matrix3d sm_alpha_inv_, sm_omega_inv_;
};

// ======================
// Forward model and compensation
// ======================

inline RawImuMeasurement apply_intrinsics(const Vector3d& true_gyro,
                                          const Vector3d& true_accel,
                                          const ImuIntrinsics& intr,
                                          const ImuBias& bias,
                                          const Vector3d& gyro_noise,
                                          const Vector3d& accel_noise,
                                          double t = 0.0) {
  RawImuMeasurement raw;
  raw.t = t;
  raw.accel =
      intr.s_alpha() * intr.m_alpha() * true_accel + bias.accel + accel_noise;
  raw.gyro = intr.s_omega() * intr.m_omega() * (intr.c_omega() * true_gyro) +
             intr.a_omega() * true_accel + bias.gyro + gyro_noise;
  return raw;
}

/// Invert the intrinsic model. The residual bias in the outputs is the
/// (S M)^-1 mapped sensor bias; downstream bias estimates live in this
/// compensated frame. The g-sensitivity term is removed with the
/// compensated accelerometer value, which is exact on bias-free input.
inline CompensatedImuMeasurement compensate(const RawImuMeasurement& raw,
                                            const ImuIntrinsics& intr,
                                            double dt_to_next) {
  CompensatedImuMeasurement out;
  out.t = raw.t;
  out.dt_to_next = dt_to_next;
  out.accel = intr.sm_alpha_inv() * raw.accel;
  out.gyro = intr.c_omega().transposed() *
             (intr.sm_omega_inv() * (raw.gyro - intr.a_omega() * out.accel));
  return out;
}

// ======================
// Discrete noise covariance
// ======================

/// Zero-order-hold discretization of the noise vector (n_w, n_a, tau_w,
/// tau_a) over a step dt: every density maps to sigma^2 / dt on the
/// diagonal. The bias random-walk columns of the propagation are scaled by
/// -dt, so the per-step bias increment variance is sigma_b^2 * dt.
inline Matrix12d discrete_noise_covariance(const ImuNoise& noise, double dt) {
  if (!(dt > 0)) {
    throw std::invalid_argument("discrete_noise_covariance: dt must be > 0");
  }
  noise.validate();
  Matrix12d cov = Matrix12d::Zero();
  cov.diagonal().segment<3>(0).setConstant(noise.sigma_g * noise.sigma_g / dt);
  cov.diagonal().segment<3>(3).setConstant(noise.sigma_a * noise.sigma_a / dt);
  cov.diagonal().segment<3>(6).setConstant(noise.sigma_bg * noise.sigma_bg /
                                           dt);
  cov.diagonal().segment<3>(9).setConstant(noise.sigma_ba * noise.sigma_ba /
                                           dt);
  return cov;
}

}  // namespace vipre
