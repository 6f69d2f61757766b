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

#include "vipre/imu.hpp"

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace vipre {
namespace {

ImuIntrinsics random_intrinsics(Rng& rng) {
  auto scale = [&] {
    return Vector3d(1.0 + 0.03 * rng.normal(), 1.0 + 0.03 * rng.normal(),
                    1.0 + 0.03 * rng.normal());
  };
  auto misalign = [&] {
    Matrix3d m = Matrix3d::Identity();
    m(1, 0) = 0.01 * rng.normal();
    m(2, 0) = 0.01 * rng.normal();
    m(2, 1) = 0.01 * rng.normal();
    return m;
  };
  Matrix3d a_omega = 0.002 * Matrix3d::NullaryExpr([&](int, int) {
    return rng.normal();
  });
  const Rotation3 c = so3_exp(0.01 * rng.normal3());
  return ImuIntrinsics(scale(), misalign(), scale(), misalign(), a_omega, c);
}

TEST(ApplyIntrinsics, IdentityPassthroughAndScale) {
  const ImuIntrinsics id = ImuIntrinsics::identity();
  const Vector3d w(0.1, -0.2, 0.3), a(1.0, 2.0, -9.0);
  const RawImuMeasurement raw = apply_intrinsics(
      w, a, id, ImuBias{}, Vector3d::Zero(), Vector3d::Zero());
  EXPECT_LT((raw.gyro - w).norm(), 1e-15);
  EXPECT_LT((raw.accel - a).norm(), 1e-15);

  const ImuIntrinsics scaled(Vector3d(1.01, 1.0, 1.0), Matrix3d::Identity(),
                             Vector3d::Ones(), Matrix3d::Identity(),
                             Matrix3d::Zero(), Rotation3::identity());
  const RawImuMeasurement r2 = apply_intrinsics(
      Vector3d::Zero(), Vector3d(1, 0, 0), scaled, ImuBias{}, Vector3d::Zero(),
      Vector3d::Zero());
  EXPECT_LT((r2.accel - Vector3d(1.01, 0, 0)).norm(), 1e-15);
}

TEST(Compensate, RoundtripOnRandomIntrinsics) {
  Rng rng(100);
  for (int i = 0; i < 10000; ++i) {
    const ImuIntrinsics intr = random_intrinsics(rng);
    const Vector3d w = rng.normal3() * 3.0;
    const Vector3d a = rng.normal3() * 10.0;
    const RawImuMeasurement raw = apply_intrinsics(
        w, a, intr, ImuBias{}, Vector3d::Zero(), Vector3d::Zero());
    const CompensatedImuMeasurement c = compensate(raw, intr, 0.005);
    EXPECT_LT((c.gyro - w).norm(), 1e-10);
    EXPECT_LT((c.accel - a).norm(), 1e-10);
  }
}

TEST(Compensate, PureGSensitivity) {
  Rng rng(101);
  Matrix3d a_omega = 0.01 * Matrix3d::NullaryExpr([&](int, int) {
    return rng.normal();
  });
  const ImuIntrinsics intr(Vector3d::Ones(), Matrix3d::Identity(),
                           Vector3d::Ones(), Matrix3d::Identity(), a_omega,
                           Rotation3::identity());
  const Vector3d a(0, 0, 9.81);
  const RawImuMeasurement raw = apply_intrinsics(
      Vector3d::Zero(), a, intr, ImuBias{}, Vector3d::Zero(), Vector3d::Zero());
  EXPECT_GT(raw.gyro.norm(), 1e-3);  // the skew term is actually active
  const CompensatedImuMeasurement c = compensate(raw, intr, 0.005);
  EXPECT_LT(c.gyro.norm(), 1e-12);
  EXPECT_LT((c.accel - a).norm(), 1e-12);
}

TEST(Compensate, LinearInRawMeasurement) {
  Rng rng(102);
  const ImuIntrinsics intr = random_intrinsics(rng);
  for (int i = 0; i < 100; ++i) {
    RawImuMeasurement m1, m2, sum;
    m1.gyro = rng.normal3();
    m1.accel = rng.normal3();
    m2.gyro = rng.normal3();
    m2.accel = rng.normal3();
    sum.gyro = m1.gyro + m2.gyro;
    sum.accel = m1.accel + m2.accel;
    const auto c1 = compensate(m1, intr, 0.01);
    const auto c2 = compensate(m2, intr, 0.01);
    const auto cs = compensate(sum, intr, 0.01);
    EXPECT_LT((cs.gyro - c1.gyro - c2.gyro).norm(), 1e-12);
    EXPECT_LT((cs.accel - c1.accel - c2.accel).norm(), 1e-12);
  }
}

TEST(ImuIntrinsics, RejectsInvalidInput) {
  // non-positive scale
  EXPECT_THROW(ImuIntrinsics(Vector3d(1, -1, 1), Matrix3d::Identity(),
                             Vector3d::Ones(), Matrix3d::Identity(),
                             Matrix3d::Zero(), Rotation3::identity()),
               std::invalid_argument);
  // non-unitriangular misalignment
  Matrix3d bad = Matrix3d::Identity();
  bad(0, 1) = 0.5;
  EXPECT_THROW(ImuIntrinsics(Vector3d::Ones(), bad, Vector3d::Ones(),
                             Matrix3d::Identity(), Matrix3d::Zero(),
                             Rotation3::identity()),
               std::invalid_argument);
  // near-singular S*M
  EXPECT_THROW(ImuIntrinsics(Vector3d(1, 1, 1e-5), Matrix3d::Identity(),
                             Vector3d::Ones(), Matrix3d::Identity(),
                             Matrix3d::Zero(), Rotation3::identity()),
               std::invalid_argument);
}

TEST(DiscreteNoiseCovariance, ValuesAndScaling) {
  ImuNoise n;
  n.sigma_g = 0.01;
  n.sigma_a = 0.02;
  n.sigma_bg = 0.001;
  n.sigma_ba = 0.002;
  n.rate = 200.0;
  const Matrix12d cov = discrete_noise_covariance(n, 0.005);
  EXPECT_NEAR(cov(0, 0), 2e-2, 1e-15);  // 0.01^2 / 0.005
  EXPECT_NEAR(cov(3, 3), 8e-2, 1e-15);
  EXPECT_NEAR(cov(6, 6), 2e-4, 1e-17);
  EXPECT_NEAR(cov(9, 9), 8e-4, 1e-17);

  // dt = 1 with equal sigmas gives sigma^2 everywhere
  ImuNoise eq;
  eq.sigma_g = eq.sigma_a = eq.sigma_bg = eq.sigma_ba = 0.3;
  eq.rate = 1.0;
  const Matrix12d c1 = discrete_noise_covariance(eq, 1.0);
  EXPECT_LT((c1 - 0.09 * Matrix12d::Identity()).cwiseAbs().maxCoeff(), 1e-15);

  // halving dt doubles every entry
  const Matrix12d ch = discrete_noise_covariance(n, 0.0025);
  EXPECT_LT((ch - 2.0 * cov).cwiseAbs().maxCoeff(), 1e-12);

  // positive definite for valid input, error for dt <= 0
  EXPECT_GT(cov.diagonal().minCoeff(), 0.0);
  EXPECT_THROW(discrete_noise_covariance(n, 0.0), std::invalid_argument);
}

}  // namespace
}  // namespace vipre
