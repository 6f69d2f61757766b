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

#include "vipre/residuals.hpp"

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace vipre {
namespace {

using testing::random_rotation;

const Vector3d kG(0, 0, -9.81);

ImuNoise test_noise() {
  ImuNoise n;
  n.sigma_g = 2e-4;
  n.sigma_a = 2e-3;
  n.sigma_bg = 2e-5;
  n.sigma_ba = 3e-4;
  n.rate = 200.0;
  return n;
}

PreintegratedImu random_preint(Rng& rng, int steps = 40) {
  PreintegratedImu p = new_preintegration(ImuBias{}, test_noise());
  for (int k = 0; k < steps; ++k) {
    CompensatedImuMeasurement m;
    m.gyro = rng.normal3() * 1.5;
    m.accel = rng.normal3() * 6.0;
    m.dt_to_next = 0.005;
    p = integrate(p, m);
  }
  return p;
}

NavState random_state(Rng& rng) {
  NavState x;
  x.rotation = random_rotation(rng);
  x.position = rng.normal3() * 3.0;
  x.velocity = rng.normal3();
  x.bias.gyro = rng.normal3() * 0.01;
  x.bias.accel = rng.normal3() * 0.05;
  return x;
}

TEST(ImuResidual, VanishesAtPredictedState) {
  Rng rng(50);
  for (int i = 0; i < 1000; ++i) {
    PreintegratedImu p = random_preint(rng, 10);
    NavState x_i = random_state(rng);
    x_i.bias = ImuBias{};  // equal to the linearization point
    const NavState x_j = predict(p, x_i, kG);
    const Vector15d r = imu_residual(x_i, x_j, p, kG);
    EXPECT_LT(r.cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(ImuResidual, RotationPerturbationResponse) {
  Rng rng(51);
  PreintegratedImu p = random_preint(rng);
  NavState x_i = random_state(rng);
  x_i.bias = ImuBias{};
  NavState x_j = predict(p, x_i, kG);

  const Vector3d phi = 1e-4 * rng.normal3().normalized();
  NavState x_j2 = x_j;
  x_j2.rotation = x_j.rotation * so3_exp(phi);
  const Vector15d r = imu_residual(x_i, x_j2, p, kG);
  // first-order: e_R = -phi under the composition order used here
  EXPECT_LT((r.segment<3>(0) + phi).norm(), 1e-7);
}

TEST(ImuResidual, PositionPerturbationIsExactlyLinear) {
  Rng rng(52);
  PreintegratedImu p = random_preint(rng);
  NavState x_i = random_state(rng);
  x_i.bias = ImuBias{};
  const NavState x_j = predict(p, x_i, kG);
  const Vector3d dp(1e-3, 0, 0);
  NavState x_j2 = x_j;
  x_j2.position += dp;
  const Vector15d r = imu_residual(x_i, x_j2, p, kG);
  const Vector3d expected = -(x_i.rotation.matrix().transpose() * dp);
  EXPECT_LT((r.segment<3>(3) - expected).norm(), 1e-14);
}

TEST(ImuResidual, GaugeInvarianceUnderYawAndTranslation) {
  Rng rng(53);
  for (int i = 0; i < 200; ++i) {
    PreintegratedImu p = random_preint(rng, 10);
    NavState x_i = random_state(rng);
    NavState x_j = predict(p, x_i, kG);
    x_j.bias.gyro += rng.normal3() * 1e-3;  // make bias rows non-trivial
    const Vector15d r0 = imu_residual(x_i, x_j, p, kG);

    // common yaw about gravity + translation
    const Rotation3 yaw = so3_exp(Vector3d(0, 0, rng.uniform(-3, 3)));
    const Vector3d t = rng.normal3() * 10.0;
    auto transform = [&](const NavState& x) {
      NavState y = x;
      y.rotation = yaw * x.rotation;
      y.position = yaw * x.position + t;
      y.velocity = yaw * x.velocity;
      return y;
    };
    const Vector15d r1 = imu_residual(transform(x_i), transform(x_j), p, kG);
    EXPECT_LT((r1 - r0).cwiseAbs().maxCoeff(), 1e-10);

    // a roll or pitch rotation changes the residual (gravity anchoring)
    const Rotation3 roll = so3_exp(Vector3d(0.5, 0, 0));
    auto transform_roll = [&](const NavState& x) {
      NavState y = x;
      y.rotation = roll * x.rotation;
      y.position = roll * x.position;
      y.velocity = roll * x.velocity;
      return y;
    };
    const Vector15d r2 =
        imu_residual(transform_roll(x_i), transform_roll(x_j), p, kG);
    EXPECT_GT((r2 - r0).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(ImuResidual, AnalyticJacobiansMatchFiniteDifferences) {
  Rng rng(54);
  for (int trial = 0; trial < 40; ++trial) {
    const PreintegratedImu p = random_preint(rng, 20);
    NavState x_i = random_state(rng);
    NavState x_j = predict(p, x_i, kG);
    // move both states and biases off the zero-residual point
    x_j.rotation = x_j.rotation * so3_exp(0.02 * rng.normal3());
    x_j.position += 0.05 * rng.normal3();
    x_j.velocity += 0.05 * rng.normal3();
    x_i.bias.gyro = 0.01 * rng.normal3();
    x_i.bias.accel = 0.02 * rng.normal3();
    x_j.bias.gyro = 0.01 * rng.normal3();
    x_j.bias.accel = 0.02 * rng.normal3();

    const ImuResidualJacobians jac = imu_residual_jacobians(x_i, x_j, p, kG);

    auto apply = [&](const NavState& x, int block, const Vector3d& d) {
      NavState y = x;
      switch (block) {
        case 0: y.rotation = so3_exp(d) * x.rotation; break;
        case 1: y.position += d; break;
        case 2: y.velocity += d; break;
        case 3: y.bias.gyro += d; break;
        case 4: y.bias.accel += d; break;
      }
      return y;
    };
    const double h = 1e-6;
    for (int side = 0; side < 2; ++side) {
      for (int block = 0; block < 5; ++block) {
        Eigen::Matrix<double, 15, 3> fd;
        for (int k = 0; k < 3; ++k) {
          Vector3d e = Vector3d::Zero();
          e(k) = h;
          const Vector15d rp =
              side == 0 ? imu_residual(apply(x_i, block, e), x_j, p, kG)
                        : imu_residual(x_i, apply(x_j, block, e), p, kG);
          const Vector15d rm =
              side == 0 ? imu_residual(apply(x_i, block, -e), x_j, p, kG)
                        : imu_residual(x_i, apply(x_j, block, -e), p, kG);
          fd.col(k) = (rp - rm) / (2.0 * h);
        }
        const Eigen::Matrix<double, 15, 3> an =
            side == 0 ? jac.d_xi.block<15, 3>(0, 3 * block)
                      : jac.d_xj.block<15, 3>(0, 3 * block);
        const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
        EXPECT_LT((an - fd).cwiseAbs().maxCoeff() / scale, 1e-6)
            << "side=" << side << " block=" << block;
      }
    }
  }
}

TEST(Project, PinholeExamples) {
  CameraRig rig;
  PinholeCamera cam;
  cam.fx = cam.fy = 100.0;
  cam.cx = cam.cy = 50.0;
  cam.width = 100;
  cam.height = 100;
  rig.cameras.push_back(cam);

  const Rotation3 r;
  const Vector3d p = Vector3d::Zero();
  auto px = project(rig, 0, r, p, Vector3d(0, 0, 2));
  ASSERT_TRUE(px.has_value());
  EXPECT_LT((*px - Vector2d(50, 50)).norm(), 1e-14);

  px = project(rig, 0, r, p, Vector3d(0.2, 0, 2));
  ASSERT_TRUE(px.has_value());
  EXPECT_LT((*px - Vector2d(60, 50)).norm(), 1e-13);

  EXPECT_FALSE(project(rig, 0, r, p, Vector3d(0, 0, -2)).has_value());

  // scale consistency: doubling the point leaves the pixel fixed
  const auto p1 = project(rig, 0, r, p, Vector3d(0.3, -0.2, 1.5));
  const auto p2 = project(rig, 0, r, p, Vector3d(0.6, -0.4, 3.0));
  ASSERT_TRUE(p1 && p2);
  EXPECT_LT((*p1 - *p2).norm(), 1e-12);
}

TEST(ReprojectionResidual, OffsetsAndVisibility) {
  CameraRig rig;
  PinholeCamera cam;
  cam.fx = cam.fy = 100.0;
  cam.cx = cam.cy = 50.0;
  cam.width = 100;
  cam.height = 100;
  rig.cameras.push_back(cam);

  NavState x;
  Landmark lm{Vector3d(0, 0, 2), 0};
  Observation obs;
  obs.camera_index = 0;
  obs.landmark_id = 0;
  obs.sigma_px = 2.0;
  obs.pixel = Vector2d(50, 50);

  auto r = reprojection_residual(obs, rig, x, lm);
  ASSERT_TRUE(r.has_value());
  EXPECT_LT(r->norm(), 1e-14);

  obs.pixel = Vector2d(51, 50);
  r = reprojection_residual(obs, rig, x, lm);
  ASSERT_TRUE(r.has_value());
  EXPECT_LT((*r - Vector2d(0.5, 0)).norm(), 1e-13);

  lm.position = Vector3d(0, 0, -2);
  EXPECT_FALSE(reprojection_residual(obs, rig, x, lm).has_value());
}

TEST(ReprojectionJacobians, MatchFiniteDifferences) {
  Rng rng(55);
  CameraRig rig;
  PinholeCamera cam;
  cam.r_bc = so3_exp(Vector3d(0.1, -0.2, 0.3));
  cam.p_bc = Vector3d(0.05, -0.02, 0.01);
  cam.fx = 350;
  cam.fy = 360;
  cam.cx = 320;
  cam.cy = 240;
  cam.width = 640;
  cam.height = 480;
  rig.cameras.push_back(cam);

  int checked = 0;
  while (checked < 50) {
    NavState x = random_state(rng);
    x.position = rng.normal3();
    Landmark lm{x.position + x.rotation * (cam.r_bc * Vector3d(
                                               rng.uniform(-1, 1),
                                               rng.uniform(-1, 1),
                                               rng.uniform(2, 8))),
                0};
    Observation obs;
    obs.camera_index = 0;
    obs.landmark_id = 0;
    obs.sigma_px = 1.3;
    const auto pred = project(rig, 0, x.rotation, x.position, lm.position);
    if (!pred) continue;
    obs.pixel = *pred + Vector2d(rng.normal(), rng.normal());

    const auto jac = reprojection_jacobians(obs, rig, x, lm);
    ASSERT_TRUE(jac.has_value());
    const double h = 1e-6;

    auto fd_block = [&](int block) {
      Eigen::Matrix<double, 2, 3> fd;
      for (int k = 0; k < 3; ++k) {
        Vector3d e = Vector3d::Zero();
        e(k) = h;
        NavState xp = x, xm = x;
        Landmark lp = lm, lmm = lm;
        if (block == 0) {
          xp.rotation = so3_exp(e) * x.rotation;
          xm.rotation = so3_exp(-e) * x.rotation;
        } else if (block == 1) {
          xp.position += e;
          xm.position -= e;
        } else {
          lp.position += e;
          lmm.position -= e;
        }
        const auto rp = reprojection_residual(obs, rig, xp, lp);
        const auto rm = reprojection_residual(obs, rig, xm, lmm);
        fd.col(k) = (*rp - *rm) / (2.0 * h);
      }
      return fd;
    };
    const double s = 1.0;
    EXPECT_LT((jac->d_phi - fd_block(0)).cwiseAbs().maxCoeff() /
                  std::max(s, fd_block(0).cwiseAbs().maxCoeff()),
              1e-6);
    EXPECT_LT((jac->d_position - fd_block(1)).cwiseAbs().maxCoeff() /
                  std::max(s, fd_block(1).cwiseAbs().maxCoeff()),
              1e-6);
    EXPECT_LT((jac->d_landmark - fd_block(2)).cwiseAbs().maxCoeff() /
                  std::max(s, fd_block(2).cwiseAbs().maxCoeff()),
              1e-6);
    ++checked;
  }
}

TEST(HuberWeight, Boundaries) {
  EXPECT_EQ(huber_weight(0.0, 1.345), 1.0);
  EXPECT_EQ(huber_weight(1.345, 1.345), 1.0);
  EXPECT_NEAR(huber_weight(2.69, 1.345), 0.5, 1e-15);
  // loss is continuous and matches the weight convention
  EXPECT_NEAR(huber_loss(1.345, 1.345), 1.345 * 1.345, 1e-12);
  EXPECT_NEAR(huber_loss(2.0, 1.345), 1.345 * (4.0 - 1.345), 1e-12);
}

}  // namespace
}  // namespace vipre
