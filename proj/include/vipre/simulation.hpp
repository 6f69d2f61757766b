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
#include <map>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "vipre/camera.hpp"
#include "vipre/imu.hpp"
#include "vipre/lie.hpp"
#include "vipre/preintegration.hpp"
#include "vipre/rng.hpp"
#include "vipre/state.hpp"

namespace vipre {

inline const Vector3d kDefaultGravity(0.0, 0.0, -9.81);

// ======================
// Analytic trajectories
// ======================

/// Twice-differentiable synthetic motion with closed-form body rates.
///
/// kSinusoid: p(t) = p0 + A .* sin(wt t + ph) per axis and a rotation about
/// a fixed axis, angle(t) = theta_axis sin(wr t) + spin_rate t. Because the
/// axis is fixed, w_body(t) = angle'(t) * axis exactly.
///
/// kConstantRate: constant body rates (w0, a0) from an initial state; the
/// flow is the closed-form screw/helix motion, so zero-order-hold sampling
/// reproduces it exactly at any rate.
struct AnalyticTrajectory {
  enum class Kind { kSinusoid, kConstantRate };
  Kind kind = Kind::kSinusoid;

  // kSinusoid parameters
  Vector3d p0 = Vector3d::Zero();
  Vector3d amplitude = Vector3d::Zero();
  Vector3d omega_t = Vector3d::Zero();   // rad/s per axis
  Vector3d phase = Vector3d::Zero();
  double theta_axis = 0.0;               // rad
  double omega_r = 0.0;                  // rad/s
  double spin_rate = 0.0;                // rad/s, constant component
  Vector3d axis = Vector3d::UnitZ();

  // kConstantRate parameters
  Vector3d const_omega = Vector3d::Zero();  // body rad/s
  Vector3d const_accel = Vector3d::Zero();  // body m/s^2 (specific force)
  NavState start;

  Vector3d gravity = kDefaultGravity;

  Rotation3 rotation_at(double t) const {
    if (kind == Kind::kConstantRate) {
      return start.rotation * so3_exp(t * const_omega);
    }
    const double ang = theta_axis * std::sin(omega_r * t) + spin_rate * t;
    return so3_exp(ang * axis.normalized());
  }

  Vector3d position_at(double t) const {
    if (kind == Kind::kConstantRate) return constant_rate_state(t).position;
    return p0 + (amplitude.array() * (omega_t.array() * t + phase.array()).sin())
                    .matrix();
  }

  Vector3d velocity_at(double t) const {
    if (kind == Kind::kConstantRate) return constant_rate_state(t).velocity;
    return (amplitude.array() * omega_t.array() *
            (omega_t.array() * t + phase.array()).cos())
        .matrix();
  }

  Vector3d world_accel_at(double t) const {
    // kSinusoid only; constant-rate accel comes from the body signal.
    return (-amplitude.array() * omega_t.array().square() *
            (omega_t.array() * t + phase.array()).sin())
        .matrix();
  }

  Vector3d body_rate_at(double t) const {
    if (kind == Kind::kConstantRate) return const_omega;
    const double dang = theta_axis * omega_r * std::cos(omega_r * t) + spin_rate;
    return dang * axis.normalized();
  }

  /// Specific force: f = R^T (p_dotdot - g).
  Vector3d body_accel_at(double t) const {
    if (kind == Kind::kConstantRate) return const_accel;
    return rotation_at(t).transposed() * (world_accel_at(t) - gravity);
  }

  NavState constant_rate_state(double t) const {
    // Exact flow of constant body rates under gravity.
    NavState x = start;
    if (t == 0.0) return x;
    Matrix3d j1, j2;
    right_jacobians(t, const_omega, &j1, &j2);
    const Matrix3d r0 = start.rotation.matrix();
    x.rotation = start.rotation * so3_exp(t * const_omega);
    x.position = start.position + t * start.velocity +
                 0.5 * t * t * gravity + r0 * (j2 * const_accel);
    x.velocity = start.velocity + t * gravity + r0 * (j1 * const_accel);
    return x;
  }
};

// ======================
// Scenario
// ======================

struct SimScenario {
  AnalyticTrajectory trajectory;
  double imu_rate = 200.0;         // Hz
  double duration = 10.0;          // s
  double keyframe_interval = 0.2;  // s
  ImuNoise noise;
  ImuIntrinsics intrinsics;
  ImuBias initial_bias;            // true bias at t = 0
  CameraRig rig;
  int landmark_count = 400;
  double pixel_sigma = 1.0;
  std::uint64_t seed = 1;
  /// Scales the sampled noise and bias random walk (0 = noise-free run);
  /// the noise model used for covariances is unaffected.
  double noise_sample_scale = 1.0;

  void validate() const {
    if (!(duration > 0)) throw std::invalid_argument("scenario: duration");
    if (!(imu_rate >= 2.0 / keyframe_interval)) {
      throw std::invalid_argument("scenario: rate below 2/keyframe interval");
    }
    noise.validate();
    rig.validate();
  }
};

/// Ground-truth state at time t; bias is the scenario's initial bias (the
/// random-walk path is a property of one sampled measurement stream, not of
/// the trajectory).
inline NavState truth_state(const SimScenario& sc, double t) {
  if (t < -1e-12 || t > sc.duration + 1e-12) {
    throw std::out_of_range("truth_state: t outside [0, duration]");
  }
  NavState x;
  x.rotation = sc.trajectory.rotation_at(t);
  x.position = sc.trajectory.position_at(t);
  x.velocity = sc.trajectory.velocity_at(t);
  x.bias = sc.initial_bias;
  return x;
}

// ======================
// IMU sampling
// ======================

/// Ideal (noise-free, bias-free) body rates for the sample interval
/// [k/rate, (k+1)/rate), evaluated at the interval midpoint. The midpoint
/// convention keeps the zero-order-hold stream second-order faithful to the
/// continuous trajectory.
inline void ideal_rates(const SimScenario& sc, int k, Vector3d* w,
                        Vector3d* a) {
  const double dt = 1.0 / sc.imu_rate;
  const double tm = (k + 0.5) * dt;
  *w = sc.trajectory.body_rate_at(tm);
  *a = sc.trajectory.body_accel_at(tm);
}

struct SampledImu {
  std::vector<RawImuMeasurement> raw;
  // True bias at each sample time (random-walk path), for reference use.
  std::vector<ImuBias> true_bias;
};

/// Push the ideal rates through the intrinsic model with white noise and a
/// bias random walk. Deterministic for a fixed seed.
inline SampledImu sample_imu(const SimScenario& sc) {
  sc.validate();
  const double dt = 1.0 / sc.imu_rate;
  const int n = static_cast<int>(std::round(sc.duration * sc.imu_rate));
  Rng rng(sc.seed);
  const double s = sc.noise_sample_scale;
  const double sqdt = std::sqrt(dt);

  SampledImu out;
  out.raw.reserve(static_cast<size_t>(n));
  out.true_bias.reserve(static_cast<size_t>(n));
  ImuBias b = sc.initial_bias;
  for (int k = 0; k < n; ++k) {
    Vector3d w, a;
    ideal_rates(sc, k, &w, &a);
    const Vector3d nw = s * (sc.noise.sigma_g / sqdt) * rng.normal3();
    const Vector3d na = s * (sc.noise.sigma_a / sqdt) * rng.normal3();
    out.true_bias.push_back(b);
    out.raw.push_back(
        apply_intrinsics(w, a, sc.intrinsics, b, nw, na, k * dt));
    b.gyro += s * sc.noise.sigma_bg * sqdt * rng.normal3();
    b.accel += s * sc.noise.sigma_ba * sqdt * rng.normal3();
  }
  return out;
}

/// Intrinsic-compensate a raw stream; dt_to_next from consecutive
/// timestamps, nominal period for the last sample.
inline std::vector<CompensatedImuMeasurement> compensate_stream(
    const std::vector<RawImuMeasurement>& raw, const ImuIntrinsics& intr,
    double rate) {
  std::vector<CompensatedImuMeasurement> out;
  out.reserve(raw.size());
  for (size_t i = 0; i < raw.size(); ++i) {
    const double dt = (i + 1 < raw.size()) ? raw[i + 1].t - raw[i].t
                                           : 1.0 / rate;
    out.push_back(compensate(raw[i], intr, dt));
  }
  return out;
}

// ======================
// Reference integration
// ======================

/// Reference solution: subdivide every measurement interval into `substeps`
/// equal pieces and apply the exact constant-input step to each. With
/// substeps = 1 this is exactly the closed-form integration; refinement
/// changes nothing when the underlying signal is constant per interval.
inline NavState fine_oracle(const std::vector<CompensatedImuMeasurement>& meas,
                            const NavState& x0, const Vector3d& g,
                            int substeps) {
  if (substeps < 1) throw std::invalid_argument("fine_oracle: substeps >= 1");
  NavState x = x0;
  for (const auto& m : meas) {
    const double h = m.dt_to_next / substeps;
    const Vector3d w = m.gyro - x0.bias.gyro;
    const Vector3d a = m.accel - x0.bias.accel;
    Matrix3d j1, j2;
    right_jacobians(h, w, &j1, &j2);
    const Rotation3 step = so3_exp(h * w);
    const Vector3d j1a = j1 * a;
    const Vector3d j2a = j2 * a;
    for (int s = 0; s < substeps; ++s) {
      const Matrix3d r = x.rotation.matrix();
      x.position += h * x.velocity + r * j2a + 0.5 * h * h * g;
      x.velocity += r * j1a + h * g;
      x.rotation = x.rotation * step;
    }
  }
  return x;
}

// ======================
// Scene generation
// ======================

struct Scene {
  std::vector<Landmark> landmarks;
  // Keyframe index -> observations in that frame over all cameras.
  std::vector<std::vector<Observation>> observations;
  std::vector<double> keyframe_times;
};

/// Landmarks uniform in a spherical shell (radii 2..10 m) around the
/// trajectory origin; observations are truth projections plus pixel noise,
/// dropped when not visible. Throws if any keyframe sees fewer than 8
/// landmarks (under-constrained scene).
inline Scene generate_scene(const SimScenario& sc) {
  sc.validate();
  Scene scene;
  Rng rng(sc.seed ^ 0x9e3779b97f4a7c15ull);

  const double r_min = 2.0, r_max = 10.0;
  const Vector3d center = sc.trajectory.kind ==
                                  AnalyticTrajectory::Kind::kConstantRate
                              ? sc.trajectory.start.position
                              : sc.trajectory.p0;
  scene.landmarks.reserve(static_cast<size_t>(sc.landmark_count));
  for (int i = 0; i < sc.landmark_count; ++i) {
    // uniform direction, shell-volume-uniform radius
    Vector3d dir = rng.normal3();
    while (dir.norm() < 1e-6) dir = rng.normal3();
    dir.normalize();
    const double u = rng.uniform01();
    const double r = std::cbrt(u * (r_max * r_max * r_max -
                                    r_min * r_min * r_min) +
                               r_min * r_min * r_min);
    scene.landmarks.push_back(Landmark{center + r * dir, i});
  }

  const int n_kf =
      static_cast<int>(std::round(sc.duration / sc.keyframe_interval)) + 1;
  scene.observations.resize(static_cast<size_t>(n_kf));
  for (int f = 0; f < n_kf; ++f) {
    const double t = f * sc.keyframe_interval;
    scene.keyframe_times.push_back(t);
    const NavState x = truth_state(sc, t);
    int visible = 0;
    std::vector<bool> seen(scene.landmarks.size(), false);
    for (int k = 0; k < static_cast<int>(sc.rig.cameras.size()); ++k) {
      for (const auto& lm : scene.landmarks) {
        const auto px = project(sc.rig, k, x.rotation, x.position,
                                lm.position);
        if (!px) continue;
        Observation obs;
        obs.frame_id = f;
        obs.camera_index = k;
        obs.landmark_id = lm.id;
        obs.pixel = *px + sc.noise_sample_scale * sc.pixel_sigma *
                              Vector2d(rng.normal(), rng.normal());
        obs.sigma_px = sc.pixel_sigma;
        scene.observations[static_cast<size_t>(f)].push_back(obs);
        if (!seen[static_cast<size_t>(lm.id)]) {
          seen[static_cast<size_t>(lm.id)] = true;
          ++visible;
        }
      }
    }
    if (visible < 8) {
      throw std::runtime_error(
          "generate_scene: under-constrained keyframe (fewer than 8 visible "
          "landmarks)");
    }
  }
  return scene;
}

// ======================
// Default scenarios
// ======================

/// The frozen desk-scale default: 10 s at 200 Hz, 5 Hz keyframes, body rate
/// peaking at 3 rad/s, four-camera rig (forward stereo pair plus two
/// sideward cameras with partial overlap).
inline CameraRig default_rig(int camera_count = 4) {
  CameraRig rig;
  auto make_cam = [](const Rotation3& r, const Vector3d& p) {
    PinholeCamera c;
    c.r_bc = r;
    c.p_bc = p;
    c.fx = c.fy = 350.0;
    c.cx = 320.0;
    c.cy = 240.0;
    c.width = 640;
    c.height = 480;
    return c;
  };
  // Camera optical axis is +z. Forward cameras look along body +x:
  // columns (cam x, cam y, cam z) -> body (-y, -z, +x).
  Matrix3d fwd;
  // clang-format off
  fwd <<  0,  0, 1,
         -1,  0, 0,
          0, -1, 0;
  // clang-format on
  const Rotation3 r_fwd = Rotation3::from_matrix(fwd);
  rig.cameras.push_back(make_cam(r_fwd, Vector3d(0.0, 0.055, 0.0)));
  if (camera_count > 1) {
    rig.cameras.push_back(make_cam(r_fwd, Vector3d(0.0, -0.055, 0.0)));
  }
  if (camera_count > 2) {
    // left camera: optical axis along body +y
    Matrix3d left;
    // clang-format off
    left << 1,  0, 0,
            0,  0, 1,
            0, -1, 0;
    // clang-format on
    rig.cameras.push_back(
        make_cam(Rotation3::from_matrix(left), Vector3d(0.0, 0.08, 0.02)));
  }
  if (camera_count > 3) {
    // right camera: optical axis along body -y
    Matrix3d right;
    // clang-format off
    right << -1,  0,  0,
              0,  0, -1,
              0, -1,  0;
    // clang-format on
    rig.cameras.push_back(
        make_cam(Rotation3::from_matrix(right), Vector3d(0.0, -0.08, 0.02)));
  }
  rig.validate();
  return rig;
}

inline ImuNoise default_consumer_noise() {
  ImuNoise n;
  n.sigma_g = 2.0e-4;
  n.sigma_a = 2.0e-3;
  n.sigma_bg = 2.0e-5;
  n.sigma_ba = 3.0e-4;
  n.rate = 200.0;
  return n;
}

inline SimScenario default_scenario(std::uint64_t seed = 1,
                                    int camera_count = 4) {
  SimScenario sc;
  sc.trajectory.kind = AnalyticTrajectory::Kind::kSinusoid;
  sc.trajectory.p0 = Vector3d::Zero();
  sc.trajectory.amplitude = Vector3d(0.8, 0.7, 0.35);
  sc.trajectory.omega_t = Vector3d(1.1, 1.3, 0.9);
  sc.trajectory.phase = Vector3d(0.0, 1.0, 2.0);
  sc.trajectory.theta_axis = 1.2;
  sc.trajectory.omega_r = 2.5;  // peak body rate 3 rad/s
  sc.trajectory.axis = Vector3d(0.3, 0.5, 1.0);
  sc.imu_rate = 200.0;
  sc.duration = 10.0;
  sc.keyframe_interval = 0.2;
  sc.noise = default_consumer_noise();
  sc.initial_bias.gyro = Vector3d(0.004, -0.003, 0.002);
  sc.initial_bias.accel = Vector3d(0.02, -0.015, 0.01);
  sc.rig = default_rig(camera_count);
  sc.landmark_count = 400;
  sc.pixel_sigma = 1.0;
  sc.seed = seed;
  return sc;
}

}  // namespace vipre
