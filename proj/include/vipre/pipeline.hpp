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

#include <map>
#include <set>
#include <vector>

#include "vipre/estimator.hpp"
#include "vipre/metrics.hpp"
#include "vipre/simulation.hpp"

namespace vipre {

struct EstimateResult {
  std::vector<double> keyframe_times;
  std::vector<NavState> estimates;  // final estimate per keyframe
  std::vector<NavState> truth;
  double ate_rmse = 0.0;
  double rot_rmse = 0.0;
  std::vector<int> iterations_per_window;
  bool diverged = false;
  std::string divergence_reason;
};

/// Full synthetic run: simulate, preintegrate between keyframes, maintain
/// the sliding window, solve after every keyframe. The first keyframe pose
/// anchors the gauge at the true starting state; biases start at zero and
/// are estimated.
inline EstimateResult run_estimation(const SimScenario& sc,
                                     const SolverConfig& cfg) {
  sc.validate();
  cfg.validate();
  EstimateResult out;

  const SampledImu imu = sample_imu(sc);
  const auto meas = compensate_stream(imu.raw, sc.intrinsics, sc.imu_rate);
  const Scene scene = generate_scene(sc);
  const Vector3d g = sc.trajectory.gravity;
  const int n_kf = static_cast<int>(scene.keyframe_times.size());

  out.keyframe_times = scene.keyframe_times;
  out.truth.reserve(static_cast<size_t>(n_kf));
  for (double t : scene.keyframe_times) out.truth.push_back(truth_state(sc, t));

  // Measurements per keyframe interval [t_f, t_f+1); the last interval of a
  // window is truncated at the keyframe boundary.
  auto segment = [&](double t0, double t1) {
    std::vector<CompensatedImuMeasurement> seg;
    for (const auto& m : meas) {
      if (m.t >= t1 - 1e-12 || m.t + m.dt_to_next <= t0 + 1e-12) continue;
      CompensatedImuMeasurement clipped = m;
      if (m.t < t0) {
        clipped.t = t0;
        clipped.dt_to_next = m.t + m.dt_to_next - t0;
      }
      if (clipped.t + clipped.dt_to_next > t1) {
        clipped.dt_to_next = t1 - clipped.t;
      }
      if (clipped.dt_to_next > 1e-12) seg.push_back(clipped);
    }
    return seg;
  };

  // landmark id -> observations collected over window frames (for
  // triangulation of landmarks that are not yet estimated)
  std::map<int, std::vector<Observation>> pending;

  Window w;
  w.rig = sc.rig;
  w.gravity = g;

  std::vector<NavState> final_state(static_cast<size_t>(n_kf));

  NavState start = out.truth[0];
  start.bias = ImuBias{};  // biases unknown to the estimator at start
  WindowFrame f0;
  f0.id = 0;
  f0.t = scene.keyframe_times[0];
  f0.state = start;
  f0.pose_fixed = true;
  w.frames.push_back(f0);
  for (const auto& obs : scene.observations[0]) {
    w.observations.push_back(obs);
    pending[obs.landmark_id].push_back(obs);
  }
  final_state[0] = start;

  auto try_triangulate = [&](Window* win) {
    std::map<int, std::pair<Rotation3, Vector3d>> poses;
    for (const auto& fr : win->frames) {
      poses[fr.id] = {fr.state.rotation, fr.state.position};
    }
    std::set<int> in_window;
    for (const auto& fr : win->frames) in_window.insert(fr.id);
    for (auto& [lm_id, obs_list] : pending) {
      if (win->landmarks.count(lm_id)) continue;
      std::vector<Observation> usable;
      for (const auto& o : obs_list) {
        if (in_window.count(o.frame_id)) usable.push_back(o);
      }
      if (usable.size() < 2) continue;
      const auto x = triangulate(usable, poses, win->rig);
      if (x) win->landmarks[lm_id] = Landmark{*x, lm_id};
    }
  };

  try_triangulate(&w);
  solve_window(&w, cfg);
  final_state[0] = w.frames[0].state;

  for (int f = 1; f < n_kf; ++f) {
    // preintegrate from the previous keyframe with its current bias estimate
    const int prev_index = w.frame_index(f - 1);
    const NavState prev =
        w.frames[static_cast<size_t>(prev_index)].state;
    PreintegratedImu p = new_preintegration(prev.bias, sc.noise);
    for (const auto& m :
         segment(scene.keyframe_times[static_cast<size_t>(f - 1)],
                 scene.keyframe_times[static_cast<size_t>(f)])) {
      p = integrate(p, m);
    }

    KeyframeData kd;
    kd.frame.id = f;
    kd.frame.t = scene.keyframe_times[static_cast<size_t>(f)];
    kd.frame.state = predict(p, prev, g);
    kd.preint_from_prev = p;
    kd.observations = scene.observations[static_cast<size_t>(f)];
    slide_window(&w, kd, cfg.window_size);

    for (const auto& obs : kd.observations) {
      pending[obs.landmark_id].push_back(obs);
    }
    // forget pending observations of frames that left the window
    std::set<int> in_window;
    for (const auto& fr : w.frames) in_window.insert(fr.id);
    for (auto& [id, list] : pending) {
      std::erase_if(list, [&](const Observation& o) {
        return in_window.count(o.frame_id) == 0;
      });
    }
    try_triangulate(&w);

    const SolveReport rep = solve_window(&w, cfg);
    out.iterations_per_window.push_back(rep.iterations);

    bool finite = true;
    for (const auto& fr : w.frames) {
      finite = finite && fr.state.position.allFinite() &&
               fr.state.velocity.allFinite();
    }
    if (!finite) {
      out.diverged = true;
      out.divergence_reason = "non-finite state after window solve";
      break;
    }
    for (const auto& fr : w.frames) {
      final_state[static_cast<size_t>(fr.id)] = fr.state;
    }
  }

  out.estimates = final_state;
  if (!out.diverged) {
    std::vector<Vector3d> est_p, ref_p;
    std::vector<Rotation3> est_r, ref_r;
    for (int f = 0; f < n_kf; ++f) {
      est_p.push_back(out.estimates[static_cast<size_t>(f)].position);
      ref_p.push_back(out.truth[static_cast<size_t>(f)].position);
      est_r.push_back(out.estimates[static_cast<size_t>(f)].rotation);
      ref_r.push_back(out.truth[static_cast<size_t>(f)].rotation);
    }
    out.ate_rmse = ate_rmse(est_p, ref_p);
    out.rot_rmse = rotation_rmse(est_r, ref_r, est_p, ref_p);
    if (out.ate_rmse > 5.0) {
      out.diverged = true;
      out.divergence_reason = "trajectory error above divergence threshold";
    }
  }
  return out;
}

}  // namespace vipre
