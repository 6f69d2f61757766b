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
#include <vector>

#include <Eigen/Core>

#include "vipre/lie.hpp"
#include "vipre/state.hpp"

namespace vipre {

struct Alignment {
  Rotation3 yaw;          // rotation about +z (gravity direction)
  Vector3d translation = Vector3d::Zero();
};

/// Least-squares yaw-about-gravity plus translation mapping the estimate
/// onto the reference: minimizes sum |R_yaw p_est + t - p_ref|^2. This is
/// the 4-dof gauge left unobservable by a visual-inertial problem.
inline Alignment align_yaw_translation(const std::vector<Vector3d>& est,
                                       const std::vector<Vector3d>& ref) {
  if (est.size() != ref.size() || est.empty()) {
    throw std::invalid_argument("align_yaw_translation: size mismatch");
  }
  Vector3d mean_e = Vector3d::Zero(), mean_r = Vector3d::Zero();
  for (size_t i = 0; i < est.size(); ++i) {
    mean_e += est[i];
    mean_r += ref[i];
  }
  mean_e /= static_cast<double>(est.size());
  mean_r /= static_cast<double>(est.size());

  double num = 0, den = 0;  // cross/in-phase correlation in the xy plane
  for (size_t i = 0; i < est.size(); ++i) {
    const Vector3d a = est[i] - mean_e;
    const Vector3d b = ref[i] - mean_r;
    num += b.y() * a.x() - b.x() * a.y();
    den += b.x() * a.x() + b.y() * a.y();
  }
  Alignment out;
  const double psi = (num == 0 && den == 0) ? 0.0 : std::atan2(num, den);
  out.yaw = so3_exp(Vector3d(0, 0, psi));
  out.translation = mean_r - out.yaw * mean_e;
  return out;
}

/// RMSE of the absolute trajectory error after 4-dof alignment.
inline double ate_rmse(const std::vector<Vector3d>& est,
                       const std::vector<Vector3d>& ref) {
  const Alignment a = align_yaw_translation(est, ref);
  double sum = 0;
  for (size_t i = 0; i < est.size(); ++i) {
    sum += (a.yaw * est[i] + a.translation - ref[i]).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(est.size()));
}

/// RMS geodesic rotation error after the same yaw alignment.
inline double rotation_rmse(const std::vector<Rotation3>& est,
                            const std::vector<Rotation3>& ref,
                            const std::vector<Vector3d>& est_p,
                            const std::vector<Vector3d>& ref_p) {
  const Alignment a = align_yaw_translation(est_p, ref_p);
  double sum = 0;
  for (size_t i = 0; i < est.size(); ++i) {
    const Rotation3 aligned = a.yaw * est[i];
    sum += so3_log(ref[i].transposed() * aligned).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(est.size()));
}

}  // namespace vipre
