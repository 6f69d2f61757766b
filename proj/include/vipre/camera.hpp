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
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "vipre/lie.hpp"

namespace vipre {

using Eigen::Vector2d;

// Points closer than this to the image plane are treated as not visible.
inline constexpr double kMinDepth = 0.05;  // m

/// Pinhole camera with a rigid extrinsic transform T_bc (camera frame to
/// body frame). The projection interface is the only thing residual code
/// touches, so a different camera model can slot in behind it.
struct PinholeCamera {
  Rotation3 r_bc;
  Vector3d p_bc = Vector3d::Zero();
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
};

struct CameraRig {
  std::vector<PinholeCamera> cameras;

  void validate() const {
    if (cameras.empty()) throw std::invalid_argument("CameraRig: no cameras");
    for (const auto& c : cameras) {
      if (!(c.fx > 0) || !(c.fy > 0) || c.width <= 0 || c.height <= 0) {
        throw std::invalid_argument("CameraRig: invalid camera parameters");
      }
    }
  }
};

struct Landmark {
  Vector3d position = Vector3d::Zero();  // world frame
  int id = -1;
};

struct Observation {
  int frame_id = -1;
  int camera_index = -1;
  int landmark_id = -1;
  Vector2d pixel = Vector2d::Zero();
  double sigma_px = 1.0;
};

/// World point into the frame of camera k of a rig mounted on a body at
/// (r_wb, p_wb).
inline Vector3d point_in_camera(const CameraRig& rig, int k,
                                const Rotation3& r_wb, const Vector3d& p_wb,
                                const Vector3d& p_world) {
  const PinholeCamera& cam = rig.cameras.at(static_cast<size_t>(k));
  const Vector3d p_body = r_wb.transposed() * (p_world - p_wb);
  return cam.r_bc.transposed() * (p_body - cam.p_bc);
}

inline std::optional<Vector2d> project_point(const PinholeCamera& cam,
                                             const Vector3d& p_cam) {
  if (!(p_cam.z() > kMinDepth)) return std::nullopt;
  const Vector2d px(cam.fx * p_cam.x() / p_cam.z() + cam.cx,
                    cam.fy * p_cam.y() / p_cam.z() + cam.cy);
  if (px.x() < 0 || px.x() > cam.width || px.y() < 0 || px.y() > cam.height) {
    return std::nullopt;
  }
  return px;
}

/// Pixel location of a world point in camera k, or nullopt when the point
/// is behind the camera or lands off the image.
inline std::optional<Vector2d> project(const CameraRig& rig, int k,
                                       const Rotation3& r_wb,
                                       const Vector3d& p_wb,
                                       const Vector3d& p_world) {
  const Vector3d p_cam = point_in_camera(rig, k, r_wb, p_wb, p_world);
  return project_point(rig.cameras.at(static_cast<size_t>(k)), p_cam);
}

}  // namespace vipre
