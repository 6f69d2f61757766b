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

#include <Eigen/Core>

#include "vipre/imu.hpp"
#include "vipre/lie.hpp"

namespace vipre {

/// Per-keyframe estimation state: pose, velocity and IMU biases.
struct NavState {
  Rotation3 rotation;
  Vector3d position = Vector3d::Zero();
  Vector3d velocity = Vector3d::Zero();
  ImuBias bias;
};

}  // namespace vipre
