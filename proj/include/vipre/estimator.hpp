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

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>

#include "vipre/camera.hpp"
#include "vipre/preintegration.hpp"
#include "vipre/residuals.hpp"
#include "vipre/state.hpp"

namespace vipre {

struct SolverConfig {
  int max_iterations = 15;
  double lambda0 = 1e-4;         // initial LM damping
  double lambda_up = 10.0;       // on reject
  double lambda_down = 0.5;      // on accept
  double rel_cost_tol = 1e-10;   // relative cost decrease
  double update_norm_tol = 1e-10;
  double huber_delta = 1.345;    // whitened pixels (95% efficiency point)
  int window_size = 8;

  void validate() const {
    if (max_iterations <= 0 || !(lambda0 > 0) || !(rel_cost_tol > 0) ||
        !(update_norm_tol > 0) || !(huber_delta > 0) || window_size < 2) {
      throw std::invalid_argument("SolverConfig: invalid parameters");
    }
  }
};

struct WindowFrame {
  int id = -1;
  double t = 0.0;
  NavState state;
  bool pose_fixed = false;  // gauge / anchoring
};

struct ImuFactor {
  int frame_i = -1;
  int frame_j = -1;
  PreintegratedImu preint;
  Matrix15d sqrt_info = Matrix15d::Identity();
};

inline ImuFactor make_imu_factor(int frame_i, int frame_j,
                                 const PreintegratedImu& preint) {
  ImuFactor f;
  f.frame_i = frame_i;
  f.frame_j = frame_j;
  f.preint = preint;
  f.sqrt_info = information_sqrt(preint).w;
  return f;
}

/// Fixed-lag optimization problem: ordered keyframes, one IMU factor per
/// consecutive pair, shared landmarks with per-frame observation sets.
struct Window {
  std::vector<WindowFrame> frames;
  std::vector<ImuFactor> imu_factors;
  std::map<int, Landmark> landmarks;     // estimated positions, by id
  std::vector<Observation> observations;  // frame_id refers to frames[].id
  CameraRig rig;
  Vector3d gravity = Vector3d(0, 0, -9.81);

  int frame_index(int id) const {
    for (size_t k = 0; k < frames.size(); ++k) {
      if (frames[k].id == id) return static_cast<int>(k);
    }
    return -1;
  }

  void validate() const {
    if (frames.empty()) throw std::invalid_argument("Window: empty");
    if (imu_factors.size() + 1 != frames.size()) {
      throw std::invalid_argument(
          "Window: need exactly one IMU factor per consecutive pair");
    }
    for (size_t k = 0; k < imu_factors.size(); ++k) {
      if (imu_factors[k].frame_i != frames[k].id ||
          imu_factors[k].frame_j != frames[k + 1].id) {
        throw std::invalid_argument("Window: IMU factor ordering broken");
      }
    }
  }
};

// ======================
// Cost and normal equations
// ======================

namespace detail {

/// Landmarks eligible for optimization: at least two observations among the
/// window's frames. Sorted ids give a deterministic column order.
inline std::vector<int> active_landmarks(const Window& w) {
  std::map<int, int> count;
  for (const auto& obs : w.observations) {
    if (w.landmarks.count(obs.landmark_id) &&
        w.frame_index(obs.frame_id) >= 0) {
      ++count[obs.landmark_id];
    }
  }
  std::vector<int> ids;
  for (const auto& [id, c] : count) {
    if (c >= 2) ids.push_back(id);
  }
  return ids;
}

}  // namespace detail

struct CostBreakdown {
  double total = 0.0;
  double imu = 0.0;
  double visual = 0.0;
  int invisible = 0;  // visual factors skipped as not-visible
};

inline CostBreakdown evaluate_cost(const Window& w, const SolverConfig& cfg) {
  CostBreakdown out;
  for (const auto& f : w.imu_factors) {
    const int i = w.frame_index(f.frame_i);
    const int j = w.frame_index(f.frame_j);
    const Vector15d r = imu_residual(w.frames[static_cast<size_t>(i)].state,
                                     w.frames[static_cast<size_t>(j)].state,
                                     f.preint, w.gravity);
    out.imu += (f.sqrt_info * r).squaredNorm();
  }
  for (const auto& obs : w.observations) {
    const int fi = w.frame_index(obs.frame_id);
    auto lm = w.landmarks.find(obs.landmark_id);
    if (fi < 0 || lm == w.landmarks.end()) continue;
    const auto r = reprojection_residual(
        obs, w.rig, w.frames[static_cast<size_t>(fi)].state, lm->second);
    if (!r) {
      ++out.invisible;
      continue;
    }
    out.visual += huber_loss(r->norm(), cfg.huber_delta);
  }
  out.total = out.imu + out.visual;
  return out;
}

/// Block-sparse Gauss-Newton system: dense over the (15 x frames) state
/// part, 3x3 blocks per landmark, with b = -J^T r.
struct NormalEquations {
  int num_frames = 0;
  std::vector<int> landmark_ids;  // sorted; column order of the blocks
  Eigen::MatrixXd h_pp;
  Eigen::VectorXd b_p;
  std::vector<Eigen::Matrix<double, Eigen::Dynamic, 3>> h_pl;
  std::vector<Matrix3d> h_ll;
  std::vector<Vector3d> b_l;
  double cost = 0.0;
  int invisible = 0;

  /// Full dense system, for brute-force equivalence checks.
  void dense(Eigen::MatrixXd* h, Eigen::VectorXd* b) const {
    const int np = 15 * num_frames;
    const int nl = 3 * static_cast<int>(landmark_ids.size());
    h->setZero(np + nl, np + nl);
    b->setZero(np + nl);
    h->topLeftCorner(np, np) = h_pp;
    b->head(np) = b_p;
    for (size_t l = 0; l < landmark_ids.size(); ++l) {
      const int c = np + 3 * static_cast<int>(l);
      h->block(0, c, np, 3) = h_pl[l];
      h->block(c, 0, 3, np) = h_pl[l].transpose();
      h->block(c, c, 3, 3) = h_ll[l];
      b->segment(c, 3) = b_l[l];
    }
  }
};

inline NormalEquations build_normal_equations(const Window& w,
                                              const SolverConfig& cfg) {
  w.validate();
  NormalEquations eq;
  eq.num_frames = static_cast<int>(w.frames.size());
  eq.landmark_ids = detail::active_landmarks(w);
  const int np = 15 * eq.num_frames;
  eq.h_pp.setZero(np, np);
  eq.b_p.setZero(np);
  eq.h_pl.assign(eq.landmark_ids.size(),
                 Eigen::Matrix<double, Eigen::Dynamic, 3>::Zero(np, 3));
  eq.h_ll.assign(eq.landmark_ids.size(), Matrix3d::Zero());
  eq.b_l.assign(eq.landmark_ids.size(), Vector3d::Zero());

  std::map<int, int> lm_col;
  for (size_t l = 0; l < eq.landmark_ids.size(); ++l) {
    lm_col[eq.landmark_ids[l]] = static_cast<int>(l);
  }

  // IMU factors
  for (const auto& f : w.imu_factors) {
    const int i = w.frame_index(f.frame_i);
    const int j = w.frame_index(f.frame_j);
    const NavState& xi = w.frames[static_cast<size_t>(i)].state;
    const NavState& xj = w.frames[static_cast<size_t>(j)].state;
    const Vector15d r = f.sqrt_info * imu_residual(xi, xj, f.preint, w.gravity);
    const ImuResidualJacobians jac =
        imu_residual_jacobians(xi, xj, f.preint, w.gravity);
    const Matrix15d ji = f.sqrt_info * jac.d_xi;
    const Matrix15d jj = f.sqrt_info * jac.d_xj;
    eq.cost += r.squaredNorm();
    eq.h_pp.block<15, 15>(15 * i, 15 * i) += ji.transpose() * ji;
    eq.h_pp.block<15, 15>(15 * j, 15 * j) += jj.transpose() * jj;
    eq.h_pp.block<15, 15>(15 * i, 15 * j) += ji.transpose() * jj;
    eq.h_pp.block<15, 15>(15 * j, 15 * i) += jj.transpose() * ji;
    eq.b_p.segment<15>(15 * i) -= ji.transpose() * r;
    eq.b_p.segment<15>(15 * j) -= jj.transpose() * r;
  }

  // visual factors (IRLS-weighted Huber)
  for (const auto& obs : w.observations) {
    const int fi = w.frame_index(obs.frame_id);
    auto lm_it = w.landmarks.find(obs.landmark_id);
    auto col_it = lm_col.find(obs.landmark_id);
    if (fi < 0 || lm_it == w.landmarks.end() || col_it == lm_col.end()) {
      continue;
    }
    const NavState& x = w.frames[static_cast<size_t>(fi)].state;
    const auto r = reprojection_residual(obs, w.rig, x, lm_it->second);
    if (!r) {
      ++eq.invisible;
      continue;
    }
    const auto jac = reprojection_jacobians(obs, w.rig, x, lm_it->second);
    const double wgt = huber_weight(r->norm(), cfg.huber_delta);
    eq.cost += huber_loss(r->norm(), cfg.huber_delta);

    Eigen::Matrix<double, 2, 6> jp;  // [phi, position] of the frame
    jp.block<2, 3>(0, 0) = jac->d_phi;
    jp.block<2, 3>(0, 3) = jac->d_position;
    const Eigen::Matrix<double, 2, 3>& jl = jac->d_landmark;
    const int l = col_it->second;
    const int base = 15 * fi;

    eq.h_pp.block<6, 6>(base, base) += wgt * jp.transpose() * jp;
    eq.h_pl[static_cast<size_t>(l)].block<6, 3>(base, 0) +=
        wgt * jp.transpose() * jl;
    eq.h_ll[static_cast<size_t>(l)] += wgt * jl.transpose() * jl;
    eq.b_p.segment<6>(base) -= wgt * jp.transpose() * *r;
    eq.b_l[static_cast<size_t>(l)] -= wgt * jl.transpose() * *r;
  }
  return eq;
}

// ======================
// Damped solve with landmark elimination
// ======================

namespace detail {

struct StepSolution {
  Eigen::VectorXd delta_p;
  std::vector<Vector3d> delta_l;
  bool ok = false;
};

/// Gauge handling: zero the rows/columns of fixed pose blocks and put a
/// unit pivot on their diagonal so the solve leaves them untouched.
inline void apply_gauge(const Window& w, Eigen::MatrixXd* s,
                        Eigen::VectorXd* b) {
  for (size_t k = 0; k < w.frames.size(); ++k) {
    if (!w.frames[k].pose_fixed) continue;
    const int base = 15 * static_cast<int>(k);
    for (int d = 0; d < 6; ++d) {
      s->row(base + d).setZero();
      s->col(base + d).setZero();
      (*s)(base + d, base + d) = 1.0;
      (*b)(base + d) = 0.0;
    }
  }
}

inline StepSolution solve_damped(const Window& w, const NormalEquations& eq,
                                 double lambda) {
  StepSolution out;
  const int np = 15 * eq.num_frames;
  Eigen::MatrixXd s = eq.h_pp;
  Eigen::VectorXd bs = eq.b_p;

  std::vector<Matrix3d> hll_inv(eq.landmark_ids.size());
  for (size_t l = 0; l < eq.landmark_ids.size(); ++l) {
    Matrix3d hll = eq.h_ll[l];
    hll.diagonal().array() += lambda;
    hll_inv[l] = hll.inverse();
    const Eigen::Matrix<double, Eigen::Dynamic, 3> k = eq.h_pl[l] * hll_inv[l];
    s.noalias() -= k * eq.h_pl[l].transpose();
    bs.noalias() -= k * eq.b_l[l];
  }
  apply_gauge(w, &s, &bs);
  s.diagonal().array() += lambda;

  const Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  if (ldlt.info() != Eigen::Success) return out;
  out.delta_p = ldlt.solve(bs);
  if (!out.delta_p.allFinite()) return out;

  out.delta_l.resize(eq.landmark_ids.size());
  for (size_t l = 0; l < eq.landmark_ids.size(); ++l) {
    out.delta_l[l] =
        hll_inv[l] * (eq.b_l[l] - eq.h_pl[l].transpose() * out.delta_p);
  }
  out.ok = true;
  return out;
}

/// Undamped rank check after landmark elimination and gauge fixing; used to
/// produce an actionable error when the window is structurally degenerate.
inline void check_rank_or_throw(const Window& w, const NormalEquations& eq) {
  Eigen::MatrixXd s = eq.h_pp;
  Eigen::VectorXd bs = eq.b_p;
  for (size_t l = 0; l < eq.landmark_ids.size(); ++l) {
    Matrix3d hll = eq.h_ll[l];
    hll.diagonal().array() += 1e-12;
    const Eigen::Matrix<double, Eigen::Dynamic, 3> k = eq.h_pl[l] *
                                                       hll.inverse();
    s.noalias() -= k * eq.h_pl[l].transpose();
  }
  apply_gauge(w, &s, &bs);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
  const double emax = eig.eigenvalues().cwiseAbs().maxCoeff();
  std::vector<int> null_dims;
  for (int i = 0; i < s.rows(); ++i) {
    if (eig.eigenvalues()(i) < 1e-12 * std::max(emax, 1.0)) {
      null_dims.push_back(i);
    }
  }
  if (!null_dims.empty()) {
    std::ostringstream msg;
    msg << "solve_window: normal equations rank-deficient beyond gauge; "
        << null_dims.size() << " null directions (eigen indices:";
    for (int d : null_dims) msg << " " << d;
    msg << ")";
    throw std::runtime_error(msg.str());
  }
}

inline Window retract(const Window& w, const NormalEquations& eq,
                      const StepSolution& sol) {
  Window out = w;
  for (size_t k = 0; k < out.frames.size(); ++k) {
    const auto d = sol.delta_p.segment<15>(15 * static_cast<int>(k));
    NavState& x = out.frames[k].state;
    x.rotation = so3_exp(d.template segment<3>(0)) * x.rotation;
    x.position += d.template segment<3>(3);
    x.velocity += d.template segment<3>(6);
    x.bias.gyro += d.template segment<3>(9);
    x.bias.accel += d.template segment<3>(12);
  }
  for (size_t l = 0; l < eq.landmark_ids.size(); ++l) {
    out.landmarks.at(eq.landmark_ids[l]).position += sol.delta_l[l];
  }
  return out;
}

}  // namespace detail

struct SolveReport {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  std::vector<double> lambda_trace;
  bool converged = false;
  double last_update_norm = 0.0;
};

/// Damped Gauss-Newton (Levenberg) over the window with Schur-complement
/// landmark elimination. Accepted cost is monotone non-increasing; on
/// non-convergence the best iterate is kept and the flag says so.
inline SolveReport solve_window(Window* w, const SolverConfig& cfg) {
  cfg.validate();
  w->validate();
  double lambda = cfg.lambda0;
  CostBreakdown cost = evaluate_cost(*w, cfg);
  SolveReport report;
  report.initial_cost = cost.total;

  for (int it = 0; it < cfg.max_iterations; ++it) {
    const NormalEquations eq = build_normal_equations(*w, cfg);
    bool accepted = false;
    bool step_converged = false;
    for (int attempt = 0; attempt < 12; ++attempt) {
      const detail::StepSolution sol = detail::solve_damped(*w, eq, lambda);
      if (!sol.ok) {
        detail::check_rank_or_throw(*w, eq);
        lambda *= cfg.lambda_up;
        continue;
      }
      const Window candidate = detail::retract(*w, eq, sol);
      const CostBreakdown cnew = evaluate_cost(candidate, cfg);
      if (cnew.total <= cost.total * (1.0 + 1e-14) ||
          cnew.total <= cost.total + 1e-15) {
        const double decrease = cost.total - cnew.total;
        *w = candidate;
        report.last_update_norm = sol.delta_p.norm();
        accepted = true;
        report.lambda_trace.push_back(lambda);
        lambda = std::max(lambda * cfg.lambda_down, 1e-12);
        step_converged =
            decrease <= cfg.rel_cost_tol * std::max(cost.total, 1e-300) ||
            report.last_update_norm < cfg.update_norm_tol;
        cost = cnew;
        break;
      }
      lambda *= cfg.lambda_up;
    }
    ++report.iterations;
    if (!accepted) break;                 // stalled: keep best iterate
    report.converged = step_converged;
    if (step_converged) break;
  }
  report.final_cost = cost.total;
  return report;
}

// ======================
// Window maintenance
// ======================

struct KeyframeData {
  WindowFrame frame;
  PreintegratedImu preint_from_prev;
  std::vector<Observation> observations;
};

/// Append a keyframe with its IMU link; when the window exceeds the
/// configured size, drop the oldest frame and anchor the new oldest one
/// (pose held fixed in subsequent solves, velocity and biases stay free).
/// Landmarks that lose all observers are dropped.
inline void slide_window(Window* w, const KeyframeData& data,
                         int window_size) {
  if (!w->frames.empty()) {
    w->imu_factors.push_back(make_imu_factor(
        w->frames.back().id, data.frame.id, data.preint_from_prev));
  }
  w->frames.push_back(data.frame);
  for (const auto& obs : data.observations) w->observations.push_back(obs);

  if (static_cast<int>(w->frames.size()) > window_size) {
    const int drop_id = w->frames.front().id;
    w->frames.erase(w->frames.begin());
    w->imu_factors.erase(w->imu_factors.begin());
    std::erase_if(w->observations, [&](const Observation& o) {
      return o.frame_id == drop_id;
    });
    std::set<int> observed;
    for (const auto& o : w->observations) observed.insert(o.landmark_id);
    std::erase_if(w->landmarks, [&](const auto& kv) {
      return observed.count(kv.first) == 0;
    });
    w->frames.front().pose_fixed = true;
  }
}

// ======================
// Triangulation
// ======================

/// Linear midpoint triangulation from two or more rays; requires a baseline
/// above 1 mm and a reprojection check within 4 sigma in every observing
/// view. Returns nullopt on rejection.
inline std::optional<Vector3d> triangulate(
    const std::vector<Observation>& obs,
    const std::map<int, std::pair<Rotation3, Vector3d>>& poses,
    const CameraRig& rig) {
  if (obs.size() < 2) return std::nullopt;

  std::vector<Vector3d> centers, dirs;
  for (const auto& o : obs) {
    const auto it = poses.find(o.frame_id);
    if (it == poses.end()) return std::nullopt;
    const PinholeCamera& cam =
        rig.cameras.at(static_cast<size_t>(o.camera_index));
    const Rotation3& r_wb = it->second.first;
    const Vector3d& p_wb = it->second.second;
    const Vector3d center = p_wb + r_wb * cam.p_bc;
    Vector3d d_cam((o.pixel.x() - cam.cx) / cam.fx,
                   (o.pixel.y() - cam.cy) / cam.fy, 1.0);
    d_cam.normalize();
    centers.push_back(center);
    dirs.push_back(r_wb * (cam.r_bc * d_cam));
  }

  double max_baseline = 0;
  for (size_t i = 0; i < centers.size(); ++i) {
    for (size_t j = i + 1; j < centers.size(); ++j) {
      max_baseline = std::max(max_baseline, (centers[i] - centers[j]).norm());
    }
  }
  if (max_baseline <= 1e-3) return std::nullopt;

  Matrix3d a = Matrix3d::Zero();
  Vector3d b = Vector3d::Zero();
  for (size_t i = 0; i < centers.size(); ++i) {
    const Matrix3d proj = Matrix3d::Identity() - dirs[i] * dirs[i].transpose();
    a += proj;
    b += proj * centers[i];
  }
  const Eigen::LDLT<Matrix3d> ldlt(a);
  if (ldlt.info() != Eigen::Success) return std::nullopt;
  const Vector3d x = ldlt.solve(b);
  if (!x.allFinite()) return std::nullopt;

  for (const auto& o : obs) {
    const auto& pose = poses.at(o.frame_id);
    const auto px = project(rig, o.camera_index, pose.first, pose.second, x);
    if (!px) return std::nullopt;
    if ((*px - o.pixel).norm() >= 4.0 * o.sigma_px) return std::nullopt;
  }
  return x;
}

}  // namespace vipre
