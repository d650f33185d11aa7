#include "atlas/bundle_adjust.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <map>
#include <set>

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "atlas/errors.hpp"

namespace atlas {

namespace {

struct ObservationTerm {
  LandmarkId landmark_id;
  VertexId vertex_id;
  int camera_idx;
  Eigen::Vector2d observed_px;
  double sigma_px;
};

struct BaProblem {
  const Map* map = nullptr;
  SolverConfig config;

  std::vector<VertexId> vertex_ids;
  std::map<VertexId, int> pose_state;  // -1 = gauge-fixed
  std::vector<LandmarkId> landmark_ids;
  std::map<LandmarkId, int> landmark_state;
  int num_pose_states = 0;
  int num_landmark_states = 0;
  int landmark_base = 0;

  std::vector<ObservationTerm> observations;

  // Current estimates (poses in mission frame, landmarks in global frame).
  std::map<VertexId, RigidTransform> poses;
  std::map<LandmarkId, Eigen::Vector3d> landmarks;

  int num_states() const { return 6 * num_pose_states + 3 * num_landmark_states; }
};

BaProblem setup_problem(const Map& map, const SolverConfig& config) {
  BaProblem p;
  p.map = &map;
  p.config = config;

  for (const auto& [vid, v] : map.vertices()) {
    p.vertex_ids.push_back(vid);
    p.poses[vid] = v.T_mission_body;
  }

  for (const auto& [lid, l] : map.landmarks()) {
    if (l.quality == LandmarkQuality::Bad) {
      continue;
    }
    std::set<VertexId> observers;
    for (const Backlink& b : l.backlinks) {
      observers.insert(b.vertex_id);
    }
    if (observers.size() < 2) {
      continue;  // depth unconstrained; the quality filter flags these anyway
    }
    p.landmark_ids.push_back(lid);
    p.landmarks[lid] = map.global_landmark_position(lid);
    for (const Backlink& b : l.backlinks) {
      const VisualFrame& frame = map.vertex(b.vertex_id).frames.at(b.frame_idx);
      const Keypoint& kp = frame.keypoints.at(b.keypoint_idx);
      const int cam_idx =
          std::min<int>(b.frame_idx, static_cast<int>(map.cameras().size()) - 1);
      p.observations.push_back({lid, b.vertex_id, cam_idx, kp.uv, kp.sigma_px});
    }
  }

  // Gauge anchors: one per connected component (odometry edges + shared
  // landmarks), the reference mission's first vertex first.
  std::map<VertexId, VertexId> parent;
  std::function<VertexId(VertexId)> find = [&](VertexId x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (VertexId vid : p.vertex_ids) {
    parent[vid] = vid;
  }
  auto unite = [&](VertexId a, VertexId b) { parent[find(a)] = find(b); };
  for (const auto& [from, e] : map.edges()) {
    unite(e.from_vertex, e.to_vertex);
  }
  for (LandmarkId lid : p.landmark_ids) {
    const auto& backlinks = map.landmark(lid).backlinks;
    for (std::size_t i = 1; i < backlinks.size(); ++i) {
      unite(backlinks[0].vertex_id, backlinks[i].vertex_id);
    }
  }
  std::set<VertexId> gauges;
  const auto& reference_ids = map.mission(map.reference_mission_id()).vertex_ids;
  if (!reference_ids.empty()) {
    gauges.insert(reference_ids.front());
  }
  std::set<VertexId> anchored;
  for (VertexId g : gauges) {
    anchored.insert(find(g));
  }
  for (const auto& [mid, m] : map.missions()) {
    if (!m.vertex_ids.empty() && anchored.insert(find(m.vertex_ids.front())).second) {
      gauges.insert(m.vertex_ids.front());
    }
  }

  int next = 0;
  for (VertexId vid : p.vertex_ids) {
    p.pose_state[vid] = gauges.count(vid) ? -1 : next++;
  }
  p.num_pose_states = next;
  p.landmark_base = 6 * next;
  int lnext = 0;
  for (LandmarkId lid : p.landmark_ids) {
    p.landmark_state[lid] = lnext++;
  }
  p.num_landmark_states = lnext;
  return p;
}

// Huber on the whitened residual norm; returns (cost contribution, weight).
std::pair<double, double> huber(double squared_norm, double delta) {
  const double a = std::sqrt(squared_norm);
  if (a <= delta) {
    return {squared_norm, 1.0};
  }
  return {delta * (2.0 * a - delta), delta / a};
}

double evaluate_cost(const BaProblem& p) {
  const Map& map = *p.map;
  double cost = 0.0;
  for (const ObservationTerm& obs : p.observations) {
    const Vertex& v = map.vertex(obs.vertex_id);
    const RigidTransform& T_gm = map.mission(v.mission_id).T_global_mission;
    try {
      const auto r = reprojection_residual(p.landmarks.at(obs.landmark_id),
                                           p.poses.at(obs.vertex_id), T_gm,
                                           map.cameras()[obs.camera_idx],
                                           obs.observed_px, obs.sigma_px);
      cost += huber(r.residual.squaredNorm(), p.config.huber_threshold_px).first;
    } catch (const BehindCamera&) {
      // A point that wandered behind the camera contributes the saturated
      // robust cost so such steps are not rewarded.
      cost += p.config.huber_threshold_px * p.config.huber_threshold_px * 100.0;
    }
  }
  for (const auto& [from, e] : map.edges()) {
    const auto r = relative_pose_residual(e.T_from_to, e.covariance,
                                          p.poses.at(e.from_vertex),
                                          p.poses.at(e.to_vertex));
    cost += r.residual.squaredNorm();
  }
  return cost;
}

void assemble(const BaProblem& p, std::vector<Eigen::Triplet<double>>* triplets,
              Eigen::VectorXd* gradient) {
  const Map& map = *p.map;
  gradient->setZero(p.num_states());

  auto add_block = [&](int row, int col, const Eigen::MatrixXd& block) {
    for (int r = 0; r < block.rows(); ++r) {
      for (int c = 0; c < block.cols(); ++c) {
        triplets->emplace_back(row + r, col + c, block(r, c));
      }
    }
  };

  for (const ObservationTerm& obs : p.observations) {
    const Vertex& v = map.vertex(obs.vertex_id);
    const RigidTransform& T_gm = map.mission(v.mission_id).T_global_mission;
    ReprojectionResidual r;
    try {
      r = reprojection_residual(p.landmarks.at(obs.landmark_id),
                                p.poses.at(obs.vertex_id), T_gm,
                                map.cameras()[obs.camera_idx], obs.observed_px,
                                obs.sigma_px);
    } catch (const BehindCamera&) {
      continue;
    }
    const double w = huber(r.residual.squaredNorm(), p.config.huber_threshold_px).second;
    const Eigen::Vector2d rw = w * r.residual;  // Triggs-style IRLS scaling

    const int pi = p.pose_state.at(obs.vertex_id);
    const int li = p.landmark_base + 3 * p.landmark_state.at(obs.landmark_id);
    if (pi >= 0) {
      add_block(6 * pi, 6 * pi, (w * (r.J_pose.transpose() * r.J_pose)).eval());
      gradient->segment<6>(6 * pi) += r.J_pose.transpose() * rw;
      add_block(6 * pi, li, (w * (r.J_pose.transpose() * r.J_landmark)).eval());
      add_block(li, 6 * pi, (w * (r.J_landmark.transpose() * r.J_pose)).eval());
    }
    add_block(li, li, (w * (r.J_landmark.transpose() * r.J_landmark)).eval());
    gradient->segment<3>(li) += r.J_landmark.transpose() * rw;
  }

  for (const auto& [from, e] : map.edges()) {
    const auto r = relative_pose_residual(e.T_from_to, e.covariance,
                                          p.poses.at(e.from_vertex),
                                          p.poses.at(e.to_vertex));
    const int ia = p.pose_state.at(e.from_vertex);
    const int ib = p.pose_state.at(e.to_vertex);
    if (ia >= 0) {
      add_block(6 * ia, 6 * ia, (r.J_from.transpose() * r.J_from).eval());
      gradient->segment<6>(6 * ia) += r.J_from.transpose() * r.residual;
    }
    if (ib >= 0) {
      add_block(6 * ib, 6 * ib, (r.J_to.transpose() * r.J_to).eval());
      gradient->segment<6>(6 * ib) += r.J_to.transpose() * r.residual;
    }
    if (ia >= 0 && ib >= 0) {
      add_block(6 * ia, 6 * ib, (r.J_from.transpose() * r.J_to).eval());
      add_block(6 * ib, 6 * ia, (r.J_to.transpose() * r.J_from).eval());
    }
  }
}

Eigen::VectorXd solve_step(const BaProblem& p,
                           const std::vector<Eigen::Triplet<double>>& triplets,
                           const Eigen::VectorXd& gradient, double damping,
                           bool dense, bool* ok) {
  const int n = p.num_states();
  *ok = true;
  if (dense) {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    for (const auto& t : triplets) {
      H(t.row(), t.col()) += t.value();
    }
    for (int d = 0; d < n; ++d) {
      H(d, d) += damping * (1.0 + H(d, d));
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    if (ldlt.info() != Eigen::Success) {
      *ok = false;
      return Eigen::VectorXd::Zero(n);
    }
    return ldlt.solve(-gradient);
  }
  Eigen::SparseMatrix<double> H(n, n);
  H.setFromTriplets(triplets.begin(), triplets.end());
  for (int d = 0; d < n; ++d) {
    H.coeffRef(d, d) *= (1.0 + damping);
    H.coeffRef(d, d) += damping;
  }
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(H);
  if (solver.info() != Eigen::Success) {
    *ok = false;
    return Eigen::VectorXd::Zero(n);
  }
  return solver.solve(-gradient);
}

void apply_step(BaProblem& p, const Eigen::VectorXd& dx) {
  for (VertexId vid : p.vertex_ids) {
    const int si = p.pose_state.at(vid);
    if (si >= 0) {
      p.poses[vid] = p.poses[vid].retract(dx.segment<6>(6 * si));
    }
  }
  for (LandmarkId lid : p.landmark_ids) {
    p.landmarks[lid] += dx.segment<3>(p.landmark_base + 3 * p.landmark_state.at(lid));
  }
}

}  // namespace

Eigen::VectorXd solve_normal_equations_once(const Map& map, const SolverConfig& config,
                                            bool dense, double damping) {
  BaProblem p = setup_problem(map, config);
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd gradient;
  assemble(p, &triplets, &gradient);
  bool ok = true;
  return solve_step(p, triplets, gradient, damping, dense, &ok);
}

OptimizeStats optimize_full_batch(Map& map, const SolverConfig& config) {
  BaProblem p = setup_problem(map, config);
  if (p.observations.empty() && map.edges().empty()) {
    throw NoResiduals("optimize_full_batch: nothing to optimize");
  }

  OptimizeStats stats;
  stats.num_residuals = p.observations.size() + map.edges().size();
  stats.num_states = static_cast<std::size_t>(p.num_states());
  stats.initial_cost = evaluate_cost(p);
  double cost = stats.initial_cost;
  double damping = config.initial_damping;

  const bool dense = config.force_dense || p.num_states() <= 600;

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::VectorXd gradient;
    assemble(p, &triplets, &gradient);

    bool accepted = false;
    for (int retry = 0; retry < 12 && !accepted; ++retry) {
      bool ok = true;
      const Eigen::VectorXd dx =
          solve_step(p, triplets, gradient, damping, dense, &ok);
      if (!ok) {
        damping *= 10.0;
        continue;
      }
      BaProblem trial = p;
      apply_step(trial, dx);
      const double new_cost = evaluate_cost(trial);
      if (new_cost <= cost) {
        const double decrease = cost - new_cost;
        p = std::move(trial);
        cost = new_cost;
        damping = std::max(1e-12, damping * 0.3);
        accepted = true;
        ++stats.iterations;
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        stats.per_iteration.push_back({stats.iterations, cost, secs});
        if (decrease < config.relative_cost_tolerance * std::max(cost, 1.0)) {
          iter = config.max_iterations;
        }
      } else {
        damping *= 10.0;
      }
    }
    if (!accepted) {
      if (stats.iterations == 0 && cost > 1e-10) {
        throw SolverDiverged("optimize_full_batch: no descent step found");
      }
      break;
    }
  }

  // Write back poses and Good landmark positions (host mission frame).
  for (VertexId vid : p.vertex_ids) {
    map.vertex(vid).T_mission_body = p.poses.at(vid);
  }
  for (LandmarkId lid : p.landmark_ids) {
    Landmark& l = map.landmark(lid);
    const MissionId mid = map.vertex(l.host_vertex_id).mission_id;
    l.p_mission = map.mission(mid).T_global_mission.inverse() * p.landmarks.at(lid);
  }
  stats.final_cost = cost;
  return stats;
}

}  // namespace atlas
