#include "atlas/pose_graph.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "atlas/errors.hpp"

namespace atlas {

std::vector<LoopConstraint> build_loop_constraints(const Map& map,
                                                   const LoopConstraintConfig& config) {
  std::vector<LoopConstraint> constraints;
  if (map.landmarks().empty()) {
    return constraints;
  }
  BuiltIndex built;
  try {
    built = build_map_index(map, config.engine.index, /*anchored_missions_only=*/true);
  } catch (const InsufficientSample&) {
    return constraints;
  }

  Matrix6d covariance = Matrix6d::Identity();
  covariance.topLeftCorner<3, 3>() *=
      config.sigma_rotation_rad * config.sigma_rotation_rad;
  covariance.bottomRightCorner<3, 3>() *=
      config.sigma_translation_m * config.sigma_translation_m;

  std::set<std::pair<VertexId, VertexId>> seen_pairs;
  for (const auto& [vid, v] : map.vertices()) {
    if (!map.mission(v.mission_id).anchored) {
      continue;
    }
    // 3D-3D pairs between this vertex's own landmarks and their matches in
    // other missions, in the current global frame.
    std::vector<PointCorrespondence> pairs;
    std::vector<LandmarkId> pair_map_landmark;
    for (std::size_t f = 0; f < v.frames.size(); ++f) {
      const auto matches =
          query_frame_matches(v.frames[f], vid, static_cast<int>(f), built.index,
                              built.projection, map, config.engine.match,
                              v.mission_id);
      for (const Match2D3D& m : matches) {
        const LandmarkId own = v.frames[m.frame_idx].landmark_refs[m.keypoint_idx];
        if (own == kInvalidId || map.landmark(own).quality == LandmarkQuality::Bad) {
          continue;
        }
        pairs.push_back({map.global_landmark_position(m.landmark_id),
                         map.global_landmark_position(own)});
        pair_map_landmark.push_back(m.landmark_id);
      }
    }
    if (static_cast<int>(pairs.size()) < std::max(3, config.engine.ransac.min_inliers)) {
      continue;
    }
    AlignmentResult result;
    try {
      result = estimate_rigid_transform_ransac(pairs, config.engine.ransac);
    } catch (const NoConsensus&) {
      continue;
    }

    // Map vertex most covisible with the inlier landmarks.
    std::map<VertexId, int> votes;
    for (int idx : result.inlier_indices) {
      for (const Backlink& link : map.landmark(pair_map_landmark[idx]).backlinks) {
        ++votes[link.vertex_id];
      }
    }
    VertexId best_map_vertex = kInvalidId;
    int best_votes = 0;
    for (const auto& [cand, count] : votes) {
      if (map.vertex(cand).mission_id == v.mission_id) {
        continue;
      }
      if (count > best_votes || (count == best_votes && cand < best_map_vertex)) {
        best_votes = count;
        best_map_vertex = cand;
      }
    }
    if (best_map_vertex == kInvalidId) {
      continue;
    }
    if (!seen_pairs.insert({best_map_vertex, vid}).second) {
      continue;
    }

    // Corrected query pose: T_corr maps current global positions onto the
    // matched map geometry.
    const RigidTransform T_map_vertex = map.global_vertex_pose(best_map_vertex);
    const RigidTransform T_query_corrected =
        result.transform * map.global_vertex_pose(vid);
    LoopConstraint c;
    c.from_vertex = best_map_vertex;
    c.to_vertex = vid;
    c.relative_pose = T_map_vertex.inverse() * T_query_corrected;
    c.covariance = covariance;
    c.switch_prior_weight = config.switch_prior_weight;
    constraints.push_back(c);
  }
  return constraints;
}

namespace {

struct RelaxProblem {
  std::vector<VertexId> vertex_ids;            // all vertices, fixed order
  std::map<VertexId, int> state_index;         // -1 = gauge-fixed
  std::vector<RigidTransform> poses;           // current global poses
  std::map<VertexId, std::size_t> pose_index;  // vertex -> poses slot
  int num_pose_states = 0;
};

double evaluate_cost(const Map& map, const RelaxProblem& p,
                     const std::vector<LoopConstraint>& constraints,
                     const std::vector<double>& switches) {
  double cost = 0.0;
  for (const auto& [from, e] : map.edges()) {
    const auto r = relative_pose_residual(
        e.T_from_to, e.covariance, p.poses[p.pose_index.at(e.from_vertex)],
        p.poses[p.pose_index.at(e.to_vertex)]);
    cost += r.residual.squaredNorm();
  }
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    const LoopConstraint& c = constraints[i];
    const auto r = relative_pose_residual(
        c.relative_pose, c.covariance, p.poses[p.pose_index.at(c.from_vertex)],
        p.poses[p.pose_index.at(c.to_vertex)]);
    const double s = switches[i];
    cost += s * s * r.residual.squaredNorm();
    const double prior = 1.0 - s;
    cost += c.switch_prior_weight * prior * prior;
  }
  return cost;
}

}  // namespace

RelaxStats relax(Map& map, std::vector<LoopConstraint>& constraints,
                 const RelaxConfig& config) {
  RelaxProblem p;
  for (const auto& [vid, v] : map.vertices()) {
    p.pose_index[vid] = p.poses.size();
    p.poses.push_back(map.global_vertex_pose(vid));
    p.vertex_ids.push_back(vid);
  }
  if (p.poses.empty()) {
    throw DisconnectedGraph("relax on an empty map");
  }

  // Chain integrity: every consecutive mission pair must have its edge.
  for (const auto& [mid, m] : map.missions()) {
    for (std::size_t i = 0; i + 1 < m.vertex_ids.size(); ++i) {
      auto it = map.edges().find(m.vertex_ids[i]);
      if (it == map.edges().end() || it->second.to_vertex != m.vertex_ids[i + 1]) {
        throw DisconnectedGraph("broken odometry chain in mission " +
                                std::to_string(mid));
      }
    }
  }

  // Connected components over odometry + loop edges; the reference mission's
  // first vertex anchors its component, every other component gets its own
  // anchor so the normal equations stay full-rank.
  std::map<VertexId, VertexId> comp_parent;
  std::function<VertexId(VertexId)> find = [&](VertexId x) {
    while (comp_parent[x] != x) {
      comp_parent[x] = comp_parent[comp_parent[x]];
      x = comp_parent[x];
    }
    return x;
  };
  for (VertexId vid : p.vertex_ids) {
    comp_parent[vid] = vid;
  }
  auto unite = [&](VertexId a, VertexId b) { comp_parent[find(a)] = find(b); };
  for (const auto& [from, e] : map.edges()) {
    unite(e.from_vertex, e.to_vertex);
  }
  for (const LoopConstraint& c : constraints) {
    unite(c.from_vertex, c.to_vertex);
  }
  std::set<VertexId> gauges;
  gauges.insert(map.mission(map.reference_mission_id()).vertex_ids.front());
  std::set<VertexId> anchored_components;
  for (VertexId g : gauges) {
    anchored_components.insert(find(g));
  }
  for (const auto& [mid, m] : map.missions()) {
    const VertexId first = m.vertex_ids.front();
    if (anchored_components.insert(find(first)).second) {
      gauges.insert(first);
    }
  }

  int next_state = 0;
  for (VertexId vid : p.vertex_ids) {
    p.state_index[vid] = gauges.count(vid) ? -1 : next_state++;
  }
  p.num_pose_states = next_state;
  const int num_states = 6 * p.num_pose_states + static_cast<int>(constraints.size());
  const int switch_base = 6 * p.num_pose_states;

  std::vector<double> switches;
  switches.reserve(constraints.size());
  for (const LoopConstraint& c : constraints) {
    switches.push_back(std::clamp(c.switch_value, 0.0, 1.0));
  }

  RelaxStats stats;
  stats.initial_cost = evaluate_cost(map, p, constraints, switches);
  double cost = stats.initial_cost;
  double damping = config.initial_damping;

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    // Assemble normal equations H dx = -g from whitened residuals.
    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::VectorXd gradient = Eigen::VectorXd::Zero(num_states);

    auto add_block = [&](int row_base, int col_base, const Eigen::MatrixXd& block) {
      for (int r = 0; r < block.rows(); ++r) {
        for (int c = 0; c < block.cols(); ++c) {
          if (block(r, c) != 0.0) {
            triplets.emplace_back(row_base + r, col_base + c, block(r, c));
          }
        }
      }
    };

    auto add_pair = [&](int ia, int ib, const Matrix6d& Ja, const Matrix6d& Jb,
                        const Vector6d& r, double scale) {
      const double s2 = scale * scale;
      if (ia >= 0) {
        add_block(6 * ia, 6 * ia, (s2 * (Ja.transpose() * Ja)).eval());
        gradient.segment<6>(6 * ia) += s2 * (Ja.transpose() * r);
      }
      if (ib >= 0) {
        add_block(6 * ib, 6 * ib, (s2 * (Jb.transpose() * Jb)).eval());
        gradient.segment<6>(6 * ib) += s2 * (Jb.transpose() * r);
      }
      if (ia >= 0 && ib >= 0) {
        add_block(6 * ia, 6 * ib, (s2 * (Ja.transpose() * Jb)).eval());
        add_block(6 * ib, 6 * ia, (s2 * (Jb.transpose() * Ja)).eval());
      }
    };

    for (const auto& [from, e] : map.edges()) {
      const auto r = relative_pose_residual(
          e.T_from_to, e.covariance, p.poses[p.pose_index.at(e.from_vertex)],
          p.poses[p.pose_index.at(e.to_vertex)]);
      add_pair(p.state_index.at(e.from_vertex), p.state_index.at(e.to_vertex),
               r.J_from, r.J_to, r.residual, 1.0);
    }

    for (std::size_t i = 0; i < constraints.size(); ++i) {
      const LoopConstraint& c = constraints[i];
      const auto r = relative_pose_residual(
          c.relative_pose, c.covariance, p.poses[p.pose_index.at(c.from_vertex)],
          p.poses[p.pose_index.at(c.to_vertex)]);
      const double s = switches[i];
      const int ia = p.state_index.at(c.from_vertex);
      const int ib = p.state_index.at(c.to_vertex);
      add_pair(ia, ib, r.J_from, r.J_to, r.residual, s);

      // Switch column: residual rows s*r with d/ds = r, plus the prior row
      // sqrt(w)(1-s) with d/ds = -sqrt(w).
      const int is = switch_base + static_cast<int>(i);
      const Vector6d dr_ds = r.residual;  // d(s*r)/ds
      triplets.emplace_back(is, is,
                            dr_ds.squaredNorm() + c.switch_prior_weight);
      gradient[is] += dr_ds.dot(s * r.residual) -
                      c.switch_prior_weight * (1.0 - s);
      if (ia >= 0) {
        const Eigen::Matrix<double, 6, 1> cross =
            s * (r.J_from.transpose() * dr_ds);
        for (int k = 0; k < 6; ++k) {
          triplets.emplace_back(6 * ia + k, is, cross[k]);
          triplets.emplace_back(is, 6 * ia + k, cross[k]);
        }
      }
      if (ib >= 0) {
        const Eigen::Matrix<double, 6, 1> cross = s * (r.J_to.transpose() * dr_ds);
        for (int k = 0; k < 6; ++k) {
          triplets.emplace_back(6 * ib + k, is, cross[k]);
          triplets.emplace_back(is, 6 * ib + k, cross[k]);
        }
      }
    }

    Eigen::SparseMatrix<double> H(num_states, num_states);
    H.setFromTriplets(triplets.begin(), triplets.end());

    bool accepted = false;
    for (int retry = 0; retry < 12 && !accepted; ++retry) {
      Eigen::SparseMatrix<double> H_damped = H;
      for (int d = 0; d < num_states; ++d) {
        H_damped.coeffRef(d, d) += damping * (1.0 + H.coeff(d, d));
      }
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(H_damped);
      if (solver.info() != Eigen::Success) {
        damping *= 10.0;
        continue;
      }
      const Eigen::VectorXd dx = solver.solve(-gradient);

      std::vector<RigidTransform> new_poses = p.poses;
      for (VertexId vid : p.vertex_ids) {
        const int si = p.state_index.at(vid);
        if (si >= 0) {
          new_poses[p.pose_index.at(vid)] =
              p.poses[p.pose_index.at(vid)].retract(dx.segment<6>(6 * si));
        }
      }
      std::vector<double> new_switches = switches;
      for (std::size_t i = 0; i < constraints.size(); ++i) {
        new_switches[i] = std::clamp(
            switches[i] + dx[switch_base + static_cast<int>(i)], 0.0, 1.0);
      }

      const double new_cost = evaluate_cost(map, p, constraints, new_switches);
      if (new_cost <= cost) {
        const double decrease = cost - new_cost;
        p.poses = std::move(new_poses);
        switches = std::move(new_switches);
        cost = new_cost;
        damping = std::max(1e-12, damping * 0.3);
        accepted = true;
        ++stats.iterations;
        if (decrease < config.relative_cost_tolerance * std::max(cost, 1.0)) {
          iter = config.max_iterations;  // converged
        }
      } else {
        damping *= 10.0;
      }
    }
    if (!accepted) {
      if (stats.iterations == 0 && cost > 1e-12) {
        throw SolverDiverged("relax: no damping retry produced a descent step");
      }
      break;
    }
  }

  // Write back: vertex poses in mission frame (baseframes untouched); each
  // landmark rides along with its host vertex.
  std::map<VertexId, RigidTransform> old_global;
  for (VertexId vid : p.vertex_ids) {
    old_global[vid] = map.global_vertex_pose(vid);
  }
  for (VertexId vid : p.vertex_ids) {
    const Mission& m = map.mission(map.vertex(vid).mission_id);
    map.vertex(vid).T_mission_body =
        m.T_global_mission.inverse() * p.poses[p.pose_index.at(vid)];
  }
  std::vector<LandmarkId> landmark_ids;
  for (const auto& [lid, l] : map.landmarks()) {
    landmark_ids.push_back(lid);
  }
  for (LandmarkId lid : landmark_ids) {
    Landmark& l = map.landmark(lid);
    const RigidTransform& T_old = old_global.at(l.host_vertex_id);
    const RigidTransform T_new = map.global_vertex_pose(l.host_vertex_id);
    const MissionId mid = map.vertex(l.host_vertex_id).mission_id;
    const RigidTransform& T_gm = map.mission(mid).T_global_mission;
    const Eigen::Vector3d p_global_old = T_gm * l.p_mission;
    const Eigen::Vector3d p_body = T_old.inverse() * p_global_old;
    l.p_mission = T_gm.inverse() * (T_new * p_body);
  }

  stats.final_cost = cost;
  stats.switch_values = switches;
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    constraints[i].switch_value = switches[i];
  }
  return stats;
}

}  // namespace atlas
