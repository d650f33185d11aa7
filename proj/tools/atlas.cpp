// Command-line front end chaining every map-building and localization stage.
#include <sys/resource.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "atlas/alignment.hpp"
#include "atlas/bundle_adjust.hpp"
#include "atlas/errors.hpp"
#include "atlas/keyframing.hpp"
#include "atlas/landmark_quality.hpp"
#include "atlas/localization.hpp"
#include "atlas/map_io.hpp"
#include "atlas/pose_graph.hpp"
#include "atlas/session_log.hpp"
#include "atlas/summarization.hpp"
#include "atlas/synth.hpp"

namespace fs = std::filesystem;
using namespace atlas;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitSolver = 3;

double peak_memory_mb() {
  struct rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  return static_cast<double>(usage.ru_maxrss) / 1024.0;  // ru_maxrss is in KiB
}

// Exclusive ownership of a map directory for the lifetime of the process.
class MapLock {
 public:
  explicit MapLock(const fs::path& map_dir) : lock_path_(map_dir.string() + ".lock") {
    std::error_code ec;
    fs::create_directories(map_dir.parent_path(), ec);
    FILE* f = std::fopen(lock_path_.c_str(), "wx");
    if (!f) {
      throw IoFailure("map is locked by another process (" + lock_path_.string() +
                      " exists)");
    }
    std::fprintf(f, "%d\n", static_cast<int>(getpid()));
    std::fclose(f);
  }
  ~MapLock() {
    std::error_code ec;
    fs::remove(lock_path_, ec);
  }
  MapLock(const MapLock&) = delete;
  MapLock& operator=(const MapLock&) = delete;

 private:
  fs::path lock_path_;
};

struct StageTimer {
  explicit StageTimer(std::string name)
      : name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
            .count();
    std::printf("[%s] %.3f s, peak memory %.1f MB\n", name_.c_str(), secs,
                peak_memory_mb());
  }
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

SessionLog read_log_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) {
    throw IoFailure("cannot open session log " + file.string());
  }
  return parse_session_log(in);
}

void print_stats(const Map& map) {
  std::size_t good = 0, bad = 0;
  for (const auto& [id, l] : map.landmarks()) {
    if (l.quality == LandmarkQuality::Bad) {
      ++bad;
    } else if (l.quality == LandmarkQuality::Good) {
      ++good;
    }
  }
  std::size_t anchored = 0;
  for (const auto& [id, m] : map.missions()) {
    anchored += m.anchored ? 1 : 0;
  }
  std::printf("%zu missions (%zu anchored), %zu keyframes, %zu landmarks "
              "(%zu good, %zu bad), %zu descriptors, %zu odometry edges\n",
              map.missions().size(), anchored, map.vertices().size(),
              map.landmarks().size(), good, bad, map.descriptor_count(),
              map.edges().size());
}

void write_pose_csv_row(std::FILE* f, double ts, const RigidTransform& T) {
  const auto& t = T.translation();
  const auto& q = T.rotation();
  std::fprintf(f, "%.9f, %.9f, %.9f, %.9f, %.9f, %.9f, %.9f, %.9f\n", ts, t.x(),
               t.y(), t.z(), q.w(), q.x(), q.y(), q.z());
}

int run(int argc, char** argv) {
  CLI::App app{"Multi-session visual map builder and 6-DoF localizer"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Key-value file presetting any flag; flags override");
  app.allow_config_extras(CLI::config_extras_mode::ignore_all);

  std::string map_dir;
  std::vector<std::string> log_files;
  std::string out_path;

  KeyframeCriteria keyframe_cfg;
  QualityThresholds quality_cfg;
  LoopEngineConfig engine_cfg;
  LoopConstraintConfig loop_cfg;
  RelaxConfig relax_cfg;
  SolverConfig solver_cfg;
  SummarizeConfig summarize_cfg;
  LocalizeConfig localize_cfg;
  WorldConfig world_cfg;

  auto add_map_option = [&](CLI::App* cmd) {
    cmd->add_option("--map", map_dir, "Map directory")->required();
  };

  auto* c_ingest = app.add_subcommand("ingest", "Append session logs as missions");
  add_map_option(c_ingest);
  c_ingest->add_option("--log", log_files, "Session log file(s)")->required();

  auto* c_keyframe = app.add_subcommand("keyframe", "Drop redundant vertices");
  add_map_option(c_keyframe);
  c_keyframe->add_option("--max-translation", keyframe_cfg.max_translation_m);
  c_keyframe->add_option("--max-rotation", keyframe_cfg.max_rotation_rad);
  c_keyframe->add_option("--max-gap", keyframe_cfg.max_consecutive_removed);
  c_keyframe->add_option("--min-coobserved", keyframe_cfg.min_coobserved_landmarks);

  auto* c_filter = app.add_subcommand("filter-landmarks", "Flag unreliable landmarks");
  add_map_option(c_filter);
  c_filter->add_option("--min-observers", quality_cfg.min_observers);
  c_filter->add_option("--min-disparity-deg", quality_cfg.min_disparity_deg);
  c_filter->add_option("--max-distance", quality_cfg.max_distance_m);

  auto* c_align = app.add_subcommand("align", "Anchor missions to the reference");
  add_map_option(c_align);
  c_align->add_option("--inlier-radius", engine_cfg.ransac.inlier_radius_m);
  c_align->add_option("--min-inliers", engine_cfg.ransac.min_inliers);
  c_align->add_option("--seed", engine_cfg.ransac.seed);
  c_align->add_option("--match-threshold", engine_cfg.match.match_threshold);
  c_align->add_option("--num-neighbors", engine_cfg.match.num_neighbors);
  c_align->add_option("--min-covisibility", engine_cfg.match.min_covisibility_cluster);

  auto* c_relax = app.add_subcommand("relax", "Pose-graph relaxation with switchable loop constraints");
  add_map_option(c_relax);
  c_relax->add_option("--sigma-rotation", loop_cfg.sigma_rotation_rad);
  c_relax->add_option("--sigma-translation", loop_cfg.sigma_translation_m);
  c_relax->add_option("--switch-prior-weight", loop_cfg.switch_prior_weight);
  c_relax->add_option("--min-inliers", loop_cfg.engine.ransac.min_inliers);
  c_relax->add_option("--inlier-radius", loop_cfg.engine.ransac.inlier_radius_m);
  c_relax->add_option("--seed", loop_cfg.engine.ransac.seed);
  c_relax->add_option("--max-iterations", relax_cfg.max_iterations);

  auto* c_merge = app.add_subcommand("loopclose-merge", "Merge duplicate landmarks");
  add_map_option(c_merge);
  c_merge->add_option("--merge-radius", engine_cfg.merge_radius_m);
  c_merge->add_option("--match-threshold", engine_cfg.match.match_threshold);
  c_merge->add_option("--seed", engine_cfg.ransac.seed);

  auto* c_optimize = app.add_subcommand("optimize", "Full-batch least-squares refinement");
  add_map_option(c_optimize);
  c_optimize->add_option("--max-iterations", solver_cfg.max_iterations);
  c_optimize->add_option("--huber-threshold", solver_cfg.huber_threshold_px);
  c_optimize->add_flag("--dense", solver_cfg.force_dense);

  auto* c_summarize = app.add_subcommand("summarize", "Keep only localization-useful landmarks");
  add_map_option(c_summarize);
  c_summarize->add_option("--target-landmarks", summarize_cfg.target_landmark_count)
      ->required();
  c_summarize->add_option("--min-cover", summarize_cfg.min_cover);

  IndexConfig index_cfg;
  auto* c_index = app.add_subcommand("build-index", "Build the descriptor search index");
  add_map_option(c_index);
  c_index->add_option("--target-dim", index_cfg.target_dim);
  c_index->add_option("--codebook-size", index_cfg.codebook_size);
  c_index->add_option("--seed", index_cfg.seed);

  auto* c_localize = app.add_subcommand("localize", "Localize query frames against the map");
  add_map_option(c_localize);
  std::string query_log;
  c_localize->add_option("--query-log", query_log, "Session log with query frames")
      ->required();
  c_localize->add_option("--out", out_path, "Output CSV")->required();
  c_localize->add_option("--match-threshold", localize_cfg.match.match_threshold);
  c_localize->add_option("--num-neighbors", localize_cfg.match.num_neighbors);
  c_localize->add_option("--min-covisibility", localize_cfg.match.min_covisibility_cluster);
  c_localize->add_option("--inlier-px", localize_cfg.pnp.inlier_px);
  c_localize->add_option("--min-inliers", localize_cfg.pnp.min_inliers);
  c_localize->add_option("--seed", localize_cfg.pnp.seed);

  auto* c_stats = app.add_subcommand("stats", "Print map size statistics");
  add_map_option(c_stats);

  auto* c_export = app.add_subcommand("export-trajectory", "Write global-frame trajectory CSV");
  add_map_option(c_export);
  c_export->add_option("--out", out_path, "Output CSV")->required();

  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic multi-session world");
  std::string synth_out;
  c_synth->add_option("--out", synth_out, "Output directory")->required();
  c_synth->add_option("--landmarks", world_cfg.landmark_count);
  c_synth->add_option("--extent", world_cfg.area_extent_m);
  c_synth->add_option("--sessions", world_cfg.session_count);
  c_synth->add_option("--length", world_cfg.trajectory_length_m);
  c_synth->add_option("--spacing", world_cfg.keyframe_spacing_m);
  c_synth->add_option("--sigma-rotation", world_cfg.sigma_rotation_rad);
  c_synth->add_option("--sigma-translation", world_cfg.sigma_translation_m);
  c_synth->add_option("--pixel-noise", world_cfg.pixel_noise_sigma_px);
  c_synth->add_option("--clusters", world_cfg.descriptor_clusters);
  c_synth->add_option("--bit-flip-rate", world_cfg.bit_flip_rate);
  c_synth->add_option("--descriptor-bits", world_cfg.descriptor_bits);
  c_synth->add_option("--seed", world_cfg.seed);

  auto* c_check = app.add_subcommand("check", "Verify map integrity invariants");
  add_map_option(c_check);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message or requested help text
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* cmd = app.get_subcommands().front();
  const std::string name = cmd->get_name();
  StageTimer timer(name);

  if (cmd == c_synth) {
    const SynthWorld world = generate_world(world_cfg);
    fs::create_directories(synth_out);
    for (std::size_t s = 0; s < world.logs.size(); ++s) {
      std::ofstream out(fs::path(synth_out) /
                        ("session_" + std::to_string(s) + ".log"));
      write_session_log(world.logs[s], out);
      if (!out) {
        throw IoFailure("cannot write session log in " + synth_out);
      }
    }
    std::FILE* f = std::fopen((fs::path(synth_out) / "truth.csv").c_str(), "w");
    if (!f) {
      throw IoFailure("cannot write truth.csv in " + synth_out);
    }
    std::fprintf(f, "session, ts, x, y, z, qw, qx, qy, qz\n");
    for (std::size_t s = 0; s < world.truth.true_poses.size(); ++s) {
      for (std::size_t k = 0; k < world.truth.true_poses[s].size(); ++k) {
        std::fprintf(f, "%zu, ", s);
        write_pose_csv_row(f, world.truth.timestamps[s][k],
                           world.truth.true_poses[s][k]);
      }
    }
    std::fclose(f);
    std::printf("wrote %zu session logs and truth.csv to %s\n", world.logs.size(),
                synth_out.c_str());
    return kExitOk;
  }

  MapLock lock{fs::path(map_dir)};

  if (cmd == c_ingest) {
    Map map = fs::exists(fs::path(map_dir) / "manifest") ? load_map(map_dir) : Map{};
    for (const std::string& file : log_files) {
      const MissionId mid = ingest_session(read_log_file(file), map);
      std::printf("ingested %s as mission %llu\n", file.c_str(),
                  static_cast<unsigned long long>(mid));
    }
    save_map_atomic(map, map_dir);
    print_stats(map);
    return kExitOk;
  }

  Map map = load_map(map_dir);

  if (cmd == c_keyframe) {
    const std::size_t removed = keyframe_map(map, keyframe_cfg);
    save_map_atomic(map, map_dir);
    std::printf("removed %zu vertices\n", removed);
    print_stats(map);
  } else if (cmd == c_filter) {
    const QualityCounts counts = filter_landmarks(map, quality_cfg);
    save_map_atomic(map, map_dir);
    std::printf("%zu good, %zu bad landmarks\n", counts.good, counts.bad);
  } else if (cmd == c_align) {
    const AlignReport report = align_missions(map, engine_cfg);
    save_map_atomic(map, map_dir);
    std::printf("%zu missions anchored in %d rounds, %zu left unanchored\n",
                report.newly_anchored.size(), report.rounds,
                report.unanchored.size());
  } else if (cmd == c_relax) {
    auto constraints = build_loop_constraints(map, loop_cfg);
    std::printf("%zu loop constraints\n", constraints.size());
    if (!constraints.empty()) {
      const RelaxStats stats = relax(map, constraints, relax_cfg);
      std::size_t active = 0;
      for (double s : stats.switch_values) {
        active += s > 0.5 ? 1 : 0;
      }
      std::printf("cost %.6g -> %.6g in %d iterations, %zu/%zu switches active\n",
                  stats.initial_cost, stats.final_cost, stats.iterations, active,
                  stats.switch_values.size());
    }
    save_map_atomic(map, map_dir);
  } else if (cmd == c_merge) {
    const std::size_t merged = merge_duplicate_landmarks(map, engine_cfg);
    save_map_atomic(map, map_dir);
    std::printf("merged %zu duplicate landmarks\n", merged);
    print_stats(map);
  } else if (cmd == c_optimize) {
    const OptimizeStats stats = optimize_full_batch(map, solver_cfg);
    save_map_atomic(map, map_dir);
    std::printf("cost %.6g -> %.6g in %d iterations (%zu residuals, %zu states)\n",
                stats.initial_cost, stats.final_cost, stats.iterations,
                stats.num_residuals, stats.num_states);
  } else if (cmd == c_summarize) {
    const SummarizeResult result = summarize(map, summarize_cfg);
    save_map_atomic(map, map_dir);
    if (result.target_exceeds_available) {
      std::printf("warning: target exceeds available landmarks; keeping all\n");
    }
    std::printf("retained %zu landmarks, deleted %zu\n", result.retained,
                result.deleted);
  } else if (cmd == c_index) {
    const BuiltIndex built = build_map_index(map, index_cfg, false);
    built.index.save(fs::path(map_dir) / "index.bin", built.projection);
    update_manifest_checksum(map_dir, "index.bin");
    std::printf("indexed %zu descriptors into %d x %d cells\n",
                built.index.entry_count(), built.index.codebook_size(),
                built.index.codebook_size());
  } else if (cmd == c_localize) {
    const fs::path index_file = fs::path(map_dir) / "index.bin";
    if (!fs::exists(index_file)) {
      throw IndexNotBuilt("no index.bin in " + map_dir + "; run build-index first");
    }
    DescriptorProjection projection;
    const InvertedMultiIndex index = InvertedMultiIndex::load(index_file, &projection);
    const SessionLog log = read_log_file(query_log);
    if (map.cameras().empty()) {
      throw InvalidConfig("map has no camera calibration");
    }
    const PinholeCamera& camera = map.cameras().front();

    std::vector<VisualFrame> frames(log.vertices.size());
    for (const auto& kp : log.keypoints) {
      if (kp.frame != 0) {
        continue;
      }
      frames[kp.vertex].keypoints.push_back(kp.keypoint);
      frames[kp.vertex].descriptors.push_back(kp.descriptor);
      frames[kp.vertex].landmark_refs.push_back(kInvalidId);
    }
    std::FILE* f = std::fopen(out_path.c_str(), "w");
    if (!f) {
      throw IoFailure("cannot write " + out_path);
    }
    std::fprintf(f, "frame_ts, status, x, y, z, qw, qx, qy, qz, inliers, query_ms\n");
    int localized = 0;
    double total_ms = 0.0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      double secs = 0.0;
      const LocalizationResult r = localize_frame(frames[i], camera, map, index,
                                                  projection, localize_cfg, &secs);
      total_ms += 1e3 * secs;
      const bool ok = r.status == LocalizationStatus::Localized;
      localized += ok ? 1 : 0;
      const auto& t = r.T_global_body.translation();
      const auto& q = r.T_global_body.rotation();
      std::fprintf(f, "%.9f, %s, %.9f, %.9f, %.9f, %.9f, %.9f, %.9f, %.9f, %d, %.3f\n",
                   log.vertices[i].timestamp, ok ? "Localized" : "NotLocalized",
                   ok ? t.x() : 0.0, ok ? t.y() : 0.0, ok ? t.z() : 0.0,
                   ok ? q.w() : 1.0, ok ? q.x() : 0.0, ok ? q.y() : 0.0,
                   ok ? q.z() : 0.0, r.inlier_count, 1e3 * secs);
    }
    std::fclose(f);
    std::printf("localized %d / %zu frames, mean query %.1f ms\n", localized,
                frames.size(),
                frames.empty() ? 0.0 : total_ms / static_cast<double>(frames.size()));
  } else if (cmd == c_stats) {
    print_stats(map);
  } else if (cmd == c_export) {
    std::FILE* f = std::fopen(out_path.c_str(), "w");
    if (!f) {
      throw IoFailure("cannot write " + out_path);
    }
    std::fprintf(f, "ts, x, y, z, qw, qx, qy, qz\n");
    for (const auto& [mid, mission] : map.missions()) {
      for (VertexId vid : mission.vertex_ids) {
        write_pose_csv_row(f, map.vertex(vid).timestamp, map.global_vertex_pose(vid));
      }
    }
    std::fclose(f);
    std::printf("wrote %zu poses to %s\n", map.vertices().size(), out_path.c_str());
  } else if (cmd == c_check) {
    const IntegrityReport report = map.check_integrity();
    for (const IntegrityViolation& v : report.violations) {
      std::printf("violation [%s]: %s\n", v.invariant.c_str(), v.detail.c_str());
    }
    if (!report.clean()) {
      std::printf("%zu violations\n", report.violations.size());
      return kExitData;
    }
    std::printf("map ok\n");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const SolverDiverged& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
  } catch (const DisconnectedGraph& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
  } catch (const NoConsensus& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
  } catch (const NoResiduals& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return kExitSolver;
}
