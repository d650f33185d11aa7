#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "atlas/bundle_adjust.hpp"
#include "atlas/descriptor.hpp"
#include "atlas/multi_index.hpp"
#include "atlas/residuals.hpp"
#include "atlas/rigid_ransac.hpp"
#include "atlas/session_log.hpp"
#include "atlas/synth.hpp"

namespace {

using namespace atlas;

std::vector<IndexEntry> clustered_entries(int count, int dim, int centers,
                                          std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Eigen::VectorXd> mu(centers);
  for (auto& c : mu) {
    c = Eigen::VectorXd::NullaryExpr(dim, [&] { return 5.0 * g(rng); });
  }
  std::vector<IndexEntry> entries(count);
  for (int i = 0; i < count; ++i) {
    entries[i].landmark_id = i;
    entries[i].descriptor =
        mu[i % centers] + Eigen::VectorXd::NullaryExpr(dim, [&] { return 0.4 * g(rng); });
  }
  return entries;
}

void BM_IndexQueryKnn(benchmark::State& state) {
  std::mt19937_64 rng(7);
  const int dim = 16;
  const auto entries = clustered_entries(100000, dim, 1000, rng);
  IndexConfig config;
  config.target_dim = dim;
  config.codebook_size = 16;
  const auto index = InvertedMultiIndex::build(entries, config);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<ProjectedDescriptor> queries(256);
  for (auto& q : queries) {
    q = entries[static_cast<std::size_t>(rng() % entries.size())].descriptor +
        Eigen::VectorXd::NullaryExpr(dim, [&] { return 0.1 * g(rng); });
  }
  const int probe = static_cast<int>(state.range(0));
  std::size_t qi = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(index.query_knn(queries[qi], 10, probe));
    qi = (qi + 1) % queries.size();
  }
}
BENCHMARK(BM_IndexQueryKnn)->Arg(4)->Arg(8)->Arg(64)->Arg(256);

void BM_HammingDistance(benchmark::State& state) {
  std::mt19937_64 rng(3);
  BinaryDescriptor a(512), b(512);
  for (int i = 0; i < 512; ++i) {
    a.set_bit(i, rng() & 1);
    b.set_bit(i, rng() & 1);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(a.hamming_distance(b));
  }
}
BENCHMARK(BM_HammingDistance);

void BM_ReprojectionResidual(benchmark::State& state) {
  PinholeCamera camera;
  const Eigen::Vector3d p_global(0.7, -0.3, 6.0);
  const RigidTransform T_mission_body(
      Eigen::Quaterniond(Eigen::AngleAxisd(0.2, Eigen::Vector3d(0.1, 1, 0).normalized())),
      Eigen::Vector3d(0.5, 0.1, -0.2));
  const RigidTransform T_global_mission(
      Eigen::Quaterniond(Eigen::AngleAxisd(-0.1, Eigen::Vector3d::UnitZ())),
      Eigen::Vector3d(1.0, 2.0, 0.0));
  const Eigen::Vector2d observed(330.0, 250.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(reprojection_residual(p_global, T_mission_body,
                                                   T_global_mission, camera, observed,
                                                   0.8));
  }
}
BENCHMARK(BM_ReprojectionResidual);

void BM_RelativePoseResidual(benchmark::State& state) {
  const RigidTransform measured(
      Eigen::Quaterniond(Eigen::AngleAxisd(0.05, Eigen::Vector3d::UnitY())),
      Eigen::Vector3d(1.0, 0.0, 0.0));
  const RigidTransform from(
      Eigen::Quaterniond(Eigen::AngleAxisd(0.3, Eigen::Vector3d::UnitZ())),
      Eigen::Vector3d(4.0, -1.0, 0.5));
  const RigidTransform to = from * measured.retract(
      (Vector6d() << 0.01, -0.02, 0.005, 0.03, 0.0, -0.01).finished());
  const Matrix6d cov = 1e-4 * Matrix6d::Identity();
  for (auto _ : state) {
    benchmark::DoNotOptimize(relative_pose_residual(measured, cov, from, to));
  }
}
BENCHMARK(BM_RelativePoseResidual);

void BM_RigidRansac(benchmark::State& state) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  const RigidTransform T(
      Eigen::Quaterniond(Eigen::AngleAxisd(0.6, Eigen::Vector3d(0.2, 0.4, 1).normalized())),
      Eigen::Vector3d(2.0, -1.0, 0.5));
  std::vector<PointCorrespondence> pairs(200);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Eigen::Vector3d p(5.0 * g(rng), 5.0 * g(rng), 5.0 * g(rng));
    pairs[i].source = p;
    pairs[i].target = T * p;
    if (i % 4 == 0) {
      pairs[i].target += Eigen::Vector3d(3.0 + g(rng), g(rng), g(rng));
    }
  }
  RansacConfig config;
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_rigid_transform_ransac(pairs, config));
  }
}
BENCHMARK(BM_RigidRansac);

Map synth_map(int sessions, double length) {
  WorldConfig wc;
  wc.landmark_count = 400;
  wc.session_count = sessions;
  wc.trajectory_length_m = length;
  wc.keyframe_spacing_m = 1.0;
  wc.sigma_rotation_rad = 0.001;
  wc.sigma_translation_m = 0.005;
  wc.pixel_noise_sigma_px = 0.4;
  wc.descriptor_clusters = 200;
  wc.seed = 9;
  const SynthWorld world = generate_world(wc);
  Map map;
  for (const SessionLog& log : world.logs) {
    ingest_session(log, map);
  }
  return map;
}

void BM_NormalEquationsSolve(benchmark::State& state) {
  const Map map = synth_map(1, static_cast<double>(state.range(0)));
  SolverConfig config;
  const bool dense = state.range(1) != 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_normal_equations_once(map, config, dense, 1e-6));
  }
  state.SetLabel(dense ? "dense" : "sparse");
}
BENCHMARK(BM_NormalEquationsSolve)
    ->Args({40, 0})
    ->Args({40, 1})
    ->Args({80, 0})
    ->Args({80, 1});

void BM_OptimizeFullBatch(benchmark::State& state) {
  const Map base = synth_map(2, 60.0);
  SolverConfig config;
  config.max_iterations = 10;
  for (auto _ : state) {
    Map map = base;
    benchmark::DoNotOptimize(optimize_full_batch(map, config));
  }
}
BENCHMARK(BM_OptimizeFullBatch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
