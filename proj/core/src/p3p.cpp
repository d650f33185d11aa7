#include "atlas/p3p.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "atlas/errors.hpp"
#include "atlas/rigid_ransac.hpp"

namespace atlas {

namespace {

// Dense polynomial, coeffs[i] = coefficient of x^i. Only the handful of ops
// needed to expand Grunert's elimination symbolically, so the quartic
// coefficients never have to be hand-derived.
using Poly = std::vector<double>;

Poly poly_mul(const Poly& a, const Poly& b) {
  Poly out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      out[i + j] += a[i] * b[j];
    }
  }
  return out;
}

Poly poly_add(const Poly& a, const Poly& b) {
  Poly out(std::max(a.size(), b.size()), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] += a[i];
  for (std::size_t i = 0; i < b.size(); ++i) out[i] += b[i];
  return out;
}

Poly poly_scale(const Poly& a, double s) {
  Poly out = a;
  for (double& c : out) c *= s;
  return out;
}

double poly_eval(const Poly& a, double x) {
  double acc = 0.0;
  for (std::size_t i = a.size(); i-- > 0;) acc = acc * x + a[i];
  return acc;
}

// Real roots via the companion matrix of the normalized polynomial.
std::vector<double> real_roots(Poly p) {
  while (p.size() > 1 && std::abs(p.back()) < 1e-14 * (1.0 + std::abs(p.front()))) {
    p.pop_back();
  }
  const int deg = static_cast<int>(p.size()) - 1;
  std::vector<double> roots;
  if (deg < 1) {
    return roots;
  }
  if (deg == 1) {
    roots.push_back(-p[0] / p[1]);
    return roots;
  }
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
  for (int i = 0; i < deg; ++i) {
    companion(i, deg - 1) = -p[i] / p[deg];
    if (i + 1 < deg) {
      companion(i + 1, i) = 1.0;
    }
  }
  const Eigen::EigenSolver<Eigen::MatrixXd> solver(companion);
  for (int i = 0; i < deg; ++i) {
    const std::complex<double> r = solver.eigenvalues()[i];
    if (std::abs(r.imag()) < 1e-8 * (1.0 + std::abs(r.real()))) {
      roots.push_back(r.real());
    }
  }
  return roots;
}

}  // namespace

std::vector<RigidTransform> p3p_minimal(const std::array<BearingPointPair, 3>& obs) {
  const Eigen::Vector3d f1 = obs[0].bearing.normalized();
  const Eigen::Vector3d f2 = obs[1].bearing.normalized();
  const Eigen::Vector3d f3 = obs[2].bearing.normalized();
  const Eigen::Vector3d& P1 = obs[0].point;
  const Eigen::Vector3d& P2 = obs[1].point;
  const Eigen::Vector3d& P3 = obs[2].point;

  const double a = (P2 - P3).norm();  // side opposite P1
  const double b = (P1 - P3).norm();
  const double c = (P1 - P2).norm();
  const Eigen::Vector3d normal = (P2 - P1).cross(P3 - P1);
  if (a < 1e-12 || b < 1e-12 || c < 1e-12 ||
      normal.norm() < 1e-10 * std::max({a * b, b * c, a * c})) {
    throw DegenerateConfiguration("p3p_minimal: collinear or coincident points");
  }
  const double cos_alpha = f2.dot(f3);  // angle opposite side a
  const double cos_beta = f1.dot(f3);
  const double cos_gamma = f1.dot(f2);
  if (cos_alpha > 1.0 - 1e-12 || cos_beta > 1.0 - 1e-12 ||
      cos_gamma > 1.0 - 1e-12) {
    throw DegenerateConfiguration("p3p_minimal: coincident bearings");
  }

  // Grunert's system with s2 = u*s1, s3 = v*s1:
  //   s1^2 (1 + v^2 - 2 v cos_beta)  = b^2
  //   s1^2 (1 + u^2 - 2 u cos_gamma) = c^2
  //   s1^2 (u^2 + v^2 - 2 u v cos_alpha) = a^2
  // Eliminating s1^2 and u leaves a quartic in v. The elimination
  //   u = N(v) / D(v),   N = (K-1) v^2 - 2K cos_beta v + (K+1),
  //   D = 2 cos_gamma - 2 cos_alpha v,       K = (a^2 - c^2) / b^2,
  // substituted into u^2 - 2 u cos_gamma + 1 - Q(v) = 0 with
  //   Q = (c^2/b^2)(1 + v^2 - 2 v cos_beta)
  // and cleared of D^2 is expanded with polynomial arithmetic below.
  const double K = (a * a - c * c) / (b * b);
  const Poly N = {K + 1.0, -2.0 * K * cos_beta, K - 1.0};
  const Poly D = {2.0 * cos_gamma, -2.0 * cos_alpha};
  const double cb2 = (c * c) / (b * b);
  const Poly one_minus_Q = {1.0 - cb2, 2.0 * cb2 * cos_beta, -cb2};
  const Poly quartic = poly_add(
      poly_add(poly_mul(N, N), poly_scale(poly_mul(N, D), -2.0 * cos_gamma)),
      poly_mul(poly_mul(D, D), one_minus_Q));

  std::vector<RigidTransform> candidates;
  for (double v : real_roots(quartic)) {
    if (v <= 0.0) {
      continue;
    }
    const double denom_b = 1.0 + v * v - 2.0 * v * cos_beta;
    const double Dv = poly_eval(D, v);
    if (denom_b <= 0.0 || std::abs(Dv) < 1e-14) {
      continue;
    }
    const double u = poly_eval(N, v) / Dv;
    if (u <= 0.0) {
      continue;
    }
    const double s1 = b / std::sqrt(denom_b);
    const double s2 = u * s1;
    const double s3 = v * s1;

    const std::vector<Eigen::Vector3d> world = {P1, P2, P3};
    const std::vector<Eigen::Vector3d> in_camera = {s1 * f1, s2 * f2, s3 * f3};
    RigidTransform T_camera_world;
    try {
      T_camera_world = fit_rigid_transform(world, in_camera);
    } catch (const DegenerateConfiguration&) {
      continue;
    }
    const RigidTransform T_world_camera = T_camera_world.inverse();

    bool valid = true;
    for (const auto& [bearing, point] : obs) {
      const Eigen::Vector3d in_cam = T_camera_world * point;
      if (in_cam.norm() < 1e-12) {
        valid = false;
        break;
      }
      const double cos_err =
          std::clamp(in_cam.normalized().dot(bearing.normalized()), -1.0, 1.0);
      if (std::acos(cos_err) > 1e-9) {
        valid = false;
        break;
      }
    }
    if (valid) {
      candidates.push_back(T_world_camera);
    }
  }
  return candidates;
}

}  // namespace atlas
