#include "atlas/projection.hpp"

#include <Eigen/Eigenvalues>

#include "atlas/errors.hpp"

namespace atlas {

Eigen::VectorXd descriptor_to_vector(const BinaryDescriptor& d) {
  Eigen::VectorXd v(d.size());
  for (int i = 0; i < d.size(); ++i) {
    v[i] = d.bit(i) ? 1.0 : 0.0;
  }
  return v;
}

DescriptorProjection train_projection(const std::vector<BinaryDescriptor>& sample,
                                      int target_dim) {
  if (sample.empty() || static_cast<int>(sample.size()) < target_dim) {
    throw InsufficientSample("projection training needs at least " +
                             std::to_string(target_dim) + " descriptors, got " +
                             std::to_string(sample.size()));
  }
  const int bits = sample.front().size();
  if (target_dim < 1 || target_dim > bits) {
    throw InsufficientSample("target dimension " + std::to_string(target_dim) +
                             " out of range for " + std::to_string(bits) + " bits");
  }
  for (const BinaryDescriptor& d : sample) {
    if (d.size() != bits) {
      throw LengthMismatch("mixed descriptor lengths in projection sample");
    }
  }

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(bits);
  for (const BinaryDescriptor& d : sample) {
    mean += descriptor_to_vector(d);
  }
  mean /= static_cast<double>(sample.size());

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(bits, bits);
  for (const BinaryDescriptor& d : sample) {
    const Eigen::VectorXd centered = descriptor_to_vector(d) - mean;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(centered);
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= static_cast<double>(sample.size());

  if (cov.trace() < 1e-12) {
    throw InsufficientSample("projection sample has zero variance",
                             /*degenerate=*/true);
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  // Eigenvalues come out ascending; take the top target_dim directions.
  DescriptorProjection p;
  p.mean = mean;
  p.basis.resize(target_dim, bits);
  for (int i = 0; i < target_dim; ++i) {
    Eigen::VectorXd dir = es.eigenvectors().col(bits - 1 - i);
    // Deterministic sign: largest-magnitude entry positive.
    int max_idx = 0;
    dir.cwiseAbs().maxCoeff(&max_idx);
    if (dir[max_idx] < 0.0) {
      dir = -dir;
    }
    p.basis.row(i) = dir.transpose();
  }
  return p;
}

ProjectedDescriptor project(const BinaryDescriptor& descriptor,
                            const DescriptorProjection& projection) {
  if (descriptor.size() != projection.input_bits()) {
    throw LengthMismatch("descriptor has " + std::to_string(descriptor.size()) +
                         " bits, projection expects " +
                         std::to_string(projection.input_bits()));
  }
  return projection.basis * (descriptor_to_vector(descriptor) - projection.mean);
}

}  // namespace atlas
