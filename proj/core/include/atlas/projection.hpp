#pragma once

#include <vector>

#include <Eigen/Core>

#include "atlas/descriptor.hpp"

namespace atlas {

// Orthonormal projection of b-bit descriptors into a d-dimensional Euclidean
// space: values = basis * (bits - mean).
struct DescriptorProjection {
  Eigen::VectorXd mean;   // length b
  Eigen::MatrixXd basis;  // d x b, orthonormal rows

  int input_bits() const { return static_cast<int>(mean.size()); }
  int output_dim() const { return static_cast<int>(basis.rows()); }
};

using ProjectedDescriptor = Eigen::VectorXd;

// PCA on the {0,1}-valued bit vectors of the sample. Deterministic: Eigen's
// self-adjoint eigensolver with index-based tie-breaking. Throws
// InsufficientSample (degenerate_sample set when the sample has no spread).
DescriptorProjection train_projection(const std::vector<BinaryDescriptor>& sample,
                                      int target_dim);

// Throws LengthMismatch.
ProjectedDescriptor project(const BinaryDescriptor& descriptor,
                            const DescriptorProjection& projection);

Eigen::VectorXd descriptor_to_vector(const BinaryDescriptor& d);

}  // namespace atlas
