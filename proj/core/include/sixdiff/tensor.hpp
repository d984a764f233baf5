#pragma once

#include <Eigen/Core>

namespace sixdiff {

/// Dense row-major matrix. Latent sequences are (positions x width); batches
/// stack sequences vertically.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using ColVector = Eigen::Matrix<double, Eigen::Dynamic, 1>;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace sixdiff
