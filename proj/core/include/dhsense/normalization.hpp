#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dhsense/augment.hpp"

namespace dhsense {

/// Per-column min/max fitted on training rows.
struct NormalizationStats {
  std::vector<std::string> names;
  Eigen::VectorXd min;
  Eigen::VectorXd max;

  /// Throws ConfigError with fewer than two rows.
  static NormalizationStats fit(const FeatureMatrix& training_rows);

  /// x' = (x - min) / (max - min); constant columns become 0. Columns are
  /// matched by name, so `rows` may be a reordering; unknown names throw
  /// SchemaError.
  FeatureMatrix apply(const FeatureMatrix& rows) const;
  /// Inverse of apply (constant columns go back to min).
  FeatureMatrix invert(const FeatureMatrix& rows) const;

  /// Same transforms on a bare matrix already in `names` order.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& values) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& values) const;

  std::size_t index_of(const std::string& name) const;
};

}  // namespace dhsense
