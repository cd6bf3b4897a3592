#pragma once

#include <Eigen/Dense>

namespace dhsense {

struct Metrics {
  double rmse = 0.0;
  double mae = 0.0;
  double accuracy = 0.0;  // 1 - ||Y - Yhat||_F / ||Y||_F
};

/// Throws ShapeError on mismatched or empty inputs and DomainError when
/// ||Y||_F = 0 (accuracy undefined).
Metrics compute_metrics(const Eigen::MatrixXd& y, const Eigen::MatrixXd& y_hat);

/// Column-wise mean absolute error.
Eigen::VectorXd per_sensor_mae(const Eigen::MatrixXd& y, const Eigen::MatrixXd& y_hat);

}  // namespace dhsense
