#include "dhsense/metrics.hpp"

#include <cmath>
#include <string>

#include "dhsense/error.hpp"

namespace dhsense {

namespace {
void check(const Eigen::MatrixXd& y, const Eigen::MatrixXd& y_hat) {
  if (y.rows() != y_hat.rows() || y.cols() != y_hat.cols()) {
    throw ShapeError("metrics: targets are " + std::to_string(y.rows()) + "x" + std::to_string(y.cols()) +
                     ", predictions " + std::to_string(y_hat.rows()) + "x" + std::to_string(y_hat.cols()));
  }
  if (y.size() == 0) throw ShapeError("metrics: empty inputs");
}
}  // namespace

Metrics compute_metrics(const Eigen::MatrixXd& y, const Eigen::MatrixXd& y_hat) {
  check(y, y_hat);
  const double norm_y = y.norm();
  if (norm_y == 0.0) throw DomainError("accuracy undefined: target matrix has zero norm");
  const Eigen::MatrixXd diff = y - y_hat;
  const double n = static_cast<double>(y.size());
  Metrics m;
  m.rmse = std::sqrt(diff.squaredNorm() / n);
  m.mae = diff.cwiseAbs().sum() / n;
  m.accuracy = 1.0 - diff.norm() / norm_y;
  return m;
}

Eigen::VectorXd per_sensor_mae(const Eigen::MatrixXd& y, const Eigen::MatrixXd& y_hat) {
  check(y, y_hat);
  return (y - y_hat).cwiseAbs().colwise().mean().transpose();
}

}  // namespace dhsense
