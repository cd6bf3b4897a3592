#include "dhsense/normalization.hpp"

#include "dhsense/error.hpp"

namespace dhsense {

NormalizationStats NormalizationStats::fit(const FeatureMatrix& training_rows) {
  if (training_rows.rows() < 2) {
    throw ConfigError("normalization needs at least 2 training rows, got " + std::to_string(training_rows.rows()));
  }
  NormalizationStats s;
  s.names = training_rows.names;
  s.min = training_rows.values.colwise().minCoeff().transpose();
  s.max = training_rows.values.colwise().maxCoeff().transpose();
  return s;
}

std::size_t NormalizationStats::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  throw SchemaError("feature '" + name + "' has no normalization statistics");
}

namespace {

template <typename Fn>
FeatureMatrix map_columns(const NormalizationStats& s, const FeatureMatrix& rows, Fn fn) {
  FeatureMatrix out = rows;
  for (std::size_t c = 0; c < rows.features(); ++c) {
    const auto k = s.index_of(rows.names[c]);
    const auto col = static_cast<Eigen::Index>(c);
    out.values.col(col) = fn(rows.values.col(col), s.min(static_cast<Eigen::Index>(k)), s.max(static_cast<Eigen::Index>(k)));
  }
  return out;
}

Eigen::VectorXd forward(const Eigen::VectorXd& x, double lo, double hi) {
  if (hi == lo) return Eigen::VectorXd::Zero(x.size());
  return (x.array() - lo) / (hi - lo);
}

Eigen::VectorXd backward(const Eigen::VectorXd& x, double lo, double hi) {
  if (hi == lo) return Eigen::VectorXd::Constant(x.size(), lo);
  return x.array() * (hi - lo) + lo;
}

}  // namespace

FeatureMatrix NormalizationStats::apply(const FeatureMatrix& rows) const { return map_columns(*this, rows, forward); }
FeatureMatrix NormalizationStats::invert(const FeatureMatrix& rows) const { return map_columns(*this, rows, backward); }

Eigen::MatrixXd NormalizationStats::apply(const Eigen::MatrixXd& values) const {
  if (static_cast<std::size_t>(values.cols()) != names.size()) {
    throw ShapeError("normalization expects " + std::to_string(names.size()) + " columns, got " +
                     std::to_string(values.cols()));
  }
  Eigen::MatrixXd out(values.rows(), values.cols());
  for (Eigen::Index c = 0; c < values.cols(); ++c) out.col(c) = forward(values.col(c), min(c), max(c));
  return out;
}

Eigen::MatrixXd NormalizationStats::invert(const Eigen::MatrixXd& values) const {
  if (static_cast<std::size_t>(values.cols()) != names.size()) {
    throw ShapeError("normalization expects " + std::to_string(names.size()) + " columns, got " +
                     std::to_string(values.cols()));
  }
  Eigen::MatrixXd out(values.rows(), values.cols());
  for (Eigen::Index c = 0; c < values.cols(); ++c) out.col(c) = backward(values.col(c), min(c), max(c));
  return out;
}

}  // namespace dhsense
