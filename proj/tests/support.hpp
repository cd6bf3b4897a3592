#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "dhsense/ops.hpp"
#include "dhsense/tensor.hpp"

namespace testing {

using dhsense::Tensor;
using dhsense::Var;

inline Tensor random_tensor(dhsense::Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = nd(rng);
  return t;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

// Random symmetric weighted adjacency with unit diagonal; every off-diagonal
// pair kept with probability `density`.
inline Eigen::MatrixXd random_adjacency(Eigen::Index n, std::mt19937_64& rng, double density = 0.5) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (u(rng) < density) a(i, j) = a(j, i) = 0.1 + 0.9 * u(rng);
    }
  }
  return a;
}

inline Tensor tensor_of(const Eigen::MatrixXd& m) { return Tensor::from_matrix(m); }

inline Eigen::MatrixXd matrix_of(const Tensor& t) {
  return Eigen::MatrixXd(t.matrix());
}

// Central differences (h = 1e-5) against the tape for a scalar loss built by
// `loss` from `inputs`. Errors are relative, with denominators floored at 1e-3
// so exact zeros compare absolutely. Returns the largest error seen.
inline double gradient_check(std::vector<Var> inputs, const std::function<Var()>& loss, double h = 1e-5) {
  for (auto& v : inputs) v.zero_grad();
  dhsense::backward(loss());
  std::vector<dhsense::Buffer> analytic;
  for (auto& v : inputs) analytic.push_back(v.grad());
  double worst = 0.0;
  dhsense::NoGradGuard no_grad;
  for (std::size_t p = 0; p < inputs.size(); ++p) {
    auto& data = inputs[p].value().data;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double keep = data[i];
      data[i] = keep + h;
      const double up = loss().value().data[0];
      data[i] = keep - h;
      const double down = loss().value().data[0];
      data[i] = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[p][i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-3});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

// sum(w .* y) for a fixed random w: a scalar whose gradient reaches every entry of y.
inline Var projection(const Var& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return dhsense::sum(dhsense::mul(y, dhsense::constant(random_tensor(y.shape(), rng))));
}

}  // namespace testing
