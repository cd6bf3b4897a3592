#include "dhsense/ops.hpp"

#include <cmath>

#include "dhsense/error.hpp"

namespace dhsense {

namespace {

[[noreturn]] void shape_mismatch(const char* op, const Var& a, const Var& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                   shape_string(b.shape()));
}

Tensor matrix_tensor(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }

MatrixView grad_of(Node& n, std::size_t i) { return n.parents[i]->value.grad_matrix(); }
bool wants(Node& n, std::size_t i) { return n.parents[i]->requires_grad; }

}  // namespace

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) shape_mismatch("matmul", a, b);
  Tensor out = matrix_tensor(a.rows(), b.cols());
  out.matrix().noalias() = a.value().matrix() * b.value().matrix();
  return make_result(std::move(out), {a, b}, [](Node& n) {
    auto g = n.value.grad_matrix();
    const auto& av = n.parents[0]->value;
    const auto& bv = n.parents[1]->value;
    if (wants(n, 0)) grad_of(n, 0).noalias() += g * bv.matrix().transpose();
    if (wants(n, 1)) grad_of(n, 1).noalias() += av.matrix().transpose() * g;
  });
}

Var add(const Var& a, const Var& b) {
  if (a.shape() == b.shape() || (a.value().size() == b.value().size() && a.rows() == b.rows() && a.cols() == b.cols())) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a.value().data[i] + b.value().data[i];
    return make_result(std::move(out), {a, b}, [](Node& n) {
      const auto& g = *n.value.grad;
      for (std::size_t p = 0; p < 2; ++p) {
        if (!wants(n, p)) continue;
        auto& pg = n.parents[p]->value.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
      }
    });
  }
  if (b.rows() == 1 && b.cols() == a.cols()) {
    Tensor out(a.shape());
    out.matrix() = a.value().matrix().rowwise() + b.value().matrix().row(0);
    return make_result(std::move(out), {a, b}, [](Node& n) {
      auto g = n.value.grad_matrix();
      if (wants(n, 0)) grad_of(n, 0) += g;
      if (wants(n, 1)) grad_of(n, 1) += g.colwise().sum();
    });
  }
  shape_mismatch("add", a, b);
}

Var sub(const Var& a, const Var& b) { return add(a, scale(b, -1.0)); }

Var mul(const Var& a, const Var& b) {
  if (a.value().size() != b.value().size() || a.rows() != b.rows()) shape_mismatch("mul", a, b);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a.value().data[i] * b.value().data[i];
  return make_result(std::move(out), {a, b}, [](Node& n) {
    const auto& g = *n.value.grad;
    const auto& av = n.parents[0]->value.data;
    const auto& bv = n.parents[1]->value.data;
    if (wants(n, 0)) {
      auto& pg = n.parents[0]->value.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i] * bv[i];
    }
    if (wants(n, 1)) {
      auto& pg = n.parents[1]->value.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i] * av[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = s * a.value().data[i];
  return make_result(std::move(out), {a}, [s](Node& n) {
    const auto& g = *n.value.grad;
    auto& pg = n.parents[0]->value.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) pg[i] += s * g[i];
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) shape_mismatch("concat_cols", parts[0], p);
    cols += p.cols();
  }
  Tensor out = matrix_tensor(rows, cols);
  auto m = out.matrix();
  std::vector<std::size_t> starts;
  std::size_t c = 0;
  for (const auto& p : parts) {
    starts.push_back(c);
    m.middleCols(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(p.cols())) = p.value().matrix();
    c += p.cols();
  }
  return make_result(std::move(out), parts, [starts](Node& n) {
    auto g = n.value.grad_matrix();
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      if (!wants(n, i)) continue;
      auto pg = grad_of(n, i);
      pg += g.middleCols(static_cast<Eigen::Index>(starts[i]), pg.cols());
    }
  });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of range for shape " + shape_string(a.shape()));
  }
  Tensor out = matrix_tensor(a.rows(), count);
  out.matrix() = a.value().matrix().middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count));
  return make_result(std::move(out), {a}, [begin](Node& n) {
    auto g = n.value.grad_matrix();
    grad_of(n, 0).middleCols(static_cast<Eigen::Index>(begin), g.cols()) += g;
  });
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of range for shape " + shape_string(a.shape()));
  }
  Tensor out = matrix_tensor(count, a.cols());
  out.matrix() = a.value().matrix().middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count));
  return make_result(std::move(out), {a}, [begin](Node& n) {
    auto g = n.value.grad_matrix();
    grad_of(n, 0).middleRows(static_cast<Eigen::Index>(begin), g.rows()) += g;
  });
}

Var reshape(const Var& a, Shape shape) {
  if (shape_size(shape) != a.value().size()) {
    throw ShapeError("reshape: cannot view " + shape_string(a.shape()) + " as " + shape_string(shape));
  }
  Tensor out(std::move(shape), a.value().data);
  return make_result(std::move(out), {a}, [](Node& n) {
    const auto& g = *n.value.grad;
    auto& pg = n.parents[0]->value.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double x : a.value().data) s += x;
  return make_result(Tensor({}, Buffer{s}), {a}, [](Node& n) {
    const double g = (*n.value.grad)[0];
    for (auto& x : n.parents[0]->value.ensure_grad()) x += g;
  });
}

Var mean(const Var& a) {
  if (a.value().size() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var leaky_relu(const Var& a, double slope) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = a.value().data[i];
    out.data[i] = x > 0 ? x : slope * x;
  }
  return make_result(std::move(out), {a}, [slope](Node& n) {
    const auto& g = *n.value.grad;
    const auto& x = n.parents[0]->value.data;
    auto& pg = n.parents[0]->value.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) pg[i] += x[i] > 0 ? g[i] : slope * g[i];
  });
}

Var selu(const Var& a) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = a.value().data[i];
    out.data[i] = x > 0 ? selu_lambda * x : selu_lambda * selu_alpha * std::expm1(x);
  }
  return make_result(std::move(out), {a}, [](Node& n) {
    const auto& g = *n.value.grad;
    const auto& x = n.parents[0]->value.data;
    auto& pg = n.parents[0]->value.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      pg[i] += g[i] * (x[i] > 0 ? selu_lambda : selu_lambda * selu_alpha * std::exp(x[i]));
    }
  });
}

Var segment_softmax(const Var& scores, std::shared_ptr<const std::vector<std::size_t>> offsets) {
  const auto& off = *offsets;
  if (off.empty() || off.back() != scores.rows()) {
    throw ShapeError("segment_softmax: offsets end at " + std::to_string(off.empty() ? 0 : off.back()) +
                     " but scores have shape " + shape_string(scores.shape()));
  }
  const auto h = static_cast<Eigen::Index>(scores.cols());
  Tensor out = matrix_tensor(scores.rows(), scores.cols());
  auto s = scores.value().matrix();
  auto y = out.matrix();
  for (std::size_t seg = 0; seg + 1 < off.size(); ++seg) {
    const auto b = static_cast<Eigen::Index>(off[seg]);
    const auto len = static_cast<Eigen::Index>(off[seg + 1] - off[seg]);
    if (len == 0) continue;
    for (Eigen::Index c = 0; c < h; ++c) {
      const double mx = s.col(c).segment(b, len).maxCoeff();
      double z = 0.0;
      for (Eigen::Index e = b; e < b + len; ++e) z += (y(e, c) = std::exp(s(e, c) - mx));
      y.col(c).segment(b, len) /= z;
    }
  }
  return make_result(std::move(out), {scores}, [offsets](Node& n) {
    const auto& off = *offsets;
    auto g = n.value.grad_matrix();
    auto y = n.value.matrix();
    auto pg = grad_of(n, 0);
    for (std::size_t seg = 0; seg + 1 < off.size(); ++seg) {
      const auto b = static_cast<Eigen::Index>(off[seg]);
      const auto len = static_cast<Eigen::Index>(off[seg + 1] - off[seg]);
      for (Eigen::Index c = 0; c < g.cols(); ++c) {
        double dot = 0.0;
        for (Eigen::Index e = b; e < b + len; ++e) dot += y(e, c) * g(e, c);
        for (Eigen::Index e = b; e < b + len; ++e) pg(e, c) += y(e, c) * (g(e, c) - dot);
      }
    }
  });
}

Var mse_loss(const Var& prediction, const Var& target) {
  if (prediction.value().size() != target.value().size() || prediction.rows() != target.rows()) {
    shape_mismatch("mse_loss", prediction, target);
  }
  const auto& p = prediction.value().data;
  const auto& t = target.value().data;
  const double inv = 1.0 / static_cast<double>(p.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - t[i]) * (p[i] - t[i]);
  return make_result(Tensor({}, Buffer{s * inv}), {prediction, target}, [inv](Node& n) {
    const double g = (*n.value.grad)[0];
    const auto& p = n.parents[0]->value.data;
    const auto& t = n.parents[1]->value.data;
    if (wants(n, 0)) {
      auto& pg = n.parents[0]->value.ensure_grad();
      for (std::size_t i = 0; i < p.size(); ++i) pg[i] += 2.0 * inv * g * (p[i] - t[i]);
    }
    if (wants(n, 1)) {
      auto& pg = n.parents[1]->value.ensure_grad();
      for (std::size_t i = 0; i < p.size(); ++i) pg[i] -= 2.0 * inv * g * (p[i] - t[i]);
    }
  });
}

Var block_matmul(std::shared_ptr<const std::vector<Eigen::MatrixXd>> blocks, const Var& x) {
  if (blocks->empty()) throw ShapeError("block_matmul: no blocks");
  const auto n = (*blocks)[0].rows();
  if (static_cast<std::size_t>(n) * blocks->size() != x.rows()) {
    throw ShapeError("block_matmul: " + std::to_string(blocks->size()) + " blocks of " + std::to_string(n) +
                     " rows against shape " + shape_string(x.shape()));
  }
  Tensor out = matrix_tensor(x.rows(), x.cols());
  auto xm = x.value().matrix();
  auto y = out.matrix();
  for (std::size_t b = 0; b < blocks->size(); ++b) {
    const auto r = static_cast<Eigen::Index>(b) * n;
    y.middleRows(r, n).noalias() = (*blocks)[b] * xm.middleRows(r, n);
  }
  return make_result(std::move(out), {x}, [blocks, n](Node& nd) {
    auto g = nd.value.grad_matrix();
    auto pg = grad_of(nd, 0);
    for (std::size_t b = 0; b < blocks->size(); ++b) {
      const auto r = static_cast<Eigen::Index>(b) * n;
      pg.middleRows(r, n).noalias() += (*blocks)[b].transpose() * g.middleRows(r, n);
    }
  });
}

Var head_mean(const Var& a, std::size_t heads) {
  if (heads == 0 || a.cols() % heads != 0) {
    throw ShapeError("head_mean: " + std::to_string(heads) + " heads do not divide shape " + shape_string(a.shape()));
  }
  const auto d = static_cast<Eigen::Index>(a.cols() / heads);
  const double inv = 1.0 / static_cast<double>(heads);
  Tensor out = matrix_tensor(a.rows(), static_cast<std::size_t>(d));
  auto y = out.matrix();
  auto x = a.value().matrix();
  y.setZero();
  for (std::size_t h = 0; h < heads; ++h) y += inv * x.middleCols(static_cast<Eigen::Index>(h) * d, d);
  return make_result(std::move(out), {a}, [heads, d, inv](Node& n) {
    auto g = n.value.grad_matrix();
    auto pg = grad_of(n, 0);
    for (std::size_t h = 0; h < heads; ++h) pg.middleCols(static_cast<Eigen::Index>(h) * d, d) += inv * g;
  });
}

}  // namespace dhsense
