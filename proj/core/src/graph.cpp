#include "dhsense/graph.hpp"

#include <cmath>

#include "dhsense/error.hpp"

namespace dhsense {

Adjacency build_adjacency(const Eigen::MatrixXd& nodes, const AdjacencyOptions& opts) {
  const Eigen::Index n = nodes.rows();
  if (n < 2) throw ConfigError("adjacency needs at least 2 nodes, got " + std::to_string(n));
  if (!(opts.kappa >= 0.0)) throw ConfigError("adjacency threshold kappa must be non-negative");

  Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(n, n);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (nodes.row(i) - nodes.row(j)).norm();
      dist(i, j) = dist(j, i) = d;
      sum += d;
    }
  }
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  const double mean = sum / pairs;
  double var = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) var += (dist(i, j) - mean) * (dist(i, j) - mean);
  }

  Adjacency a;
  a.sigma0 = std::sqrt(var / pairs);
  if (a.sigma0 <= 1e-12 * std::max(1.0, mean)) {
    a.sigma0 = 1.0;
    a.sigma_fallback = true;
  }
  const double inv = 1.0 / (2.0 * a.sigma0 * a.sigma0);
  a.weights = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a.weights(i, i) = opts.self_loops ? 1.0 : 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = dist(i, j);
      if (d <= opts.kappa) a.weights(i, j) = a.weights(j, i) = std::exp(-d * d * inv);
    }
  }
  return a;
}

std::size_t window_count(std::size_t rows, std::size_t window, std::size_t stride) {
  if (window == 0 || stride == 0) throw ConfigError("window and stride must be positive");
  if (rows < window) {
    throw ConfigError("cannot window " + std::to_string(rows) + " rows with window " + std::to_string(window));
  }
  return (rows - window) / stride + 1;
}

std::vector<GraphSample> window_slices(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets,
                                       std::size_t window, std::size_t stride, const AdjacencyOptions* adjacency) {
  if (targets.rows() != features.rows()) {
    throw ShapeError("features have " + std::to_string(features.rows()) + " rows, targets " +
                     std::to_string(targets.rows()));
  }
  const auto count = window_count(static_cast<std::size_t>(features.rows()), window, stride);
  const auto w = static_cast<Eigen::Index>(window);
  std::vector<GraphSample> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    auto& s = out[k];
    s.start = k * stride;
    const auto r0 = static_cast<Eigen::Index>(s.start);
    s.x = features.middleRows(r0, w).transpose();
    s.y = targets.row(r0 + w - 1).transpose();
    if (adjacency) {
      auto a = build_adjacency(s.x, *adjacency);
      s.adjacency = std::move(a.weights);
      s.sigma0 = a.sigma0;
      s.sigma_fallback = a.sigma_fallback;
    }
  }
  return out;
}

Eigen::MatrixXd BatchedGraph::adjacency() const {
  const auto n = static_cast<Eigen::Index>(nodes());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  const auto m = static_cast<Eigen::Index>(nodes_per_sample);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    a.block(static_cast<Eigen::Index>(offsets[b]), static_cast<Eigen::Index>(offsets[b]), m, m) = blocks[b];
  }
  return a;
}

BatchedGraph block_diag_batch(const std::vector<const GraphSample*>& samples) {
  if (samples.empty()) throw ShapeError("cannot batch zero samples");
  const auto& first = *samples.front();
  const Eigen::Index n = first.x.rows();
  const Eigen::Index w = first.x.cols();
  const Eigen::Index m = first.y.size();
  const bool with_adj = first.adjacency.size() > 0;

  BatchedGraph g;
  g.nodes_per_sample = static_cast<std::size_t>(n);
  g.x.resize(n * static_cast<Eigen::Index>(samples.size()), w);
  g.y.resize(static_cast<Eigen::Index>(samples.size()), m);
  g.offsets.reserve(samples.size() + 1);
  for (std::size_t b = 0; b < samples.size(); ++b) {
    const auto& s = *samples[b];
    if (s.x.rows() != n || s.x.cols() != w || s.y.size() != m) {
      throw ShapeError("sample " + std::to_string(b) + " is " + std::to_string(s.x.rows()) + "x" +
                       std::to_string(s.x.cols()) + " with " + std::to_string(s.y.size()) + " targets, expected " +
                       std::to_string(n) + "x" + std::to_string(w) + " with " + std::to_string(m));
    }
    const auto off = static_cast<Eigen::Index>(b) * n;
    g.offsets.push_back(static_cast<std::size_t>(off));
    g.x.middleRows(off, n) = s.x;
    g.y.row(static_cast<Eigen::Index>(b)) = s.y.transpose();
    if (with_adj) {
      if (s.adjacency.rows() != n || s.adjacency.cols() != n) {
        throw ShapeError("sample " + std::to_string(b) + " adjacency is " + std::to_string(s.adjacency.rows()) + "x" +
                         std::to_string(s.adjacency.cols()));
      }
      g.blocks.push_back(s.adjacency);
    }
  }
  g.offsets.push_back(static_cast<std::size_t>(n) * samples.size());
  return g;
}

BatchedGraph block_diag_batch(const std::vector<GraphSample>& samples) {
  std::vector<const GraphSample*> ptrs;
  ptrs.reserve(samples.size());
  for (const auto& s : samples) ptrs.push_back(&s);
  return block_diag_batch(ptrs);
}

SplitBounds chronological_split(std::size_t n, const SplitFractions& f) {
  if (f.train < 0 || f.val < 0 || f.test < 0 || std::abs(f.train + f.val + f.test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be non-negative and sum to 1");
  }
  // the epsilon keeps products like 0.8 * 10 = 7.999... on the intended side
  constexpr double eps = 1e-9;
  SplitBounds b;
  b.total = n;
  b.train_end = static_cast<std::size_t>(std::floor(f.train * static_cast<double>(n) + eps));
  b.val_end = static_cast<std::size_t>(std::floor((f.train + f.val) * static_cast<double>(n) + eps));
  b.val_end = std::min(b.val_end, n);
  if (b.train_size() == 0 || b.val_size() == 0 || b.test_size() == 0) {
    throw ConfigError("chronological split of " + std::to_string(n) + " samples leaves an empty part (" +
                      std::to_string(b.train_size()) + "/" + std::to_string(b.val_size()) + "/" +
                      std::to_string(b.test_size()) + ")");
  }
  return b;
}

}  // namespace dhsense
