#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace dhsense {

struct AdjacencyOptions {
  double kappa = 1.0;      // distance threshold
  bool self_loops = true;  // keep A(i,i) = 1
};

struct Adjacency {
  Eigen::MatrixXd weights;
  double sigma0 = 0.0;
  bool sigma_fallback = false;  // all pairwise distances equal, sigma0 forced to 1
};

/// Thresholded Gaussian kernel on Euclidean distances between the rows of
/// `nodes`, sigma0 = population std of the pairwise (i<j) distances.
Adjacency build_adjacency(const Eigen::MatrixXd& nodes, const AdjacencyOptions& opts = {});

struct GraphSample {
  Eigen::MatrixXd x;          // nodes x window
  Eigen::MatrixXd adjacency;  // nodes x nodes, empty when not built
  Eigen::VectorXd y;          // targets at the last step of the window
  std::size_t start = 0;
  double sigma0 = 0.0;
  bool sigma_fallback = false;
};

/// floor((rows - window) / stride) + 1; throws ConfigError if rows < window.
std::size_t window_count(std::size_t rows, std::size_t window, std::size_t stride);

/// `features` and `targets` are time-major (rows = hours). Adjacency is only
/// computed when `adjacency` is non-null.
std::vector<GraphSample> window_slices(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets,
                                       std::size_t window, std::size_t stride,
                                       const AdjacencyOptions* adjacency = nullptr);

/// Disjoint union of equally sized samples. Adjacency is kept as its diagonal
/// blocks; `adjacency()` materializes the full matrix.
struct BatchedGraph {
  std::size_t nodes_per_sample = 0;
  Eigen::MatrixXd x;                    // (B * n) x window, samples stacked
  std::vector<Eigen::MatrixXd> blocks;  // B blocks of n x n (empty if samples had none)
  Eigen::MatrixXd y;                    // B x targets
  std::vector<std::size_t> offsets;     // B + 1 row offsets into x

  std::size_t samples() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::size_t nodes() const { return static_cast<std::size_t>(x.rows()); }
  Eigen::MatrixXd adjacency() const;
};

/// Throws ShapeError on heterogeneous node counts, windows or target counts.
BatchedGraph block_diag_batch(const std::vector<const GraphSample*>& samples);
BatchedGraph block_diag_batch(const std::vector<GraphSample>& samples);

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

/// Boundaries at floor(f_train * n) and floor((f_train + f_val) * n).
struct SplitBounds {
  std::size_t train_end = 0;
  std::size_t val_end = 0;
  std::size_t total = 0;

  std::size_t train_size() const { return train_end; }
  std::size_t val_size() const { return val_end - train_end; }
  std::size_t test_size() const { return total - val_end; }
};

/// Throws ConfigError if fractions do not sum to 1 or any part is empty.
SplitBounds chronological_split(std::size_t n, const SplitFractions& fractions = {});

template <typename T>
struct Split {
  std::vector<T> train, val, test;
};

template <typename T>
Split<T> chronological_split(const std::vector<T>& items, const SplitFractions& fractions = {}) {
  const auto b = chronological_split(items.size(), fractions);
  Split<T> s;
  s.train.assign(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(b.train_end));
  s.val.assign(items.begin() + static_cast<std::ptrdiff_t>(b.train_end),
               items.begin() + static_cast<std::ptrdiff_t>(b.val_end));
  s.test.assign(items.begin() + static_cast<std::ptrdiff_t>(b.val_end), items.end());
  return s;
}

}  // namespace dhsense
