#pragma once

#include <cstddef>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dhsense/attention.hpp"
#include "dhsense/spectral.hpp"
#include "dhsense/tensor.hpp"

namespace dhsense {

struct Laplacian {
  Eigen::MatrixXd matrix;
  std::size_t isolated = 0;  // zero-degree nodes, treated as carrying a unit self-loop
};

/// L = I - D^-1/2 A D^-1/2, D = diag(A 1).
Laplacian normalized_laplacian(const Eigen::MatrixXd& adjacency);

struct LambdaMax {
  double value = 2.0;
  std::size_t iterations = 0;
  bool fallback = false;  // no convergence or zero spectrum; value is the bound 2
};

/// Dominant eigenvalue of a symmetric PSD matrix; stops once the eigen
/// residual ||L v - lambda v|| drops below `tol * lambda`.
LambdaMax power_iteration_lambda_max(const Eigen::MatrixXd& laplacian, double tol = 1e-9,
                                     std::size_t max_iter = 1000);

/// 2 L / lambda_max - I.
Eigen::MatrixXd scaled_laplacian(const Eigen::MatrixXd& laplacian, double lambda_max);

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

/// sum_k T_k(L~) X Theta_k with T_0 = I, T_1 = L~, T_k = 2 L~ T_{k-1} - T_{k-2}.
/// `theta` is (K+1) x d_in x d_out; `laplacians` holds one scaled Laplacian per
/// sample, acting on consecutive row blocks of `x`.
Var cheb_conv(const Var& x, std::shared_ptr<const std::vector<Eigen::MatrixXd>> laplacians, const Var& theta);

/// Multi-head GATv2 aggregation. w_src, w_dst are d_in x (heads * d),
/// att is heads x d. Heads are concatenated, or averaged when !concat.
Var gatv2_conv(const Var& x, const AttentionGraph& graph, const Var& w_src, const Var& w_dst, const Var& att,
               std::size_t heads, bool concat, double slope = 0.2, Eigen::MatrixXd* alpha = nullptr);

/// h'_i = W1 h_i + sum_j softmax_j((W3 h_i).(W4 h_j) / sqrt(d)) W2 h_j per head.
/// w2..w4 are d_in x (heads * d); w1 is d_in x (heads * d) when concatenating
/// and d_in x d when averaging.
Var transformer_conv(const Var& x, const AttentionGraph& graph, const Var& w1, const Var& w2, const Var& w3,
                     const Var& w4, std::size_t heads, bool concat, Eigen::MatrixXd* alpha = nullptr);

/// Everything a graph layer needs to know about the current batch.
struct GraphContext {
  std::size_t samples = 0;
  std::size_t nodes_per_sample = 0;
  AttentionGraph attention;
  std::shared_ptr<const std::vector<Eigen::MatrixXd>> scaled_laplacians;
  std::size_t lambda_fallbacks = 0;
  std::size_t isolated_nodes = 0;
};

class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, std::mt19937_64& rng, const std::string& name);
  Var operator()(const Var& x) const;
  std::vector<Var> parameters() const { return {weight, bias}; }

  Var weight, bias;
};

class GraphLayer {
 public:
  virtual ~GraphLayer() = default;
  virtual Var forward(const Var& x, const GraphContext& ctx) const = 0;
  virtual std::vector<Var> parameters() const = 0;
  virtual std::size_t out_dim() const = 0;
};

class ChebConv : public GraphLayer {
 public:
  ChebConv(std::size_t in, std::size_t out, std::size_t order, std::mt19937_64& rng, const std::string& name);
  Var forward(const Var& x, const GraphContext& ctx) const override;
  std::vector<Var> parameters() const override { return {theta, bias}; }
  std::size_t out_dim() const override { return out_; }

  Var theta, bias;

 private:
  std::size_t out_;
};

class GATv2Conv : public GraphLayer {
 public:
  GATv2Conv(std::size_t in, std::size_t hidden, std::size_t heads, bool concat, double slope, std::mt19937_64& rng,
            const std::string& name);
  Var forward(const Var& x, const GraphContext& ctx) const override;
  std::vector<Var> parameters() const override { return {w_src, w_dst, att, bias}; }
  std::size_t out_dim() const override { return concat_ ? heads_ * hidden_ : hidden_; }

  Var w_src, w_dst, att, bias;

 private:
  std::size_t hidden_, heads_;
  bool concat_;
  double slope_;
};

class TransformerConv : public GraphLayer {
 public:
  TransformerConv(std::size_t in, std::size_t hidden, std::size_t heads, bool concat, std::mt19937_64& rng,
                  const std::string& name);
  Var forward(const Var& x, const GraphContext& ctx) const override;
  std::vector<Var> parameters() const override { return {w1, w2, w3, w4, bias}; }
  std::size_t out_dim() const override { return concat_ ? heads_ * hidden_ : hidden_; }

  Var w1, w2, w3, w4, bias;

 private:
  std::size_t hidden_, heads_;
  bool concat_;
};

class FgoLayer : public GraphLayer {
 public:
  FgoLayer(std::size_t nodes, std::size_t in, std::size_t out, DftBackend backend, std::mt19937_64& rng,
           const std::string& name);
  Var forward(const Var& x, const GraphContext& ctx) const override;
  std::vector<Var> parameters() const override { return {s_re, s_im, bias}; }
  std::size_t out_dim() const override { return out_; }

  Var s_re, s_im, bias;

 private:
  std::size_t out_;
  DftBackend backend_;
};

}  // namespace dhsense
