#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "dhsense/graph.hpp"
#include "dhsense/tensor.hpp"

namespace dhsense {

/// Edges grouped by destination: the neighbors of node i are
/// sources[offsets[i] .. offsets[i+1]).
struct AttentionGraph {
  std::size_t nodes = 0;
  std::shared_ptr<const std::vector<std::size_t>> offsets;
  std::shared_ptr<const std::vector<std::size_t>> sources;

  std::size_t edges() const { return sources ? sources->size() : 0; }
};

/// N(i) = { j : A(i,j) != 0 }. Throws ConfigError if some node has no
/// neighbor at all.
AttentionGraph attention_graph(const Eigen::MatrixXd& adjacency);
AttentionGraph attention_graph(const BatchedGraph& batch);

/// Fused dynamic attention: for each head h and edge j -> i,
///   s_ij = att_h . leaky_relu(xr_i^h + xl_j^h),
///   out_i^h = sum_j softmax_j(s_ij) xl_j^h.
/// xl, xr are n x (heads * d); att is heads x d. Output n x (heads * d).
/// `alpha` (edges x heads) receives the attention weights when non-null.
Var gatv2_attention(const Var& xl, const Var& xr, const Var& att, const AttentionGraph& graph, std::size_t heads,
                    double slope, Eigen::MatrixXd* alpha = nullptr);

/// Fused scaled dot-product attention restricted to graph edges:
///   out_i^h = sum_j softmax_j(scale * q_i^h . k_j^h) v_j^h.
Var dot_attention(const Var& q, const Var& k, const Var& v, const AttentionGraph& graph, std::size_t heads,
                  double scale, Eigen::MatrixXd* alpha = nullptr);

}  // namespace dhsense
