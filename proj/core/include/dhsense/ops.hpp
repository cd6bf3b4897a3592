#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "dhsense/tensor.hpp"

namespace dhsense {

// Differentiable primitives. Every op throws ShapeError naming both shapes
// on incompatible inputs.

Var matmul(const Var& a, const Var& b);
/// Same shape, or `b` a single row broadcast over the rows of `a`.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(const Var& a, std::size_t begin, std::size_t count);
Var slice_rows(const Var& a, std::size_t begin, std::size_t count);
Var reshape(const Var& a, Shape shape);
Var sum(const Var& a);
Var mean(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var selu(const Var& a);

inline constexpr double selu_lambda = 1.0507009873554804934193349852946;
inline constexpr double selu_alpha = 1.6732632423543772848170429916717;

/// Column-wise softmax of `scores` (edges x heads) within each segment
/// [offsets[i], offsets[i+1]).
Var segment_softmax(const Var& scores, std::shared_ptr<const std::vector<std::size_t>> offsets);

/// Mean of squared differences over all entries.
Var mse_loss(const Var& prediction, const Var& target);

/// Block-diagonal constant times `x`; block b acts on rows
/// [b * n, (b + 1) * n) where n is the block size.
Var block_matmul(std::shared_ptr<const std::vector<Eigen::MatrixXd>> blocks, const Var& x);

/// (n x heads*d) -> (n x d), averaging the head slices.
Var head_mean(const Var& a, std::size_t heads);

}  // namespace dhsense
