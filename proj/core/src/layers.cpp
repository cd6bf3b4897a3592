#include "dhsense/layers.hpp"

#include <cmath>

#include "dhsense/error.hpp"
#include "dhsense/ops.hpp"

namespace dhsense {

Laplacian normalized_laplacian(const Eigen::MatrixXd& adjacency) {
  if (adjacency.rows() != adjacency.cols()) throw ShapeError("adjacency must be square");
  const auto n = adjacency.rows();
  Laplacian out;
  Eigen::MatrixXd a = adjacency;
  Eigen::VectorXd deg = a.rowwise().sum();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (deg(i) <= 0.0) {
      a(i, i) = 1.0;
      deg(i) = 1.0;
      ++out.isolated;
    }
  }
  const Eigen::VectorXd inv_sqrt = deg.array().rsqrt();
  out.matrix = Eigen::MatrixXd::Identity(n, n) - inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
  return out;
}

LambdaMax power_iteration_lambda_max(const Eigen::MatrixXd& laplacian, double tol, std::size_t max_iter) {
  const auto n = laplacian.rows();
  LambdaMax out;
  if (n == 0) {
    out.fallback = true;
    return out;
  }
  // deterministic start with no special symmetry
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = 1.0 + 0.5 * std::sin(1.7 * static_cast<double>(i) + 0.3);
  v.normalize();
  Eigen::VectorXd w(n);
  for (std::size_t it = 1; it <= max_iter; ++it) {
    w.noalias() = laplacian * v;
    const double lambda = v.dot(w);
    const double norm = w.norm();
    if (norm < 1e-14) break;
    out.iterations = it;
    // relative: near-edgeless graphs have lambda_max far below any absolute tol
    if ((w - lambda * v).norm() < tol * std::abs(lambda)) {
      out.value = lambda;
      return out;
    }
    v = w / norm;
  }
  out.value = 2.0;
  out.fallback = true;
  return out;
}

Eigen::MatrixXd scaled_laplacian(const Eigen::MatrixXd& laplacian, double lambda_max) {
  if (!(lambda_max > 0.0)) throw DomainError("scaled Laplacian needs a positive lambda_max");
  return 2.0 / lambda_max * laplacian - Eigen::MatrixXd::Identity(laplacian.rows(), laplacian.cols());
}

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& x : t.data) x = dist(rng);
  return t;
}

Var cheb_conv(const Var& x, std::shared_ptr<const std::vector<Eigen::MatrixXd>> laplacians, const Var& theta) {
  if (theta.shape().size() != 3 || theta.shape()[0] == 0) {
    throw ConfigError("cheb_conv: Chebyshev order must be non-negative, coefficients have shape " +
                      shape_string(theta.shape()));
  }
  const std::size_t terms = theta.shape()[0];
  const std::size_t din = theta.shape()[1];
  const std::size_t dout = theta.shape()[2];
  if (x.cols() != din) throw ShapeError("cheb_conv: input " + shape_string(x.shape()) + " vs coefficients " +
                                        shape_string(theta.shape()));
  std::vector<Var> t{x};
  if (terms > 1) t.push_back(block_matmul(laplacians, x));
  for (std::size_t k = 2; k < terms; ++k) {
    t.push_back(sub(scale(block_matmul(laplacians, t[k - 1]), 2.0), t[k - 2]));
  }
  const Var stacked = terms == 1 ? x : concat_cols(t);
  return matmul(stacked, reshape(theta, {terms * din, dout}));
}

Var gatv2_conv(const Var& x, const AttentionGraph& graph, const Var& w_src, const Var& w_dst, const Var& att,
               std::size_t heads, bool concat, double slope, Eigen::MatrixXd* alpha) {
  const Var out = gatv2_attention(matmul(x, w_src), matmul(x, w_dst), att, graph, heads, slope, alpha);
  return concat ? out : head_mean(out, heads);
}

Var transformer_conv(const Var& x, const AttentionGraph& graph, const Var& w1, const Var& w2, const Var& w3,
                     const Var& w4, std::size_t heads, bool concat, Eigen::MatrixXd* alpha) {
  const std::size_t d = w3.cols() / heads;
  const Var q = matmul(x, w3);
  const Var k = matmul(x, w4);
  const Var v = matmul(x, w2);
  Var agg = dot_attention(q, k, v, graph, heads, 1.0 / std::sqrt(static_cast<double>(d)), alpha);
  if (!concat) agg = head_mean(agg, heads);
  return add(agg, matmul(x, w1));
}

Linear::Linear(std::size_t in, std::size_t out, std::mt19937_64& rng, const std::string& name)
    : weight(parameter(glorot_uniform({in, out}, in, out, rng), name + ".weight")),
      bias(parameter(Tensor({out}), name + ".bias")) {}

Var Linear::operator()(const Var& x) const { return add(matmul(x, weight), bias); }

ChebConv::ChebConv(std::size_t in, std::size_t out, std::size_t order, std::mt19937_64& rng, const std::string& name)
    : theta(parameter(glorot_uniform({order + 1, in, out}, in, out, rng), name + ".theta")),
      bias(parameter(Tensor({out}), name + ".bias")),
      out_(out) {}

Var ChebConv::forward(const Var& x, const GraphContext& ctx) const {
  if (!ctx.scaled_laplacians) throw ConfigError("ChebNet layer needs scaled Laplacians in the batch context");
  return add(cheb_conv(x, ctx.scaled_laplacians, theta), bias);
}

GATv2Conv::GATv2Conv(std::size_t in, std::size_t hidden, std::size_t heads, bool concat, double slope,
                     std::mt19937_64& rng, const std::string& name)
    : w_src(parameter(glorot_uniform({in, heads * hidden}, in, heads * hidden, rng), name + ".w_src")),
      w_dst(parameter(glorot_uniform({in, heads * hidden}, in, heads * hidden, rng), name + ".w_dst")),
      att(parameter(glorot_uniform({heads, hidden}, hidden, 1, rng), name + ".att")),
      bias(parameter(Tensor({concat ? heads * hidden : hidden}), name + ".bias")),
      hidden_(hidden),
      heads_(heads),
      concat_(concat),
      slope_(slope) {}

Var GATv2Conv::forward(const Var& x, const GraphContext& ctx) const {
  return add(gatv2_conv(x, ctx.attention, w_src, w_dst, att, heads_, concat_, slope_), bias);
}

TransformerConv::TransformerConv(std::size_t in, std::size_t hidden, std::size_t heads, bool concat,
                                 std::mt19937_64& rng, const std::string& name)
    : w1(parameter(glorot_uniform({in, concat ? heads * hidden : hidden}, in, concat ? heads * hidden : hidden, rng),
                   name + ".w1")),
      w2(parameter(glorot_uniform({in, heads * hidden}, in, heads * hidden, rng), name + ".w2")),
      w3(parameter(glorot_uniform({in, heads * hidden}, in, heads * hidden, rng), name + ".w3")),
      w4(parameter(glorot_uniform({in, heads * hidden}, in, heads * hidden, rng), name + ".w4")),
      bias(parameter(Tensor({concat ? heads * hidden : hidden}), name + ".bias")),
      hidden_(hidden),
      heads_(heads),
      concat_(concat) {}

Var TransformerConv::forward(const Var& x, const GraphContext& ctx) const {
  return add(transformer_conv(x, ctx.attention, w1, w2, w3, w4, heads_, concat_), bias);
}

FgoLayer::FgoLayer(std::size_t nodes, std::size_t in, std::size_t out, DftBackend backend, std::mt19937_64& rng,
                   const std::string& name)
    : s_re(parameter(glorot_uniform({nodes, in, out}, in, out, rng), name + ".s_re")),
      s_im(parameter(glorot_uniform({nodes, in, out}, in, out, rng), name + ".s_im")),
      bias(parameter(Tensor({out}), name + ".bias")),
      out_(out),
      backend_(backend) {}

Var FgoLayer::forward(const Var& x, const GraphContext& ctx) const {
  return add(fgo(x, s_re, s_im, ctx.samples, backend_), bias);
}

}  // namespace dhsense
