#include "dhsense/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dhsense/error.hpp"

namespace dhsense {

namespace {

AttentionGraph from_blocks(const std::vector<const Eigen::MatrixXd*>& blocks) {
  auto offsets = std::make_shared<std::vector<std::size_t>>();
  auto sources = std::make_shared<std::vector<std::size_t>>();
  offsets->push_back(0);
  std::size_t base = 0;
  for (const auto* a : blocks) {
    const auto n = static_cast<std::size_t>(a->rows());
    if (a->cols() != a->rows()) throw ShapeError("adjacency must be square");
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if ((*a)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) != 0.0) sources->push_back(base + j);
      }
      if (sources->size() == offsets->back()) {
        throw ConfigError("node " + std::to_string(base + i) + " has an empty neighborhood");
      }
      offsets->push_back(sources->size());
    }
    base += n;
  }
  AttentionGraph g;
  g.nodes = base;
  g.offsets = std::move(offsets);
  g.sources = std::move(sources);
  return g;
}

void check_features(const char* op, const Var& x, const AttentionGraph& g, std::size_t width) {
  if (x.rows() != g.nodes || x.cols() != width) {
    throw ShapeError(std::string(op) + ": feature shape " + shape_string(x.shape()) + " does not match (" +
                     std::to_string(g.nodes) + ", " + std::to_string(width) + ")");
  }
}

}  // namespace

AttentionGraph attention_graph(const Eigen::MatrixXd& adjacency) { return from_blocks({&adjacency}); }

AttentionGraph attention_graph(const BatchedGraph& batch) {
  if (batch.blocks.size() != batch.samples()) throw ConfigError("batch carries no adjacency blocks");
  std::vector<const Eigen::MatrixXd*> blocks;
  for (const auto& b : batch.blocks) blocks.push_back(&b);
  return from_blocks(blocks);
}

namespace {

// Per-destination softmax over the raw scores in `alpha` (edges x heads, row-major), in place.
void softmax_rows(std::vector<double>& alpha, const std::vector<std::size_t>& off, std::size_t nodes,
                  std::size_t heads) {
  std::vector<double> mx(heads), total(heads);
  for (std::size_t i = 0; i < nodes; ++i) {
    std::fill(mx.begin(), mx.end(), -std::numeric_limits<double>::infinity());
    std::fill(total.begin(), total.end(), 0.0);
    for (std::size_t e = off[i]; e < off[i + 1]; ++e) {
      for (std::size_t h = 0; h < heads; ++h) mx[h] = std::max(mx[h], alpha[e * heads + h]);
    }
    for (std::size_t e = off[i]; e < off[i + 1]; ++e) {
      for (std::size_t h = 0; h < heads; ++h) {
        double& a = alpha[e * heads + h];
        a = std::exp(a - mx[h]);
        total[h] += a;
      }
    }
    for (std::size_t e = off[i]; e < off[i + 1]; ++e) {
      for (std::size_t h = 0; h < heads; ++h) alpha[e * heads + h] /= total[h];
    }
  }
}

// out_i^h = sum_e alpha_eh v_src(e)^h
void aggregate(const std::vector<double>& alpha, const AttentionGraph& g, std::size_t heads, std::size_t d,
               const double* v, double* y) {
  const auto& off = *g.offsets;
  const auto& src = *g.sources;
  const std::size_t w = heads * d;
  for (std::size_t i = 0; i < g.nodes; ++i) {
    double* yi = y + i * w;
    for (std::size_t e = off[i]; e < off[i + 1]; ++e) {
      const double* vj = v + src[e] * w;
      for (std::size_t h = 0; h < heads; ++h) {
        const double a = alpha[e * heads + h];
        for (std::size_t c = h * d; c < (h + 1) * d; ++c) yi[c] += a * vj[c];
      }
    }
  }
}

void export_alpha(const std::vector<double>& alpha, std::size_t edges, std::size_t heads, Eigen::MatrixXd* out) {
  if (!out) return;
  out->resize(static_cast<Eigen::Index>(edges), static_cast<Eigen::Index>(heads));
  for (std::size_t e = 0; e < edges; ++e) {
    for (std::size_t h = 0; h < heads; ++h) {
      (*out)(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(h)) = alpha[e * heads + h];
    }
  }
}

double* grad_or_null(Node& n, std::size_t k) {
  return n.parents[k]->requires_grad ? n.parents[k]->value.ensure_grad().data() : nullptr;
}

}  // namespace

Var gatv2_attention(const Var& xl, const Var& xr, const Var& att, const AttentionGraph& graph, std::size_t heads,
                    double slope, Eigen::MatrixXd* alpha_out) {
  if (heads == 0 || att.rows() != heads) {
    throw ShapeError("gatv2_attention: attention vector shape " + shape_string(att.shape()) + " for " +
                     std::to_string(heads) + " heads");
  }
  const std::size_t d = att.cols();
  const std::size_t w = heads * d;
  check_features("gatv2_attention", xl, graph, w);
  check_features("gatv2_attention", xr, graph, w);

  const auto& off = *graph.offsets;
  const auto& src = *graph.sources;
  const double* L = xl.value().data.data();
  const double* R = xr.value().data.data();
  const double* A = att.value().data.data();
  auto alpha = std::make_shared<std::vector<double>>(graph.edges() * heads);

  for (std::size_t i = 0; i < graph.nodes; ++i) {
    const double* ri = R + i * w;
    for (std::size_t e = off[i]; e < off[i + 1]; ++e) {
      const double* lj = L + src[e] * w;
      for (std::size_t h = 0; h < heads; ++h) {
        double s = 0.0;
        for (std::size_t c = h * d; c < (h + 1) * d; ++c) {
          const double z = ri[c] + lj[c];
          s += A[c] * (z > 0 ? z : slope * z);
        }
        (*alpha)[e * heads + h] = s;
      }
    }
  }
  softmax_rows(*alpha, off, graph.nodes, heads);
  Tensor out({graph.nodes, w}, 0.0);
  aggregate(*alpha, graph, heads, d, L, out.data.data());
  export_alpha(*alpha, graph.edges(), heads, alpha_out);

  return make_result(std::move(out), {xl, xr, att}, [graph, heads, d, slope, alpha](Node& n) {
    const auto& off = *graph.offsets;
    const auto& src = *graph.sources;
    const std::size_t w = heads * d;
    const double* G = n.value.ensure_grad().data();
    const double* L = n.parents[0]->value.data.data();
    const double* R = n.parents[1]->value.data.data();
    const double* A = n.parents[2]->value.data.data();
    double* GL = grad_or_null(n, 0);
    double* GR = grad_or_null(n, 1);
    double* GA = grad_or_null(n, 2);
    std::vector<double> dalpha, dot(heads);

    for (std::size_t i = 0; i < graph.nodes; ++i) {
      const double* gi = G + i * w;
      const double* ri = R + i * w;
      dalpha.resize((off[i + 1] - off[i]) * heads);
      std::fill(dot.begin(), dot.end(), 0.0);
      for (std::size_t e = off[i]; e < off[i + 1]; ++e) {
        const double* lj = L + src[e] * w;
        double* glj = GL ? GL + src[e] * w : nullptr;
        for (std::size_t h = 0; h < heads; ++h) {
          const double a = (*alpha)[e * heads + h];
          double da = 0.0;
          for (std::size_t c = h * d; c < (h + 1) * d; ++c) da += gi[c] * lj[c];
          dalpha[(e - off[i]) * heads + h] = da;
          dot[h] += a * da;
          if (glj) {
            for (std::size_t c = h * d; c < (h + 1) * d; ++c) glj[c] += a * gi[c];
          }
        }
      }
      for (std::size_t e = off[i]; e < off[i + 1]; ++e) {
        const double* lj = L + src[e] * w;
        double* glj = GL ? GL + src[e] * w : nullptr;
        double* gri = GR ? GR + i * w : nullptr;
        for (std::size_t h = 0; h < heads; ++h) {
          const double ds = (*alpha)[e * heads + h] * (dalpha[(e - off[i]) * heads + h] - dot[h]);
          if (ds == 0.0) continue;
          for (std::size_t c = h * d; c < (h + 1) * d; ++c) {
            const double z = ri[c] + lj[c];
            const bool pos = z > 0;
            const double dz = ds * A[c] * (pos ? 1.0 : slope);
            if (glj) glj[c] += dz;
            if (gri) gri[c] += dz;
            if (GA) GA[c] += ds * (pos ? z : slope * z);
          }
        }
      }
    }
  });
}

Var dot_attention(const Var& q, const Var& k, const Var& v, const AttentionGraph& graph, std::size_t heads,
                  double scale, Eigen::MatrixXd* alpha_out) {
  if (heads == 0 || q.cols() % heads != 0) {
    throw ShapeError("dot_attention: " + std::to_string(heads) + " heads do not divide shape " +
                     shape_string(q.shape()));
  }
  const std::size_t d = q.cols() / heads;
  const std::size_t w = heads * d;
  check_features("dot_attention", q, graph, w);
  check_features("dot_attention", k, graph, w);
  check_features("dot_attention", v, graph, w);

  const auto& off = *graph.offsets;
  const auto& src = *graph.sources;
  const double* Q = q.value().data.data();
  const double* K = k.value().data.data();
  auto alpha = std::make_shared<std::vector<double>>(graph.edges() * heads);

  for (std::size_t i = 0; i < graph.nodes; ++i) {
    const double* qi = Q + i * w;
    for (std::size_t e = off[i]; e < off[i + 1]; ++e) {
      const double* kj = K + src[e] * w;
      for (std::size_t h = 0; h < heads; ++h) {
        double s = 0.0;
        for (std::size_t c = h * d; c < (h + 1) * d; ++c) s += qi[c] * kj[c];
        (*alpha)[e * heads + h] = scale * s;
      }
    }
  }
  softmax_rows(*alpha, off, graph.nodes, heads);
  Tensor out({graph.nodes, w}, 0.0);
  aggregate(*alpha, graph, heads, d, v.value().data.data(), out.data.data());
  export_alpha(*alpha, graph.edges(), heads, alpha_out);

  return make_result(std::move(out), {q, k, v}, [graph, heads, d, scale, alpha](Node& n) {
    const auto& off = *graph.offsets;
    const auto& src = *graph.sources;
    const std::size_t w = heads * d;
    const double* G = n.value.ensure_grad().data();
    const double* Q = n.parents[0]->value.data.data();
    const double* K = n.parents[1]->value.data.data();
    const double* V = n.parents[2]->value.data.data();
    double* GQ = grad_or_null(n, 0);
    double* GK = grad_or_null(n, 1);
    double* GV = grad_or_null(n, 2);
    std::vector<double> dalpha, dot(heads);

    for (std::size_t i = 0; i < graph.nodes; ++i) {
      const double* gi = G + i * w;
      const double* qi = Q + i * w;
      dalpha.resize((off[i + 1] - off[i]) * heads);
      std::fill(dot.begin(), dot.end(), 0.0);
      for (std::size_t e = off[i]; e < off[i + 1]; ++e) {
        const double* vj = V + src[e] * w;
        double* gvj = GV ? GV + src[e] * w : nullptr;
        for (std::size_t h = 0; h < heads; ++h) {
          const double a = (*alpha)[e * heads + h];
          double da = 0.0;
          for (std::size_t c = h * d; c < (h + 1) * d; ++c) da += gi[c] * vj[c];
          dalpha[(e - off[i]) * heads + h] = da;
          dot[h] += a * da;
          if (gvj) {
            for (std::size_t c = h * d; c < (h + 1) * d; ++c) gvj[c] += a * gi[c];
          }
        }
      }
      for (std::size_t e = off[i]; e < off[i + 1]; ++e) {
        const double* kj = K + src[e] * w;
        double* gkj = GK ? GK + src[e] * w : nullptr;
        double* gqi = GQ ? GQ + i * w : nullptr;
        for (std::size_t h = 0; h < heads; ++h) {
          const double ds = scale * (*alpha)[e * heads + h] * (dalpha[(e - off[i]) * heads + h] - dot[h]);
          for (std::size_t c = h * d; c < (h + 1) * d; ++c) {
            if (gqi) gqi[c] += ds * kj[c];
            if (gkj) gkj[c] += ds * qi[c];
          }
        }
      }
    }
  });
}

}  // namespace dhsense
