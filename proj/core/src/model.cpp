#include "dhsense/model.hpp"

#include <random>

#include "dhsense/error.hpp"
#include "dhsense/ops.hpp"

namespace dhsense {

namespace {

struct ArchName {
  Architecture arch;
  const char* name;
};

constexpr ArchName arch_names[] = {
    {Architecture::mlp, "mlp"},         {Architecture::cnn, "cnn"},
    {Architecture::chebynet, "chebynet"}, {Architecture::gatv2, "gatv2"},
    {Architecture::transformer, "transformer"}, {Architecture::fgo, "fgo"},
};

}  // namespace

std::string architecture_name(Architecture a) {
  for (const auto& e : arch_names) {
    if (e.arch == a) return e.name;
  }
  return "?";
}

Architecture parse_architecture(const std::string& name) {
  for (const auto& e : arch_names) {
    if (name == e.name) return e.arch;
  }
  throw ConfigError("unknown architecture '" + name + "' (expected mlp, cnn, chebynet, gatv2, transformer or fgo)");
}

const std::vector<Architecture>& all_architectures() {
  static const std::vector<Architecture> all{Architecture::mlp,   Architecture::cnn,         Architecture::chebynet,
                                             Architecture::gatv2, Architecture::transformer, Architecture::fgo};
  return all;
}

bool is_graph_architecture(Architecture a) { return a != Architecture::mlp && a != Architecture::cnn; }

std::string activation_name(Activation a) { return a == Activation::selu ? "selu" : "identity"; }

Activation parse_activation(const std::string& name) {
  if (name == "selu") return Activation::selu;
  if (name == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + name + "' (expected selu or identity)");
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* what) {
    if (v == 0) throw ConfigError(std::string(what) + " must be positive");
  };
  positive(graph_hidden, "graph hidden size");
  positive(mlp_hidden, "MLP hidden size");
  positive(heads, "number of heads");
  positive(cheb_order, "Chebyshev order");
  positive(window, "window");
  positive(batch_size, "batch size");
  positive(cnn_channels, "CNN channels");
  if (cnn_kernel % 2 == 0) throw ConfigError("CNN kernel must be odd for same padding");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
}

PreparedBatch prepare_batch(const BatchedGraph& batch, const ModelConfig& config) {
  PreparedBatch p;
  p.samples = batch.samples();
  p.x = constant(Tensor::from_matrix(batch.x));
  p.y = constant(Tensor::from_matrix(batch.y));
  auto& ctx = p.context;
  ctx.samples = p.samples;
  ctx.nodes_per_sample = batch.nodes_per_sample;
  switch (config.architecture) {
    case Architecture::gatv2:
    case Architecture::transformer:
      ctx.attention = attention_graph(batch);
      break;
    case Architecture::chebynet: {
      if (batch.blocks.size() != batch.samples()) throw ConfigError("ChebNet batch carries no adjacency blocks");
      auto lap = std::make_shared<std::vector<Eigen::MatrixXd>>();
      lap->reserve(batch.blocks.size());
      for (const auto& a : batch.blocks) {
        auto l = normalized_laplacian(a);
        ctx.isolated_nodes += l.isolated;
        auto lambda = power_iteration_lambda_max(l.matrix);
        if (lambda.fallback) ++ctx.lambda_fallbacks;
        lap->push_back(scaled_laplacian(l.matrix, lambda.value));
      }
      ctx.scaled_laplacians = std::move(lap);
      break;
    }
    default:
      break;
  }
  return p;
}

Model::Model(const ModelConfig& config, std::size_t nodes, std::size_t targets)
    : config_(config), nodes_(nodes), targets_(targets) {
  config_.validate();
  if (nodes == 0 || targets == 0) throw ConfigError("model needs at least one node and one target");
  std::mt19937_64 rng(config_.seed);
  const std::size_t w = config_.window;
  const std::size_t h = config_.graph_hidden;
  std::size_t flat = 0;

  switch (config_.architecture) {
    case Architecture::mlp:
      flat = nodes * w;
      break;
    case Architecture::cnn: {
      const std::size_t k = config_.cnn_kernel;
      const std::size_t pad = k / 2;
      Tensor cols({w, w * k});
      for (std::size_t t = 0; t < w; ++t) {
        for (std::size_t j = 0; j < k; ++j) {
          const auto src = static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(pad);
          if (src >= 0 && src < static_cast<std::ptrdiff_t>(w)) {
            cols.data[static_cast<std::size_t>(src) * w * k + t * k + j] = 1.0;
          }
        }
      }
      im2col_ = constant(std::move(cols));
      conv_weight_ = parameter(glorot_uniform({k, config_.cnn_channels}, k, config_.cnn_channels, rng), "conv.weight");
      conv_bias_ = parameter(Tensor({config_.cnn_channels}), "conv.bias");
      params_ = {conv_weight_, conv_bias_};
      flat = nodes * w * config_.cnn_channels;
      break;
    }
    case Architecture::chebynet:
      layer1_ = std::make_unique<ChebConv>(w, h, config_.cheb_order, rng, "layer1");
      layer2_ = std::make_unique<ChebConv>(h, h, config_.cheb_order, rng, "layer2");
      break;
    case Architecture::gatv2:
      layer1_ = std::make_unique<GATv2Conv>(w, h, config_.heads, true, config_.attention_slope, rng, "layer1");
      layer2_ = std::make_unique<GATv2Conv>(layer1_->out_dim(), h, config_.heads, false, config_.attention_slope, rng,
                                            "layer2");
      break;
    case Architecture::transformer:
      layer1_ = std::make_unique<TransformerConv>(w, h, config_.heads, true, rng, "layer1");
      layer2_ = std::make_unique<TransformerConv>(layer1_->out_dim(), h, config_.heads, false, rng, "layer2");
      break;
    case Architecture::fgo: {
      const std::size_t n = nodes * w;
      layer1_ = std::make_unique<FgoLayer>(n, 1, h, config_.fgo_backend, rng, "layer1");
      layer2_ = std::make_unique<FgoLayer>(n, h, h, config_.fgo_backend, rng, "layer2");
      break;
    }
  }
  if (layer1_) {
    const bool hyper = config_.architecture == Architecture::fgo;
    const std::size_t rows = hyper ? nodes * w : nodes;
    const std::size_t skip = config_.x_skip ? (hyper ? 1 : w) : 0;
    flat = rows * (skip + layer1_->out_dim() + layer2_->out_dim());
    for (const auto& p : layer1_->parameters()) params_.push_back(p);
    for (const auto& p : layer2_->parameters()) params_.push_back(p);
  }
  hidden_ = Linear(flat, config_.mlp_hidden, rng, "readout.hidden");
  output_ = Linear(config_.mlp_hidden, targets, rng, "readout.output");
  for (const auto& p : hidden_.parameters()) params_.push_back(p);
  for (const auto& p : output_.parameters()) params_.push_back(p);
}

Var Model::activate(const Var& x) const { return config_.activation == Activation::selu ? selu(x) : x; }

Var Model::readout(const Var& flat) const { return output_(activate(hidden_(flat))); }

Var Model::forward(const PreparedBatch& batch) const {
  const std::size_t b = batch.samples;
  const std::size_t w = config_.window;
  if (batch.x.rows() != b * nodes_ || batch.x.cols() != w) {
    throw ShapeError("model expects " + std::to_string(b) + " samples of " + std::to_string(nodes_) + " x " +
                     std::to_string(w) + " nodes, got " + shape_string(batch.x.shape()));
  }
  if (batch.y && batch.y.cols() != targets_) {
    throw ShapeError("model has " + std::to_string(targets_) + " targets, batch carries " +
                     std::to_string(batch.y.cols()));
  }
  switch (config_.architecture) {
    case Architecture::mlp:
      return readout(reshape(batch.x, {b, nodes_ * w}));
    case Architecture::cnn: {
      const std::size_t k = config_.cnn_kernel;
      Var cols = reshape(matmul(batch.x, im2col_), {b * nodes_ * w, k});
      Var conv = activate(add(matmul(cols, conv_weight_), conv_bias_));
      return readout(reshape(conv, {b, nodes_ * w * config_.cnn_channels}));
    }
    default:
      break;
  }
  Var x = batch.x;
  std::size_t rows = nodes_;
  if (config_.architecture == Architecture::fgo) {
    rows = nodes_ * w;
    x = reshape(x, {b * rows, 1});
  }
  const Var h1 = activate(layer1_->forward(x, batch.context));
  const Var h2 = activate(layer2_->forward(h1, batch.context));
  const Var cat = config_.x_skip ? concat_cols({x, h1, h2}) : concat_cols({h1, h2});
  return readout(reshape(cat, {b, rows * cat.cols()}));
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value().size();
  return n;
}

std::vector<Tensor> Model::snapshot() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.emplace_back(p.shape(), p.value().data);
  return out;
}

void Model::restore(const std::vector<Tensor>& values) {
  if (values.size() != params_.size()) {
    throw ShapeError("snapshot has " + std::to_string(values.size()) + " tensors, model " +
                     std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& v = params_[i].value();
    if (v.shape != values[i].shape) {
      throw ShapeError("parameter " + params_[i].name() + " has shape " + shape_string(v.shape) + ", snapshot " +
                       shape_string(values[i].shape));
    }
    v.data = values[i].data;
  }
}

}  // namespace dhsense
