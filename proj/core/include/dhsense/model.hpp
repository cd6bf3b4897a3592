#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dhsense/graph.hpp"
#include "dhsense/layers.hpp"
#include "dhsense/tensor.hpp"

namespace dhsense {

enum class Architecture { mlp, cnn, chebynet, gatv2, transformer, fgo };
enum class Activation { selu, identity };

std::string architecture_name(Architecture a);
/// Throws ConfigError on an unknown name.
Architecture parse_architecture(const std::string& name);
const std::vector<Architecture>& all_architectures();
bool is_graph_architecture(Architecture a);

std::string activation_name(Activation a);
Activation parse_activation(const std::string& name);

struct ModelConfig {
  Architecture architecture = Architecture::gatv2;
  std::size_t graph_hidden = 16;
  std::size_t mlp_hidden = 128;
  std::size_t heads = 5;
  std::size_t cheb_order = 4;
  std::size_t window = 8;
  Activation activation = Activation::selu;
  double learning_rate = 3e-4;
  std::size_t batch_size = 64;
  std::size_t patience = 200;
  std::size_t max_epochs = 3000;
  std::uint64_t seed = 0;

  bool x_skip = false;             // also feed X to the readout
  std::size_t cnn_channels = 16;
  std::size_t cnn_kernel = 3;
  double attention_slope = 0.2;
  DftBackend fgo_backend = DftBackend::fftw;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// Batch plus the per-architecture graph structures, built once and reused
/// across epochs.
struct PreparedBatch {
  std::size_t samples = 0;
  Var x;  // (samples * nodes) x window
  Var y;  // samples x targets
  GraphContext context;
};

PreparedBatch prepare_batch(const BatchedGraph& batch, const ModelConfig& config);

class Model {
 public:
  Model(const ModelConfig& config, std::size_t nodes, std::size_t targets);

  /// samples x targets.
  Var forward(const PreparedBatch& batch) const;

  const std::vector<Var>& parameters() const { return params_; }
  std::size_t parameter_count() const;
  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& values);

  const ModelConfig& config() const { return config_; }
  std::size_t nodes() const { return nodes_; }
  std::size_t targets() const { return targets_; }

 private:
  Var activate(const Var& x) const;
  Var readout(const Var& flat) const;

  ModelConfig config_;
  std::size_t nodes_ = 0;
  std::size_t targets_ = 0;
  std::unique_ptr<GraphLayer> layer1_, layer2_;
  Var conv_weight_, conv_bias_;
  Var im2col_;
  Linear hidden_, output_;
  std::vector<Var> params_;
};

}  // namespace dhsense
