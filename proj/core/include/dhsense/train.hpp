#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "dhsense/model.hpp"

namespace dhsense {

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double wall_seconds = 0.0;  // since training started
};

/// Strict-improvement patience counter.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Returns true if `val_loss` is a new best.
  bool update(double val_loss);
  bool should_stop() const { return stale_ >= patience_; }

  double best() const { return best_; }
  std::size_t best_epoch() const { return best_epoch_; }
  std::size_t stale() const { return stale_; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t stale_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool early_stopped = false;
};

/// Mean squared error over every target of every sample.
double evaluate_loss(const Model& model, const std::vector<PreparedBatch>& batches);

/// Stacked predictions, samples x targets.
Eigen::MatrixXd predict(const Model& model, const std::vector<PreparedBatch>& batches);

/// NAdam on the MSE, batches in the given order every epoch. Keeps the
/// parameters of the best validation epoch. Throws NumericalError naming the
/// epoch if a loss turns non-finite.
TrainResult train(Model& model, const std::vector<PreparedBatch>& train_batches,
                  const std::vector<PreparedBatch>& val_batches,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace dhsense
