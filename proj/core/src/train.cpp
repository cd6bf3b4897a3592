#include "dhsense/train.hpp"

#include <chrono>
#include <cmath>

#include "dhsense/error.hpp"
#include "dhsense/ops.hpp"
#include "dhsense/optim.hpp"

namespace dhsense {

bool EarlyStopping::update(double val_loss) {
  const std::size_t epoch = epoch_++;
  if (val_loss < best_) {
    best_ = val_loss;
    best_epoch_ = epoch;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

double evaluate_loss(const Model& model, const std::vector<PreparedBatch>& batches) {
  NoGradGuard no_grad;
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& b : batches) {
    const Var loss = mse_loss(model.forward(b), b.y);
    const std::size_t n = b.y.value().size();
    total += loss.value().data[0] * static_cast<double>(n);
    count += n;
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

Eigen::MatrixXd predict(const Model& model, const std::vector<PreparedBatch>& batches) {
  NoGradGuard no_grad;
  std::size_t rows = 0;
  for (const auto& b : batches) rows += b.samples;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(model.targets()));
  Eigen::Index r = 0;
  for (const auto& b : batches) {
    const Var y = model.forward(b);
    out.middleRows(r, static_cast<Eigen::Index>(b.samples)) = y.value().matrix();
    r += static_cast<Eigen::Index>(b.samples);
  }
  return out;
}

TrainResult train(Model& model, const std::vector<PreparedBatch>& train_batches,
                  const std::vector<PreparedBatch>& val_batches,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  if (train_batches.empty() || val_batches.empty()) throw ConfigError("training needs non-empty train and validation splits");
  const auto& cfg = model.config();
  NadamOptions opts;
  opts.learning_rate = cfg.learning_rate;
  Nadam optimizer(model.parameters(), opts);
  EarlyStopping stopper(cfg.patience);
  TrainResult result;
  std::vector<Tensor> best = model.snapshot();
  const auto t0 = std::chrono::steady_clock::now();

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& b : train_batches) {
      optimizer.zero_grad();
      const Var loss = mse_loss(model.forward(b), b.y);
      const double l = loss.value().data[0];
      if (!std::isfinite(l)) throw NumericalError("training loss became non-finite at epoch " + std::to_string(epoch));
      backward(loss);
      optimizer.step();
      const std::size_t n = b.y.value().size();
      total += l * static_cast<double>(n);
      count += n;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = total / static_cast<double>(count);
    rec.val_loss = evaluate_loss(model, val_batches);
    if (!std::isfinite(rec.val_loss)) {
      throw NumericalError("validation loss became non-finite at epoch " + std::to_string(epoch));
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (stopper.update(rec.val_loss)) best = model.snapshot();
    if (stopper.should_stop()) {
      result.early_stopped = true;
      break;
    }
  }
  model.restore(best);
  result.best_epoch = stopper.best_epoch();
  result.best_val_loss = stopper.best();
  return result;
}

}  // namespace dhsense
