#pragma once

#include <cstddef>
#include <vector>

#include "dhsense/tensor.hpp"

namespace dhsense {

struct NadamOptions {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double momentum_decay = 4e-3;  // psi in mu_t = beta1 (1 - 0.5 * 0.96^(t psi))
};

/// Per-parameter optimizer state.
struct NadamSlot {
  std::vector<double> m, v;
  double mu_product = 1.0;
  std::size_t step = 0;
};

/// One NAdam update of `n` values in place. Throws NumericalError on a
/// non-finite gradient; `name` identifies the parameter in the message.
void nadam_update(double* param, const double* grad, std::size_t n, NadamSlot& slot, const NadamOptions& opts,
                  const std::string& name = {});

class Nadam {
 public:
  Nadam(std::vector<Var> params, NadamOptions opts);

  /// Applies the accumulated gradients (missing ones count as zero).
  void step();
  void zero_grad();

  const NadamOptions& options() const { return opts_; }
  const std::vector<NadamSlot>& slots() const { return slots_; }

 private:
  std::vector<Var> params_;
  std::vector<NadamSlot> slots_;
  NadamOptions opts_;
};

}  // namespace dhsense
