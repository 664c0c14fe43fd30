#pragma once

#include <cstdint>
#include <vector>

#include "clash/params.hpp"
#include "clash/tape.hpp"

namespace clash::ad {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a ParamStore. Moment buffers are allocated to
// the store layout on first step; the store must not change shape after.
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  // `leaves` must be the tape registration of `store` (parallel order).
  // Unreached parameters contribute zero gradient; non-finite gradients
  // raise a numeric error carrying the parameter name.
  void step(ParamStore& store, const Tape& tape,
            const std::vector<Tensor>& leaves);

  std::int64_t step_count() const { return steps_; }
  const AdamConfig& config() const { return cfg_; }

  // Moments as checkpoint items ("adam.m.<name>", "adam.v.<name>",
  // "adam.step"), for resumable state dumps.
  std::vector<NamedTensor> snapshot_state(const ParamStore& store) const;
  void restore_state(const ParamStore& store,
                     const std::vector<NamedTensor>& items);

 private:
  AdamConfig cfg_;
  std::int64_t steps_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace clash::ad
