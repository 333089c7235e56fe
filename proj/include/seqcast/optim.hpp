#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "seqcast/tensor.hpp"

namespace seqcast {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// AdamW with decoupled weight decay and bias-corrected moments. Parameters
// with trainable=false are never touched, bit for bit.
class AdamW {
public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  void step(const std::vector<Parameter*>& params);

  std::uint64_t step_count() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }

  struct Slot {
    std::vector<double> m, v;
  };
  // Checkpoint access. Slots are keyed by parameter name; map iteration gives
  // a stable serialization order.
  std::map<std::string, Slot>& slots() { return slots_; }
  const std::map<std::string, Slot>& slots() const { return slots_; }
  void restore(std::uint64_t step_count) { t_ = step_count; }

private:
  AdamWConfig cfg_;
  std::uint64_t t_ = 0;
  std::map<std::string, Slot> slots_;
};

} // namespace seqcast
