#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "seqcast/tensor.hpp"

namespace seqcast {

struct GradCheckOptions {
  double step = 1e-6;
  // 0 checks every element; otherwise a seeded sample of this many elements
  // per parameter (large models are spot-checked, small ops exhaustively).
  std::size_t sample_per_param = 0;
  std::uint64_t seed = 7;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t elements_checked = 0;
};

// Central-difference gradients against reverse-mode gradients. `build` must
// construct a deterministic scalar loss on the given tape. Relative error uses
// max(|analytic|, |numeric|, 1e-8) as the denominator; the report carries the
// max over all checked elements.
GradCheckReport grad_check(const std::function<Tensor(Tape&)>& build,
                           const std::vector<Parameter*>& params,
                           const GradCheckOptions& opt = {});

} // namespace seqcast
