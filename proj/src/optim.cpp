#include "seqcast/optim.hpp"

#include <cmath>

namespace seqcast {

void AdamW::step(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) {
    if (p->trainable && !p->has_grad())
      throw numeric_error("adamw step: trainable parameter '" + p->name +
                          "' has no gradient");
  }
  t_ += 1;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (Parameter* p : params) {
    if (!p->trainable) continue;
    Slot& slot = slots_[p->name];
    if (slot.m.empty()) {
      slot.m.assign(p->numel(), 0.0);
      slot.v.assign(p->numel(), 0.0);
    }
    for (std::size_t i = 0; i < p->numel(); ++i) {
      double g = p->grad[i];
      slot.m[i] = cfg_.beta1 * slot.m[i] + (1.0 - cfg_.beta1) * g;
      slot.v[i] = cfg_.beta2 * slot.v[i] + (1.0 - cfg_.beta2) * g * g;
      double mhat = slot.m[i] / bc1;
      double vhat = slot.v[i] / bc2;
      p->value[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                                cfg_.weight_decay * p->value[i]);
    }
  }
}

} // namespace seqcast
