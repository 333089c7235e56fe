#include "seqcast/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "seqcast/rng.hpp"

namespace seqcast {

namespace {

double eval_scalar(const std::function<Tensor(Tape&)>& build) {
  Tape tape(false);
  Tensor root = build(tape);
  double v = root.scalar();
  if (!std::isfinite(v)) throw numeric_error("grad_check: non-finite loss value");
  return v;
}

} // namespace

GradCheckReport grad_check(const std::function<Tensor(Tape&)>& build,
                           const std::vector<Parameter*>& params,
                           const GradCheckOptions& opt) {
  for (Parameter* p : params) p->clear_grad();

  // Reverse-mode pass.
  {
    Tape tape(true);
    Tensor root = build(tape);
    if (!std::isfinite(root.scalar()))
      throw numeric_error("grad_check: non-finite loss value");
    tape.backward(root);
  }

  GradCheckReport report;
  Rng rng(opt.seed);
  for (Parameter* p : params) {
    std::vector<std::size_t> elems(p->numel());
    std::iota(elems.begin(), elems.end(), 0);
    if (opt.sample_per_param > 0 && elems.size() > opt.sample_per_param) {
      // Deterministic partial Fisher-Yates draw.
      for (std::size_t i = 0; i < opt.sample_per_param; ++i) {
        std::size_t j = i + static_cast<std::size_t>(
                                rng.uniform_int(0, static_cast<std::int64_t>(
                                                       elems.size() - i - 1)));
        std::swap(elems[i], elems[j]);
      }
      elems.resize(opt.sample_per_param);
    }
    for (std::size_t e : elems) {
      double saved = p->value[e];
      p->value[e] = saved + opt.step;
      double f_plus = eval_scalar(build);
      p->value[e] = saved - opt.step;
      double f_minus = eval_scalar(build);
      p->value[e] = saved;
      double numeric = (f_plus - f_minus) / (2.0 * opt.step);
      double analytic = p->has_grad() ? p->grad[e] : 0.0;
      if (!std::isfinite(numeric) || !std::isfinite(analytic))
        throw numeric_error("grad_check: non-finite gradient for parameter '" +
                            p->name + "'");
      double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
      double rel = std::fabs(analytic - numeric) / denom;
      ++report.elements_checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = p->name;
      }
    }
  }
  return report;
}

} // namespace seqcast
