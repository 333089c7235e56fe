#include "seqcast/blocks.hpp"

#include <cmath>

namespace seqcast {

LinearLayer::LinearLayer(ParameterStore& store, const std::string& prefix,
                         std::size_t in, std::size_t out, bool bias) {
  w = &store.add(prefix + ".w", {in, out},
                 Init::normal(1.0 / std::sqrt(static_cast<double>(in))));
  if (bias) b = &store.add(prefix + ".b", {out}, Init::zeros());
}

Tensor LinearLayer::forward(Tape& t, Tensor x) const {
  return linear(x, t.leaf(*w), b ? t.leaf(*b) : Tensor());
}

std::size_t LinearLayer::declared_params() const {
  return w->numel() + (b ? b->numel() : 0);
}

LayerNormParams::LayerNormParams(ParameterStore& store, const std::string& prefix,
                                 std::size_t d) {
  gain = &store.add(prefix + ".gain", {d}, Init::ones());
  bias = &store.add(prefix + ".bias", {d}, Init::zeros());
}

Tensor LayerNormParams::forward(Tape& t, Tensor x) const {
  return layer_norm(x, t.leaf(*gain), t.leaf(*bias));
}

std::size_t LayerNormParams::declared_params() const {
  return gain->numel() + bias->numel();
}

Mlp2::Mlp2(ParameterStore& store, const std::string& prefix, std::size_t in,
           std::size_t hidden, std::size_t out)
    : l1(store, prefix + ".l1", in, hidden), l2(store, prefix + ".l2", hidden, out) {}

Tensor Mlp2::forward(Tape& t, Tensor x) const {
  return l2.forward(t, relu(l1.forward(t, x)));
}

std::size_t Mlp2::declared_params() const {
  return l1.declared_params() + l2.declared_params();
}

TransformerBlock::TransformerBlock(ParameterStore& store, const std::string& prefix,
                                   std::size_t d, std::size_t heads_, double dropout_)
    : ln1(store, prefix + ".ln1", d),
      ln2(store, prefix + ".ln2", d),
      wq(store, prefix + ".wq", d, d),
      wk(store, prefix + ".wk", d, d),
      wv(store, prefix + ".wv", d, d),
      wo(store, prefix + ".wo", d, d),
      ff1(store, prefix + ".ff1", d, 4 * d),
      ff2(store, prefix + ".ff2", 4 * d, d),
      heads(heads_),
      dropout(dropout_) {}

Tensor TransformerBlock::forward(Tape& t, Tensor x, const Mask& valid) const {
  Tensor h = ln1.forward(t, x);
  Tensor a = masked_attention(wq.forward(t, h), wk.forward(t, h), wv.forward(t, h),
                              valid, valid, heads);
  Tensor o = dropout > 0.0 ? seqcast::dropout(wo.forward(t, a), dropout)
                           : wo.forward(t, a);
  x = add(x, o);
  Tensor f = ff2.forward(t, gelu(ff1.forward(t, ln2.forward(t, x))));
  if (dropout > 0.0) f = seqcast::dropout(f, dropout);
  x = add(x, f);
  return zero_invalid_rows(x, valid);
}

std::size_t TransformerBlock::declared_params(std::size_t d) const {
  return 2 * (2 * d) + 4 * (d * d + d) + (d * 4 * d + 4 * d) + (4 * d * d + d);
}

AttentionBlock::AttentionBlock(ParameterStore& store, const std::string& prefix,
                               std::size_t d, std::size_t heads_)
    : ln(store, prefix + ".ln", d),
      wq(store, prefix + ".wq", d, d),
      wk(store, prefix + ".wk", d, d),
      wv(store, prefix + ".wv", d, d),
      wo(store, prefix + ".wo", d, d),
      heads(heads_) {}

Tensor AttentionBlock::forward(Tape& t, Tensor x, const Mask& valid) const {
  Tensor h = ln.forward(t, x);
  Tensor a = masked_attention(wq.forward(t, h), wk.forward(t, h), wv.forward(t, h),
                              valid, valid, heads);
  x = add(x, wo.forward(t, a));
  return zero_invalid_rows(x, valid);
}

std::size_t AttentionBlock::declared_params(std::size_t d) const {
  return 2 * d + 4 * (d * d + d);
}

CrossAttentionBlock::CrossAttentionBlock(ParameterStore& store,
                                         const std::string& prefix, std::size_t d,
                                         std::size_t heads_)
    : ln_q(store, prefix + ".ln_q", d),
      wq(store, prefix + ".wq", d, d),
      wk(store, prefix + ".wk", d, d),
      wv(store, prefix + ".wv", d, d),
      wo(store, prefix + ".wo", d, d),
      heads(heads_) {}

Tensor CrossAttentionBlock::forward(Tape& t, Tensor x, const Mask& x_valid, Tensor mem,
                                    const Mask& mem_valid) const {
  Tensor h = ln_q.forward(t, x);
  Tensor a = masked_attention(wq.forward(t, h), wk.forward(t, mem), wv.forward(t, mem),
                              mem_valid, x_valid, heads);
  x = add(x, wo.forward(t, a));
  return zero_invalid_rows(x, x_valid);
}

std::size_t CrossAttentionBlock::declared_params(std::size_t d) const {
  return 2 * d + 4 * (d * d + d);
}

} // namespace seqcast
