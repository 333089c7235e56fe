#pragma once

#include <string>

#include "seqcast/ops.hpp"
#include "seqcast/params.hpp"

namespace seqcast {

struct LinearLayer {
  Parameter* w = nullptr;
  Parameter* b = nullptr;

  LinearLayer() = default;
  LinearLayer(ParameterStore& store, const std::string& prefix, std::size_t in,
              std::size_t out, bool bias = true);

  Tensor forward(Tape& t, Tensor x) const;
  std::size_t declared_params() const;
};

struct LayerNormParams {
  Parameter* gain = nullptr;
  Parameter* bias = nullptr;

  LayerNormParams() = default;
  LayerNormParams(ParameterStore& store, const std::string& prefix, std::size_t d);

  Tensor forward(Tape& t, Tensor x) const;
  std::size_t declared_params() const;
};

// Two-layer perceptron with relu, used for anchor/pose/map/trajectory
// embeddings.
struct Mlp2 {
  LinearLayer l1, l2;

  Mlp2() = default;
  Mlp2(ParameterStore& store, const std::string& prefix, std::size_t in,
       std::size_t hidden, std::size_t out);

  Tensor forward(Tape& t, Tensor x) const;
  std::size_t declared_params() const;
};

// Pre-norm transformer block: x + Wo*MHA(LN1 x) followed by x + FF(LN2 x)
// with a gelu feed-forward of width 4*d. Invalid rows stay exactly zero.
struct TransformerBlock {
  LayerNormParams ln1, ln2;
  LinearLayer wq, wk, wv, wo, ff1, ff2;
  std::size_t heads = 8;
  double dropout = 0.0;

  TransformerBlock() = default;
  TransformerBlock(ParameterStore& store, const std::string& prefix, std::size_t d,
                   std::size_t heads, double dropout);

  Tensor forward(Tape& t, Tensor x, const Mask& valid) const;
  std::size_t declared_params(std::size_t d) const;
};

// Pre-norm self-attention sublayer without a feed-forward, used for the
// per-agent temporal encoder.
struct AttentionBlock {
  LayerNormParams ln;
  LinearLayer wq, wk, wv, wo;
  std::size_t heads = 8;

  AttentionBlock() = default;
  AttentionBlock(ParameterStore& store, const std::string& prefix, std::size_t d,
                 std::size_t heads);

  Tensor forward(Tape& t, Tensor x, const Mask& valid) const;
  std::size_t declared_params(std::size_t d) const;
};

// Pre-norm cross-attention with residual: x + Wo*MHA(LN(x), mem, mem).
struct CrossAttentionBlock {
  LayerNormParams ln_q;
  LinearLayer wq, wk, wv, wo;
  std::size_t heads = 8;

  CrossAttentionBlock() = default;
  CrossAttentionBlock(ParameterStore& store, const std::string& prefix, std::size_t d,
                      std::size_t heads);

  Tensor forward(Tape& t, Tensor x, const Mask& x_valid, Tensor mem,
                 const Mask& mem_valid) const;
  std::size_t declared_params(std::size_t d) const;
};

} // namespace seqcast
