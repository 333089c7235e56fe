#pragma once

#include <vector>

#include "seqcast/blocks.hpp"
#include "seqcast/config.hpp"
#include "seqcast/reorganize.hpp"

namespace seqcast {

// Token matrix plus bookkeeping: agents first, then map tokens. Invalid
// tokens carry all-zero feature rows.
struct TokenBatch {
  Tensor features; // N x D
  Mask valid;
  std::size_t agent_count = 0;
  std::vector<Vec2> anchors; // agent position at cutoff / polyline centroid
};

// PointNet-style polyline encoder: shared per-point perceptron followed by a
// masked max-pool over each polyline's valid points.
class MapEncoder {
public:
  MapEncoder(ParameterStore& store, const ModelConfig& cfg);
  // Returns one token per polyline; fully-invalid polylines yield zero rows.
  std::vector<Tensor> encode(Tape& t, const SubScene& sub, Mask* token_valid) const;
  std::size_t declared_params() const;

private:
  Mlp2 point_mlp_;
  std::size_t d_;
};

// Per-frame embedding, one masked self-attention block over the agent's own
// time axis, then a masked mean-pool over valid frames.
class AgentEncoder {
public:
  AgentEncoder(ParameterStore& store, const ModelConfig& cfg);
  std::vector<Tensor> encode(Tape& t, const SubScene& sub, Mask* token_valid) const;
  std::size_t declared_params() const;

private:
  LinearLayer embed_;
  AttentionBlock temporal_;
  std::size_t d_;
};

// Concatenates agent and map tokens and adds the anchor perceptron encoding
// (the pipeline's only positional signal) plus a learned per-kind embedding.
class TokenAssembler {
public:
  TokenAssembler(ParameterStore& store, const ModelConfig& cfg);
  TokenBatch assemble(Tape& t, std::vector<Tensor> agent_tokens, Mask agent_valid,
                      std::vector<Tensor> map_tokens, Mask map_valid,
                      std::vector<Vec2> anchors) const;
  std::size_t declared_params() const;

private:
  Mlp2 anchor_mlp_;
  Parameter* type_emb_; // 2 x D: agent, map
  std::size_t d_;
};

class BaseEncoder {
public:
  BaseEncoder(ParameterStore& store, const ModelConfig& cfg);
  TokenBatch encode(Tape& t, const SubScene& sub) const;
  std::size_t declared_params() const;

private:
  AgentEncoder agents_;
  MapEncoder maps_;
  TokenAssembler assembler_;
};

// The stack of masked transformer encoder blocks producing the encoded scene.
class EncoderStack {
public:
  EncoderStack(ParameterStore& store, const ModelConfig& cfg);
  Tensor forward(Tape& t, Tensor tokens, const Mask& valid) const;
  std::size_t declared_params() const;

private:
  std::vector<TransformerBlock> blocks_;
  std::size_t d_;
};

} // namespace seqcast
