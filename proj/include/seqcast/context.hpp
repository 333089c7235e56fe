#pragma once

#include "seqcast/blocks.hpp"
#include "seqcast/config.hpp"
#include "seqcast/encoder.hpp"

namespace seqcast {

// What one sub-scene leaves behind for the next: its final tokens split by
// kind, the reference pose, and (for the trajectory stream) its predictions.
// Alignment to the next frame happens at consumption time via pose deltas.
struct SceneMemory {
  bool has_value = false;
  Tensor agent_tokens;
  Mask agent_valid;
  Tensor map_tokens;
  Mask map_valid;
  Pose2D pose;
  Tensor predictions; // modes x 2*T_f, in `pose`'s frame
};

// Scene-context stream: memory tokens are offset by a pose-delta embedding and
// fused into the current tokens by one cross-attention block, applied to agent
// and map tokens separately against their own memory kind.
class SceneContextStream {
public:
  SceneContextStream(ParameterStore& store, const ModelConfig& cfg);

  Tensor interact(Tape& t, const TokenBatch& current, const SceneMemory& mem,
                  const Pose2D& cur_pose) const;

  // The cross-attention keys/values: stored tokens plus the pose embedding.
  Tensor adjusted_memory(Tape& t, Tensor mem_tokens, const PoseDelta& delta) const;

  std::size_t declared_params() const;

private:
  Tensor pose_embedding(Tape& t, const PoseDelta& delta) const;

  Mlp2 pose_mlp_;
  CrossAttentionBlock cross_;
  std::size_t d_;
};

// Optional agent-trajectory stream (ablation only): the previous prediction
// set is rigidly moved into the current frame, embedded per mode, and fused
// into the decoder's mode queries by one cross-attention block.
class TrajectoryStream {
public:
  TrajectoryStream(ParameterStore& store, const ModelConfig& cfg);

  Tensor refine(Tape& t, Tensor mode_queries, const SceneMemory& mem,
                const Pose2D& cur_pose) const;

  std::size_t declared_params() const;

private:
  Mlp2 embed_;
  CrossAttentionBlock cross_;
  std::size_t t_f_;
};

} // namespace seqcast
