#include "seqcast/context.hpp"

#include <numeric>

namespace seqcast {

namespace {

bool any_set(const Mask& m) {
  for (auto v : m)
    if (v) return true;
  return false;
}

std::vector<std::size_t> range_indices(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  return idx;
}

} // namespace

SceneContextStream::SceneContextStream(ParameterStore& store, const ModelConfig& cfg)
    : pose_mlp_(store, "ctx.pose_mlp", 4, cfg.d, cfg.d),
      cross_(store, "ctx.cross", cfg.d, cfg.heads),
      d_(cfg.d) {}

Tensor SceneContextStream::pose_embedding(Tape& t, const PoseDelta& delta) const {
  Tensor in = t.constant({1, 4}, {delta.dt, delta.dheading, delta.dposition[0],
                                  delta.dposition[1]});
  return row(pose_mlp_.forward(t, in), 0);
}

Tensor SceneContextStream::adjusted_memory(Tape& t, Tensor mem_tokens,
                                           const PoseDelta& delta) const {
  return add_row_broadcast(mem_tokens, pose_embedding(t, delta));
}

Tensor SceneContextStream::interact(Tape& t, const TokenBatch& current,
                                    const SceneMemory& mem,
                                    const Pose2D& cur_pose) const {
  if (!mem.has_value) return current.features;
  PoseDelta delta = pose_delta(mem.pose, cur_pose);

  std::size_t n = current.valid.size();
  std::size_t na = current.agent_count;
  Tensor agents = gather_rows(current.features, range_indices(0, na));
  Tensor maps = gather_rows(current.features, range_indices(na, n));
  Mask agent_mask(current.valid.begin(), current.valid.begin() + na);
  Mask map_mask(current.valid.begin() + na, current.valid.end());

  if (mem.agent_valid.size() > 0 && any_set(mem.agent_valid) && any_set(agent_mask)) {
    Tensor adj = adjusted_memory(t, mem.agent_tokens, delta);
    agents = cross_.forward(t, agents, agent_mask, adj, mem.agent_valid);
  }
  if (mem.map_valid.size() > 0 && any_set(mem.map_valid) && any_set(map_mask)) {
    Tensor adj = adjusted_memory(t, mem.map_tokens, delta);
    maps = cross_.forward(t, maps, map_mask, adj, mem.map_valid);
  }
  if (na == 0) return maps;
  if (na == n) return agents;
  return concat_rows({agents, maps});
}

std::size_t SceneContextStream::declared_params() const {
  return pose_mlp_.declared_params() + cross_.declared_params(d_);
}

TrajectoryStream::TrajectoryStream(ParameterStore& store, const ModelConfig& cfg)
    : embed_(store, "at.embed", 2 * cfg.t_f, cfg.d, cfg.d),
      cross_(store, "at.cross", cfg.d, cfg.heads),
      t_f_(cfg.t_f) {}

Tensor TrajectoryStream::refine(Tape& t, Tensor mode_queries, const SceneMemory& mem,
                                const Pose2D& cur_pose) const {
  if (!mem.has_value || !mem.predictions.defined()) return mode_queries;
  // Previous frame -> world -> current frame, composed from the pose delta:
  // p_cur = R(-dheading) * p_prev - dposition.
  PoseDelta delta = pose_delta(mem.pose, cur_pose);
  double angle = -delta.dheading;
  Vec2 trans{-delta.dposition[0], -delta.dposition[1]};
  std::size_t k = mem.predictions.rows();
  Tensor pts = reshape(mem.predictions, {k * t_f_, 2});
  Tensor moved = rigid_transform_rows(pts, angle, trans[0], trans[1]);
  Tensor flat = reshape(moved, {k, 2 * t_f_});
  Tensor emb = embed_.forward(t, flat);
  Mask all_valid(k, 1);
  Mask query_valid(mode_queries.rows(), 1);
  return cross_.forward(t, mode_queries, query_valid, emb, all_valid);
}

std::size_t TrajectoryStream::declared_params() const {
  std::size_t d = embed_.l2.w->shape[1];
  return embed_.declared_params() + cross_.declared_params(d);
}

} // namespace seqcast
