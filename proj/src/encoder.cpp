#include "seqcast/encoder.hpp"

namespace seqcast {

namespace {

Tensor zero_token(Tape& t, std::size_t d) {
  return t.constant({d}, std::vector<double>(d, 0.0));
}

} // namespace

// ---------------------------------------------------------------------------
// MapEncoder
// ---------------------------------------------------------------------------

MapEncoder::MapEncoder(ParameterStore& store, const ModelConfig& cfg)
    : point_mlp_(store, "map_enc.point_mlp", cfg.map_channels(), cfg.d, cfg.d),
      d_(cfg.d) {}

std::vector<Tensor> MapEncoder::encode(Tape& t, const SubScene& sub,
                                       Mask* token_valid) const {
  std::vector<Tensor> tokens;
  tokens.reserve(sub.polylines.size());
  token_valid->clear();
  for (const auto& p : sub.polylines) {
    if (!p.any_valid) {
      tokens.push_back(zero_token(t, d_));
      token_valid->push_back(0);
      continue;
    }
    std::size_t n = p.points.size();
    std::vector<double> feats(n * 6, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double* f = feats.data() + i * 6;
      f[0] = p.points[i][0];
      f[1] = p.points[i][1];
      f[2 + static_cast<std::size_t>(p.category)] = 1.0;
      f[5] = p.valid[i] ? 1.0 : 0.0;
    }
    Tensor per_point = point_mlp_.forward(t, t.constant({n, 6}, std::move(feats)));
    tokens.push_back(masked_max_rows(per_point, p.valid));
    token_valid->push_back(1);
  }
  return tokens;
}

std::size_t MapEncoder::declared_params() const { return point_mlp_.declared_params(); }

// ---------------------------------------------------------------------------
// AgentEncoder
// ---------------------------------------------------------------------------

AgentEncoder::AgentEncoder(ParameterStore& store, const ModelConfig& cfg)
    : embed_(store, "agent_enc.embed", cfg.agent_channels(), cfg.d),
      temporal_(store, "agent_enc.temporal", cfg.d, cfg.heads),
      d_(cfg.d) {}

std::vector<Tensor> AgentEncoder::encode(Tape& t, const SubScene& sub,
                                         Mask* token_valid) const {
  std::vector<Tensor> tokens;
  tokens.reserve(sub.agents.size());
  token_valid->clear();
  for (const auto& a : sub.agents) {
    if (!a.any_valid) {
      tokens.push_back(zero_token(t, d_));
      token_valid->push_back(0);
      continue;
    }
    std::size_t n = a.positions.size();
    std::vector<double> feats(n * 6, 0.0);
    for (std::size_t f = 0; f < n; ++f) {
      if (!a.valid[f]) continue;
      double* row = feats.data() + f * 6;
      row[0] = a.positions[f][0];
      row[1] = a.positions[f][1];
      row[2] = a.headings[f];
      row[3] = a.velocities[f][0];
      row[4] = a.velocities[f][1];
      row[5] = 1.0;
    }
    Tensor frames = embed_.forward(t, t.constant({n, 6}, std::move(feats)));
    Tensor attended = temporal_.forward(t, frames, a.valid);
    tokens.push_back(masked_mean_rows(attended, a.valid));
    token_valid->push_back(1);
  }
  return tokens;
}

std::size_t AgentEncoder::declared_params() const {
  return embed_.declared_params() + temporal_.declared_params(d_);
}

// ---------------------------------------------------------------------------
// TokenAssembler
// ---------------------------------------------------------------------------

TokenAssembler::TokenAssembler(ParameterStore& store, const ModelConfig& cfg)
    : anchor_mlp_(store, "assemble.anchor_mlp", 2, cfg.d, cfg.d),
      type_emb_(&store.add("assemble.type_emb", {2, cfg.d}, Init::normal(0.02))),
      d_(cfg.d) {}

TokenBatch TokenAssembler::assemble(Tape& t, std::vector<Tensor> agent_tokens,
                                    Mask agent_valid, std::vector<Tensor> map_tokens,
                                    Mask map_valid, std::vector<Vec2> anchors) const {
  TokenBatch batch;
  batch.agent_count = agent_tokens.size();
  std::vector<Tensor> rows = std::move(agent_tokens);
  rows.insert(rows.end(), map_tokens.begin(), map_tokens.end());
  batch.valid = std::move(agent_valid);
  batch.valid.insert(batch.valid.end(), map_valid.begin(), map_valid.end());
  batch.anchors = std::move(anchors);

  Tensor tokens = stack_rows(rows);
  std::size_t n = rows.size();
  std::vector<double> anchor_data(n * 2);
  std::vector<std::size_t> kinds(n);
  for (std::size_t i = 0; i < n; ++i) {
    anchor_data[i * 2] = batch.anchors[i][0];
    anchor_data[i * 2 + 1] = batch.anchors[i][1];
    kinds[i] = i < batch.agent_count ? 0 : 1;
  }
  Tensor anchor_enc = anchor_mlp_.forward(t, t.constant({n, 2}, std::move(anchor_data)));
  Tensor type_enc = gather_rows(t.leaf(*type_emb_), kinds);
  batch.features =
      zero_invalid_rows(add(add(tokens, anchor_enc), type_enc), batch.valid);
  return batch;
}

std::size_t TokenAssembler::declared_params() const {
  return anchor_mlp_.declared_params() + 2 * d_;
}

// ---------------------------------------------------------------------------
// BaseEncoder
// ---------------------------------------------------------------------------

BaseEncoder::BaseEncoder(ParameterStore& store, const ModelConfig& cfg)
    : agents_(store, cfg), maps_(store, cfg), assembler_(store, cfg) {}

TokenBatch BaseEncoder::encode(Tape& t, const SubScene& sub) const {
  Mask agent_valid, map_valid;
  std::vector<Tensor> agent_tokens = agents_.encode(t, sub, &agent_valid);
  std::vector<Tensor> map_tokens = maps_.encode(t, sub, &map_valid);
  std::vector<Vec2> anchors;
  anchors.reserve(sub.agents.size() + sub.polylines.size());
  for (const auto& a : sub.agents) anchors.push_back(a.anchor);
  for (const auto& p : sub.polylines) anchors.push_back(p.centroid);
  return assembler_.assemble(t, std::move(agent_tokens), std::move(agent_valid),
                             std::move(map_tokens), std::move(map_valid),
                             std::move(anchors));
}

std::size_t BaseEncoder::declared_params() const {
  return agents_.declared_params() + maps_.declared_params() +
         assembler_.declared_params();
}

// ---------------------------------------------------------------------------
// EncoderStack
// ---------------------------------------------------------------------------

EncoderStack::EncoderStack(ParameterStore& store, const ModelConfig& cfg) : d_(cfg.d) {
  blocks_.reserve(cfg.enc_blocks);
  for (std::size_t i = 0; i < cfg.enc_blocks; ++i)
    blocks_.emplace_back(store, "enc." + std::to_string(i), cfg.d, cfg.heads,
                         cfg.dropout);
}

Tensor EncoderStack::forward(Tape& t, Tensor tokens, const Mask& valid) const {
  std::size_t nvalid = 0;
  for (auto v : valid) nvalid += v ? 1 : 0;
  if (nvalid == 0) throw numeric_error("encoder stack: scene has no valid tokens");
  for (const auto& b : blocks_) tokens = b.forward(t, tokens, valid);
  return tokens;
}

std::size_t EncoderStack::declared_params() const {
  std::size_t total = 0;
  for (const auto& b : blocks_) total += b.declared_params(d_);
  return total;
}

} // namespace seqcast
