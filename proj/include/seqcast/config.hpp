#pragma once

#include <cstdint>
#include <string>

#include "seqcast/jsonio.hpp"
#include "seqcast/reorganize.hpp"
#include "seqcast/scenario.hpp"

namespace seqcast {

struct ModelFlags {
  bool sc_stream = true;  // scene-context memory stream
  bool at_stream = false; // agent-trajectory stream (ablation only)
  bool enhancer = true;   // frozen foreign-transformer feature enhancer
};

struct ForeignSpec {
  std::string manifest;        // weight manifest path
  std::size_t layer_index = 0; // first frozen layer to load
  std::size_t layer_count = 1;
  std::size_t d_f = 256;       // foreign hidden width (echoed from the manifest)
  bool per_layer_adapters = false; // adapter pair per layer instead of one around the stack
};

struct ModelConfig {
  std::size_t d = 128;
  std::size_t heads = 8;
  std::size_t enc_blocks = 4;
  std::size_t modes = 6;
  std::size_t t_h = 50;
  std::size_t t_f = 60;
  double dropout = 0.0;
  ModelFlags flags;
  ForeignSpec foreign;
  ReorgConfig reorg;
  std::uint64_t seed = 1;

  // Channel layouts: agents {x, y, heading, vx, vy, valid},
  // maps {x, y, one-hot category(3), valid}.
  std::size_t agent_channels() const { return 6; }
  std::size_t map_channels() const { return 6; }

  DataLimits limits() const {
    DataLimits l;
    l.t_h = t_h;
    l.t_f = t_f;
    return l;
  }
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 20;
  double weight_decay = 0.01;
  std::uint64_t seed = 1;
  std::size_t threads = 0; // 0 = hardware concurrency
};

Json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const Json& j);
Json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const Json& j);

// Reads {"model": {...}, "train": {...}} with defaults for missing fields.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
};
RunConfig run_config_from_json(const Json& j);

} // namespace seqcast
