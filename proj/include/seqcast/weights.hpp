#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seqcast/tensor.hpp"

namespace seqcast {

// Weight file pair: a JSON manifest naming tensors with shapes and byte
// offsets, plus a blob of raw little-endian float32 values. Values are widened
// to float64 on load; the blob round-trips bit-exactly.
struct WeightTensorSpec {
  std::string name;
  Shape shape;
  std::size_t offset = 0; // bytes into the blob
};

struct WeightManifest {
  std::string source;
  std::size_t layers = 0;
  std::size_t heads = 0;
  std::size_t d_f = 0;
  std::size_t ff_hidden = 0;
  std::string blob_file; // relative to the manifest
  std::size_t total_bytes = 0;
  std::vector<WeightTensorSpec> tensors;

  const WeightTensorSpec* find(const std::string& name) const;
};

// Tensor layout of one frozen pre-norm layer (masked attention + gated
// feed-forward): ln1, attn.{wq,wk,wv,wo}, ln2, ffn.{w_gate,w_up,w_down}.
std::vector<WeightTensorSpec> plan_foreign_tensors(std::size_t layers, std::size_t d_f,
                                                   std::size_t ff_hidden);

// Deterministic scaled-normal initialization of every layer tensor; writing
// twice with one seed is byte-identical and distinct layers get distinct
// weights. Writes <prefix>.manifest.json and <prefix>.bin.
WeightManifest make_synthetic_weights(std::uint64_t seed, std::size_t layers,
                                      std::size_t d_f, std::size_t heads,
                                      const std::string& out_prefix,
                                      std::size_t ff_hidden = 0 /* 0 = 4*d_f */);

WeightManifest read_weight_manifest(const std::string& manifest_path);

// Manifest plus blob, loaded and widened to doubles.
struct ForeignWeights {
  WeightManifest manifest;
  std::vector<float> blob;

  std::vector<double> tensor(const std::string& name) const;
};

ForeignWeights load_foreign_weights(const std::string& manifest_path);

// Re-encodes the blob (float32) exactly as loaded.
void write_weight_blob(const std::string& path, const std::vector<float>& blob);

} // namespace seqcast
