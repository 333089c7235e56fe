#include "seqcast/weights.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "seqcast/jsonio.hpp"
#include "seqcast/rng.hpp"

namespace seqcast {

const WeightTensorSpec* WeightManifest::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

std::vector<WeightTensorSpec> plan_foreign_tensors(std::size_t layers, std::size_t d_f,
                                                   std::size_t ff_hidden) {
  std::vector<WeightTensorSpec> specs;
  std::size_t offset = 0;
  auto push = [&](const std::string& name, Shape shape) {
    WeightTensorSpec s;
    s.name = name;
    s.shape = std::move(shape);
    s.offset = offset;
    offset += shape_numel(s.shape) * sizeof(float);
    specs.push_back(std::move(s));
  };
  for (std::size_t i = 0; i < layers; ++i) {
    std::string p = "layers." + std::to_string(i) + ".";
    push(p + "ln1.gain", {d_f});
    push(p + "ln1.bias", {d_f});
    push(p + "attn.wq", {d_f, d_f});
    push(p + "attn.wk", {d_f, d_f});
    push(p + "attn.wv", {d_f, d_f});
    push(p + "attn.wo", {d_f, d_f});
    push(p + "ln2.gain", {d_f});
    push(p + "ln2.bias", {d_f});
    push(p + "ffn.w_gate", {d_f, ff_hidden});
    push(p + "ffn.w_up", {d_f, ff_hidden});
    push(p + "ffn.w_down", {ff_hidden, d_f});
  }
  return specs;
}

namespace {

void fill_tensor(std::vector<float>& blob, const WeightTensorSpec& spec,
                 std::uint64_t seed, std::size_t d_f, std::size_t ff_hidden) {
  Rng rng(mix_seed(seed, spec.name));
  std::size_t n = shape_numel(spec.shape);
  float* dst = blob.data() + spec.offset / sizeof(float);
  bool is_gain = spec.name.find("gain") != std::string::npos;
  bool is_bias = spec.name.find("bias") != std::string::npos;
  double std_dev;
  if (is_gain || is_bias) {
    for (std::size_t i = 0; i < n; ++i)
      dst[i] = static_cast<float>((is_gain ? 1.0 : 0.0) + 0.02 * rng.normal());
    return;
  }
  // Scaled-normal, with the residual-feeding projections damped.
  if (spec.name.find("w_down") != std::string::npos)
    std_dev = 0.5 / std::sqrt(static_cast<double>(ff_hidden));
  else if (spec.name.find("wo") != std::string::npos)
    std_dev = 0.5 / std::sqrt(static_cast<double>(d_f));
  else
    std_dev = 1.0 / std::sqrt(static_cast<double>(d_f));
  for (std::size_t i = 0; i < n; ++i)
    dst[i] = static_cast<float>(std_dev * rng.normal());
}

Json manifest_to_json(const WeightManifest& m) {
  Json j;
  j["source"] = m.source;
  j["layers"] = m.layers;
  j["heads"] = m.heads;
  j["d_f"] = m.d_f;
  j["ff_hidden"] = m.ff_hidden;
  j["blob"] = m.blob_file;
  j["total_bytes"] = m.total_bytes;
  Json tensors = Json::array();
  for (const auto& t : m.tensors) {
    Json jt;
    jt["name"] = t.name;
    Json shape = Json::array();
    for (auto d : t.shape) shape.push_back(d);
    jt["shape"] = shape;
    jt["offset"] = t.offset;
    tensors.push_back(jt);
  }
  j["tensors"] = tensors;
  return j;
}

} // namespace

WeightManifest make_synthetic_weights(std::uint64_t seed, std::size_t layers,
                                      std::size_t d_f, std::size_t heads,
                                      const std::string& out_prefix,
                                      std::size_t ff_hidden) {
  if (heads == 0 || d_f % heads != 0)
    throw config_error("make_synthetic_weights: d_f " + std::to_string(d_f) +
                       " not divisible by heads " + std::to_string(heads));
  if (layers == 0) throw config_error("make_synthetic_weights: need >= 1 layer");
  if (ff_hidden == 0) ff_hidden = 4 * d_f;

  WeightManifest m;
  m.source = "synthetic seed " + std::to_string(seed);
  m.layers = layers;
  m.heads = heads;
  m.d_f = d_f;
  m.ff_hidden = ff_hidden;
  m.tensors = plan_foreign_tensors(layers, d_f, ff_hidden);
  m.total_bytes = m.tensors.empty()
                      ? 0
                      : m.tensors.back().offset +
                            shape_numel(m.tensors.back().shape) * sizeof(float);

  std::filesystem::path prefix(out_prefix);
  if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());
  m.blob_file = prefix.filename().string() + ".bin";

  std::vector<float> blob(m.total_bytes / sizeof(float));
  for (const auto& spec : m.tensors) fill_tensor(blob, spec, seed, d_f, ff_hidden);
  write_weight_blob(out_prefix + ".bin", blob);
  write_json_file(out_prefix + ".manifest.json", manifest_to_json(m), 1);
  return m;
}

WeightManifest read_weight_manifest(const std::string& path) {
  Json j = read_json_file(path);
  WeightManifest m;
  try {
    m.source = j.at("source").get<std::string>();
    m.layers = j.at("layers").get<std::size_t>();
    m.heads = j.at("heads").get<std::size_t>();
    m.d_f = j.at("d_f").get<std::size_t>();
    m.ff_hidden = j.at("ff_hidden").get<std::size_t>();
    m.blob_file = j.at("blob").get<std::string>();
    m.total_bytes = j.at("total_bytes").get<std::size_t>();
    for (const auto& jt : j.at("tensors")) {
      WeightTensorSpec s;
      s.name = jt.at("name").get<std::string>();
      for (const auto& d : jt.at("shape")) s.shape.push_back(d.get<std::size_t>());
      s.offset = jt.at("offset").get<std::size_t>();
      m.tensors.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw data_error("weight manifest " + path + ": " + e.what());
  }
  // Offsets must be non-overlapping and in-bounds.
  std::size_t cursor = 0;
  for (const auto& t : m.tensors) {
    if (t.offset < cursor)
      throw data_error("weight manifest " + path + ": tensor '" + t.name +
                       "' overlaps the previous tensor");
    cursor = t.offset + shape_numel(t.shape) * sizeof(float);
  }
  if (cursor > m.total_bytes)
    throw data_error("weight manifest " + path + ": tensors exceed total_bytes");
  return m;
}

std::vector<double> ForeignWeights::tensor(const std::string& name) const {
  const WeightTensorSpec* spec = manifest.find(name);
  if (!spec)
    throw data_error("weight blob is missing tensor '" + name + "'");
  std::size_t n = shape_numel(spec->shape);
  std::size_t start = spec->offset / sizeof(float);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(blob[start + i]);
  return out;
}

ForeignWeights load_foreign_weights(const std::string& manifest_path) {
  ForeignWeights fw;
  fw.manifest = read_weight_manifest(manifest_path);
  std::filesystem::path dir = std::filesystem::path(manifest_path).parent_path();
  std::string blob_path = (dir / fw.manifest.blob_file).string();
  std::ifstream in(blob_path, std::ios::binary);
  if (!in) throw data_error("cannot open weight blob: " + blob_path);
  in.seekg(0, std::ios::end);
  std::size_t bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != fw.manifest.total_bytes)
    throw data_error("weight blob " + blob_path + " has " + std::to_string(bytes) +
                     " bytes, manifest declares " +
                     std::to_string(fw.manifest.total_bytes));
  in.seekg(0);
  fw.blob.resize(bytes / sizeof(float));
  in.read(reinterpret_cast<char*>(fw.blob.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw data_error("short read on weight blob: " + blob_path);
  return fw;
}

void write_weight_blob(const std::string& path, const std::vector<float>& blob) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write weight blob: " + path);
  out.write(reinterpret_cast<const char*>(blob.data()),
            static_cast<std::streamsize>(blob.size() * sizeof(float)));
  if (!out) throw data_error("write failed: " + path);
}

} // namespace seqcast
