#include "seqcast/scenario_io.hpp"

#include <filesystem>

namespace seqcast {

namespace {

Json points_to_json(const std::vector<Vec2>& pts) {
  Json arr = Json::array();
  for (const Vec2& p : pts) arr.push_back(Json::array({p[0], p[1]}));
  return arr;
}

std::vector<Vec2> points_from_json(const Json& arr, const std::string& ctx) {
  if (!arr.is_array()) throw data_error(ctx + ": expected an array of points");
  std::vector<Vec2> out;
  out.reserve(arr.size());
  for (const auto& el : arr) {
    if (!el.is_array() || el.size() != 2 || !el[0].is_number() || !el[1].is_number())
      throw data_error(ctx + ": point must be a [x, y] pair");
    out.push_back({el[0].get<double>(), el[1].get<double>()});
  }
  return out;
}

Json mask_to_json(const std::vector<std::uint8_t>& m) {
  Json arr = Json::array();
  for (auto v : m) arr.push_back(v != 0);
  return arr;
}

std::vector<std::uint8_t> mask_from_json(const Json& arr, const std::string& ctx) {
  if (!arr.is_array()) throw data_error(ctx + ": expected a boolean array");
  std::vector<std::uint8_t> out;
  out.reserve(arr.size());
  for (const auto& el : arr) {
    if (!el.is_boolean()) throw data_error(ctx + ": validity entries must be booleans");
    out.push_back(el.get<bool>() ? 1 : 0);
  }
  return out;
}

std::vector<double> doubles_from_json(const Json& arr, const std::string& ctx) {
  if (!arr.is_array()) throw data_error(ctx + ": expected a numeric array");
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& el : arr) {
    if (!el.is_number()) throw data_error(ctx + ": entries must be numbers");
    out.push_back(el.get<double>());
  }
  return out;
}

const Json& field(const Json& j, const char* key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) throw data_error(ctx + ": missing field '" + key + "'");
  return *it;
}

} // namespace

Json scenario_to_json(const Scenario& s) {
  Json j;
  j["id"] = s.id;
  j["focal_index"] = s.focal_index;
  j["sample_rate_hz"] = s.sample_rate_hz;
  Json agents = Json::array();
  for (const AgentTrack& a : s.agents) {
    Json ja;
    ja["id"] = a.id;
    ja["category"] = to_string(a.category);
    Json obs;
    obs["positions"] = points_to_json(a.observed_positions);
    Json headings = Json::array();
    for (double h : a.observed_headings) headings.push_back(h);
    obs["headings"] = headings;
    obs["velocities"] = points_to_json(a.observed_velocities);
    obs["valid"] = mask_to_json(a.observed_valid);
    ja["observed"] = obs;
    Json fut;
    fut["positions"] = points_to_json(a.future_positions);
    fut["valid"] = mask_to_json(a.future_valid);
    ja["future"] = fut;
    agents.push_back(ja);
  }
  j["agents"] = agents;
  Json polys = Json::array();
  for (const MapPolyline& p : s.polylines) {
    Json jp;
    jp["category"] = to_string(p.category);
    jp["points"] = points_to_json(p.points);
    jp["valid"] = mask_to_json(p.valid);
    polys.push_back(jp);
  }
  j["polylines"] = polys;
  return j;
}

Scenario scenario_from_json(const Json& j, const std::string& ctx,
                            const DataLimits& limits) {
  Scenario s;
  s.id = field(j, "id", ctx).get<std::string>();
  s.focal_index = field(j, "focal_index", ctx).get<std::size_t>();
  s.sample_rate_hz = field(j, "sample_rate_hz", ctx).get<double>();
  for (const auto& ja : field(j, "agents", ctx)) {
    AgentTrack a;
    a.id = field(ja, "id", ctx).get<std::string>();
    a.category = agent_category_from(field(ja, "category", ctx).get<std::string>());
    const Json& obs = field(ja, "observed", ctx);
    a.observed_positions = points_from_json(field(obs, "positions", ctx), ctx);
    a.observed_headings = doubles_from_json(field(obs, "headings", ctx), ctx);
    a.observed_velocities = points_from_json(field(obs, "velocities", ctx), ctx);
    a.observed_valid = mask_from_json(field(obs, "valid", ctx), ctx);
    const Json& fut = field(ja, "future", ctx);
    a.future_positions = points_from_json(field(fut, "positions", ctx), ctx);
    a.future_valid = mask_from_json(field(fut, "valid", ctx), ctx);
    s.agents.push_back(std::move(a));
  }
  for (const auto& jp : field(j, "polylines", ctx)) {
    MapPolyline p;
    p.category = map_category_from(field(jp, "category", ctx).get<std::string>());
    p.points = points_from_json(field(jp, "points", ctx), ctx);
    p.valid = mask_from_json(field(jp, "valid", ctx), ctx);
    s.polylines.push_back(std::move(p));
  }
  validate_scenario(s, limits);
  return s;
}

void write_scenario(const Scenario& s, const std::string& path) {
  write_json_file(path, scenario_to_json(s));
}

Scenario read_scenario(const std::string& path, const DataLimits& limits) {
  return scenario_from_json(read_json_file(path), path, limits);
}

std::vector<std::string> Dataset::files_for_split(const std::string& split) const {
  std::vector<std::string> out;
  for (const auto& e : entries)
    if (e.split == split) out.push_back(dir + "/" + e.file);
  return out;
}

void write_dataset(const std::vector<Scenario>& scenarios, const std::string& dir,
                   double train_fraction) {
  std::filesystem::create_directories(dir);
  Json index;
  Json entries = Json::array();
  std::size_t train_count =
      static_cast<std::size_t>(train_fraction * static_cast<double>(scenarios.size()));
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    std::string file = scenarios[i].id + ".json";
    write_scenario(scenarios[i], dir + "/" + file);
    Json e;
    e["file"] = file;
    e["split"] = i < train_count ? "train" : "val";
    entries.push_back(e);
  }
  index["scenarios"] = entries;
  write_json_file(dir + "/index.json", index, 2);
}

Dataset read_dataset_index(const std::string& dir) {
  Dataset ds;
  ds.dir = dir;
  Json index = read_json_file(dir + "/index.json");
  for (const auto& e : field(index, "scenarios", dir + "/index.json")) {
    DatasetIndexEntry entry;
    entry.file = field(e, "file", dir).get<std::string>();
    entry.split = field(e, "split", dir).get<std::string>();
    ds.entries.push_back(entry);
  }
  return ds;
}

std::vector<Scenario> load_split(const Dataset& ds, const std::string& split,
                                 const DataLimits& limits) {
  std::vector<Scenario> out;
  for (const std::string& path : ds.files_for_split(split))
    out.push_back(read_scenario(path, limits));
  if (out.empty())
    throw data_error("dataset split '" + split + "' in " + ds.dir + " is empty");
  return out;
}

} // namespace seqcast
