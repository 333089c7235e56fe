#include "seqcast/scenario.hpp"

#include <cmath>

namespace seqcast {

const char* to_string(AgentCategory c) {
  switch (c) {
  case AgentCategory::vehicle: return "vehicle";
  case AgentCategory::pedestrian: return "pedestrian";
  case AgentCategory::cyclist: return "cyclist";
  case AgentCategory::other: return "other";
  }
  return "other";
}

const char* to_string(MapCategory c) {
  switch (c) {
  case MapCategory::lane_center: return "lane-center";
  case MapCategory::boundary: return "boundary";
  case MapCategory::crosswalk: return "crosswalk";
  }
  return "lane-center";
}

AgentCategory agent_category_from(const std::string& s) {
  if (s == "vehicle") return AgentCategory::vehicle;
  if (s == "pedestrian") return AgentCategory::pedestrian;
  if (s == "cyclist") return AgentCategory::cyclist;
  if (s == "other") return AgentCategory::other;
  throw data_error("unknown agent category '" + s + "'");
}

MapCategory map_category_from(const std::string& s) {
  if (s == "lane-center") return MapCategory::lane_center;
  if (s == "boundary") return MapCategory::boundary;
  if (s == "crosswalk") return MapCategory::crosswalk;
  throw data_error("unknown map category '" + s + "'");
}

namespace {

void require(bool cond, const std::string& scenario_id, const std::string& what) {
  if (!cond)
    throw data_error("scenario '" + scenario_id + "' violates invariant: " + what);
}

bool finite(const Vec2& v) { return std::isfinite(v[0]) && std::isfinite(v[1]); }

} // namespace

void validate_scenario(const Scenario& s, const DataLimits& limits) {
  require(s.sample_rate_hz > 0.0, s.id, "sample rate must be positive");
  require(!s.agents.empty(), s.id, "scenario has no agents");
  require(s.agents.size() <= limits.max_agents, s.id,
          "agent count exceeds limit " + std::to_string(limits.max_agents));
  require(s.polylines.size() <= limits.max_polylines, s.id,
          "polyline count exceeds limit " + std::to_string(limits.max_polylines));
  require(s.focal_index < s.agents.size(), s.id, "focal index out of range");

  for (const AgentTrack& a : s.agents) {
    const std::string tag = "agent '" + a.id + "'";
    require(a.observed_positions.size() == limits.t_h, s.id,
            tag + " observed length != T_h");
    require(a.observed_headings.size() == limits.t_h, s.id,
            tag + " heading length != T_h");
    require(a.observed_velocities.size() == limits.t_h, s.id,
            tag + " velocity length != T_h");
    require(a.observed_valid.size() == limits.t_h, s.id, tag + " validity length != T_h");
    require(a.future_positions.size() == limits.t_f, s.id, tag + " future length != T_f");
    require(a.future_valid.size() == limits.t_f, s.id,
            tag + " future validity length != T_f");
    bool seen = false;
    for (std::size_t f = 0; f < limits.t_h; ++f) {
      if (a.observed_valid[f]) {
        seen = true;
        require(finite(a.observed_positions[f]), s.id, tag + " has non-finite position");
        require(finite(a.observed_velocities[f]), s.id, tag + " has non-finite velocity");
        require(std::isfinite(a.observed_headings[f]), s.id,
                tag + " has non-finite heading");
        require(a.observed_headings[f] > -3.14159265358979323846 - 1e-12 &&
                    a.observed_headings[f] <= 3.14159265358979323846 + 1e-12,
                s.id, tag + " heading not wrapped into (-pi, pi]");
      } else {
        require(!seen, s.id, tag + " validity is not a suffix of the window");
      }
    }
    for (std::size_t f = 0; f < limits.t_f; ++f)
      if (a.future_valid[f])
        require(finite(a.future_positions[f]), s.id, tag + " has non-finite future point");
  }

  const AgentTrack& focal = s.agents[s.focal_index];
  for (std::size_t f = 0; f < limits.t_h; ++f)
    require(focal.observed_valid[f] != 0, s.id,
            "focal agent not fully observed over the history window");

  for (std::size_t pi = 0; pi < s.polylines.size(); ++pi) {
    const MapPolyline& p = s.polylines[pi];
    const std::string tag = "polyline " + std::to_string(pi);
    require(p.points.size() == p.valid.size(), s.id, tag + " point/validity mismatch");
    require(p.points.size() <= limits.max_points, s.id,
            tag + " exceeds point limit " + std::to_string(limits.max_points));
    std::size_t nvalid = 0;
    const Vec2* prev = nullptr;
    for (std::size_t i = 0; i < p.points.size(); ++i) {
      if (!p.valid[i]) continue;
      ++nvalid;
      require(finite(p.points[i]), s.id, tag + " has non-finite point");
      if (prev) {
        double dx = p.points[i][0] - (*prev)[0];
        double dy = p.points[i][1] - (*prev)[1];
        require(std::sqrt(dx * dx + dy * dy) <= 50.0, s.id,
                tag + " has consecutive valid points farther than 50 m apart");
      }
      prev = &p.points[i];
    }
    require(nvalid >= 2, s.id, tag + " has fewer than 2 valid points");
  }
}

} // namespace seqcast
