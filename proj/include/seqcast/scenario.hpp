#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seqcast/geometry.hpp"

namespace seqcast {

enum class AgentCategory { vehicle, pedestrian, cyclist, other };
enum class MapCategory { lane_center, boundary, crosswalk };

const char* to_string(AgentCategory c);
const char* to_string(MapCategory c);
AgentCategory agent_category_from(const std::string& s);
MapCategory map_category_from(const std::string& s);

// One tracked agent at 10 Hz: an observation window plus the ground-truth
// future. Validity may start mid-window but never ends early (an agent, once
// observed, stays observed).
struct AgentTrack {
  std::string id;
  AgentCategory category = AgentCategory::vehicle;
  std::vector<Vec2> observed_positions;   // T_h x 2, meters
  std::vector<double> observed_headings;  // T_h, radians
  std::vector<Vec2> observed_velocities;  // T_h x 2, m/s
  std::vector<std::uint8_t> observed_valid;
  std::vector<Vec2> future_positions;     // T_f x 2
  std::vector<std::uint8_t> future_valid;
};

struct MapPolyline {
  MapCategory category = MapCategory::lane_center;
  std::vector<Vec2> points; // P x 2
  std::vector<std::uint8_t> valid;
};

struct Scenario {
  std::string id;
  std::size_t focal_index = 0;
  double sample_rate_hz = 10.0;
  std::vector<AgentTrack> agents;
  std::vector<MapPolyline> polylines;
};

struct DataLimits {
  std::size_t t_h = 50;
  std::size_t t_f = 60;
  std::size_t max_agents = 32;
  std::size_t max_polylines = 64;
  std::size_t max_points = 20;
};

// Throws a data error naming the violated invariant.
void validate_scenario(const Scenario& s, const DataLimits& limits = {});

inline double frame_dt(const Scenario& s) { return 1.0 / s.sample_rate_hz; }

} // namespace seqcast
