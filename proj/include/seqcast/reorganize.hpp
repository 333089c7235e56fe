#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seqcast/scenario.hpp"

namespace seqcast {

struct ReorgConfig {
  std::size_t segments = 3;
  std::size_t stride = 10; // frames between observation cutoffs
};

// One observation-cutoff view of a scenario, expressed entirely in the focal
// agent's reference frame at the cutoff (focal at the origin, heading +x).
struct SubScene {
  std::string scenario_id;
  std::size_t index = 0; // position within the sequence
  std::size_t t_obs = 0; // number of observed frames
  Pose2D reference;      // world pose of the focal agent at the cutoff frame

  struct AgentView {
    AgentCategory category = AgentCategory::vehicle;
    std::vector<Vec2> positions;   // t_obs, reference frame
    std::vector<double> headings;  // t_obs
    std::vector<Vec2> velocities;  // t_obs
    std::vector<std::uint8_t> valid;
    bool any_valid = false;
    Vec2 anchor{0.0, 0.0}; // position at the cutoff frame, reference frame
  };
  std::vector<AgentView> agents;
  std::size_t focal_index = 0;

  struct PolylineView {
    MapCategory category = MapCategory::lane_center;
    std::vector<Vec2> points; // reference frame
    std::vector<std::uint8_t> valid;
    bool any_valid = false;
    Vec2 centroid{0.0, 0.0}; // mean of valid points
  };
  std::vector<PolylineView> polylines;

  std::vector<Vec2> target; // T_f focal ground-truth frames after the cutoff
  std::vector<std::uint8_t> target_valid;
};

using SubSceneSequence = std::vector<SubScene>;

// Splits a scenario into an ordered sequence of sub-scenes with cutoffs
// t_obs_i = T_h - (S-1-i)*stride. The final sub-scene is the original task.
SubSceneSequence reorganize(const Scenario& s, const ReorgConfig& cfg = {},
                            const DataLimits& limits = {});

} // namespace seqcast
