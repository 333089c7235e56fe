#pragma once

#include <cstdint>
#include <vector>

#include "seqcast/scenario.hpp"

namespace seqcast {

enum class MotionTemplate { mixed, constant_velocity, constant_turn, lane_change, stop };

struct SynthOptions {
  double noise_pos = 0.03;     // m, per-frame position noise
  double noise_vel = 0.05;     // m/s, velocity channel noise
  double noise_heading = 0.002; // rad
  MotionTemplate force_template = MotionTemplate::mixed;
  DataLimits limits;
};

// Deterministic synthetic scenarios: the focal vehicle follows one of four
// kinematic templates, neighbors move on simple tracks nearby, and lane
// polylines trace the focal path. Same (seed, count, options) always produces
// value-identical scenarios.
std::vector<Scenario> generate_synthetic(std::uint64_t seed, std::size_t count,
                                         const SynthOptions& opts = {});

} // namespace seqcast
