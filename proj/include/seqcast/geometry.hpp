#pragma once

#include <array>
#include <cmath>

#include "seqcast/error.hpp"

namespace seqcast {

using Vec2 = std::array<double, 2>;

// Wrap an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double r = std::remainder(a, 6.28318530717958647692);
  if (r <= -3.14159265358979323846) r += 6.28318530717958647692;
  return r;
}

struct Pose2D {
  Vec2 position{0.0, 0.0};
  double heading = 0.0; // radians, (-pi, pi]
  double timestamp = 0.0;
};

// World point -> pose-local frame: translate by -position, rotate by -heading.
inline Vec2 to_reference_frame(const Vec2& p, const Pose2D& pose) {
  double dx = p[0] - pose.position[0];
  double dy = p[1] - pose.position[1];
  double c = std::cos(pose.heading), s = std::sin(pose.heading);
  return {c * dx + s * dy, -s * dx + c * dy};
}

// Pose-local point -> world frame (inverse of to_reference_frame).
inline Vec2 from_reference_frame(const Vec2& p, const Pose2D& pose) {
  double c = std::cos(pose.heading), s = std::sin(pose.heading);
  return {c * p[0] - s * p[1] + pose.position[0],
          s * p[0] + c * p[1] + pose.position[1]};
}

// Rotate a free vector (velocity) into the pose-local frame.
inline Vec2 rotate_into_frame(const Vec2& v, double frame_heading) {
  double c = std::cos(frame_heading), s = std::sin(frame_heading);
  return {c * v[0] + s * v[1], -s * v[0] + c * v[1]};
}

struct PoseDelta {
  double dt = 0.0;
  double dheading = 0.0; // wrapped into (-pi, pi]
  Vec2 dposition{0.0, 0.0}; // expressed in the current pose's frame
};

inline PoseDelta pose_delta(const Pose2D& prev, const Pose2D& cur) {
  if (cur.timestamp < prev.timestamp)
    throw data_error("pose_delta: current timestamp precedes previous");
  PoseDelta d;
  d.dt = cur.timestamp - prev.timestamp;
  d.dheading = wrap_angle(cur.heading - prev.heading);
  double dx = cur.position[0] - prev.position[0];
  double dy = cur.position[1] - prev.position[1];
  double c = std::cos(cur.heading), s = std::sin(cur.heading);
  d.dposition = {c * dx + s * dy, -s * dx + c * dy};
  return d;
}

} // namespace seqcast
