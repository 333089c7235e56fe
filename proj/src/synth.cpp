#include "seqcast/synth.hpp"

#include <cmath>
#include <cstdio>
#include <functional>

#include "seqcast/rng.hpp"

namespace seqcast {

namespace {

struct KinState {
  Vec2 pos;
  double heading;
  Vec2 vel;
};

using PathFn = std::function<KinState(double)>;

PathFn constant_velocity_path(Vec2 p0, double psi, double v) {
  double cx = v * std::cos(psi), cy = v * std::sin(psi);
  return [=](double t) {
    return KinState{{p0[0] + cx * t, p0[1] + cy * t}, psi, {cx, cy}};
  };
}

PathFn constant_turn_path(Vec2 p0, double psi, double v, double omega) {
  double r = v / omega;
  return [=](double t) {
    double h = psi + omega * t;
    return KinState{{p0[0] + r * (std::sin(h) - std::sin(psi)),
                     p0[1] - r * (std::cos(h) - std::cos(psi))},
                    wrap_angle(h),
                    {v * std::cos(h), v * std::sin(h)}};
  };
}

PathFn lane_change_path(Vec2 p0, double psi, double v, double lateral, double t0,
                        double duration) {
  double tx = std::cos(psi), ty = std::sin(psi);
  double nx = -ty, ny = tx;
  return [=](double t) {
    double u = (t - t0) / duration;
    u = u < 0.0 ? 0.0 : (u > 1.0 ? 1.0 : u);
    double ease = u * u * (3.0 - 2.0 * u);
    double dease = (t > t0 && t < t0 + duration) ? 6.0 * u * (1.0 - u) / duration : 0.0;
    double off = lateral * ease;
    double voff = lateral * dease;
    Vec2 vel{v * tx + voff * nx, v * ty + voff * ny};
    return KinState{{p0[0] + v * t * tx + off * nx, p0[1] + v * t * ty + off * ny},
                    wrap_angle(std::atan2(vel[1], vel[0])),
                    vel};
  };
}

PathFn stop_path(Vec2 p0, double psi, double v0, double t0, double decel) {
  double tx = std::cos(psi), ty = std::sin(psi);
  double t_stop = t0 + v0 / decel;
  return [=](double t) {
    double s, v;
    if (t <= t0) {
      s = v0 * t;
      v = v0;
    } else if (t < t_stop) {
      double tau = t - t0;
      s = v0 * t0 + v0 * tau - 0.5 * decel * tau * tau;
      v = v0 - decel * tau;
    } else {
      double tau = t_stop - t0;
      s = v0 * t0 + v0 * tau - 0.5 * decel * tau * tau;
      v = 0.0;
    }
    return KinState{{p0[0] + s * tx, p0[1] + s * ty}, psi, {v * tx, v * ty}};
  };
}

AgentTrack sample_track(const std::string& id, AgentCategory cat, const PathFn& path,
                        const SynthOptions& opts, double dt, Rng& rng) {
  AgentTrack a;
  a.id = id;
  a.category = cat;
  const std::size_t th = opts.limits.t_h, tf = opts.limits.t_f;
  a.observed_positions.resize(th);
  a.observed_headings.resize(th);
  a.observed_velocities.resize(th);
  a.observed_valid.assign(th, 1);
  a.future_positions.resize(tf);
  a.future_valid.assign(tf, 1);
  for (std::size_t f = 0; f < th; ++f) {
    KinState s = path(static_cast<double>(f) * dt);
    a.observed_positions[f] = {s.pos[0] + rng.normal(0.0, opts.noise_pos),
                               s.pos[1] + rng.normal(0.0, opts.noise_pos)};
    a.observed_headings[f] = wrap_angle(s.heading + rng.normal(0.0, opts.noise_heading));
    a.observed_velocities[f] = {s.vel[0] + rng.normal(0.0, opts.noise_vel),
                                s.vel[1] + rng.normal(0.0, opts.noise_vel)};
  }
  for (std::size_t f = 0; f < tf; ++f) {
    KinState s = path(static_cast<double>(th + f) * dt);
    a.future_positions[f] = {s.pos[0] + rng.normal(0.0, opts.noise_pos),
                             s.pos[1] + rng.normal(0.0, opts.noise_pos)};
  }
  return a;
}

MapPolyline offset_polyline(const PathFn& path, double offset, MapCategory cat,
                            double horizon, std::size_t n_points, Rng& rng) {
  MapPolyline p;
  p.category = cat;
  for (std::size_t i = 0; i < n_points; ++i) {
    double t = horizon * static_cast<double>(i) / static_cast<double>(n_points - 1);
    KinState s = path(t);
    double nx = -std::sin(s.heading), ny = std::cos(s.heading);
    p.points.push_back({s.pos[0] + offset * nx, s.pos[1] + offset * ny});
    p.valid.push_back(1);
  }
  // Occasionally truncate the tail to exercise point masking.
  if (rng.uniform() < 0.3) {
    std::size_t cut = static_cast<std::size_t>(rng.uniform_int(2, 5));
    for (std::size_t i = p.points.size() - cut; i < p.points.size(); ++i) p.valid[i] = 0;
  }
  return p;
}

} // namespace

std::vector<Scenario> generate_synthetic(std::uint64_t seed, std::size_t count,
                                         const SynthOptions& opts) {
  if (count < 1) throw config_error("generate_synthetic: count must be >= 1");
  std::vector<Scenario> out;
  out.reserve(count);
  const double dt = 0.1;
  const double horizon = static_cast<double>(opts.limits.t_h + opts.limits.t_f - 1) * dt;

  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(mix_seed(seed, "scenario-" + std::to_string(i)));
    Scenario s;
    char idbuf[48];
    std::snprintf(idbuf, sizeof(idbuf), "s%llu-%05zu",
                  static_cast<unsigned long long>(seed), i);
    s.id = idbuf;
    s.focal_index = 0;
    s.sample_rate_hz = 1.0 / dt;

    Vec2 p0{rng.uniform(-200.0, 200.0), rng.uniform(-200.0, 200.0)};
    double psi = wrap_angle(rng.uniform(-3.14159265358979, 3.14159265358979));
    double v0 = rng.uniform(6.0, 14.0);

    MotionTemplate tmpl = opts.force_template;
    if (tmpl == MotionTemplate::mixed) {
      static const MotionTemplate kAll[] = {
          MotionTemplate::constant_velocity, MotionTemplate::constant_turn,
          MotionTemplate::lane_change, MotionTemplate::stop};
      tmpl = kAll[rng.uniform_int(0, 3)];
    }
    PathFn focal_path;
    switch (tmpl) {
    case MotionTemplate::constant_velocity:
      focal_path = constant_velocity_path(p0, psi, v0);
      break;
    case MotionTemplate::constant_turn: {
      static const double kRates[] = {0.10, 0.15, 0.20, 0.25};
      double omega = kRates[rng.uniform_int(0, 3)] * (rng.uniform() < 0.5 ? -1.0 : 1.0);
      focal_path = constant_turn_path(p0, psi, v0, omega);
      break;
    }
    case MotionTemplate::lane_change: {
      double lateral = rng.uniform() < 0.5 ? 3.5 : -3.5;
      focal_path = lane_change_path(p0, psi, v0, lateral, rng.uniform(2.5, 5.5),
                                    rng.uniform(3.0, 4.5));
      break;
    }
    case MotionTemplate::stop: {
      static const double kDecels[] = {1.5, 2.5, 3.5};
      focal_path = stop_path(p0, psi, v0, rng.uniform(2.0, 6.0),
                             kDecels[rng.uniform_int(0, 2)]);
      break;
    }
    case MotionTemplate::mixed:
      break;
    }

    s.agents.push_back(sample_track("a0", AgentCategory::vehicle, focal_path, opts, dt, rng));

    std::size_t n_neighbors = static_cast<std::size_t>(rng.uniform_int(3, 12));
    double cpsi = std::cos(psi), spsi = std::sin(psi);
    for (std::size_t n = 0; n < n_neighbors; ++n) {
      double lon = rng.uniform(-40.0, 40.0);
      static const double kLanes[] = {-7.0, -3.5, 3.5, 7.0};
      double lat = kLanes[rng.uniform_int(0, 3)];
      Vec2 np{p0[0] + lon * cpsi - lat * spsi, p0[1] + lon * spsi + lat * cpsi};
      double draw = rng.uniform();
      AgentCategory cat = draw < 0.7 ? AgentCategory::vehicle
                        : draw < 0.85 ? AgentCategory::pedestrian
                                      : AgentCategory::cyclist;
      double nv;
      double npsi = psi;
      switch (cat) {
      case AgentCategory::pedestrian:
        nv = rng.uniform(0.8, 2.0);
        npsi = wrap_angle(rng.uniform(-3.14159, 3.14159));
        break;
      case AgentCategory::cyclist:
        nv = rng.uniform(3.0, 6.0);
        npsi = wrap_angle(psi + rng.normal(0.0, 0.15));
        break;
      default:
        nv = rng.uniform(4.0, 12.0);
        npsi = wrap_angle(psi + rng.normal(0.0, 0.05));
        break;
      }
      s.agents.push_back(sample_track("a" + std::to_string(n + 1), cat,
                                      constant_velocity_path(np, npsi, nv), opts, dt,
                                      rng));
    }

    std::size_t pts = std::min<std::size_t>(opts.limits.max_points, 19);
    s.polylines.push_back(
        offset_polyline(focal_path, 0.0, MapCategory::lane_center, horizon, pts, rng));
    s.polylines.push_back(
        offset_polyline(focal_path, 3.5, MapCategory::lane_center, horizon, pts, rng));
    s.polylines.push_back(
        offset_polyline(focal_path, -3.5, MapCategory::lane_center, horizon, pts, rng));
    s.polylines.push_back(
        offset_polyline(focal_path, 1.75, MapCategory::boundary, horizon, pts, rng));
    s.polylines.push_back(
        offset_polyline(focal_path, -1.75, MapCategory::boundary, horizon, pts, rng));
    if (rng.uniform() < 0.3) {
      // Crosswalk across the road a few seconds ahead.
      KinState mid = focal_path(static_cast<double>(opts.limits.t_h + 10) * dt);
      double nx = -std::sin(mid.heading), ny = std::cos(mid.heading);
      MapPolyline cw;
      cw.category = MapCategory::crosswalk;
      for (int kk = -4; kk <= 4; ++kk) {
        cw.points.push_back({mid.pos[0] + nx * static_cast<double>(kk),
                             mid.pos[1] + ny * static_cast<double>(kk)});
        cw.valid.push_back(1);
      }
      s.polylines.push_back(cw);
    }

    validate_scenario(s, opts.limits);
    out.push_back(std::move(s));
  }
  return out;
}

} // namespace seqcast
