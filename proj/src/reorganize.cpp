#include "seqcast/reorganize.hpp"

namespace seqcast {

SubSceneSequence reorganize(const Scenario& s, const ReorgConfig& cfg,
                            const DataLimits& limits) {
  if (cfg.segments < 1) throw config_error("reorganize: segments must be >= 1");
  const std::size_t th = limits.t_h, tf = limits.t_f;
  std::size_t span = (cfg.segments - 1) * cfg.stride;
  if (span >= th || th - span < 10)
    throw config_error("reorganize: history too short: T_h=" + std::to_string(th) +
                       " leaves " + std::to_string(th > span ? th - span : 0) +
                       " frames for the first segment (need >= 10)");
  const double dt = frame_dt(s);
  const AgentTrack& focal = s.agents[s.focal_index];

  SubSceneSequence seq;
  seq.reserve(cfg.segments);
  for (std::size_t i = 0; i < cfg.segments; ++i) {
    std::size_t t_obs = th - (cfg.segments - 1 - i) * cfg.stride;
    SubScene sub;
    sub.scenario_id = s.id;
    sub.index = i;
    sub.t_obs = t_obs;
    sub.focal_index = s.focal_index;

    std::size_t cut = t_obs - 1; // index of the last observed frame
    sub.reference.position = focal.observed_positions[cut];
    sub.reference.heading = focal.observed_headings[cut];
    sub.reference.timestamp = static_cast<double>(cut) * dt;

    for (const AgentTrack& a : s.agents) {
      SubScene::AgentView view;
      view.category = a.category;
      view.positions.resize(t_obs);
      view.headings.resize(t_obs);
      view.velocities.resize(t_obs);
      view.valid.resize(t_obs);
      for (std::size_t f = 0; f < t_obs; ++f) {
        view.valid[f] = a.observed_valid[f];
        if (!view.valid[f]) {
          view.positions[f] = {0.0, 0.0};
          view.headings[f] = 0.0;
          view.velocities[f] = {0.0, 0.0};
          continue;
        }
        view.any_valid = true;
        view.positions[f] = to_reference_frame(a.observed_positions[f], sub.reference);
        view.headings[f] = wrap_angle(a.observed_headings[f] - sub.reference.heading);
        view.velocities[f] =
            rotate_into_frame(a.observed_velocities[f], sub.reference.heading);
      }
      if (view.valid[cut])
        view.anchor = view.positions[cut];
      sub.agents.push_back(std::move(view));
    }

    for (const MapPolyline& p : s.polylines) {
      SubScene::PolylineView view;
      view.category = p.category;
      view.points.resize(p.points.size());
      view.valid = p.valid;
      double cx = 0.0, cy = 0.0;
      std::size_t nv = 0;
      for (std::size_t j = 0; j < p.points.size(); ++j) {
        view.points[j] = to_reference_frame(p.points[j], sub.reference);
        if (view.valid[j]) {
          view.any_valid = true;
          cx += view.points[j][0];
          cy += view.points[j][1];
          ++nv;
        }
      }
      if (nv > 0) view.centroid = {cx / static_cast<double>(nv), cy / static_cast<double>(nv)};
      sub.polylines.push_back(std::move(view));
    }

    // Target: the next ground-truth focal frames after the cutoff, drawn from
    // the remaining observation window first and then the scenario future.
    sub.target.assign(tf, {0.0, 0.0});
    sub.target_valid.assign(tf, 0);
    for (std::size_t f = 0; f < tf; ++f) {
      std::size_t global = t_obs + f;
      if (global < th) {
        if (focal.observed_valid[global]) {
          sub.target[f] = to_reference_frame(focal.observed_positions[global], sub.reference);
          sub.target_valid[f] = 1;
        }
      } else if (global - th < tf) {
        if (focal.future_valid[global - th]) {
          sub.target[f] = to_reference_frame(focal.future_positions[global - th], sub.reference);
          sub.target_valid[f] = 1;
        }
      }
    }
    seq.push_back(std::move(sub));
  }
  return seq;
}

} // namespace seqcast
