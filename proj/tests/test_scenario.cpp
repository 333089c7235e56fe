#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "seqcast/geometry.hpp"
#include "seqcast/jsonio.hpp"
#include "seqcast/reorganize.hpp"
#include "seqcast/rng.hpp"
#include "seqcast/scenario_io.hpp"
#include "seqcast/synth.hpp"

using namespace seqcast;

namespace {

std::string temp_dir(const char* tag) {
  auto p = std::filesystem::temp_directory_path() / (std::string("seqcast_test_") + tag);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

} // namespace

TEST_CASE("reference frame transforms") {
  SUBCASE("identity pose leaves points unchanged") {
    Pose2D id;
    Vec2 p{3.5, -2.25};
    Vec2 q = to_reference_frame(p, id);
    CHECK(q[0] == p[0]);
    CHECK(q[1] == p[1]);
  }
  SUBCASE("quarter-turn pose at origin maps (0,1) to (1,0)") {
    Pose2D pose;
    pose.heading = 1.57079632679489661923;
    Vec2 q = to_reference_frame({0.0, 1.0}, pose);
    CHECK(q[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::fabs(q[1]) < 1e-12);
  }
  SUBCASE("round trip over a million random poses and points") {
    Rng rng(42);
    double worst = 0.0;
    for (int i = 0; i < 1000000; ++i) {
      Pose2D pose;
      pose.position = {rng.uniform(-500, 500), rng.uniform(-500, 500)};
      pose.heading = wrap_angle(rng.uniform(-3.2, 3.2));
      Vec2 p{rng.uniform(-500, 500), rng.uniform(-500, 500)};
      Vec2 back = from_reference_frame(to_reference_frame(p, pose), pose);
      worst = std::max({worst, std::fabs(back[0] - p[0]), std::fabs(back[1] - p[1])});
    }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("pose_delta") {
  SUBCASE("identical poses give zero delta") {
    Pose2D p;
    p.position = {4.0, 5.0};
    p.heading = 0.5;
    p.timestamp = 2.0;
    PoseDelta d = pose_delta(p, p);
    CHECK(d.dt == 0.0);
    CHECK(d.dheading == 0.0);
    CHECK(d.dposition[0] == 0.0);
    CHECK(d.dposition[1] == 0.0);
  }
  SUBCASE("heading wrap through pi") {
    Pose2D a, b;
    a.heading = 3.0;
    b.heading = -3.0;
    b.timestamp = 0.1;
    PoseDelta d = pose_delta(a, b);
    CHECK(std::fabs(d.dheading - 0.28318530717958647692) < 1e-9);
  }
  SUBCASE("one second apart at 10 Hz stride 10") {
    Pose2D a, b;
    a.timestamp = 3.9;
    b.timestamp = 4.9;
    CHECK(pose_delta(a, b).dt == doctest::Approx(1.0));
  }
  SUBCASE("negative dt is an ordering error") {
    Pose2D a, b;
    a.timestamp = 1.0;
    b.timestamp = 0.5;
    CHECK_THROWS_AS(pose_delta(a, b), Error);
  }
  SUBCASE("position delta is expressed in the current frame") {
    Pose2D a, b;
    a.position = {0.0, 0.0};
    b.position = {0.0, 2.0};
    b.heading = 1.57079632679489661923;
    b.timestamp = 1.0;
    PoseDelta d = pose_delta(a, b);
    CHECK(d.dposition[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(std::fabs(d.dposition[1]) < 1e-12);
  }
}

TEST_CASE("reorganize cutoff schedule and frames") {
  SynthOptions opts;
  auto scenarios = generate_synthetic(7, 1, opts);
  const Scenario& s = scenarios[0];

  SUBCASE("default schedule gives cutoffs 30, 40, 50") {
    auto seq = reorganize(s, {3, 10});
    REQUIRE(seq.size() == 3);
    CHECK(seq[0].t_obs == 30);
    CHECK(seq[1].t_obs == 40);
    CHECK(seq[2].t_obs == 50);
  }
  SUBCASE("schedule matches the closed form for valid (S, stride)") {
    for (std::size_t segs = 1; segs <= 4; ++segs) {
      for (std::size_t stride : {5, 10}) {
        if ((segs - 1) * stride + 10 > 50) continue;
        auto seq = reorganize(s, {segs, stride});
        REQUIRE(seq.size() == segs);
        for (std::size_t i = 0; i < segs; ++i)
          CHECK(seq[i].t_obs == 50 - (segs - 1 - i) * stride);
        CHECK(seq.back().t_obs == 50);
      }
    }
  }
  SUBCASE("single segment is the independent-scene setting") {
    auto seq = reorganize(s, {1, 10});
    REQUIRE(seq.size() == 1);
    CHECK(seq[0].t_obs == 50);
  }
  SUBCASE("too-short history is a config error") {
    CHECK_THROWS_AS(reorganize(s, {5, 11}), Error);
  }
  SUBCASE("focal agent sits at the origin with heading zero at the cutoff") {
    auto seq = reorganize(s, {3, 10});
    for (const SubScene& sub : seq) {
      const auto& focal = sub.agents[sub.focal_index];
      std::size_t cut = sub.t_obs - 1;
      CHECK(std::fabs(focal.positions[cut][0]) < 1e-12);
      CHECK(std::fabs(focal.positions[cut][1]) < 1e-12);
      CHECK(std::fabs(focal.headings[cut]) < 1e-12);
    }
  }
  SUBCASE("final sub-scene target equals the scenario future") {
    auto seq = reorganize(s, {3, 10});
    const SubScene& last = seq.back();
    const AgentTrack& focal = s.agents[s.focal_index];
    REQUIRE(last.target.size() == focal.future_positions.size());
    for (std::size_t f = 0; f < last.target.size(); ++f) {
      CHECK(last.target_valid[f] == focal.future_valid[f]);
      Vec2 world = from_reference_frame(last.target[f], last.reference);
      CHECK(world[0] == doctest::Approx(focal.future_positions[f][0]).epsilon(1e-12));
      CHECK(world[1] == doctest::Approx(focal.future_positions[f][1]).epsilon(1e-12));
    }
  }
  SUBCASE("intermediate targets splice remaining observation and future frames") {
    auto seq = reorganize(s, {3, 10});
    const SubScene& first = seq[0]; // t_obs = 30
    const AgentTrack& focal = s.agents[s.focal_index];
    Vec2 w0 = from_reference_frame(first.target[0], first.reference);
    CHECK(w0[0] == doctest::Approx(focal.observed_positions[30][0]).epsilon(1e-12));
    Vec2 w25 = from_reference_frame(first.target[25], first.reference);
    CHECK(w25[0] == doctest::Approx(focal.future_positions[5][0]).epsilon(1e-12));
  }
}

TEST_CASE("synthetic generator determinism and invariants") {
  SUBCASE("same seed gives byte-identical files") {
    auto a = generate_synthetic(99, 3);
    auto b = generate_synthetic(99, 3);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK(dump_json(scenario_to_json(a[i])) == dump_json(scenario_to_json(b[i])));
  }
  SUBCASE("zero-noise constant velocity extrapolates exactly") {
    SynthOptions opts;
    opts.noise_pos = 0.0;
    opts.noise_vel = 0.0;
    opts.noise_heading = 0.0;
    opts.force_template = MotionTemplate::constant_velocity;
    auto scenarios = generate_synthetic(3, 1, opts);
    const AgentTrack& focal = scenarios[0].agents[0];
    Vec2 v = focal.observed_velocities[0];
    Vec2 p0 = focal.observed_positions[0];
    for (std::size_t f = 0; f < focal.future_positions.size(); ++f) {
      double t = (50.0 + static_cast<double>(f)) * 0.1;
      CHECK(focal.future_positions[f][0] == doctest::Approx(p0[0] + v[0] * t).epsilon(1e-12));
      CHECK(focal.future_positions[f][1] == doctest::Approx(p0[1] + v[1] * t).epsilon(1e-12));
    }
  }
  SUBCASE("a thousand seeded scenarios satisfy every invariant") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto scenarios = generate_synthetic(seed, 100);
      for (const auto& s : scenarios) CHECK_NOTHROW(validate_scenario(s));
    }
  }
}

TEST_CASE("scenario codec") {
  std::string dir = temp_dir("codec");
  auto scenarios = generate_synthetic(5, 2);

  SUBCASE("write then read yields an equal value") {
    std::string path = dir + "/s.json";
    write_scenario(scenarios[0], path);
    Scenario back = read_scenario(path);
    CHECK(scenario_to_json(back) == scenario_to_json(scenarios[0]));
  }
  SUBCASE("truncated file is a parse error") {
    std::string path = dir + "/trunc.json";
    std::string text = dump_json(scenario_to_json(scenarios[0]));
    write_text_file(path, text.substr(0, text.size() / 2));
    CHECK_THROWS_WITH_AS(read_scenario(path), doctest::Contains("parse error"), Error);
  }
  SUBCASE("NaN coordinate is a validation error") {
    std::string path = dir + "/nan.json";
    Json j = scenario_to_json(scenarios[0]);
    j["agents"][0]["observed"]["positions"][3][0] = "oops";
    write_text_file(path, dump_json(j));
    CHECK_THROWS_AS(read_scenario(path), Error);
    // A JSON-legal but non-finite route: huge exponent parses to inf.
    std::string text = dump_json(scenario_to_json(scenarios[0]));
    auto pos = text.find("positions");
    REQUIRE(pos != std::string::npos);
    // 1e999 overflows to inf inside the parser; validation must reject it.
    Json j2 = scenario_to_json(scenarios[0]);
    j2["agents"][0]["observed"]["positions"][3][0] = 1e308;
    j2["agents"][0]["observed"]["positions"][3][1] = 1e308;
    Scenario tampered = scenario_from_json(j2, "mem");
    (void)tampered; // 1e308 is finite; now break it for real
    j2["agents"][0]["observed"]["headings"][3] = 99.0; // not wrapped
    CHECK_THROWS_WITH_AS(scenario_from_json(j2, "mem"), doctest::Contains("invariant"),
                         Error);
  }
  SUBCASE("dataset round trip with splits") {
    auto all = generate_synthetic(11, 10);
    std::string ddir = temp_dir("dataset");
    write_dataset(all, ddir, 0.8);
    Dataset ds = read_dataset_index(ddir);
    CHECK(ds.entries.size() == 10);
    auto train = load_split(ds, "train");
    auto val = load_split(ds, "val");
    CHECK(train.size() == 8);
    CHECK(val.size() == 2);
    CHECK(scenario_to_json(train[0]) == scenario_to_json(all[0]));
  }
}

TEST_CASE("json17 dumper round trips doubles exactly") {
  Rng rng(123);
  for (int i = 0; i < 2000; ++i) {
    double v = rng.normal() * std::pow(10.0, rng.uniform(-12, 12));
    Json j;
    j["v"] = v;
    Json back = parse_json_text(dump_json(j), "mem");
    CHECK(back["v"].get<double>() == v);
  }
}
