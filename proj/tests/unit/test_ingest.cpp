#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <map>
#include <set>

#include "cotdrive/core/error.hpp"
#include "cotdrive/core/rng.hpp"
#include "cotdrive/core/text.hpp"
#include "cotdrive/ingest/loader.hpp"
#include "cotdrive/ingest/synthetic.hpp"
#include "cotdrive/ingest/window_io.hpp"
#include "cotdrive/ingest/windows.hpp"
#include "generators.hpp"

using namespace cotdrive;
using namespace cotdrive::ingest;
using testutil::make_state;
using testutil::random_window;
using testutil::straight_track;

namespace {

const std::filesystem::path kFixtures = COTDRIVE_FIXTURE_DIR;

SceneWindow line_window(double v_hist, double v_fut, double lateral_end) {
  SceneWindow w;
  w.target_id = "a";
  AgentHistory h;
  h.agent_id = "a";
  for (int k = 0; k < 16; ++k) {
    h.states.push_back(make_state("a", k, v_hist * (k - 15) / 5.0, 0.0, v_hist));
    h.valid.push_back(1);
  }
  w.agents.push_back(h);
  for (int k = 1; k <= 25; ++k)
    w.future.push_back(make_state("a", 15 + k, v_fut * k / 5.0, lateral_end * k / 25.0, v_fut));
  return w;
}

}  // namespace

TEST(Loader, EmptyFileWithHeaderGivesNoStates) {
  auto r = load_trajectories(kFixtures / "empty.csv", TrajectoryFormat::csv);
  EXPECT_TRUE(r.states.empty());
  EXPECT_TRUE(r.rejected.empty());
}

TEST(Loader, ThreeRowFixtureSortedByFrame) {
  auto r = load_trajectories(kFixtures / "three_rows.csv", TrajectoryFormat::csv);
  ASSERT_EQ(r.states.size(), 3u);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(r.states[k].frame, k);
    EXPECT_EQ(r.states[k].agent_id, "car7");
    EXPECT_DOUBLE_EQ(r.states[k].x, 2.0 * k);
    EXPECT_EQ(r.states[k].lane_id, 2);
    EXPECT_EQ(r.states[k].agent_class, AgentClass::vehicle);
  }
  EXPECT_DOUBLE_EQ(r.states[1].acceleration, 0.0);
  EXPECT_DOUBLE_EQ(r.states[2].acceleration, 0.5);
}

TEST(Loader, JsonlFixtureMatchesManualParse) {
  auto r = load_trajectories(kFixtures / "three_rows.jsonl", TrajectoryFormat::jsonl);
  ASSERT_EQ(r.states.size(), 3u);
  EXPECT_EQ(r.states[0].frame, 3);
  EXPECT_EQ(r.states[2].frame, 5);
  EXPECT_EQ(r.states[0].agent_class, AgentClass::pedestrian);
  EXPECT_FALSE(r.states[1].lane_id.has_value());
  EXPECT_DOUBLE_EQ(r.states[1].x, 0.5);
}

TEST(Loader, DuplicateFrameIsIntegrityErrorNamingRow) {
  try {
    load_trajectories(kFixtures / "duplicate_frame.csv", TrajectoryFormat::csv);
    FAIL() << "expected an integrity error";
  } catch (const IntegrityError& e) {
    EXPECT_NE(std::string(e.what()).find("row 4"), std::string::npos) << e.what();
  }
}

TEST(Loader, MissingColumnIsSchemaError) {
  EXPECT_THROW(load_trajectories(kFixtures / "missing_column.csv", TrajectoryFormat::csv), SchemaError);
}

TEST(Loader, BadRowsRejectedWithRowNumbers) {
  auto r = load_trajectories(kFixtures / "bad_rows.csv", TrajectoryFormat::csv);
  ASSERT_EQ(r.states.size(), 2u);
  ASSERT_EQ(r.rejected.size(), 3u);
  EXPECT_EQ(r.rejected[0].row, 3u);
  EXPECT_EQ(r.rejected[1].row, 4u);
  EXPECT_EQ(r.rejected[2].row, 5u);
}

TEST(Loader, HeadingWrappedAndCsvRoundTrip) {
  std::vector<AgentState> s = {make_state("b", 0, 1.25, -2.5, 3.0, 0.5), make_state("b", 1, 1.5, -2.5, 3.0, -1.0)};
  s[0].lane_id = 4;
  s[1].agent_class = AgentClass::bicycle;
  auto r = parse_trajectories(render_trajectories_csv(s), TrajectoryFormat::csv, "mem");
  ASSERT_EQ(r.states.size(), 2u);
  EXPECT_EQ(r.states[0], s[0]);
  EXPECT_EQ(r.states[1].agent_class, AgentClass::bicycle);

  auto w = parse_trajectories("agent_id,frame,x,y,velocity,heading\nq,0,0,0,1,4.0\n", TrajectoryFormat::csv, "m");
  EXPECT_NEAR(w.states[0].heading, 4.0 - 2 * std::numbers::pi, 1e-12);
}

TEST(Loader, MissingFileIsIoError) {
  EXPECT_THROW(load_trajectories(kFixtures / "nope.csv", TrajectoryFormat::csv), IoError);
}

TEST(Resample, HalvesRateByDroppingFramesOfLinearTrack) {
  auto track = straight_track("a", 0, 11, 0.0, 0.0, 10.0, 0.3, 10.0);
  auto out = resample(track, 10.0, 5.0);
  ASSERT_EQ(out.size(), 6u);
  for (std::size_t k = 0; k < out.size(); ++k) {
    EXPECT_EQ(out[k].frame, static_cast<std::int64_t>(k));
    EXPECT_NEAR(out[k].x, track[2 * k].x, 1e-9);
    EXPECT_NEAR(out[k].y, track[2 * k].y, 1e-9);
  }
}

TEST(Resample, UpsamplingInterpolatesLinearly) {
  auto track = straight_track("a", 0, 3, 0.0, 0.0, 5.0, 0.0, 5.0);
  auto out = resample(track, 5.0, 10.0);
  ASSERT_EQ(out.size(), 5u);
  EXPECT_NEAR(out[1].x, 0.5, 1e-12);
  EXPECT_NEAR(out[3].x, 1.5, 1e-12);
}

TEST(Resample, SameRateIsIdentity) {
  auto track = straight_track("a", 3, 4, 1.0, 2.0, 5.0, 1.0);
  EXPECT_EQ(resample(track, 5.0, 5.0), track);
}

TEST(Segment, FrameCountsFromSeconds) {
  SegmentOptions o;
  EXPECT_EQ(o.history_frames(), 16);
  EXPECT_EQ(o.future_frames(), 25);
  o.history_seconds = 2;
  o.future_seconds = 4;
  o.hz = 2;
  EXPECT_EQ(o.history_frames(), 5);
  EXPECT_EQ(o.future_frames(), 8);
}

TEST(Segment, ExactlyOneWindowAtBoundaryLength) {
  auto states = straight_track("a", 0, 41, 0, 0, 10.0, 0.0);
  auto r = segment_windows(states, SegmentOptions{});
  ASSERT_EQ(r.windows.size(), 1u);
  EXPECT_EQ(r.windows[0].history_length(), 16);
  EXPECT_EQ(r.windows[0].future_length(), 25);
  EXPECT_EQ(r.windows[0].anchor_frame, 15);
  EXPECT_EQ(r.skipped.short_tracks, 0u);
}

TEST(Segment, ShortTrackSkippedAndReported) {
  auto states = straight_track("a", 0, 40, 0, 0, 10.0, 0.0);
  auto r = segment_windows(states, SegmentOptions{});
  EXPECT_TRUE(r.windows.empty());
  EXPECT_EQ(r.skipped.short_tracks, 1u);
  EXPECT_EQ(r.skipped.short_track_ids.at(0), "a");
}

TEST(Segment, StrideAdvancesAnchors) {
  auto states = straight_track("a", 0, 51, 0, 0, 10.0, 0.0);
  SegmentOptions o;
  o.stride = 5;
  auto r = segment_windows(states, o);
  ASSERT_EQ(r.windows.size(), 3u);
  EXPECT_EQ(r.windows[0].anchor_frame, 15);
  EXPECT_EQ(r.windows[1].anchor_frame, 20);
  EXPECT_EQ(r.windows[2].anchor_frame, 25);
}

TEST(Segment, GapInTargetTrackPreventsSpanningWindows) {
  auto states = straight_track("a", 0, 60, 0, 0, 10.0, 0.0);
  states.erase(states.begin() + 30);
  auto r = segment_windows(states, SegmentOptions{});
  for (const auto& w : r.windows) {
    EXPECT_TRUE(w.anchor_frame + 25 < 30 || w.anchor_frame - 15 > 30);
    for (std::size_t k = 1; k < w.target().states.size(); ++k)
      EXPECT_EQ(w.target().states[k].frame, w.target().states[k - 1].frame + 1);
  }
}

TEST(Segment, NeighboursByRadiusNearestFirstWithMask) {
  auto states = straight_track("a", 0, 41, 0, 0, 10.0, 0.0);
  auto near = straight_track("b", 10, 6, 30.0 + 0.0, 3.5, 10.0, 0.0);  // present frames 10..15
  auto far = straight_track("c", 0, 16, 150.0, 0.0, 0.0, 0.0);
  auto nearer = straight_track("d", 0, 16, 20.0, -3.5, 10.0, 0.0);
  states.insert(states.end(), near.begin(), near.end());
  states.insert(states.end(), far.begin(), far.end());
  states.insert(states.end(), nearer.begin(), nearer.end());
  auto r = segment_windows(states, SegmentOptions{});
  ASSERT_EQ(r.windows.size(), 1u);
  const auto& w = r.windows[0];
  ASSERT_EQ(w.neighbor_count(), 2);
  // At the anchor the target is at x = 30: b is ~10.6 m away, d ~20.3 m.
  EXPECT_EQ(w.agents[1].agent_id, "b");
  EXPECT_EQ(w.agents[2].agent_id, "d");
  const auto& mask = w.agents[1].valid;
  EXPECT_EQ(std::count(mask.begin(), mask.end(), 1), 6);
  EXPECT_EQ(mask.back(), 1);
  EXPECT_EQ(w.agents[1].states[0].x, 0.0);
  EXPECT_EQ(r.skipped.short_tracks, 3u);
}

TEST(Segment, NeighbourCapKeepsNearest) {
  auto states = straight_track("a", 0, 41, 0, 0, 10.0, 0.0);
  for (int k = 0; k < 20; ++k) {
    auto t = straight_track("n" + std::to_string(100 + k), 0, 16, 10.0 + 2.0 * k, 5.0, 10.0, 0.0);
    states.insert(states.end(), t.begin(), t.end());
  }
  SegmentOptions o;
  o.max_neighbors = 16;
  auto r = segment_windows(states, o);
  ASSERT_EQ(r.windows.size(), 1u);
  EXPECT_EQ(r.windows[0].neighbor_count(), 16);
  EXPECT_EQ(r.windows[0].agents.back().agent_id, "n115");
}

TEST(Segment, InvalidOptionsThrow) {
  SegmentOptions o;
  o.history_seconds = 0;
  EXPECT_THROW(segment_windows({}, o), ConfigError);
  o = {};
  o.history_seconds = 0.3;
  EXPECT_THROW(segment_windows({}, o), ConfigError);
}

TEST(Segment, FuzzedCorpusSatisfiesLengthInvariants) {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<AgentState> states;
    const int agents = 1 + static_cast<int>(rng.below(8));
    for (int a = 0; a < agents; ++a) {
      const int first = static_cast<int>(rng.below(30));
      const int len = 5 + static_cast<int>(rng.below(80));
      auto t = straight_track("g" + std::to_string(a), first, len, rng.uniform(-50, 50), rng.uniform(-10, 10),
                              rng.uniform(0, 20), rng.uniform(-3, 3));
      for (auto& s : t)
        if (!rng.bernoulli(0.03)) states.push_back(s);
    }
    SegmentOptions o;
    o.stride = 1 + static_cast<int>(rng.below(4));
    o.history_seconds = 1.0 + static_cast<double>(rng.below(3));
    o.future_seconds = 1.0 + static_cast<double>(rng.below(5));
    auto r = segment_windows(states, o);
    for (const auto& w : r.windows) {
      ASSERT_EQ(w.history_length(), o.history_frames());
      ASSERT_EQ(w.future_length(), o.future_frames());
      for (auto v : w.target().valid) ASSERT_EQ(v, 1);
      for (const auto& a : w.agents) {
        ASSERT_EQ(static_cast<int>(a.states.size()), o.history_frames());
        ASSERT_EQ(a.valid.back(), 1);
        ASSERT_EQ(a.states.back().frame, w.anchor_frame);
      }
      ASSERT_EQ(w.future.front().frame, w.anchor_frame + 1);
    }
  }
}

TEST(Label, StationaryIsStraightMaintain) {
  auto w = line_window(0.0, 0.0, 0.0);
  EXPECT_EQ(label_maneuver(w), (ManeuverLabel{Lateral::straight, Longitudinal::maintain}));
}

TEST(Label, HalfSpeedIsDecelerate) {
  auto w = line_window(10.0, 5.0, 0.0);
  EXPECT_EQ(label_maneuver(w), (ManeuverLabel{Lateral::straight, Longitudinal::decelerate}));
}

TEST(Label, PositiveLaneChangeIsLeft) {
  auto w = line_window(10.0, 10.0, 3.5);
  EXPECT_EQ(label_maneuver(w), (ManeuverLabel{Lateral::left, Longitudinal::maintain}));
  auto r = line_window(10.0, 14.0, -3.5);
  EXPECT_EQ(label_maneuver(r), (ManeuverLabel{Lateral::right, Longitudinal::accelerate}));
}

TEST(Label, StartingFromRestIsAccelerate) {
  auto w = line_window(0.0, 2.0, 0.0);
  EXPECT_EQ(label_maneuver(w).longitudinal, Longitudinal::accelerate);
}

TEST(Label, LaneIdChangeCountsAsLateral) {
  auto w = line_window(10.0, 10.0, 1.0);
  w.agents[0].states.back().lane_id = 2;
  w.future.back().lane_id = 3;
  EXPECT_EQ(label_maneuver(w).lateral, Lateral::left);
}

TEST(Label, JointIndexLayout) {
  for (int i = 0; i < kManeuverCount; ++i) {
    auto m = ManeuverLabel::from_index(i);
    EXPECT_EQ(m.joint_index(), i);
    EXPECT_EQ(m.joint_index(), 3 * static_cast<int>(m.lateral) + static_cast<int>(m.longitudinal));
  }
  EXPECT_THROW(ManeuverLabel::from_index(9), Error);
}

TEST(Label, InvariantUnderRigidMotion) {
  Rng rng(7);
  for (int t = 0; t < 200; ++t) {
    auto w = random_window(rng, 16, 25, 2);
    const auto base = label_maneuver(w);
    FrameTransform g{rng.uniform(-300, 300), rng.uniform(-300, 300), rng.uniform(-3, 3)};
    SceneWindow moved = w;
    auto move = [&](AgentState& s) {
      auto p = g.to_world(s.x, s.y);
      s.x = p[0];
      s.y = p[1];
      s.heading = g.heading_to_world(s.heading);
    };
    for (auto& a : moved.agents)
      for (auto& s : a.states) move(s);
    for (auto& s : moved.future) move(s);
    ASSERT_EQ(label_maneuver(moved), base);
    ASSERT_NEAR(lateral_offset(moved), lateral_offset(w), 1e-9);
  }
}

TEST(Normalize, TargetAtOriginHeadingPlusX) {
  Rng rng(3);
  auto w = normalize_to_target_frame(random_window(rng, 16, 25, 3));
  EXPECT_NEAR(w.anchor_state().x, 0.0, 1e-12);
  EXPECT_NEAR(w.anchor_state().y, 0.0, 1e-12);
  EXPECT_NEAR(w.anchor_state().heading, 0.0, 1e-12);
  ASSERT_TRUE(w.transform.has_value());
}

TEST(Normalize, InverseRoundTripOnRandomWindows) {
  Rng rng(11);
  for (int t = 0; t < 1000; ++t) {
    auto w = random_window(rng, 16, 25, static_cast<int>(rng.below(6)));
    auto back = denormalize(normalize_to_target_frame(w));
    ASSERT_FALSE(back.transform.has_value());
    for (std::size_t a = 0; a < w.agents.size(); ++a)
      for (std::size_t k = 0; k < w.agents[a].states.size(); ++k) {
        ASSERT_NEAR(back.agents[a].states[k].x, w.agents[a].states[k].x, 1e-9);
        ASSERT_NEAR(back.agents[a].states[k].y, w.agents[a].states[k].y, 1e-9);
      }
    for (std::size_t k = 0; k < w.future.size(); ++k) {
      ASSERT_NEAR(back.future[k].x, w.future[k].x, 1e-9);
      ASSERT_NEAR(back.future[k].y, w.future[k].y, 1e-9);
    }
  }
}

TEST(Normalize, TranslationInvariant) {
  Rng rng(5);
  auto w = random_window(rng, 16, 25, 3);
  SceneWindow shifted = w;
  for (auto& a : shifted.agents)
    for (std::size_t k = 0; k < a.states.size(); ++k)
      if (a.valid[k]) a.states[k].x += 100.0, a.states[k].y -= 40.0;
  for (auto& s : shifted.future) s.x += 100.0, s.y -= 40.0;
  auto n1 = normalize_to_target_frame(w);
  auto n2 = normalize_to_target_frame(shifted);
  for (std::size_t a = 0; a < n1.agents.size(); ++a)
    for (std::size_t k = 0; k < n1.agents[a].states.size(); ++k) {
      EXPECT_NEAR(n1.agents[a].states[k].x, n2.agents[a].states[k].x, 1e-9);
      EXPECT_NEAR(n1.agents[a].states[k].y, n2.agents[a].states[k].y, 1e-9);
    }
}

TEST(Normalize, IdempotentAndInvalidSlotsUntouched) {
  Rng rng(9);
  auto w = random_window(rng, 16, 25, 5);
  auto n1 = normalize_to_target_frame(w);
  auto n2 = normalize_to_target_frame(n1);
  EXPECT_EQ(n1.transform, n2.transform);
  for (std::size_t a = 0; a < n1.agents.size(); ++a)
    for (std::size_t k = 0; k < n1.agents[a].states.size(); ++k) {
      EXPECT_NEAR(n1.agents[a].states[k].x, n2.agents[a].states[k].x, 1e-9);
      if (!n1.agents[a].valid[k]) {
        EXPECT_EQ(n1.agents[a].states[k].x, 0.0);
      }
    }
}

TEST(Split, TenWindowsSevenOneTwo) {
  auto s = split_dataset(10, {}, 0);
  EXPECT_EQ(s.train.size(), 7u);
  EXPECT_EQ(s.val.size(), 1u);
  EXPECT_EQ(s.test.size(), 2u);
}

TEST(Split, DeterministicForSeed) {
  auto a = split_dataset(57, {}, 3);
  auto b = split_dataset(57, {}, 3);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.val, b.val);
  EXPECT_EQ(a.test, b.test);
}

TEST(Split, BadRatiosAreConfigError) {
  EXPECT_THROW(split_dataset(10, {0.7, 0.2, 0.2}, 0), ConfigError);
}

TEST(Split, PartitionLawAcrossSeeds) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::size_t n = seed * 7 + 1;
    auto s = split_dataset(n, {}, seed);
    std::set<std::size_t> all;
    for (auto* part : {&s.train, &s.val, &s.test})
      for (auto i : *part) ASSERT_TRUE(all.insert(i).second);
    ASSERT_EQ(all.size(), n);
    ASSERT_LE(std::abs(static_cast<double>(s.train.size()) - 0.7 * n), 1.0);
    ASSERT_LE(std::abs(static_cast<double>(s.val.size()) - 0.1 * n), 1.0);
    ASSERT_LE(std::abs(static_cast<double>(s.test.size()) - 0.2 * n), 1.0 + 1e-9);
  }
}

TEST(WindowIo, JsonlRoundTrip) {
  Rng rng(1);
  std::vector<SceneWindow> ws;
  for (int i = 0; i < 5; ++i) {
    auto w = random_window(rng, 16, 25, i);
    w.maneuver = label_maneuver(w);
    if (i % 2) w = normalize_to_target_frame(w);
    w.agents[0].states[0].lane_id = i;
    ws.push_back(w);
  }
  auto text = render_windows_jsonl(ws);
  EXPECT_NE(text.find("\"schema_version\":1"), std::string::npos);
  EXPECT_EQ(parse_windows_jsonl(text), ws);
}

TEST(WindowIo, CorruptLineNamesLineNumber) {
  Rng rng(1);
  auto text = render_windows_jsonl({random_window(rng, 4, 3, 1), random_window(rng, 4, 3, 1)});
  text = text.substr(0, text.size() - 20);
  try {
    parse_windows_jsonl(text, "w.jsonl");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("w.jsonl:2"), std::string::npos) << e.what();
  }
}

TEST(WindowIo, UnknownSchemaVersionRejected) {
  Rng rng(1);
  auto j = window_to_json(random_window(rng, 4, 3, 0));
  j["schema_version"] = 2;
  EXPECT_THROW(window_from_json(j), SchemaError);
}

TEST(Synthetic, SameSeedIdenticalFiles) {
  SynthOptions o;
  o.scenes = 100;
  auto dir = std::filesystem::temp_directory_path() / "cotdrive_synth_test";
  std::filesystem::remove_all(dir);
  write_synthetic(dir / "a", generate_synthetic(o), o);
  write_synthetic(dir / "b", generate_synthetic(o), o);
  for (const char* f : {"tracks.csv", "labels.jsonl", "manifest.json"})
    EXPECT_EQ(read_file(dir / "a" / f), read_file(dir / "b" / f)) << f;
  std::filesystem::remove_all(dir);
}

TEST(Synthetic, ZeroScenesIsArgumentError) {
  SynthOptions o;
  o.scenes = 0;
  EXPECT_THROW(generate_synthetic(o), ArgumentError);
}

class SyntheticProfiles : public ::testing::TestWithParam<SynthProfile> {};

TEST_P(SyntheticProfiles, OneWindowPerSceneAndLabelsRecovered) {
  SynthOptions o;
  o.profile = GetParam();
  o.scenes = 400;
  o.seed = 17;
  auto data = generate_synthetic(o);
  // Round trip through the CSV format the CLI uses.
  auto loaded = parse_trajectories(render_trajectories_csv(data.states), TrajectoryFormat::csv, "synth");
  ASSERT_TRUE(loaded.rejected.empty());
  auto seg = segment_windows(loaded.states, SegmentOptions{});
  ASSERT_EQ(seg.windows.size(), o.scenes);
  std::map<std::string, ManeuverLabel> truth;
  for (const auto& l : data.labels) truth[l.target_id] = l.maneuver;
  std::size_t hits = 0, lane_changes = 0, lane_hits = 0;
  for (const auto& w : seg.windows) {
    const auto got = label_maneuver(w);
    const auto want = truth.at(w.target_id);
    hits += got == want;
    if (want.lateral != Lateral::straight) {
      ++lane_changes;
      lane_hits += got.lateral == want.lateral;
    }
  }
  EXPECT_GE(static_cast<double>(hits) / o.scenes, 0.95);
  EXPECT_GE(static_cast<double>(lane_hits) / lane_changes, 0.95);
}

INSTANTIATE_TEST_SUITE_P(Profiles, SyntheticProfiles,
                         ::testing::Values(SynthProfile::highway, SynthProfile::urban),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Synthetic, UrbanHasAllClasses) {
  SynthOptions o;
  o.profile = SynthProfile::urban;
  o.scenes = 60;
  auto data = generate_synthetic(o);
  std::set<AgentClass> classes;
  for (const auto& l : data.labels) classes.insert(l.agent_class);
  EXPECT_EQ(classes.size(), 3u);
}
