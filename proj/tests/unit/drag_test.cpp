#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "flowmesh/codecs.hpp"
#include "flowmesh/drag.hpp"
#include "flowmesh/errors.hpp"
#include "flowmesh/samples.hpp"
#include "oracles.hpp"

using namespace flowmesh;

namespace {

NoiseSchedule two_point(double a_prev, double a_t) { return NoiseSchedule{{a_prev, a_t}}; }

LatentGrid scalar_grid(int h, int w, std::vector<double> values) {
  LatentGrid g(h, w, 1);
  g.data = std::move(values);
  return g;
}

LatentGrid random_grid(int h, int w, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  LatentGrid g(h, w, c);
  for (auto& v : g.data) v = u(rng);
  return g;
}

EpsFn constant_eps(double c) {
  return [c](const LatentGrid& z, int) {
    LatentGrid e = z;
    std::fill(e.data.begin(), e.data.end(), c);
    return e;
  };
}

double max_rel_diff(const LatentGrid& a, const LatentGrid& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a.data[i] - b.data[i]) / std::max(1.0, std::abs(b.data[i])));
  }
  return worst;
}

// Loss with the reference features frozen at `frozen`, evaluated through the
// oracle's bilinear sampler on the single feature channel.
double frozen_loss(const DragState& s, const FeatureFn& feature, const LatentGrid& z, const LatentGrid& frozen) {
  const LatentGrid f = feature.forward(z);
  const LatentGrid f0 = feature.forward(frozen);
  double loss = 0.0;
  for (std::size_t i = 0; i < s.handles.size(); ++i) {
    const Vec2 dir = s.targets[i] - s.handles[i];
    if (dir.norm() == 0.0) continue;
    const Vec2 delta = dir.normalized();
    const Vec2 c(std::round(s.handles[i].x()), std::round(s.handles[i].y()));
    for (int dy = -s.r_sup; dy <= s.r_sup; ++dy) {
      for (int dx = -s.r_sup; dx <= s.r_sup; ++dx) {
        const Vec2 q = c + Vec2(dx, dy);
        loss += std::abs(oracle::bilinear(f.data, f.height, f.width, q + delta) -
                         oracle::bilinear(f0.data, f0.height, f0.width, q));
      }
    }
  }
  for (int r = 0; r < z.height; ++r) {
    for (int col = 0; col < z.width; ++col) {
      if (!s.edit_mask.at(r, col)) loss += s.lambda_reg * std::abs(z.at(r, col) - s.reference.at(r, col));
    }
  }
  return loss;
}

Image8 gray(int w, int h, std::uint8_t value) { return Image8{w, h, 1, std::vector<std::uint8_t>(std::size_t(w) * h, value)}; }

}  // namespace

TEST(NoiseSchedule, LinearIsValidAndMonotone) {
  const NoiseSchedule s = NoiseSchedule::linear(50);
  EXPECT_EQ(s.steps(), 50);
  EXPECT_EQ(s.alpha_bar[0], 1.0);
  EXPECT_NO_THROW(s.validate());
  for (int t = 1; t <= 50; ++t) EXPECT_LE(s.alpha_bar[t], s.alpha_bar[t - 1]);
  EXPECT_THROW(two_point(1.0, 0.0).validate(), ConfigError);
  EXPECT_THROW(two_point(0.5, 0.6).validate(), ConfigError);
  EXPECT_THROW(NoiseSchedule::linear(0), ConfigError);
}

TEST(DdimInvert, ZeroPredictorExample) {
  const LatentGrid z = ddim_invert_step(scalar_grid(1, 1, {2.0}), 1, constant_eps(0.0), two_point(1.0, 0.25));
  EXPECT_DOUBLE_EQ(z.data[0], 1.0);
  const LatentGrid same = ddim_invert_step(scalar_grid(1, 1, {2.0}), 1, constant_eps(0.0), two_point(0.7, 0.7));
  EXPECT_DOUBLE_EQ(same.data[0], 2.0);
}

TEST(DdimInvert, ConstantPredictorMatchesScalarOracle) {
  const NoiseSchedule s = NoiseSchedule::linear(20);
  const LatentGrid z = random_grid(4, 5, 2, 3);
  for (int t = 1; t <= 20; t += 3) {
    const LatentGrid out = ddim_invert_step(z, t, constant_eps(0.37), s);
    for (std::size_t i = 0; i < z.size(); ++i) {
      EXPECT_NEAR(out.data[i], oracle::ddim_invert_scalar(z.data[i], s.alpha_bar[t], s.alpha_bar[t - 1], 0.37), 1e-14);
    }
  }
}

TEST(DdimInvert, TimestepOutOfRange) {
  const NoiseSchedule s = NoiseSchedule::linear(5);
  const LatentGrid z = random_grid(2, 2, 1, 1);
  EXPECT_THROW(ddim_invert_step(z, 0, constant_eps(0), s), ConfigError);
  EXPECT_THROW(ddim_invert_step(z, 6, constant_eps(0), s), ConfigError);
}

TEST(DdimSample, StepInvertsStep) {
  const NoiseSchedule s = NoiseSchedule::linear(10);
  const LatentGrid z = random_grid(3, 3, 1, 4);
  const LatentGrid up = ddim_invert_step(z, 4, constant_eps(-0.8), s);
  const LatentGrid down = ddim_sample_step(up, 4, constant_eps(-0.8), s);
  EXPECT_LT(max_rel_diff(down, z), 1e-13);
  for (std::size_t i = 0; i < z.size(); ++i) {
    EXPECT_NEAR(down.data[i], oracle::ddim_sample_scalar(up.data[i], s.alpha_bar[4], s.alpha_bar[3], -0.8), 1e-13);
  }
}

TEST(DdimRoundTrip, ZeroPredictorIsExactish) {
  const NoiseSchedule s = NoiseSchedule::linear(50);
  const LatentGrid z = random_grid(8, 8, 4, 5);
  const LatentGrid back = ddim_sample(ddim_invert(z, constant_eps(0.0), s), constant_eps(0.0), s);
  EXPECT_LT(max_rel_diff(back, z), 1e-13);
}

TEST(DdimRoundTrip, ConstantPredictorFiftySteps) {
  const NoiseSchedule s = NoiseSchedule::linear(50);
  for (double c : {-1.0, 0.25, 2.0}) {
    const LatentGrid z = random_grid(16, 16, 4, 6);
    const LatentGrid noisy = ddim_invert(z, constant_eps(c), s);
    EXPECT_EQ(noisy.timestep, 50);
    const LatentGrid back = ddim_sample(noisy, constant_eps(c), s);
    EXPECT_LT(max_rel_diff(back, z), 1e-10) << c;
    EXPECT_EQ(back.timestep, 0);
  }
}

TEST(DdimRoundTrip, StateDependentPredictorConverges) {
  const NoiseSchedule s = NoiseSchedule::linear(25);
  const EpsFn eps = [](const LatentGrid& z, int t) {
    LatentGrid e = z;
    for (auto& v : e.data) v = 1e-4 * v + 0.01 * t;
    return e;
  };
  const LatentGrid z = random_grid(6, 6, 1, 7);
  EXPECT_LT(max_rel_diff(ddim_sample(ddim_invert(z, eps, s), eps, s), z), 1e-10);
}

TEST(DdimSample, WrongShapePredictor) {
  const NoiseSchedule s = NoiseSchedule::linear(3);
  const EpsFn bad = [](const LatentGrid&, int) { return LatentGrid(1, 1, 1); };
  EXPECT_THROW(ddim_invert_step(random_grid(2, 2, 1, 1), 1, bad, s), StructuralError);
}

TEST(Bilinear, ExactAtIntegersAndClamped) {
  const LatentGrid g = random_grid(5, 6, 2, 8);
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 6; ++c) {
      const BilinearSample s = sample_bilinear(g, Vec2(c, r));
      EXPECT_FALSE(s.clipped);
      EXPECT_EQ(s.value[0], g.at(r, c, 0));
      EXPECT_EQ(s.value[1], g.at(r, c, 1));
    }
  }
  const BilinearSample mid = sample_bilinear(g, Vec2(1.25, 2.5));
  LatentGrid ch0(5, 6, 1);
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 6; ++c) ch0.at(r, c) = g.at(r, c, 0);
  }
  EXPECT_NEAR(mid.value[0], oracle::bilinear(ch0.data, 5, 6, Vec2(1.25, 2.5)), 1e-15);
  const BilinearSample out = sample_bilinear(g, Vec2(-2, 9));
  EXPECT_TRUE(out.clipped);
  EXPECT_EQ(out.value[0], g.at(4, 0, 0));
}

TEST(MotionSupervision, WorkedScalarExample) {
  DragState s = DragState::start(scalar_grid(1, 3, {0, 1, 4}), {{1, 0}}, {{2, 0}});
  s.r_sup = 0;
  s.lambda_reg = 0.0;
  const LossResult r = motion_supervision_loss(s, IdentityFeature{}, {s.handles, s.targets});
  EXPECT_DOUBLE_EQ(r.loss, 3.0);
  // Only the shifted sample carries gradient.
  EXPECT_EQ(r.gradient.data, (std::vector<double>{0, 0, 1}));
}

TEST(MotionSupervision, ConstantLatentIsZero) {
  DragState s = DragState::start(LatentGrid(9, 9, 2, 0.5), {{4, 4}}, {{7, 5}});
  s.lambda_reg = 0.0;
  EXPECT_EQ(motion_supervision_loss(s, IdentityFeature{}, {s.handles, s.targets}).loss, 0.0);
  EXPECT_NEAR(motion_supervision_loss(s, GaussianBlurFeature{}, {s.handles, s.targets}).loss, 0.0, 1e-12);
}

TEST(MotionSupervision, HandleOnTargetLeavesMaskTermOnly) {
  LatentGrid z0 = random_grid(6, 6, 1, 2);
  DragState s = DragState::start(z0, {{3, 3}}, {{3, 3}}, BinaryMask(6, 6));
  s.latent.at(0, 0) += 0.5;
  s.latent.at(5, 5) -= 0.25;
  s.lambda_reg = 0.2;
  EXPECT_NEAR(motion_supervision_loss(s, IdentityFeature{}, {s.handles, s.targets}).loss, 0.2 * 0.75, 1e-15);
}

TEST(MotionSupervision, ClippedPatchFlagged) {
  DragState s = DragState::start(random_grid(5, 5, 1, 3), {{0, 0}}, {{-3, 0}});
  EXPECT_TRUE(motion_supervision_loss(s, IdentityFeature{}, {s.handles, s.targets}).clipped);
}

TEST(MotionSupervision, GradientMatchesCentralDifferences) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    for (const char* name : {"identity", "gaussian"}) {
      const auto feature = make_feature(name);
      const LatentGrid z0 = random_grid(10, 11, 1, seed);
      BinaryMask edit(11, 10);
      for (int r = 2; r < 8; ++r) {
        for (int c = 2; c < 9; ++c) edit.set(r, c);
      }
      DragState s = DragState::start(z0, {{4.3, 5.1}, {6.0, 3.8}}, {{8.2, 6.4}, {5.1, 7.7}}, edit);
      s.latent = random_grid(10, 11, 1, seed + 50);
      s.lambda_reg = 0.3;
      const LossResult analytic = motion_supervision_loss(s, *feature, {s.handles, s.targets});
      EXPECT_NEAR(analytic.loss, frozen_loss(s, *feature, s.latent, s.latent), 1e-12);
      const double h = 1e-6;
      for (std::size_t i = 0; i < s.latent.size(); ++i) {
        LatentGrid up = s.latent;
        LatentGrid down = s.latent;
        up.data[i] += h;
        down.data[i] -= h;
        const double fd = (frozen_loss(s, *feature, up, s.latent) - frozen_loss(s, *feature, down, s.latent)) / (2 * h);
        EXPECT_NEAR(analytic.gradient.data[i], fd, 1e-4 * std::max(1.0, std::abs(fd))) << name << " i=" << i;
      }
    }
  }
}

TEST(MotionSupervision, OpaqueFeatureMatchesIdentity) {
  const OpaqueFeature opaque([](const LatentGrid& z) { return z; });
  DragState s = DragState::start(random_grid(7, 7, 1, 9), {{3, 3}}, {{5, 4}});
  s.latent = random_grid(7, 7, 1, 10);
  const LossResult a = motion_supervision_loss(s, IdentityFeature{}, {s.handles, s.targets});
  const LossResult b = motion_supervision_loss(s, opaque, {s.handles, s.targets});
  EXPECT_NEAR(a.loss, b.loss, 1e-12);
  for (std::size_t i = 0; i < a.gradient.size(); ++i) EXPECT_NEAR(a.gradient.data[i], b.gradient.data[i], 1e-6);
}

TEST(MotionSupervision, LossIsNonNegative) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(1.0, 8.0);
  for (int trial = 0; trial < 30; ++trial) {
    DragState s = DragState::start(random_grid(10, 10, 1, trial), {{u(rng), u(rng)}}, {{u(rng), u(rng)}});
    s.latent = random_grid(10, 10, 1, trial + 1000);
    EXPECT_GE(motion_supervision_loss(s, IdentityFeature{}, {s.handles, s.targets}).loss, 0.0);
  }
}

TEST(OptimizeLatent, ZeroGradientLeavesLatent) {
  DragState s = DragState::start(LatentGrid(6, 6, 1, 0.3), {{2, 2}}, {{4, 2}});
  const DragState out = optimize_latent(s, IdentityFeature{}, {s.handles, s.targets}, 3);
  EXPECT_EQ(out.latent.data, s.latent.data);
  EXPECT_EQ(out.loss_history, (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(out.iteration, 3);
}

TEST(OptimizeLatent, MaskTermFollowsScalarDescent) {
  // Every cell sits 1 above the reference outside the edit region; each step
  // moves it by eta * lambda toward the reference.
  DragState s = DragState::start(LatentGrid(4, 4, 1, 0.0), {{1, 1}}, {{1, 1}}, BinaryMask(4, 4));
  for (auto& v : s.latent.data) v = 1.0;
  s.lambda_reg = 0.5;
  s.eta = 0.1;
  const DragState out = optimize_latent(s, IdentityFeature{}, {s.handles, s.targets}, 6);
  for (double v : out.latent.data) EXPECT_NEAR(v, 1.0 - 6 * 0.1 * 0.5, 1e-14);
  for (std::size_t i = 0; i < out.loss_history.size(); ++i) {
    EXPECT_NEAR(out.loss_history[i], 16 * 0.5 * (1.0 - static_cast<double>(i) * 0.05), 1e-12);
    if (i > 0) EXPECT_LT(out.loss_history[i], out.loss_history[i - 1]);
  }
}

TEST(OptimizeLatent, Validation) {
  DragState s = DragState::start(LatentGrid(4, 4, 1), {{1, 1}}, {{2, 1}});
  EXPECT_THROW(optimize_latent(s, IdentityFeature{}, {s.handles, s.targets}, 0), ConfigError);
  s.eta = 0.0;
  EXPECT_THROW(optimize_latent(s, IdentityFeature{}, {s.handles, s.targets}, 1), ConfigError);
  s.eta = 0.1;
  s.targets.push_back({0, 0});
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(TrackPoints, UniqueMatchInWindow) {
  LatentGrid z(9, 9, 1, 0.0);
  z.at(6, 2) = 1.0;
  const auto found = track_points(z, IdentityFeature{}, std::vector<Vec2>{{4, 4}}, {{1.0}}, 3);
  EXPECT_EQ(found[0], Vec2(2, 6));
}

TEST(TrackPoints, UnchangedLatentKeepsRandomHandles) {
  const LatentGrid z = random_grid(12, 12, 2, 21);
  const std::vector<Vec2> pts = {{3, 4}, {8, 8}, {11, 0}};
  const auto ref = capture_reference(IdentityFeature{}, z, pts);
  EXPECT_EQ(track_points(z, IdentityFeature{}, pts, ref, 3), pts);
}

TEST(TrackPoints, BruteForceFirstStrictMinimum) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> level(0, 3);
  for (int trial = 0; trial < 50; ++trial) {
    LatentGrid z(10, 10, 1);
    for (auto& v : z.data) v = level(rng);  // plenty of ties
    const Vec2 p(1 + trial % 8, 2 + trial % 7);
    const std::vector<std::vector<double>> ref = {{1.5}};
    const Vec2 got = track_points(z, IdentityFeature{}, std::vector<Vec2>{p}, ref, 2)[0];
    double best = 1e300;
    Vec2 expected = p;
    for (int dy = -2; dy <= 2; ++dy) {
      for (int dx = -2; dx <= 2; ++dx) {
        const int r = static_cast<int>(p.y()) + dy;
        const int c = static_cast<int>(p.x()) + dx;
        if (r < 0 || c < 0 || r >= 10 || c >= 10) continue;
        const double cost = std::abs(z.at(r, c) - 1.5);
        if (cost < best) {
          best = cost;
          expected = Vec2(c, r);
        }
      }
    }
    EXPECT_EQ(got, expected);
    EXPECT_LE(std::abs(got.x() - p.x()), 2.0);
    EXPECT_LE(std::abs(got.y() - p.y()), 2.0);
  }
}

TEST(TrackPoints, ZeroRadiusAndOutsideWindow) {
  const LatentGrid z = random_grid(5, 5, 1, 1);
  const std::vector<Vec2> p = {{2.4, 1.7}};
  EXPECT_EQ(track_points(z, IdentityFeature{}, p, {{9.0}}, 0), p);
  EXPECT_THROW(track_points(z, IdentityFeature{}, std::vector<Vec2>{{40, 40}}, {{0.0}}, 2), ConfigError);
}

TEST(RunDrag, FixpointNeedsNoAlternations) {
  const DragScenario sc = fixpoint_drag_scenario();
  const DragTrace t = run_drag(sc.state, IdentityFeature{}, sc.params);
  EXPECT_EQ(t.alternations, 0);
  EXPECT_EQ(t.mean_distance, 0.0);
  EXPECT_TRUE(t.reached);
}

TEST(RunDrag, GaussianScenarioMatchesOracle) {
  const DragScenario sc = gaussian_drag_scenario();
  const DragTrace t = run_drag(sc.state, IdentityFeature{}, sc.params);
  EXPECT_LE(t.mean_distance, 2.0);
  EXPECT_LE(t.alternations, 80);

  oracle::DragSetup setup;
  setup.height = sc.state.latent.height;
  setup.width = sc.state.latent.width;
  setup.latent = sc.state.latent.data;
  setup.handles = sc.state.handles;
  setup.targets = sc.state.targets;
  setup.eta = sc.state.eta;
  setup.r_sup = sc.state.r_sup;
  setup.r_track = sc.state.r_track;
  setup.lambda_reg = sc.state.lambda_reg;
  setup.stop_distance = sc.params.stop_distance;
  const oracle::DragOutcome o = oracle::brute_force_drag(setup);
  EXPECT_LE(o.mean_distance, 2.0);
  EXPECT_NEAR(t.mean_distance, o.mean_distance, 1.0);
}

TEST(RunDrag, HandlePathsStartAtHandles) {
  const DragScenario sc = gaussian_drag_scenario(32, 2.5, 6.0);
  DragParams p = sc.params;
  p.alternations = 5;
  const DragTrace t = run_drag(sc.state, IdentityFeature{}, p);
  ASSERT_EQ(t.handle_paths.size(), static_cast<std::size_t>(t.alternations) + 1);
  EXPECT_EQ(t.handle_paths[0], sc.state.handles);
  EXPECT_EQ(t.losses.size(), static_cast<std::size_t>(t.alternations));
}

TEST(RunDrag, FlowModeReadsOnlyAnchorPatches) {
  DragScenario sc = gaussian_drag_scenario();
  sc.state.r_track = 0;  // anchors stay put, so every read is predictable
  BinaryMask mask(48, 48);
  mask.set(10, 30);
  mask.set(10, 31);
  mask.set(11, 30);
  SampledFlow flow;
  flow.vectors = {{30, 10, 3, 0}, {31, 10, 0, 2}, {30, 11, -1, -1}};
  flow.requested = 3;
  DragParams p = sc.params;
  p.alternations = 4;
  p.use_flow = flow;
  std::vector<Vec2> seen;
  run_drag(sc.state, IdentityFeature{}, p, [&](const Vec2& q) { seen.push_back(q); });
  ASSERT_FALSE(seen.empty());
  for (const Vec2& q : seen) {
    bool explained = false;
    for (const FlowVector& v : flow.vectors) {
      const Vec2 delta = Vec2(v.dx, v.dy).normalized();
      const Vec2 offset = q - delta - Vec2(v.x, v.y);
      const bool integer = offset.x() == std::round(offset.x()) && offset.y() == std::round(offset.y());
      if (integer && std::abs(offset.x()) <= sc.state.r_sup && std::abs(offset.y()) <= sc.state.r_sup) explained = true;
    }
    EXPECT_TRUE(explained) << q.transpose();
    // Nothing near the user handle at (18, 24).
    EXPECT_GT((q - sc.state.handles[0]).norm(), 5.0);
  }
}

TEST(RunDrag, RigidTranslationFlowTracksPointOnlyResult) {
  const DragScenario sc = gaussian_drag_scenario();
  const DragTrace point = run_drag(sc.state, IdentityFeature{}, sc.params);
  const Vec2 h = sc.state.handles[0];
  const BinaryMask mask = disk_mask(48, 48, h.x(), h.y(), 3.0);
  DragParams p = sc.params;
  p.use_flow = translation_flow(48, 48, mask, sc.state.targets[0] - h);
  const DragTrace flow = run_drag(sc.state, IdentityFeature{}, p);
  EXPECT_LE((flow.final_state.handles[0] - point.final_state.handles[0]).norm(), 1.0);
}

TEST(MaskedPsnr, Examples) {
  const BinaryMask all(4, 3, true);
  const PsnrResult same = masked_psnr(gray(4, 3, 77), gray(4, 3, 77), all);
  EXPECT_TRUE(same.infinite);
  const PsnrResult ten = masked_psnr(gray(4, 3, 100), gray(4, 3, 110), all);
  EXPECT_FALSE(ten.infinite);
  EXPECT_NEAR(ten.db, 20.0 * std::log10(255.0 / 10.0), 1e-12);
  EXPECT_NEAR(ten.db, 28.13, 0.01);
  Image8 b = gray(4, 3, 77);
  b.data[0] = 0;
  BinaryMask some(4, 3, true);
  some.set(0, 0, false);
  EXPECT_TRUE(masked_psnr(gray(4, 3, 77), b, some).infinite);
  EXPECT_THROW(masked_psnr(gray(4, 3, 1), gray(4, 3, 1), BinaryMask(4, 3)), ConfigError);
  EXPECT_THROW(masked_psnr(gray(4, 3, 1), gray(3, 3, 1), all), ConfigError);
}

TEST(MeanDistance, Examples) {
  const std::vector<Vec2> a = {{0, 0}};
  EXPECT_EQ(mean_distance(a, a), 0.0);
  EXPECT_EQ(mean_distance(a, std::vector<Vec2>{{3, 4}}), 5.0);
  EXPECT_EQ(mean_distance(std::vector<Vec2>{{0, 0}, {1, 1}}, std::vector<Vec2>{{2, 0}, {1, 5}}), 3.0);
  EXPECT_THROW(mean_distance(a, std::vector<Vec2>{}), ConfigError);
}

TEST(LatentCodec, RoundTripAsFloat32) {
  const LatentGrid g = random_grid(5, 7, 3, 31);
  const std::string bytes = encode_latent(g);
  EXPECT_EQ(bytes.size(), 16u + 5 * 7 * 3 * 4);
  EXPECT_EQ(bytes.substr(0, 4), "FMLT");
  const LatentGrid back = decode_latent(bytes);
  ASSERT_TRUE(back.same_shape(g));
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(back.data[i], static_cast<double>(static_cast<float>(g.data[i])));
  EXPECT_EQ(encode_latent(back), bytes);
  EXPECT_THROW(decode_latent(bytes.substr(0, 20)), IoError);
  EXPECT_THROW(decode_latent("XXXX" + bytes.substr(4)), IoError);
}
