#include "flowmesh/drag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "flowmesh/errors.hpp"

namespace flowmesh {

LatentGrid::LatentGrid(int h, int w, int c, double value) : height(h), width(w), channels(c) {
  if (h < 1 || w < 1 || c < 1) {
    throw ConfigError("latent grid dimensions must be positive, got " + std::to_string(h) + "x" + std::to_string(w) +
                      "x" + std::to_string(c));
  }
  data.assign(static_cast<std::size_t>(h) * w * c, value);
}

// Schedules

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end, int train_steps) {
  if (steps < 1 || train_steps < steps) throw ConfigError("schedule needs 1 <= steps <= train_steps");
  std::vector<double> cumulative(static_cast<std::size_t>(train_steps));
  double prod = 1.0;
  for (int i = 0; i < train_steps; ++i) {
    const double beta =
        train_steps == 1 ? beta_start : beta_start + (beta_end - beta_start) * i / static_cast<double>(train_steps - 1);
    prod *= 1.0 - beta;
    cumulative[static_cast<std::size_t>(i)] = prod;
  }
  NoiseSchedule s;
  s.alpha_bar.push_back(1.0);
  for (int k = 1; k <= steps; ++k) {
    const auto idx = static_cast<std::size_t>(static_cast<long long>(k) * train_steps / steps - 1);
    s.alpha_bar.push_back(cumulative[idx]);
  }
  s.validate();
  return s;
}

void NoiseSchedule::validate() const {
  if (alpha_bar.size() < 2) throw ConfigError("noise schedule needs at least one step");
  for (std::size_t t = 0; t < alpha_bar.size(); ++t) {
    if (!(alpha_bar[t] > 0.0 && alpha_bar[t] <= 1.0)) {
      throw ConfigError("alpha_bar[" + std::to_string(t) + "] is outside (0, 1]");
    }
    if (t > 0 && alpha_bar[t] > alpha_bar[t - 1]) {
      throw ConfigError("alpha_bar must be non-increasing (violated at t=" + std::to_string(t) + ")");
    }
  }
}

namespace {

struct StepCoefficients {
  double a;  // multiplies z_{t-1}
  double b;  // multiplies eps
};

StepCoefficients coefficients(int t, const NoiseSchedule& schedule) {
  if (t < 1 || t > schedule.steps()) {
    throw ConfigError("timestep " + std::to_string(t) + " is outside the schedule range [1, " +
                      std::to_string(schedule.steps()) + "]");
  }
  const double at = schedule.alpha_bar[static_cast<std::size_t>(t)];
  const double ap = schedule.alpha_bar[static_cast<std::size_t>(t) - 1];
  return {std::sqrt(at / ap), std::sqrt((1.0 - at) / ap) - 1.0};
}

LatentGrid checked_eps(const EpsFn& eps, const LatentGrid& z, int t) {
  LatentGrid e = eps(z, t);
  if (!e.same_shape(z)) throw StructuralError("noise predictor returned a grid of the wrong shape");
  return e;
}

}  // namespace

LatentGrid ddim_invert_step(const LatentGrid& z_prev, int t, const EpsFn& eps, const NoiseSchedule& schedule) {
  const StepCoefficients c = coefficients(t, schedule);
  const LatentGrid e = checked_eps(eps, z_prev, t - 1);
  LatentGrid out = z_prev;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = c.a * z_prev.data[i] + c.b * e.data[i];
  out.timestep = t;
  return out;
}

LatentGrid ddim_sample_step(const LatentGrid& z_t, int t, const EpsFn& eps, const NoiseSchedule& schedule) {
  const StepCoefficients c = coefficients(t, schedule);
  auto update = [&](const LatentGrid& guess) {
    const LatentGrid e = checked_eps(eps, guess, t - 1);
    LatentGrid next = z_t;
    for (std::size_t i = 0; i < next.size(); ++i) next.data[i] = (z_t.data[i] - c.b * e.data[i]) / c.a;
    next.timestep = t - 1;
    return next;
  };
  LatentGrid current = update(z_t);
  constexpr int kMaxIters = 5;
  constexpr double kTol = 1e-12;
  for (int it = 0; it < kMaxIters; ++it) {
    LatentGrid next = update(current);
    double change = 0.0;
    double scale = 1.0;
    for (std::size_t i = 0; i < next.size(); ++i) {
      change = std::max(change, std::abs(next.data[i] - current.data[i]));
      scale = std::max(scale, std::abs(next.data[i]));
    }
    current = std::move(next);
    if (change <= kTol * scale) return current;
  }
  throw NumericalError("DDIM sampling step at t=" + std::to_string(t) + " did not converge in " +
                       std::to_string(kMaxIters) + " fixed-point iterations");
}

LatentGrid ddim_invert(const LatentGrid& z0, const EpsFn& eps, const NoiseSchedule& schedule, int to) {
  const int last = to < 0 ? schedule.steps() : to;
  LatentGrid z = z0;
  for (int t = z0.timestep + 1; t <= last; ++t) z = ddim_invert_step(z, t, eps, schedule);
  return z;
}

LatentGrid ddim_sample(const LatentGrid& z_t, const EpsFn& eps, const NoiseSchedule& schedule) {
  LatentGrid z = z_t;
  for (int t = z_t.timestep; t >= 1; --t) z = ddim_sample_step(z, t, eps, schedule);
  return z;
}

// Features

LatentGrid IdentityFeature::forward(const LatentGrid& z) const { return z; }

LatentGrid IdentityFeature::vjp(const LatentGrid&, const LatentGrid& grad_features) const { return grad_features; }

GaussianBlurFeature::GaussianBlurFeature(double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("blur sigma must be positive");
  double total = 0.0;
  for (int k = -2; k <= 2; ++k) {
    taps_[static_cast<std::size_t>(k + 2)] = std::exp(-0.5 * k * k / (sigma * sigma));
    total += taps_[static_cast<std::size_t>(k + 2)];
  }
  for (double& t : taps_) t /= total;
}

namespace {

// One separable pass. `along_rows` blurs along the column index.
LatentGrid blur_pass(const LatentGrid& in, const std::array<double, 5>& taps, bool along_rows) {
  LatentGrid out = in;
  for (int r = 0; r < in.height; ++r) {
    for (int c = 0; c < in.width; ++c) {
      for (int ch = 0; ch < in.channels; ++ch) {
        double acc = 0.0;
        for (int k = -2; k <= 2; ++k) {
          const int rr = along_rows ? r : std::clamp(r + k, 0, in.height - 1);
          const int cc = along_rows ? std::clamp(c + k, 0, in.width - 1) : c;
          acc += taps[static_cast<std::size_t>(k + 2)] * in.at(rr, cc, ch);
        }
        out.at(r, c, ch) = acc;
      }
    }
  }
  return out;
}

LatentGrid blur_pass_adjoint(const LatentGrid& g, const std::array<double, 5>& taps, bool along_rows) {
  LatentGrid out = g;
  std::fill(out.data.begin(), out.data.end(), 0.0);
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      for (int ch = 0; ch < g.channels; ++ch) {
        const double v = g.at(r, c, ch);
        if (v == 0.0) continue;
        for (int k = -2; k <= 2; ++k) {
          const int rr = along_rows ? r : std::clamp(r + k, 0, g.height - 1);
          const int cc = along_rows ? std::clamp(c + k, 0, g.width - 1) : c;
          out.at(rr, cc, ch) += taps[static_cast<std::size_t>(k + 2)] * v;
        }
      }
    }
  }
  return out;
}

}  // namespace

LatentGrid GaussianBlurFeature::forward(const LatentGrid& z) const {
  return blur_pass(blur_pass(z, taps_, true), taps_, false);
}

LatentGrid GaussianBlurFeature::vjp(const LatentGrid&, const LatentGrid& grad_features) const {
  return blur_pass_adjoint(blur_pass_adjoint(grad_features, taps_, false), taps_, true);
}

OpaqueFeature::OpaqueFeature(std::function<LatentGrid(const LatentGrid&)> fn, double step)
    : fn_(std::move(fn)), step_(step) {
  if (!fn_) throw ConfigError("opaque feature needs a callable");
  if (!(step_ > 0.0)) throw ConfigError("finite-difference step must be positive");
}

LatentGrid OpaqueFeature::forward(const LatentGrid& z) const { return fn_(z); }

LatentGrid OpaqueFeature::vjp(const LatentGrid& z, const LatentGrid& grad_features) const {
  LatentGrid out = z;
  LatentGrid probe = z;
  for (std::size_t i = 0; i < z.size(); ++i) {
    probe.data[i] = z.data[i] + step_;
    const LatentGrid up = fn_(probe);
    probe.data[i] = z.data[i] - step_;
    const LatentGrid down = fn_(probe);
    probe.data[i] = z.data[i];
    if (up.size() != grad_features.size()) throw StructuralError("opaque feature output shape changed");
    double acc = 0.0;
    for (std::size_t j = 0; j < up.size(); ++j) acc += grad_features.data[j] * (up.data[j] - down.data[j]);
    out.data[i] = acc / (2.0 * step_);
  }
  return out;
}

std::unique_ptr<FeatureFn> make_feature(const std::string& name) {
  if (name == "identity") return std::make_unique<IdentityFeature>();
  if (name == "gaussian") return std::make_unique<GaussianBlurFeature>();
  throw ConfigError("unknown feature function '" + name + "' (expected identity or gaussian)");
}

// Sampling

namespace {

struct Corners {
  int r0, c0, r1, c1;
  double wr, wc;  // weight of r1 / c1
  bool clipped;
};

Corners corners(const LatentGrid& grid, const Vec2& point) {
  const double x = point.x();
  const double y = point.y();
  Corners k{};
  k.clipped = !(x >= 0.0 && y >= 0.0 && x <= grid.width - 1 && y <= grid.height - 1);
  const double cx = std::clamp(x, 0.0, static_cast<double>(grid.width - 1));
  const double cy = std::clamp(y, 0.0, static_cast<double>(grid.height - 1));
  k.c0 = static_cast<int>(std::floor(cx));
  k.r0 = static_cast<int>(std::floor(cy));
  k.c1 = std::min(k.c0 + 1, grid.width - 1);
  k.r1 = std::min(k.r0 + 1, grid.height - 1);
  k.wc = cx - k.c0;
  k.wr = cy - k.r0;
  return k;
}

}  // namespace

BilinearSample sample_bilinear(const LatentGrid& grid, const Vec2& point) {
  if (!point.allFinite()) throw NumericalError("non-finite sample location");
  const Corners k = corners(grid, point);
  BilinearSample s;
  s.clipped = k.clipped;
  s.value.resize(static_cast<std::size_t>(grid.channels));
  for (int ch = 0; ch < grid.channels; ++ch) {
    const double top = (1.0 - k.wc) * grid.at(k.r0, k.c0, ch) + k.wc * grid.at(k.r0, k.c1, ch);
    const double bottom = (1.0 - k.wc) * grid.at(k.r1, k.c0, ch) + k.wc * grid.at(k.r1, k.c1, ch);
    s.value[static_cast<std::size_t>(ch)] = (1.0 - k.wr) * top + k.wr * bottom;
  }
  return s;
}

namespace {

void scatter_bilinear(LatentGrid& grad, const Vec2& point, int ch, double g) {
  const Corners k = corners(grad, point);
  grad.at(k.r0, k.c0, ch) += (1.0 - k.wr) * (1.0 - k.wc) * g;
  grad.at(k.r0, k.c1, ch) += (1.0 - k.wr) * k.wc * g;
  grad.at(k.r1, k.c0, ch) += k.wr * (1.0 - k.wc) * g;
  grad.at(k.r1, k.c1, ch) += k.wr * k.wc * g;
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

Vec2 rounded(const Vec2& p) { return {std::round(p.x()), std::round(p.y())}; }

}  // namespace

// State

DragState DragState::start(LatentGrid latent, std::vector<Vec2> handles, std::vector<Vec2> targets,
                           std::optional<BinaryMask> mask) {
  DragState s;
  s.reference = latent;
  s.latent = std::move(latent);
  s.handles = std::move(handles);
  s.targets = std::move(targets);
  s.edit_mask = mask ? std::move(*mask) : BinaryMask(s.latent.width, s.latent.height, true);
  s.validate();
  return s;
}

void DragState::validate() const {
  if (latent.size() == 0) throw ConfigError("drag state has an empty latent");
  if (!latent.same_shape(reference)) throw ConfigError("reference latent shape differs from the latent");
  if (handles.empty()) throw ConfigError("drag state needs at least one handle");
  if (handles.size() != targets.size()) throw ConfigError("handles and targets differ in count");
  if (r_sup < 0 || r_track < 0) throw ConfigError("patch radii must be >= 0");
  if (!(eta > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(lambda_reg >= 0.0)) throw ConfigError("mask regularization weight must be >= 0");
  if (edit_mask.width != latent.width || edit_mask.height != latent.height) {
    throw ConfigError("edit mask is " + std::to_string(edit_mask.width) + "x" + std::to_string(edit_mask.height) +
                      " but the latent is " + std::to_string(latent.width) + "x" + std::to_string(latent.height));
  }
  for (const auto* list : {&handles, &targets}) {
    for (const Vec2& p : *list) {
      if (!p.allFinite()) throw ConfigError("drag points must be finite");
    }
  }
}

Supervision supervision_from_flow(const SampledFlow& flow) {
  Supervision s;
  for (const FlowVector& v : flow.vectors) {
    s.points.emplace_back(v.x, v.y);
    s.targets.emplace_back(v.x + v.dx, v.y + v.dy);
  }
  return s;
}

LossResult motion_supervision_loss(const DragState& state, const FeatureFn& feature, const Supervision& supervision,
                                   const SampleObserver& observer) {
  if (supervision.points.size() != supervision.targets.size()) {
    throw ConfigError("supervision points and targets differ in count");
  }
  const LatentGrid& z = state.latent;
  const LatentGrid features = feature.forward(z);
  if (features.height != z.height || features.width != z.width) {
    throw StructuralError("feature map must keep the latent's spatial size");
  }
  LossResult result;
  LatentGrid grad_features(features.height, features.width, features.channels, 0.0);
  for (std::size_t i = 0; i < supervision.points.size(); ++i) {
    const Vec2 dir = supervision.targets[i] - supervision.points[i];
    const double len = dir.norm();
    if (len == 0.0) continue;
    const Vec2 delta = dir / len;
    const Vec2 center = rounded(supervision.points[i]);
    for (int dy = -state.r_sup; dy <= state.r_sup; ++dy) {
      for (int dx = -state.r_sup; dx <= state.r_sup; ++dx) {
        const Vec2 q = center + Vec2(dx, dy);
        const Vec2 shifted = q + delta;
        if (observer) observer(shifted);
        const BilinearSample ref = sample_bilinear(features, q);
        const BilinearSample cur = sample_bilinear(features, shifted);
        result.clipped = result.clipped || ref.clipped || cur.clipped;
        for (int ch = 0; ch < features.channels; ++ch) {
          const double r = cur.value[static_cast<std::size_t>(ch)] - ref.value[static_cast<std::size_t>(ch)];
          result.loss += std::abs(r);
          if (r != 0.0) scatter_bilinear(grad_features, shifted, ch, sign(r));
        }
      }
    }
  }
  result.gradient = feature.vjp(z, grad_features);
  if (state.lambda_reg > 0.0) {
    for (int r = 0; r < z.height; ++r) {
      for (int c = 0; c < z.width; ++c) {
        if (state.edit_mask.at(r, c)) continue;
        for (int ch = 0; ch < z.channels; ++ch) {
          const double d = z.at(r, c, ch) - state.reference.at(r, c, ch);
          result.loss += state.lambda_reg * std::abs(d);
          result.gradient.at(r, c, ch) += state.lambda_reg * sign(d);
        }
      }
    }
  }
  return result;
}

DragState optimize_latent(DragState state, const FeatureFn& feature, const Supervision& supervision, int iterations,
                          const SampleObserver& observer) {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  state.validate();
  for (int it = 0; it < iterations; ++it) {
    const LossResult lr = motion_supervision_loss(state, feature, supervision, observer);
    state.clipped = state.clipped || lr.clipped;
    if (!std::isfinite(lr.loss)) {
      throw NumericalError("motion supervision loss became non-finite at iteration " + std::to_string(state.iteration));
    }
    state.loss_history.push_back(lr.loss);
    for (std::size_t i = 0; i < state.latent.size(); ++i) state.latent.data[i] -= state.eta * lr.gradient.data[i];
    ++state.iteration;
  }
  return state;
}

std::vector<std::vector<double>> capture_reference(const FeatureFn& feature, const LatentGrid& latent,
                                                   std::span<const Vec2> points) {
  const LatentGrid features = feature.forward(latent);
  std::vector<std::vector<double>> out;
  out.reserve(points.size());
  for (const Vec2& p : points) out.push_back(sample_bilinear(features, p).value);
  return out;
}

std::vector<Vec2> track_points(const LatentGrid& latent, const FeatureFn& feature, std::span<const Vec2> points,
                               const std::vector<std::vector<double>>& reference, int r_track) {
  if (points.size() != reference.size()) throw ConfigError("one reference feature per tracked point is required");
  if (r_track < 0) throw ConfigError("tracking radius must be >= 0");
  const LatentGrid features = feature.forward(latent);
  std::vector<Vec2> out;
  out.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (r_track == 0) {
      out.push_back(points[i]);
      continue;
    }
    const Vec2 center = rounded(points[i]);
    double best = std::numeric_limits<double>::infinity();
    Vec2 best_q = center;
    bool any = false;
    for (int dy = -r_track; dy <= r_track; ++dy) {
      for (int dx = -r_track; dx <= r_track; ++dx) {
        const int row = static_cast<int>(center.y()) + dy;
        const int col = static_cast<int>(center.x()) + dx;
        if (!features.contains(row, col)) continue;
        any = true;
        double cost = 0.0;
        for (int ch = 0; ch < features.channels; ++ch) {
          cost += std::abs(features.at(row, col, ch) - reference[i][static_cast<std::size_t>(ch)]);
        }
        if (cost < best) {
          best = cost;
          best_q = Vec2(col, row);
        }
      }
    }
    if (!any) {
      throw ConfigError("tracking window around (" + std::to_string(points[i].x()) + ", " +
                        std::to_string(points[i].y()) + ") lies entirely outside the grid");
    }
    out.push_back(best_q);
  }
  return out;
}

double mean_distance(std::span<const Vec2> handles, std::span<const Vec2> targets) {
  if (handles.size() != targets.size()) {
    throw ConfigError("mean distance needs equal counts, got " + std::to_string(handles.size()) + " and " +
                      std::to_string(targets.size()));
  }
  if (handles.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < handles.size(); ++i) total += (handles[i] - targets[i]).norm();
  return total / static_cast<double>(handles.size());
}

DragTrace run_drag(const DragState& initial, const FeatureFn& feature, const DragParams& params,
                   const SampleObserver& observer) {
  initial.validate();
  if (params.alternations < 0) throw ConfigError("alternations must be >= 0");
  if (params.ms_iters_per_alt < 1) throw ConfigError("ms_iters_per_alt must be >= 1");

  Supervision sup;
  const bool flow_mode = params.use_flow.has_value();
  if (flow_mode) {
    if (params.use_flow->vectors.empty()) throw ConfigError("sampled flow has no vectors");
    sup = supervision_from_flow(*params.use_flow);
  } else {
    sup = {initial.handles, initial.targets};
  }
  const std::size_t n_handles = initial.handles.size();

  // Tracked set: the user handles, followed by the flow anchors in flow mode.
  std::vector<Vec2> tracked = initial.handles;
  if (flow_mode) tracked.insert(tracked.end(), sup.points.begin(), sup.points.end());
  const auto reference = capture_reference(feature, initial.latent, tracked);

  auto all_reached = [&] {
    for (std::size_t i = 0; i < sup.points.size(); ++i) {
      if ((sup.points[i] - sup.targets[i]).norm() > params.stop_distance) return false;
    }
    return true;
  };

  DragTrace trace;
  DragState state = initial;
  trace.handle_paths.push_back(state.handles);
  for (int a = 0; a < params.alternations; ++a) {
    if (all_reached()) break;
    state = optimize_latent(std::move(state), feature, sup, params.ms_iters_per_alt, observer);
    tracked = track_points(state.latent, feature, tracked, reference, state.r_track);
    state.handles.assign(tracked.begin(), tracked.begin() + static_cast<std::ptrdiff_t>(n_handles));
    if (flow_mode) {
      sup.points.assign(tracked.begin() + static_cast<std::ptrdiff_t>(n_handles), tracked.end());
    } else {
      sup.points = state.handles;
    }
    trace.losses.push_back(state.loss_history.back());
    trace.handle_paths.push_back(state.handles);
    trace.alternations = a + 1;
  }
  trace.reached = all_reached();
  trace.clipped = state.clipped;
  trace.mean_distance = mean_distance(state.handles, state.targets);
  trace.final_state = std::move(state);
  return trace;
}

PsnrResult masked_psnr(const Image8& a, const Image8& b, const BinaryMask& mask) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
    throw ConfigError("PSNR needs images of equal size");
  }
  if (mask.width != a.width || mask.height != a.height) throw ConfigError("PSNR mask does not match the image size");
  if (mask.empty()) throw ConfigError("PSNR mask is empty");
  double sse = 0.0;
  std::size_t count = 0;
  for (int r = 0; r < a.height; ++r) {
    for (int c = 0; c < a.width; ++c) {
      if (!mask.at(r, c)) continue;
      for (int ch = 0; ch < a.channels; ++ch) {
        const double d = static_cast<double>(a.at(r, c, ch)) - b.at(r, c, ch);
        sse += d * d;
        ++count;
      }
    }
  }
  if (sse == 0.0) return {std::numeric_limits<double>::infinity(), true};
  const double mse = sse / static_cast<double>(count);
  return {10.0 * std::log10(255.0 * 255.0 / mse), false};
}

}  // namespace flowmesh
