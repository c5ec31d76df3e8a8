#pragma once

// Drag-editing kernel on small latent grids: DDIM inversion and its inverse,
// motion supervision with analytic gradients, latent descent, point tracking
// and the alternating drag loop, plus the masked evaluation metrics.

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "flowmesh/flow.hpp"
#include "flowmesh/geometry.hpp"
#include "flowmesh/raster.hpp"

namespace flowmesh {

/// H x W x C grid of doubles, channels interleaved. `timestep` tags latents.
struct LatentGrid {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;
  int timestep = 0;

  LatentGrid() = default;
  LatentGrid(int h, int w, int c, double value = 0.0);

  std::size_t size() const { return data.size(); }
  std::size_t index(int row, int col, int ch = 0) const {
    return (static_cast<std::size_t>(row) * width + col) * channels + ch;
  }
  double& at(int row, int col, int ch = 0) { return data[index(row, col, ch)]; }
  double at(int row, int col, int ch = 0) const { return data[index(row, col, ch)]; }
  bool same_shape(const LatentGrid& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }
  bool contains(int row, int col) const { return row >= 0 && col >= 0 && row < height && col < width; }
};

/// Cumulative alphas indexed by timestep; alpha_bar[0] == 1 is the clean signal.
struct NoiseSchedule {
  std::vector<double> alpha_bar;

  int steps() const { return static_cast<int>(alpha_bar.size()) - 1; }
  /// Linear betas over `train_steps`, subsampled to `steps` evenly spaced timesteps.
  static NoiseSchedule linear(int steps, double beta_start = 0.00085, double beta_end = 0.012, int train_steps = 1000);
  /// Throws ConfigError unless every value is in (0, 1] and non-increasing.
  void validate() const;
};

/// Noise predictor eps(z, t).
using EpsFn = std::function<LatentGrid(const LatentGrid& z, int t)>;

/// z_t = sqrt(a_t / a_{t-1}) z_{t-1} + (sqrt((1 - a_t) / a_{t-1}) - 1) eps(z_{t-1}, t - 1)
LatentGrid ddim_invert_step(const LatentGrid& z_prev, int t, const EpsFn& eps, const NoiseSchedule& schedule);
/// Solves the inversion step for z_{t-1} by fixed-point iteration on eps's
/// argument. Throws NumericalError when 5 iterations do not reach 1e-12.
LatentGrid ddim_sample_step(const LatentGrid& z_t, int t, const EpsFn& eps, const NoiseSchedule& schedule);
/// Inverts from timestep 0 up to `to` (default: the whole schedule).
LatentGrid ddim_invert(const LatentGrid& z0, const EpsFn& eps, const NoiseSchedule& schedule, int to = -1);
LatentGrid ddim_sample(const LatentGrid& z_t, const EpsFn& eps, const NoiseSchedule& schedule);

/// Feature extractor with its vector-Jacobian product.
class FeatureFn {
 public:
  virtual ~FeatureFn() = default;
  virtual LatentGrid forward(const LatentGrid& z) const = 0;
  /// Gradient with respect to z of <grad_features, forward(z)>.
  virtual LatentGrid vjp(const LatentGrid& z, const LatentGrid& grad_features) const = 0;
  virtual std::string name() const = 0;
};

class IdentityFeature final : public FeatureFn {
 public:
  LatentGrid forward(const LatentGrid& z) const override;
  LatentGrid vjp(const LatentGrid& z, const LatentGrid& grad_features) const override;
  std::string name() const override { return "identity"; }
};

/// Per-channel 5x5 Gaussian, edges clamped.
class GaussianBlurFeature final : public FeatureFn {
 public:
  explicit GaussianBlurFeature(double sigma = 1.0);
  LatentGrid forward(const LatentGrid& z) const override;
  LatentGrid vjp(const LatentGrid& z, const LatentGrid& grad_features) const override;
  std::string name() const override { return "gaussian"; }

 private:
  std::array<double, 5> taps_{};
};

/// Wraps an arbitrary mapping; the gradient comes from central differences.
class OpaqueFeature final : public FeatureFn {
 public:
  explicit OpaqueFeature(std::function<LatentGrid(const LatentGrid&)> fn, double step = 1e-6);
  LatentGrid forward(const LatentGrid& z) const override;
  LatentGrid vjp(const LatentGrid& z, const LatentGrid& grad_features) const override;
  std::string name() const override { return "opaque"; }

 private:
  std::function<LatentGrid(const LatentGrid&)> fn_;
  double step_;
};

std::unique_ptr<FeatureFn> make_feature(const std::string& name);

struct BilinearSample {
  std::vector<double> value;  // one per channel
  bool clipped = false;
};

/// Bilinear read at sub-pixel (x = column, y = row), coordinates clamped to the
/// grid. Exact at integer coordinates.
BilinearSample sample_bilinear(const LatentGrid& grid, const Vec2& point);

struct DragState {
  LatentGrid latent;     // z^k, the grid being optimized
  LatentGrid reference;  // z^0
  std::vector<Vec2> handles;
  std::vector<Vec2> targets;
  BinaryMask edit_mask;  // W x H; set where editing is allowed
  int r_sup = 1;
  int r_track = 3;
  double lambda_reg = 0.1;
  double eta = 0.01;
  int iteration = 0;
  std::vector<double> loss_history;
  bool clipped = false;  // some supervision sample fell outside the grid

  /// Starts from `latent` with z^0 = latent and a full edit mask when `mask` is empty.
  static DragState start(LatentGrid latent, std::vector<Vec2> handles, std::vector<Vec2> targets,
                         std::optional<BinaryMask> mask = std::nullopt);
  /// Throws ConfigError on mismatched counts, negative radii, eta <= 0 or shapes.
  void validate() const;
};

/// Points that drive motion supervision: each moves toward its own target.
struct Supervision {
  std::vector<Vec2> points;
  std::vector<Vec2> targets;
};

/// Anchors move to anchor + displacement.
Supervision supervision_from_flow(const SampledFlow& flow);

struct LossResult {
  double loss = 0.0;
  LatentGrid gradient;
  bool clipped = false;  // some patch sample fell outside the grid
};

/// Receives every shifted feature location the loss reads.
using SampleObserver = std::function<void(const Vec2&)>;

LossResult motion_supervision_loss(const DragState& state, const FeatureFn& feature, const Supervision& supervision,
                                   const SampleObserver& observer = {});

/// `iterations` steps of z <- z - eta * dL/dz; appends every loss to the history.
DragState optimize_latent(DragState state, const FeatureFn& feature, const Supervision& supervision, int iterations,
                          const SampleObserver& observer = {});

/// Features at the starting points, read from the given latent.
std::vector<std::vector<double>> capture_reference(const FeatureFn& feature, const LatentGrid& latent,
                                                   std::span<const Vec2> points);

/// Best L1 match of each reference inside the (2 r_track + 1)^2 integer window
/// around the rounded point; row-major scan, first strict minimum wins.
std::vector<Vec2> track_points(const LatentGrid& latent, const FeatureFn& feature, std::span<const Vec2> points,
                               const std::vector<std::vector<double>>& reference, int r_track);

struct DragParams {
  int alternations = 80;
  int ms_iters_per_alt = 1;
  double stop_distance = 0.5;  // pixels
  std::optional<SampledFlow> use_flow;
};

struct DragTrace {
  std::vector<double> losses;                 // last loss of each alternation
  std::vector<std::vector<Vec2>> handle_paths;  // [alternation][handle], starting positions first
  int alternations = 0;
  bool reached = false;
  bool clipped = false;
  double mean_distance = 0.0;
  DragState final_state;
};

/// Alternates motion supervision and tracking. With a sampled flow, the flow
/// anchors are supervised and tracked toward anchor + displacement while the
/// user handles are only tracked. Stops early once every supervised point is
/// within stop_distance of its target.
DragTrace run_drag(const DragState& state, const FeatureFn& feature, const DragParams& params,
                   const SampleObserver& observer = {});

struct PsnrResult {
  double db = 0.0;
  bool infinite = false;
};

PsnrResult masked_psnr(const Image8& a, const Image8& b, const BinaryMask& mask);
double mean_distance(std::span<const Vec2> handles, std::span<const Vec2> targets);

}  // namespace flowmesh
