#include "flowmesh/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "flowmesh/errors.hpp"

namespace flowmesh {

double FlowVector::magnitude() const { return std::hypot(dx, dy); }

FlowField compute_flow(const Projection2D& before, const Projection2D& after) {
  if (before.points.size() != after.points.size()) {
    throw StructuralError("flow needs equal vertex counts, got " + std::to_string(before.points.size()) + " and " +
                          std::to_string(after.points.size()));
  }
  FlowField flow;
  flow.width = before.width;
  flow.height = before.height;
  flow.vectors.reserve(before.points.size());
  for (std::size_t i = 0; i < before.points.size(); ++i) {
    const Vec2& p = before.points[i];
    const Vec2& q = after.points[i];
    flow.vectors.push_back({p.x(), p.y(), q.x() - p.x(), q.y() - p.y()});
  }
  return flow;
}

std::string_view to_string(SamplingStrategy strategy) {
  return strategy == SamplingStrategy::Magnitude ? "magnitude" : "uniform";
}

SamplingStrategy parse_sampling_strategy(std::string_view text) {
  if (text == "magnitude") return SamplingStrategy::Magnitude;
  if (text == "uniform") return SamplingStrategy::Uniform;
  throw ConfigError("unknown sampling strategy '" + std::string(text) + "' (expected magnitude or uniform)");
}

namespace {

int nearest_anchor(const FlowField& flow, double x, double y, double radius) {
  int best = -1;
  double best_d2 = radius * radius;
  for (std::size_t i = 0; i < flow.vectors.size(); ++i) {
    const double ddx = flow.vectors[i].x - x;
    const double ddy = flow.vectors[i].y - y;
    const double d2 = ddx * ddx + ddy * ddy;
    if (d2 < best_d2 || (best < 0 && d2 <= best_d2)) {
      best_d2 = d2;
      best = static_cast<int>(i);
    }
  }
  return best;
}

double lattice(int lo, int hi, int i, int n) {
  if (n == 1) return 0.5 * (lo + hi);
  return lo + (hi - lo) * static_cast<double>(i) / (n - 1);
}

void check_k(const std::vector<FlowVector>& candidates, int k) {
  if (k < 1) throw ConfigError("sample count must be >= 1, got " + std::to_string(k));
  if (candidates.empty()) throw EmptyResultError("no flow candidates to sample from");
}

}  // namespace

std::vector<FlowVector> grid_candidates(const FlowField& flow, const BinaryMask& mask, const GridOptions& options) {
  if (options.n < 1) throw ConfigError("grid size must be >= 1, got " + std::to_string(options.n));
  if (!(options.capture_radius >= 0.0)) throw ConfigError("capture radius must be >= 0");
  const PixelBox box = mask.bounding_box();
  if (box.empty()) throw ConfigError("edit mask is empty");
  std::vector<FlowVector> out;
  for (int r = 0; r < options.n; ++r) {
    const double y = lattice(box.row_min, box.row_max, r, options.n);
    for (int c = 0; c < options.n; ++c) {
      const double x = lattice(box.col_min, box.col_max, c, options.n);
      if (!mask.contains(x, y)) continue;
      const int v = nearest_anchor(flow, x, y, options.capture_radius);
      if (v < 0) continue;
      const FlowVector& f = flow.vectors[static_cast<std::size_t>(v)];
      out.push_back({x, y, f.dx, f.dy});
    }
  }
  return out;
}

SampledFlow sample_magnitude(const std::vector<FlowVector>& candidates, int k) {
  check_k(candidates, k);
  std::vector<FlowVector> sorted = candidates;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const FlowVector& a, const FlowVector& b) { return a.magnitude() > b.magnitude(); });
  sorted.resize(std::min(sorted.size(), static_cast<std::size_t>(k)));
  return {std::move(sorted), SamplingStrategy::Magnitude, k, 0};
}

SampledFlow sample_uniform(const std::vector<FlowVector>& candidates, int k) {
  check_k(candidates, k);
  const std::size_t n = candidates.size();
  const std::size_t stride = (n + static_cast<std::size_t>(k) - 1) / static_cast<std::size_t>(k);
  SampledFlow out{{}, SamplingStrategy::Uniform, k, 0};
  for (std::size_t i = 0; i < n && out.vectors.size() < static_cast<std::size_t>(k); i += stride) {
    out.vectors.push_back(candidates[i]);
  }
  return out;
}

SampledFlow sample_flow(const std::vector<FlowVector>& candidates, SamplingStrategy strategy, int k) {
  return strategy == SamplingStrategy::Magnitude ? sample_magnitude(candidates, k) : sample_uniform(candidates, k);
}

std::optional<Vec2> interpolate_flow(const Mesh& mesh, const FlowField& flow, const Vec2& point,
                                     double fallback_radius) {
  if (mesh.vertices.size() != flow.vectors.size()) {
    throw StructuralError("flow field does not match the mesh vertex count");
  }
  auto anchor = [&](int v) {
    const FlowVector& f = flow.vectors[static_cast<std::size_t>(v)];
    return Vec2(f.x, f.y);
  };
  constexpr double kEdgeSlack = 1e-9;
  for (const Face& face : mesh.faces) {
    const Vec2 a = anchor(face[0]);
    const Vec2 b = anchor(face[1]);
    const Vec2 c = anchor(face[2]);
    const double det = (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
    if (std::abs(det) < 1e-12) continue;
    const double l1 = ((b.x() - point.x()) * (c.y() - point.y()) - (c.x() - point.x()) * (b.y() - point.y())) / det;
    const double l2 = ((c.x() - point.x()) * (a.y() - point.y()) - (a.x() - point.x()) * (c.y() - point.y())) / det;
    const double l3 = 1.0 - l1 - l2;
    if (l1 < -kEdgeSlack || l2 < -kEdgeSlack || l3 < -kEdgeSlack) continue;
    Vec2 d = Vec2::Zero();
    const double lam[3] = {l1, l2, l3};
    for (int k = 0; k < 3; ++k) {
      const FlowVector& f = flow.vectors[static_cast<std::size_t>(face[static_cast<std::size_t>(k)])];
      d += lam[k] * Vec2(f.dx, f.dy);
    }
    return d;
  }
  const int v = nearest_anchor(flow, point.x(), point.y(), fallback_radius);
  if (v < 0) return std::nullopt;
  const FlowVector& f = flow.vectors[static_cast<std::size_t>(v)];
  return Vec2(f.dx, f.dy);
}

}  // namespace flowmesh
