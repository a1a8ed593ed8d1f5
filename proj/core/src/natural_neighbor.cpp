// SPDX-License-Identifier: Apache-2.0
#include "fdmimo/natural_neighbor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <utility>

#include <spdlog/spdlog.h>

#include "fdmimo/types.hpp"

namespace fdmimo {

namespace {

constexpr double kCircleTol = 1e-10;

Delaunay::Triangle make_triangle(const std::vector<Point2>& pts, int a, int b, int c) {
  const Point2 A = pts[a], B = pts[b], C = pts[c];
  const double bx = B.x - A.x, by = B.y - A.y;
  const double cx = C.x - A.x, cy = C.y - A.y;
  const double d = 2.0 * (bx * cy - by * cx);
  if (d == 0.0) throw std::invalid_argument("degenerate triangle in triangulation");
  const double b2 = bx * bx + by * by;
  const double c2 = cx * cx + cy * cy;
  const double ux = (cy * b2 - by * c2) / d;
  const double uy = (bx * c2 - cx * b2) / d;
  Delaunay::Triangle t;
  // Store counter-clockwise.
  if (d > 0.0) {
    t.v = {a, b, c};
  } else {
    t.v = {a, c, b};
  }
  t.center = {A.x + ux, A.y + uy};
  t.radius2 = ux * ux + uy * uy;
  return t;
}

bool in_circle(const Delaunay::Triangle& t, Point2 p) {
  const double dx = p.x - t.center.x, dy = p.y - t.center.y;
  return dx * dx + dy * dy < t.radius2 * (1.0 - kCircleTol);
}

// Boundary of the union of the given triangles as directed edges a -> b with
// the cavity on the left.
std::vector<std::pair<int, int>> cavity_boundary(const std::vector<Delaunay::Triangle>& tris,
                                                 const std::vector<std::size_t>& bad) {
  std::map<std::pair<int, int>, int> count;
  for (auto i : bad) {
    const auto& v = tris[i].v;
    for (int e = 0; e < 3; ++e) {
      const int a = v[e], b = v[(e + 1) % 3];
      ++count[{std::min(a, b), std::max(a, b)}];
    }
  }
  std::vector<std::pair<int, int>> out;
  for (auto i : bad) {
    const auto& v = tris[i].v;
    for (int e = 0; e < 3; ++e) {
      const int a = v[e], b = v[(e + 1) % 3];
      if (count[{std::min(a, b), std::max(a, b)}] == 1) out.emplace_back(a, b);
    }
  }
  return out;
}

double polygon_area(std::vector<Point2> poly) {
  if (poly.size() < 3) return 0.0;
  Point2 c{0.0, 0.0};
  for (const auto& p : poly) {
    c.x += p.x;
    c.y += p.y;
  }
  c.x /= static_cast<double>(poly.size());
  c.y /= static_cast<double>(poly.size());
  std::sort(poly.begin(), poly.end(), [c](const Point2& a, const Point2& b) {
    return std::atan2(a.y - c.y, a.x - c.x) < std::atan2(b.y - c.y, b.x - c.x);
  });
  double area = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    area += p.x * q.y - q.x * p.y;
  }
  return 0.5 * std::abs(area);
}

}  // namespace

Delaunay::Delaunay(std::vector<Point2> points) : n_(points.size()), pts_(std::move(points)) {
  if (n_ < 3) throw std::invalid_argument("triangulation needs at least three points");
  double xmin = pts_[0].x, xmax = xmin, ymin = pts_[0].y, ymax = ymin;
  for (const auto& p : pts_) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw std::invalid_argument("non-finite sample point");
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const double span = std::max(xmax - xmin, ymax - ymin);
  if (span == 0.0) throw std::invalid_argument("all sample points coincide");
  {
    bool non_collinear = false;
    for (std::size_t i = 2; i < n_ && !non_collinear; ++i) {
      const double cross = (pts_[1].x - pts_[0].x) * (pts_[i].y - pts_[0].y) -
                           (pts_[1].y - pts_[0].y) * (pts_[i].x - pts_[0].x);
      non_collinear = std::abs(cross) > 1e-12 * span * span;
    }
    if (!non_collinear) throw std::invalid_argument("sample points are collinear");
  }
  const double cx = 0.5 * (xmin + xmax), cy = 0.5 * (ymin + ymax);
  const double big = 1e3 * span;
  pts_.push_back({cx - 2.0 * big, cy - big});
  pts_.push_back({cx + 2.0 * big, cy - big});
  pts_.push_back({cx, cy + 2.0 * big});
  const int s = static_cast<int>(n_);
  tris_.push_back(make_triangle(pts_, s, s + 1, s + 2));

  for (std::size_t i = 0; i < n_; ++i) {
    const Point2 p = pts_[i];
    for (std::size_t j = 0; j < i; ++j) {
      if (pts_[j].x == p.x && pts_[j].y == p.y) throw std::invalid_argument("duplicate sample point");
    }
    std::vector<std::size_t> bad;
    for (std::size_t t = 0; t < tris_.size(); ++t) {
      if (in_circle(tris_[t], p)) bad.push_back(t);
    }
    if (bad.empty()) throw std::logic_error("point insertion found no enclosing circumcircle");
    const auto boundary = cavity_boundary(tris_, bad);
    std::vector<Triangle> next;
    next.reserve(tris_.size() + boundary.size());
    std::size_t bi = 0;
    for (std::size_t t = 0; t < tris_.size(); ++t) {
      if (bi < bad.size() && bad[bi] == t) {
        ++bi;
        continue;
      }
      next.push_back(tris_[t]);
    }
    for (const auto& [a, b] : boundary) next.push_back(make_triangle(pts_, a, b, static_cast<int>(i)));
    tris_ = std::move(next);
  }
}

NNIWeights sibson_weights(const Delaunay& tri, Point2 query) {
  const auto& pts = tri.points();
  const std::size_t n = tri.sample_count();
  std::size_t nearest = 0;
  double nearest_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = pts[i].x - query.x, dy = pts[i].y - query.y;
    const double d = dx * dx + dy * dy;
    if (d < nearest_d) {
      nearest_d = d;
      nearest = i;
    }
  }
  NNIWeights out;
  if (nearest_d == 0.0) {
    out.indices = {nearest};
    out.weights = {1.0};
    return out;
  }

  const auto& tris = tri.triangles();
  std::vector<std::size_t> bad;
  bool touches_super = false;
  for (std::size_t t = 0; t < tris.size(); ++t) {
    if (in_circle(tris[t], query)) {
      bad.push_back(t);
      for (int v : tris[t].v) touches_super = touches_super || tri.is_super(v);
    }
  }
  if (bad.empty() || touches_super) {
    spdlog::debug("natural-neighbour query ({}, {}) is outside the hull, using nearest sample {}", query.x, query.y,
                  nearest);
    out.indices = {nearest};
    out.weights = {1.0};
    out.inside_hull = false;
    return out;
  }

  std::vector<Point2> ext = pts;
  ext.push_back(query);
  const int qi = static_cast<int>(ext.size() - 1);
  const auto boundary = cavity_boundary(tris, bad);
  // Circumcenters of the new triangles, keyed by the vertex they start from
  // and the vertex they end at.
  std::map<int, Point2> out_center, in_center;
  for (const auto& [a, b] : boundary) {
    const auto t = make_triangle(ext, a, b, qi);
    out_center[a] = t.center;
    in_center[b] = t.center;
  }

  std::vector<std::pair<std::size_t, double>> areas;
  double total = 0.0;
  for (const auto& [p, c_out] : out_center) {
    std::vector<Point2> poly{c_out, in_center.at(p)};
    for (auto t : bad) {
      const auto& v = tris[t].v;
      if (v[0] == p || v[1] == p || v[2] == p) poly.push_back(tris[t].center);
    }
    const double a = polygon_area(std::move(poly));
    areas.emplace_back(static_cast<std::size_t>(p), a);
    total += a;
  }
  if (!(total > 0.0)) throw NumericalError("natural-neighbour cell has zero area");
  for (const auto& [idx, a] : areas) {
    if (a <= 1e-14 * total) continue;
    out.indices.push_back(idx);
    out.weights.push_back(a / total);
  }
  double s = 0.0;
  for (double w : out.weights) s += w;
  for (double& w : out.weights) w /= s;
  return out;
}

int nni_cqi(const Delaunay& tri, std::span<const int> cqis, Point2 query) {
  if (cqis.size() != tri.sample_count()) throw std::invalid_argument("one CQI per sample is required");
  const auto w = sibson_weights(tri, query);
  double acc = 0.0;
  for (std::size_t i = 0; i < w.indices.size(); ++i) acc += w.weights[i] * cqis[w.indices[i]];
  return std::clamp(static_cast<int>(std::lround(acc)), kMinCqi, kMaxCqi);
}

}  // namespace fdmimo
