// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace fdmimo {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Bowyer-Watson Delaunay triangulation of a planar point set, built once.
/// Triangles touching the enclosing super-triangle are kept internally so
/// that insertion cavities can detect queries outside the convex hull.
class Delaunay {
 public:
  struct Triangle {
    std::array<int, 3> v;  // indices into points(); >= sample count means super vertex
    Point2 center;
    double radius2 = 0.0;
  };

  /// Needs at least three non-collinear, pairwise distinct points.
  explicit Delaunay(std::vector<Point2> points);

  std::size_t sample_count() const { return n_; }
  const std::vector<Point2>& points() const { return pts_; }
  const std::vector<Triangle>& triangles() const { return tris_; }
  bool is_super(int v) const { return v >= static_cast<int>(n_); }

 private:
  std::size_t n_;
  std::vector<Point2> pts_;  // samples followed by the three super vertices
  std::vector<Triangle> tris_;
};

struct NNIWeights {
  std::vector<std::size_t> indices;  // contributing samples, ascending
  std::vector<double> weights;       // aligned with indices, sum 1
  bool inside_hull = true;           // false: fell back to the nearest sample
};

/// Sibson weights of `query`: the share of the query's inserted Voronoi cell
/// taken from each natural neighbour. A query on a sample gets weight 1 on
/// it; a query outside the hull gets weight 1 on the nearest sample.
NNIWeights sibson_weights(const Delaunay& tri, Point2 query);

/// round(sum w_i cqi_i) clamped to 1..15.
int nni_cqi(const Delaunay& tri, std::span<const int> cqis, Point2 query);

}  // namespace fdmimo
