#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <span>

#include "parasent/corpus.hpp"
#include "parasent/matrix.hpp"

namespace parasent {

inline constexpr double kDefaultMargin = 0.4;

// Number of cosine evaluations that hit a zero-norm vector.
std::uint64_t degenerate_cosine_count();
void note_degenerate_cosine();

// 1 - cos(u, v). A zero-norm input counts as orthogonal (distance 1).
template <class T>
double cosine_distance(std::span<const T> u, std::span<const T> v) {
  const double uu = dot<T>(u, u);
  const double vv = dot<T>(v, v);
  if (uu == 0.0 || vv == 0.0) {
    note_degenerate_cosine();
    return 1.0;
  }
  const double cos = dot<T>(u, v) / std::sqrt(uu * vv);
  return 1.0 - std::clamp(cos, -1.0, 1.0);
}

// du += scale * d(dist)/du, same for dv. Degenerate inputs contribute no
// gradient and are not counted again.
template <class T>
void cosine_distance_backward(std::span<const T> u, std::span<const T> v, double scale,
                              std::span<T> du, std::span<T> dv) {
  const double uu = dot<T>(u, u);
  const double vv = dot<T>(v, v);
  if (uu == 0.0 || vv == 0.0) return;
  const double nu = std::sqrt(uu);
  const double nv = std::sqrt(vv);
  const double cos = dot<T>(u, v) / (nu * nv);
  // d(1 - cos)/du = -(v / (|u||v|) - cos * u / |u|^2)
  const double a = 1.0 / (nu * nv);
  const double bu = cos / uu;
  const double bv = cos / vv;
  for (std::size_t k = 0; k < u.size(); ++k) {
    du[k] += static_cast<T>(-scale * (a * double(v[k]) - bu * double(u[k])));
    dv[k] += static_cast<T>(-scale * (a * double(u[k]) - bv * double(v[k])));
  }
}

// Positives are pulled together (loss = distance); negatives are pushed
// out to the margin (loss = max(0, m - distance)^2).
// NaN distances propagate; std::max would otherwise turn them into 0.
inline double margin_loss(double distance, Label label, double margin) {
  if (label == Label::positive || std::isnan(distance)) return distance;
  const double gap = std::max(0.0, margin - distance);
  return gap * gap;
}

// d(margin_loss)/d(distance).
inline double margin_loss_grad(double distance, Label label, double margin) {
  if (std::isnan(distance)) return distance;
  if (label == Label::positive) return 1.0;
  return -2.0 * std::max(0.0, margin - distance);
}

}  // namespace parasent
