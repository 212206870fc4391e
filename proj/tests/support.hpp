#pragma once

#include <algorithm>
#include <cmath>

#include "memosort/geometry.hpp"
#include "memosort/rng.hpp"

// Shared helpers for the unit tests.
namespace testsupport {

using memosort::BBox;
using memosort::Rng;

inline BBox random_box(Rng& rng, double span = 100.0, double min_ext = 1.0,
                       double max_ext = 30.0) {
  return BBox(rng.uniform(0.0, span), rng.uniform(0.0, span),
              rng.uniform(min_ext, max_ext), rng.uniform(min_ext, max_ext));
}

// Monte-Carlo IoU estimate: sample the joint bounding rectangle and count
// membership. Accuracy ~1/sqrt(samples); used as an independent oracle.
inline double mc_iou(const BBox& a, const BBox& b, Rng& rng,
                     int samples = 1000000) {
  const double lo_x = std::min(a.left(), b.left());
  const double hi_x = std::max(a.right(), b.right());
  const double lo_y = std::min(a.top(), b.top());
  const double hi_y = std::max(a.bottom(), b.bottom());
  long in_union = 0, in_both = 0;
  for (int i = 0; i < samples; ++i) {
    const double x = rng.uniform(lo_x, hi_x);
    const double y = rng.uniform(lo_y, hi_y);
    const bool in_a =
        x >= a.left() && x <= a.right() && y >= a.top() && y <= a.bottom();
    const bool in_b =
        x >= b.left() && x <= b.right() && y >= b.top() && y <= b.bottom();
    if (in_a || in_b) ++in_union;
    if (in_a && in_b) ++in_both;
  }
  return in_union == 0 ? 0.0
                       : static_cast<double>(in_both) /
                             static_cast<double>(in_union);
}

}  // namespace testsupport
