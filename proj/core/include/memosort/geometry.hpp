#pragma once

#include <stdexcept>

namespace memosort {

// Axis-aligned box in center format: (x, y) is the box center, w and h the
// full extents, all in pixels. Nonpositive or non-finite extents are rejected
// at construction; detectors should never emit them and silent clamps hide
// bugs upstream.
class BBox {
 public:
  BBox(double x, double y, double w, double h);

  double x() const { return x_; }
  double y() const { return y_; }
  double w() const { return w_; }
  double h() const { return h_; }

  double left() const { return x_ - 0.5 * w_; }
  double right() const { return x_ + 0.5 * w_; }
  double top() const { return y_ - 0.5 * h_; }
  double bottom() const { return y_ + 0.5 * h_; }
  double area() const { return w_ * h_; }

 private:
  double x_, y_, w_, h_;
};

// Speed-adaptive expansion/height parameters. Defaults are the DanceTrack
// operating point: expansion levels 2/1, height exponents 0.5/0.6, and the
// 50th/70th-percentile speed thresholds 0.0406 and 0.0090.
struct MatConfig {
  double m_slow = 2.0;
  double m_fast = 1.0;
  double n_slow = 0.5;
  double n_fast = 0.6;
  double theta_center = 0.0406;
  double theta_height = 0.0090;

  void validate() const;
};

struct MatParams {
  double p;  // expansion level
  double q;  // height exponent
};

// Intersection over union of two boxes; 0 when disjoint, 1 on identity.
double iou(const BBox& a, const BBox& b);

// Same center, width and height scaled by (2p + 1). p = 0 is the identity.
BBox expand(const BBox& b, double p);

// IoU of the two boxes after expanding both by p.
double eiou(const BBox& a, const BBox& b, double p);

// Vertical 1-D IoU raised to the power q; q = 0 gives 1 for any pair
// (0^0 is taken as 1, so q = 0 means "ignore height").
double hiou(const BBox& a, const BBox& b, double q);

// eiou(a, b, p) * hiou(a, b, q); degenerates to plain IoU at p = q = 0.
double mo_iou(const BBox& a, const BBox& b, double p, double q);

// Selects (p, q) from the normalized center speed sqrt((vx/w)^2 + (vy/h)^2)
// and normalized height speed |vh|/h. Slow levels apply at or below the
// thresholds; velocities come from the filtered state of the previous frame.
MatParams mat_params(double vx, double vy, double vh, double w, double h,
                     const MatConfig& cfg);

}  // namespace memosort
