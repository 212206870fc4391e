#include "memosort/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace memosort {

BBox::BBox(double x, double y, double w, double h) : x_(x), y_(y), w_(w), h_(h) {
  if (!(std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h))) {
    throw std::invalid_argument("BBox: non-finite component");
  }
  if (!(w > 0.0 && h > 0.0)) {
    throw std::invalid_argument("BBox: nonpositive extent");
  }
}

void MatConfig::validate() const {
  if (m_slow < 0.0 || m_fast < 0.0 || n_slow < 0.0 || n_fast < 0.0 ||
      theta_center < 0.0 || theta_height < 0.0) {
    throw std::invalid_argument("MatConfig: negative parameter");
  }
}

double iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  // Areas from the same edge differences that formed the overlap, so
  // identical boxes divide to exactly 1.
  const double area_a = (a.right() - a.left()) * (a.bottom() - a.top());
  const double area_b = (b.right() - b.left()) * (b.bottom() - b.top());
  return inter / (area_a + area_b - inter);
}

BBox expand(const BBox& b, double p) {
  if (!(p >= 0.0)) throw std::invalid_argument("expand: p must be >= 0");
  const double f = 2.0 * p + 1.0;
  return BBox(b.x(), b.y(), f * b.w(), f * b.h());
}

double eiou(const BBox& a, const BBox& b, double p) {
  return iou(expand(a, p), expand(b, p));
}

double hiou(const BBox& a, const BBox& b, double q) {
  if (!(q >= 0.0)) throw std::invalid_argument("hiou: q must be >= 0");
  const double l = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top()));
  const double base = l / (a.h() + b.h() - l);
  return std::pow(base, q);  // pow(0, 0) == 1, so q = 0 ignores height
}

double mo_iou(const BBox& a, const BBox& b, double p, double q) {
  return eiou(a, b, p) * hiou(a, b, q);
}

MatParams mat_params(double vx, double vy, double vh, double w, double h,
                     const MatConfig& cfg) {
  const double center_speed = std::hypot(vx / w, vy / h);
  const double height_speed = std::abs(vh) / h;
  MatParams out;
  out.p = center_speed <= cfg.theta_center ? cfg.m_slow : cfg.m_fast;
  out.q = height_speed <= cfg.theta_height ? cfg.n_slow : cfg.n_fast;
  return out;
}

}  // namespace memosort
