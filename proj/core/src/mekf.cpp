#include "memosort/mekf.hpp"

#include <cmath>

namespace memosort {
namespace {

bool finite(const Vector& v) { return v.allFinite(); }

}  // namespace

void NoiseConfig::validate() const {
  if (!(sigma_p > 0.0) || !(sigma_v > 0.0) || !(sigma_m > 0.0)) {
    throw std::invalid_argument("noise: sigmas must be positive");
  }
  if (!(min_extent >= 0.0) || !(init_vel_factor > 0.0)) {
    throw std::invalid_argument("noise: bad clamp or velocity factor");
  }
}

MekfModel::MekfModel(GateWeights weights, NoiseConfig noise, double frame_w,
                     double frame_h)
    : weights_(std::move(weights)),
      noise_(noise),
      frame_w_(frame_w),
      frame_h_(frame_h) {
  weights_.validate();
  noise_.validate();
  if (weights_.state_dim() != 8 || weights_.meas_dim() != 4) {
    throw std::invalid_argument("mekf: weights must be 8-state / 4-meas");
  }
  if (!(frame_w > 0.0) || !(frame_h > 0.0) || !std::isfinite(frame_w) ||
      !std::isfinite(frame_h)) {
    throw std::invalid_argument("mekf: frame dimensions must be positive");
  }
  scale8_ = Vector(8);
  scale8_ << frame_w_, frame_h_, frame_w_, frame_h_, frame_w_, frame_h_,
      frame_w_, frame_h_;
  scale4_ = scale8_.head(4);
  f_ = Matrix::Identity(8, 8);
  f_.block(0, 4, 4, 4) = Matrix::Identity(4, 4);
  h_ = Matrix::Zero(4, 8);
  h_.block(0, 0, 4, 4) = Matrix::Identity(4, 4);
}

Vector MekfModel::normalize8(const Vector& v) const {
  return v.cwiseQuotient(scale8_);
}

Matrix MekfModel::process_noise(double ref_w, double ref_h) const {
  Vector std(8);
  std << noise_.sigma_p * ref_w, noise_.sigma_p * ref_h,
      noise_.sigma_p * ref_w, noise_.sigma_p * ref_h, noise_.sigma_v * ref_w,
      noise_.sigma_v * ref_h, noise_.sigma_v * ref_w, noise_.sigma_v * ref_h;
  return std.array().square().matrix().asDiagonal();
}

Matrix MekfModel::measurement_noise(double ref_w, double ref_h) const {
  Vector std(4);
  std << noise_.sigma_m * ref_w, noise_.sigma_m * ref_h,
      noise_.sigma_m * ref_w, noise_.sigma_m * ref_h;
  return std.array().square().matrix().asDiagonal();
}

TrackState MekfModel::init_track(const BBox& det) const {
  TrackState s;
  s.mean = Vector::Zero(8);
  s.mean << det.x(), det.y(), std::max(det.w(), noise_.min_extent),
      std::max(det.h(), noise_.min_extent), 0.0, 0.0, 0.0, 0.0;
  s.ref_w = det.w();
  s.ref_h = det.h();
  Vector std(8);
  const double pw = 2.0 * noise_.sigma_m * s.ref_w;
  const double ph = 2.0 * noise_.sigma_m * s.ref_h;
  std << pw, ph, pw, ph, noise_.init_vel_factor * pw,
      noise_.init_vel_factor * ph, noise_.init_vel_factor * pw,
      noise_.init_vel_factor * ph;
  s.cov = std.array().square().matrix().asDiagonal();
  s.memory.h = Vector::Zero(weights_.lstm_hidden());
  s.memory.c = Vector::Zero(weights_.lstm_hidden());
  return s;
}

Memory MekfModel::mug_update(const Memory& mem, const Vector& state_mean) const {
  const LstmCell::State next =
      weights_.lstm.forward(normalize8(state_mean), {mem.h, mem.c});
  if (!finite(next.h) || !finite(next.c)) {
    memory_resets_.fetch_add(1, std::memory_order_relaxed);
    return {Vector::Zero(weights_.lstm_hidden()),
            Vector::Zero(weights_.lstm_hidden())};
  }
  return {next.h, next.c};
}

Prediction MekfModel::predict(const TrackState& s) const {
  Prediction p;
  p.memory = s.memory;
  p.ref_w = s.ref_w;
  p.ref_h = s.ref_h;
  Vector delta = weights_.mlp1.forward(s.memory.h).cwiseProduct(scale8_);
  Vector pf_factor = weights_.mlp2.forward(s.memory.h).cwiseProduct(scale8_);
  if (!finite(delta) || !finite(pf_factor)) {
    spg_failsafes_.fetch_add(1, std::memory_order_relaxed);
    delta = Vector::Zero(8);
    pf_factor = Vector::Zero(8);
  }
  p.delta_f = delta;
  p.mean = f_ * s.mean + delta;
  p.cov = symmetrized(f_ * s.cov * f_.transpose() + outer(pf_factor) +
                      process_noise(s.ref_w, s.ref_h));
  return p;
}

TrackState MekfModel::adopt(const Prediction& p, const Vector& mean,
                            const Matrix& cov, double ref_w,
                            double ref_h) const {
  TrackState s;
  s.mean = mean;
  s.mean(2) = std::max(s.mean(2), noise_.min_extent);
  s.mean(3) = std::max(s.mean(3), noise_.min_extent);
  s.cov = symmetrized(cov);
  s.ref_w = ref_w;
  s.ref_h = ref_h;
  s.memory = mug_update(p.memory, s.mean);
  return s;
}

TrackState MekfModel::update(const Prediction& p, const BBox& det) const {
  const Vector pred_norm = normalize8(p.mean);
  Vector delta_h = weights_.mlp3.forward(pred_norm).cwiseProduct(scale4_);
  Vector ph_factor = weights_.mlp4.forward(pred_norm).cwiseProduct(scale4_);
  if (!finite(delta_h) || !finite(ph_factor)) {
    sug_failsafes_.fetch_add(1, std::memory_order_relaxed);
    delta_h = Vector::Zero(4);
    ph_factor = Vector::Zero(4);
  }
  Vector z(4);
  z << det.x(), det.y(), det.w(), det.h();
  const Matrix s_mat =
      symmetrized(h_ * p.cov * h_.transpose() + outer(ph_factor) +
                  measurement_noise(p.ref_w, p.ref_h));
  Matrix gain;
  try {
    gain = spd_solve(s_mat, h_ * p.cov).transpose();
  } catch (const NotSpdError&) {
    solve_failures_.fetch_add(1, std::memory_order_relaxed);
    return adopt(p, p.mean, p.cov, p.ref_w, p.ref_h);
  }
  const Vector innovation = z - h_ * p.mean - delta_h;
  const Vector mean = p.mean + gain * innovation;
  const Matrix cov = (Matrix::Identity(8, 8) - gain * h_) * p.cov;
  return adopt(p, mean, cov, det.w(), det.h());
}

TrackState MekfModel::coast(const Prediction& p) const {
  return adopt(p, p.mean, p.cov, p.ref_w, p.ref_h);
}

Diagnostics MekfModel::diagnostics() const {
  Diagnostics d;
  d.spg_failsafes = spg_failsafes_.load(std::memory_order_relaxed);
  d.sug_failsafes = sug_failsafes_.load(std::memory_order_relaxed);
  d.solve_failures = solve_failures_.load(std::memory_order_relaxed);
  d.memory_resets = memory_resets_.load(std::memory_order_relaxed);
  return d;
}

void MekfModel::reset_diagnostics() const {
  spg_failsafes_.store(0, std::memory_order_relaxed);
  sug_failsafes_.store(0, std::memory_order_relaxed);
  solve_failures_.store(0, std::memory_order_relaxed);
  memory_resets_.store(0, std::memory_order_relaxed);
}

}  // namespace memosort
