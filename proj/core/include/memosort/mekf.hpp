#pragma once

#include <atomic>

#include "memosort/geometry.hpp"
#include "memosort/linalg.hpp"
#include "memosort/nnet.hpp"

namespace memosort {

// LSTM carry of one track's motion history; m_t is identified with h.
struct Memory {
  Vector h, c;
};

// One track's filter state. mean is [x, y, w, h, vx, vy, vw, vh] in pixels
// and pixels/frame; cov is 8x8. ref_w/ref_h hold the width and height of the
// last accepted detection: the process/measurement noise is built from that
// scale rather than the current mean, keeping the noise independent of the
// learned compensations (data-only, so training gradients never flow
// through Q or R).
struct TrackState {
  Vector mean;
  Matrix cov;
  Memory memory;
  double ref_w = 0.0;
  double ref_h = 0.0;
};

// Everything spg_predict produces and sug_update consumes.
struct Prediction {
  Vector mean;     // compensated prediction
  Matrix cov;      // predicted covariance
  Vector delta_f;  // transition compensation actually applied (0 on failsafe)
  Memory memory;
  double ref_w = 0.0;
  double ref_h = 0.0;
};

// Scale-proportional diagonal noise in the SORT tradition: standard
// deviations are fractions of the reference box extents, per frame.
struct NoiseConfig {
  double sigma_p = 0.05;     // position/size process noise
  double sigma_v = 0.00625;  // velocity process noise
  double sigma_m = 0.05;     // measurement noise
  double min_extent = 1.0;   // lower clamp on adopted w/h (px)
  double init_vel_factor = 10.0;  // velocity std relative to position std

  void validate() const;
};

// Failsafe counters. Any non-finite network output downgrades that step to
// the plain Kalman form instead of poisoning the track.
struct Diagnostics {
  long spg_failsafes = 0;   // transition compensation zeroed
  long sug_failsafes = 0;   // observation compensation zeroed
  long solve_failures = 0;  // innovation covariance rejected; update skipped
  long memory_resets = 0;   // non-finite memory zeroed
};

// The memory-assisted filter: constant-velocity Kalman core plus four
// learned compensation heads and an LSTM memory. With the heads' outputs at
// zero it is exactly the plain Kalman filter. All methods are const and
// safe to call concurrently on distinct tracks.
class MekfModel {
 public:
  // Weights must have state_dim 8 and meas_dim 4; frame dims are the
  // normalization scale for every network input and output.
  MekfModel(GateWeights weights, NoiseConfig noise, double frame_w,
            double frame_h);

  const GateWeights& weights() const { return weights_; }
  const NoiseConfig& noise() const { return noise_; }
  double frame_w() const { return frame_w_; }
  double frame_h() const { return frame_h_; }

  // Fresh track: detection box with zero velocities, diagonal covariance
  // with inflated velocity uncertainty, zeroed memory.
  TrackState init_track(const BBox& det) const;

  // One LSTM step on the normalized state mean. Non-finite output resets
  // the memory to zero and counts a diagnostic.
  Memory mug_update(const Memory& mem, const Vector& state_mean) const;

  // Compensated prediction: mean = F*state + MLP1(memory), cov = F P F^T +
  // outer(MLP2(memory)) + Q.
  Prediction predict(const TrackState& s) const;

  // Compensated update on the predicted state: gain from H P' H^T + R +
  // outer(MLP4(pred)), innovation z - H pred - MLP3(pred). The memory then
  // advances on the adopted mean. If the innovation covariance is not SPD
  // the update is skipped and the prediction adopted.
  TrackState update(const Prediction& p, const BBox& det) const;

  // Coasting: adopt the prediction as the new state, advance memory on it.
  TrackState coast(const Prediction& p) const;

  Diagnostics diagnostics() const;
  void reset_diagnostics() const;

  Matrix transition() const { return f_; }
  Matrix observation() const { return h_; }
  // Diagonal process/measurement noise for a reference box scale.
  Matrix process_noise(double ref_w, double ref_h) const;
  Matrix measurement_noise(double ref_w, double ref_h) const;

 private:
  Vector normalize8(const Vector& v) const;
  TrackState adopt(const Prediction& p, const Vector& mean,
                   const Matrix& cov, double ref_w, double ref_h) const;

  GateWeights weights_;
  NoiseConfig noise_;
  double frame_w_, frame_h_;
  Vector scale8_, scale4_;
  Matrix f_, h_;
  mutable std::atomic<long> spg_failsafes_{0};
  mutable std::atomic<long> sug_failsafes_{0};
  mutable std::atomic<long> solve_failures_{0};
  mutable std::atomic<long> memory_resets_{0};
};

}  // namespace memosort
