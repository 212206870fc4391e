#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "memosort/linalg.hpp"
#include "memosort/rng.hpp"

namespace memosort {

// Feed-forward net: tanh between layers, identity after the last. A single
// layer is legal (a plain affine map).
struct Mlp {
  struct Layer {
    Matrix w;
    Vector b;
  };
  std::vector<Layer> layers;

  // dims = {in, hidden..., out}; at least {in, out}. All weights zero.
  static Mlp zeros(const std::vector<int>& dims);

  int in_dim() const { return static_cast<int>(layers.front().w.cols()); }
  int out_dim() const { return static_cast<int>(layers.back().w.rows()); }

  struct Cache {
    // inputs[i] is what layer i consumed; for i > 0 that is a tanh output,
    // which is all the backward pass needs for the activation derivative.
    std::vector<Vector> inputs;
  };

  Vector forward(const Vector& x) const;
  Vector forward(const Vector& x, Cache& cache) const;
  // Accumulates parameter gradients into `grad` (same shape as *this);
  // returns dL/dx.
  Vector backward(const Cache& cache, const Vector& gy, Mlp& grad) const;
};

// Single LSTM cell with the standard gate order (input, forget, candidate,
// output) stacked row-wise in wx, wh, and b.
struct LstmCell {
  Matrix wx;  // 4H x in
  Matrix wh;  // 4H x H
  Vector b;   // 4H

  static LstmCell zeros(int in, int hidden);

  int in_dim() const { return static_cast<int>(wx.cols()); }
  int hidden_dim() const { return static_cast<int>(wh.cols()); }

  struct State {
    Vector h, c;
  };
  static State zero_state(int hidden);

  struct Cache {
    Vector x, h_prev, c_prev;
    Vector i, f, g, o, c_new;
  };

  State forward(const Vector& x, const State& prev) const;
  State forward(const Vector& x, const State& prev, Cache& cache) const;
  // gh, gc: loss gradients w.r.t. the new state. Accumulates parameter
  // gradients into `grad` and state gradients into gh_prev / gc_prev;
  // returns dL/dx.
  Vector backward(const Cache& cache, const Vector& gh, const Vector& gc,
                  LstmCell& grad, Vector& gh_prev, Vector& gc_prev) const;
};

// Every learned parameter of the filter: the memory LSTM plus the four
// compensation heads. mlp1/mlp2 read the memory hidden state and emit the
// 8-dim transition offset and covariance factor; mlp3/mlp4 read the
// normalized predicted state and emit the 4-dim observation offset and
// covariance factor.
struct GateWeights {
  LstmCell lstm;
  Mlp mlp1, mlp2, mlp3, mlp4;

  // Fan-in uniform init for every layer except the heads' output layers,
  // which start at zero so an untrained filter is exactly the plain Kalman
  // filter. The LSTM forget-gate bias starts at 1 (standard retention init).
  // Draw order: lstm.wx, lstm.wh, then each head's hidden layer, every
  // matrix in column-major storage order.
  static GateWeights init(int state_dim, int meas_dim, int lstm_hidden,
                          int mlp_hidden, Rng& rng);
  static GateWeights zeros(int state_dim, int meas_dim, int lstm_hidden,
                           int mlp_hidden);
  static GateWeights zeros_like(const GateWeights& other);

  int state_dim() const { return static_cast<int>(lstm.wx.cols()); }
  int meas_dim() const { return static_cast<int>(mlp3.layers.back().w.rows()); }
  int lstm_hidden() const { return static_cast<int>(lstm.wh.cols()); }
  int mlp_hidden() const {
    return static_cast<int>(mlp1.layers.front().w.rows());
  }

  // Shape-chain consistency; throws std::invalid_argument on violation.
  void validate() const;

  // Flat parameter view in a fixed, documented order (lstm.wx, lstm.wh,
  // lstm.b, then mlp1..mlp4 each layer w then b, column-major per tensor).
  int param_count() const;
  Vector to_vector() const;
  void from_vector(const Vector& theta);
};

// Decoupled-weight-decay Adam on a flat parameter vector.
struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

class AdamW {
 public:
  AdamW(int dim, const AdamWConfig& cfg);

  void step(Vector& params, const Vector& grad);
  int steps_taken() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  AdamWConfig cfg_;
  Vector m_, v_;
  int t_ = 0;
};

// Weight-file problems, split by what the caller can do about them.
struct WeightsError : std::runtime_error {
  enum class Kind { io, version, shape, corrupt };
  WeightsError(Kind k, const std::string& msg)
      : std::runtime_error(msg), kind(k) {}
  Kind kind;
};

// JSON container with a format tag, schema version, architecture header, and
// per-tensor shape + column-major payload. Doubles round-trip bit-exactly.
// Only the canonical architecture (one hidden layer per head) serializes.
void save_weights(const GateWeights& w, const std::string& path);
GateWeights load_weights(const std::string& path);

}  // namespace memosort
