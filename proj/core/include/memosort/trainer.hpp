#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "memosort/mekf.hpp"
#include "memosort/nnet.hpp"
#include "memosort/synthgen.hpp"

namespace memosort::train {

struct TrainConfig {
  AdamWConfig opt;          // lr 1e-4, AdamW(0.9, 0.999, 1e-8, wd 1e-4)
  int window = 20;          // frames per training window
  int stride = 0;           // window start spacing; 0 means window / 2
  double min_coverage = 0.8;  // fraction of window frames with a detection
  int batch = 16;
  int epochs = 30;
  double alpha_pred = 1.0;  // prediction NLL weight
  double alpha_meas = 0.1;  // measurement residual weight
  double val_split = 0.2;
  double grad_clip = 5.0;   // global gradient norm ceiling
  std::uint64_t seed = 1;

  void validate() const;
};

// One supervised example: a single target over consecutive frames, with the
// (possibly missing) detection of each frame. The first frame always has a
// detection — it initializes the track.
struct Window {
  double frame_w = 0.0, frame_h = 0.0;
  std::vector<BBox> truth;
  std::vector<std::optional<BBox>> dets;
};

// Slices scenarios into per-target windows of cfg.window frames, spaced by
// cfg.stride, keeping only windows with a detection on their first frame and
// detection coverage of at least cfg.min_coverage.
std::vector<Window> build_dataset(const std::vector<synth::Scenario>& scenarios,
                                  const TrainConfig& cfg);

// Loss of one window: run the filter with teacher forcing (update on the
// frame's detection, coast on a miss); per predicted step accumulate
// alpha_pred * Gaussian NLL of the truth box under the predicted mean and
// covariance diagonal, plus alpha_meas * squared innovation when a detection
// arrives; average over the window's predicted steps. Throws
// std::runtime_error if anything goes non-finite.
double window_loss(const Window& win, const GateWeights& w,
                   const NoiseConfig& noise, const TrainConfig& cfg);

// Same forward pass plus exact reverse-mode gradients through the full
// filter recursion (both network heads and the Kalman mean/covariance
// algebra), accumulated into grad. Returns the loss.
double window_loss_grad(const Window& win, const GateWeights& w,
                        const NoiseConfig& noise, const TrainConfig& cfg,
                        GateWeights& grad);

// Forward pass only, exposing each step's adopted filter state (the state
// after the frame's update or coast; index 0 is the initial track). The
// training recursion never clamps extents; parity with the deployed filter
// holds whenever box extents stay above the configured minimum.
std::vector<TrackState> window_states(const Window& win, const GateWeights& w,
                                      const NoiseConfig& noise);

struct EpochLog {
  int epoch = 0;  // 0 is the untrained baseline
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  GateWeights weights;  // best validation loss (initial weights count)
  std::vector<EpochLog> curve;
  int best_epoch = 0;
  double best_val = 0.0;
  bool diverged = false;
  std::string note;
};

// Deterministic mini-batch training: serial batches in a seeded shuffle
// order, gradient averaged per batch, global-norm clipped, AdamW steps.
// Validation windows are split off up front; the best-on-validation weights
// are returned. Training aborts (diverged = true) if the epoch loss exceeds
// 1000x the initial loss or anything goes non-finite.
TrainResult train(const std::vector<Window>& dataset, const GateWeights& init,
                  const NoiseConfig& noise, const TrainConfig& cfg);

}  // namespace memosort::train
