#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "memosort/detection.hpp"
#include "memosort/geometry.hpp"

namespace memosort::synth {

enum class Regime {
  kConstantVelocity,
  kCircular,
  kFigureSpin,
  kStopAndDash,
};

const char* regime_name(Regime r);

// Physical trajectory parameters for one target. (x0, y0) anchors the path:
// the start center for constant-velocity and stop-and-dash, the orbit or
// figure center otherwise. Meaning of a..f by regime:
//   constant velocity: a, b = vx, vy (px/frame)
//   circular:          a = radius, b = angular rate (rad/frame), c = phase
//   figure spin:       a, b = x/y amplitudes of a figure-eight, c = angular
//                      rate, d = phase, e, f = drift vx, vy; the box height
//                      additionally swings +-15% in phase (the jump)
//   stop and dash:     a = period (frames), b = stopped fraction of the
//                      period, c, d = dash vx, vy
struct Motion {
  Regime regime = Regime::kConstantVelocity;
  double w0 = 50.0, h0 = 100.0;  // base extents
  double x0 = 0.0, y0 = 0.0;     // anchor center
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0, e = 0.0, f = 0.0;
};

// Closed-form ground-truth box at a frame, reflected into the arena so the
// whole box stays inside [0, arena_w] x [0, arena_h].
BBox truth_box(const Motion& m, int frame, double arena_w, double arena_h);

// Detections of one target are dropped entirely on frames in [begin, end).
struct OcclusionEvent {
  int target = 0;
  int begin = 0;
  int end = 0;
};

struct ScenarioConfig {
  double arena_w = 1920.0, arena_h = 1080.0;
  int frames = 100;
  int targets = 5;  // used when explicit_targets is empty
  std::vector<Regime> regime_mix = {
      Regime::kConstantVelocity, Regime::kCircular, Regime::kFigureSpin,
      Regime::kStopAndDash};  // target i gets regime_mix[i % size]
  std::vector<Motion> explicit_targets;  // overrides random target synthesis
  double noise_sigma = 0.02;  // detection noise std as fraction of extent
  double miss_rate = 0.05;
  std::vector<OcclusionEvent> occlusions;
  // Confidence of a detection: base - penalty * (fraction of the truth box
  // covered by another target's truth box), clamped to [floor, 1]. Produces
  // both high- and low-confidence detections around overlaps.
  double conf_base = 0.9, conf_penalty = 0.6, conf_floor = 0.05;

  void validate() const;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  int frames = 0;
  double arena_w = 0.0, arena_h = 0.0;
  std::vector<Regime> regimes;                     // per target
  std::vector<std::vector<BBox>> truth;            // [target][frame]
  std::vector<std::vector<Detection>> detections;  // [frame], target-ascending
  std::vector<std::vector<int>> det_target;        // source target, aligned
                                                   // with detections[frame]
};

// Deterministic generation from one SplitMix64 stream. Draw order: first 16
// uniforms per target in index order (w, h, x, y, six regime parameters, six
// reserved; skipped entirely when explicit_targets is set), then per frame
// and per target four noise normals (x, y, w, h; two uniforms each) and one
// miss uniform — always drawn, even for detections that end up dropped, so
// the stream stays aligned whatever is dropped.
Scenario generate(const ScenarioConfig& cfg, std::uint64_t seed);

// Canonical occlusion benchmark with fixed seeds: a symmetric crossing pair,
// full occlusions of 5/10/20 frames behind a static pillar, and an
// anti-phase pair repeating the same jump-then-spin figure through each
// other. Golden inputs for association tests.
std::vector<Scenario> occlusion_suite();

}  // namespace memosort::synth
