#pragma once

#include <functional>
#include <vector>

#include "memosort/detection.hpp"
#include "memosort/geometry.hpp"
#include "memosort/mekf.hpp"

namespace memosort {

struct TrackerConfig {
  double tau_high = 0.6;      // detections at or above run stage 1
  double tau_low = 0.1;       // detections below this are dropped
  MatConfig mat;              // stage-1 association geometry
  double gate_high = 0.85;    // stage-1 cost ceiling (min similarity 0.15)
  double gate_low = 0.5;      // stage-2 cost ceiling
  int min_hits = 3;           // consecutive matches to confirm
  int max_age = 30;           // coasted frames before deletion
  double appearance_weight = 0.0;  // lambda; 0 = pure motion cost

  void validate() const;
};

enum class TrackStatus { kTentative, kConfirmed, kLost };

struct Track {
  int id = 0;
  TrackStatus status = TrackStatus::kTentative;
  int hits = 0;              // consecutive matches; resets on a miss
  int age_since_update = 0;  // frames since the last matched detection
  double last_score = 0.0;
  TrackState state;
};

struct TrackRow {
  int frame;
  int id;
  BBox box;
  double score;
};

// Two-stage tracking-by-detection around one filter model.
//
// Per frame: every live track is predicted; high-confidence detections
// (score >= tau_high) are assigned to all tracks on a blended cost of
// 1 - [(1-lambda) * mo_iou + lambda * appearance], with each track's (p, q)
// chosen by mat_params from its current state velocities, so coasting
// tracks keep adapting as their predictions evolve; the leftover tracks
// then meet the low-confidence detections (tau_low <= score < tau_high) on
// a plain 1 - IoU cost. Matched tracks update, unmatched tracks coast and
// age, unmatched high-confidence detections found new tentative tracks,
// tracks coasting past max_age are dropped, and tentative tracks reaching
// min_hits consecutive matches are confirmed. Only confirmed tracks that
// matched this frame are emitted. Ids start at 1 and are never reused.
class Tracker {
 public:
  Tracker(GateWeights weights, NoiseConfig noise, double frame_w,
          double frame_h, TrackerConfig cfg = {});

  // All detections of one frame (any score; stratification happens here).
  // The frame index comes from the detections and must exceed the previous
  // step's; an empty call advances to the next frame. Returns the emitted
  // rows, id-ascending. Throws std::invalid_argument on mixed or
  // non-increasing frames or a score outside [0, 1].
  std::vector<TrackRow> step(const std::vector<Detection>& frame_dets);

  // Runs step over every frame from the first detection's to the last,
  // inclusive, coasting through frames with no detections. Input must be
  // sorted by frame. Returns all emitted rows, (frame, id)-ascending.
  std::vector<TrackRow> run_sequence(const std::vector<Detection>& dets);

  // Similarity in [0, 1] between a track and a detection, blended into the
  // stage-1 cost with weight appearance_weight. Out-of-range outputs are
  // clamped and counted. Never consulted while appearance_weight is 0.
  using AppearanceHook = std::function<double(const Track&, const Detection&)>;
  void set_appearance_hook(AppearanceHook hook);

  const std::vector<Track>& tracks() const { return tracks_; }
  const TrackerConfig& config() const { return cfg_; }
  const MekfModel& model() const { return model_; }
  long hook_clamps() const { return hook_clamps_; }

 private:
  MekfModel model_;
  TrackerConfig cfg_;
  AppearanceHook hook_;
  std::vector<Track> tracks_;
  int next_id_ = 1;
  int last_frame_ = 0;
  bool has_stepped_ = false;
  long hook_clamps_ = 0;
};

}  // namespace memosort
