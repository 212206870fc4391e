#include "memosort/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "memosort/assign.hpp"
#include "memosort/linalg.hpp"

namespace memosort {
namespace {

// Predicted extents may dip to zero under extreme compensations; keep the
// association box constructible (a sliver matches nothing anyway).
constexpr double kTinyExtent = 1e-9;

}  // namespace

void TrackerConfig::validate() const {
  if (!(tau_low >= 0.0) || !(tau_high >= tau_low) || !(tau_high <= 1.0)) {
    throw std::invalid_argument("tracker: need 0 <= tau_low <= tau_high <= 1");
  }
  mat.validate();
  if (!(gate_high > 0.0) || !(gate_high <= 1.0) || !(gate_low > 0.0) ||
      !(gate_low <= 1.0)) {
    throw std::invalid_argument("tracker: cost gates outside (0, 1]");
  }
  if (min_hits < 1) throw std::invalid_argument("tracker: min_hits < 1");
  if (max_age < 0) throw std::invalid_argument("tracker: negative max_age");
  if (!(appearance_weight >= 0.0) || !(appearance_weight <= 1.0)) {
    throw std::invalid_argument("tracker: appearance weight outside [0, 1]");
  }
}

Tracker::Tracker(GateWeights weights, NoiseConfig noise, double frame_w,
                 double frame_h, TrackerConfig cfg)
    : model_(std::move(weights), noise, frame_w, frame_h), cfg_(cfg) {
  cfg_.validate();
}

void Tracker::set_appearance_hook(AppearanceHook hook) {
  hook_ = std::move(hook);
}

std::vector<TrackRow> Tracker::step(const std::vector<Detection>& frame_dets) {
  int frame;
  if (frame_dets.empty()) {
    frame = has_stepped_ ? last_frame_ + 1 : 0;
  } else {
    frame = frame_dets[0].frame;
    for (const Detection& d : frame_dets) {
      if (d.frame != frame) {
        throw std::invalid_argument("step: detections from mixed frames");
      }
      if (!(d.score >= 0.0) || !(d.score <= 1.0)) {
        throw std::invalid_argument("step: score outside [0, 1]");
      }
    }
    if (has_stepped_ && frame <= last_frame_) {
      throw std::invalid_argument("step: frame index must increase");
    }
  }
  last_frame_ = frame;
  has_stepped_ = true;

  const size_t n_tracks = tracks_.size();
  std::vector<Prediction> preds;
  std::vector<BBox> pred_boxes;
  std::vector<MatParams> pqs;
  preds.reserve(n_tracks);
  pred_boxes.reserve(n_tracks);
  pqs.reserve(n_tracks);
  for (const Track& t : tracks_) {
    const Vector& m = t.state.mean;
    pqs.push_back(mat_params(m(4), m(5), m(7), m(2), m(3), cfg_.mat));
    preds.push_back(model_.predict(t.state));
    const Vector& pm = preds.back().mean;
    pred_boxes.emplace_back(pm(0), pm(1), std::max(pm(2), kTinyExtent),
                            std::max(pm(3), kTinyExtent));
  }

  std::vector<int> high, low;
  for (size_t i = 0; i < frame_dets.size(); ++i) {
    if (frame_dets[i].score >= cfg_.tau_high) {
      high.push_back(static_cast<int>(i));
    } else if (frame_dets[i].score >= cfg_.tau_low) {
      low.push_back(static_cast<int>(i));
    }
  }

  const double lambda = cfg_.appearance_weight;
  std::vector<int> det_of_track(n_tracks, -1);
  std::vector<char> det_matched(frame_dets.size(), 0);
  {
    Matrix cost(high.size(), n_tracks);
    for (size_t a = 0; a < high.size(); ++a) {
      const Detection& d = frame_dets[high[a]];
      for (size_t j = 0; j < n_tracks; ++j) {
        double sim = (1.0 - lambda) *
                     mo_iou(d.box, pred_boxes[j], pqs[j].p, pqs[j].q);
        if (lambda > 0.0 && hook_) {
          double app = hook_(tracks_[j], d);
          if (!(app >= 0.0) || !(app <= 1.0)) {
            app = app > 1.0 ? 1.0 : 0.0;  // NaN lands at 0
            ++hook_clamps_;
          }
          sim += lambda * app;
        }
        cost(a, j) = 1.0 - sim;
      }
    }
    for (const auto& [a, j] : assign::solve(cost, cfg_.gate_high).pairs) {
      det_of_track[j] = high[a];
      det_matched[high[a]] = 1;
    }
  }
  {
    std::vector<size_t> remaining;
    for (size_t j = 0; j < n_tracks; ++j) {
      if (det_of_track[j] < 0) remaining.push_back(j);
    }
    Matrix cost(low.size(), remaining.size());
    for (size_t b = 0; b < low.size(); ++b) {
      for (size_t c = 0; c < remaining.size(); ++c) {
        cost(b, c) = 1.0 - iou(frame_dets[low[b]].box,
                               pred_boxes[remaining[c]]);
      }
    }
    for (const auto& [b, c] : assign::solve(cost, cfg_.gate_low).pairs) {
      det_of_track[remaining[c]] = low[b];
      det_matched[low[b]] = 1;
    }
  }

  for (size_t j = 0; j < n_tracks; ++j) {
    Track& t = tracks_[j];
    if (det_of_track[j] >= 0) {
      const Detection& d = frame_dets[det_of_track[j]];
      t.state = model_.update(preds[j], d.box);
      ++t.hits;
      t.age_since_update = 0;
      t.last_score = d.score;
      if (t.status == TrackStatus::kLost) {
        t.status = TrackStatus::kConfirmed;
      } else if (t.status == TrackStatus::kTentative &&
                 t.hits >= cfg_.min_hits) {
        t.status = TrackStatus::kConfirmed;
      }
    } else {
      t.state = model_.coast(preds[j]);
      ++t.age_since_update;
      t.hits = 0;
      if (t.status == TrackStatus::kConfirmed) t.status = TrackStatus::kLost;
    }
  }
  std::erase_if(tracks_, [this](const Track& t) {
    return t.age_since_update > cfg_.max_age;
  });

  for (const int i : high) {
    if (det_matched[i]) continue;
    Track t;
    t.id = next_id_++;
    t.hits = 1;
    t.age_since_update = 0;
    t.last_score = frame_dets[i].score;
    t.state = model_.init_track(frame_dets[i].box);
    t.status = t.hits >= cfg_.min_hits ? TrackStatus::kConfirmed
                                       : TrackStatus::kTentative;
    tracks_.push_back(std::move(t));
  }

  std::vector<TrackRow> rows;
  for (const Track& t : tracks_) {
    if (t.status != TrackStatus::kConfirmed || t.age_since_update != 0) {
      continue;
    }
    const Vector& m = t.state.mean;
    rows.push_back({frame, t.id, BBox(m(0), m(1), m(2), m(3)), t.last_score});
  }
  return rows;
}

std::vector<TrackRow> Tracker::run_sequence(
    const std::vector<Detection>& dets) {
  if (dets.empty()) return {};
  for (size_t i = 1; i < dets.size(); ++i) {
    if (dets[i].frame < dets[i - 1].frame) {
      throw std::invalid_argument("run_sequence: frames must be sorted");
    }
  }
  std::vector<TrackRow> rows;
  size_t pos = 0;
  const int last = dets.back().frame;
  for (int frame = dets.front().frame; frame <= last; ++frame) {
    std::vector<Detection> batch;
    while (pos < dets.size() && dets[pos].frame == frame) {
      batch.push_back(dets[pos++]);
    }
    std::vector<TrackRow> out = step(batch);
    rows.insert(rows.end(), out.begin(), out.end());
  }
  return rows;
}

}  // namespace memosort
