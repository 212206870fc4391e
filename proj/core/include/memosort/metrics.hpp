#pragma once

#include <string>
#include <vector>

#include "memosort/detection.hpp"
#include "memosort/mekf.hpp"
#include "memosort/synthgen.hpp"

namespace memosort::eval {

struct EvalReport {
  std::string name;
  double mota = 0.0;            // 1 - (FN + FP + IDSW) / GT, at most 1
  double idf1 = 0.0;
  long id_switches = 0;
  long false_positives = 0;
  long misses = 0;
  long truth_boxes = 0;
  long result_boxes = 0;
  double pred_rmse = 0.0;       // pixels; filled by prediction_rmse callers
};

// CLEAR evaluation of one sequence. Per frame, previous-frame
// correspondences whose IoU still clears the threshold are carried over,
// then leftovers are matched by minimum-cost assignment on 1 - IoU; a
// matched truth counts an identity switch when its result id differs from
// the last one it was ever matched to. IDF1 comes from a global bipartite
// matching of truth ids to result ids maximizing the number of frames the
// pair overlaps at or above the threshold. Throws std::invalid_argument on
// duplicate (frame, id) rows, an empty truth, or a threshold outside (0, 1].
EvalReport evaluate(const std::vector<TrackedBox>& truth,
                    const std::vector<TrackedBox>& results,
                    double iou_match_threshold = 0.5);

// RMSE in pixels of one-step-ahead predicted centers against truth centers,
// over every frame where the target is detected and its filter has already
// absorbed at least burn_in detections. Each scenario target runs its own
// filter: init on the first detection, then predict / update, coasting
// through misses. Throws std::invalid_argument when no step qualifies.
double prediction_rmse(const MekfModel& model, const synth::Scenario& scenario,
                       int burn_in = 5);

// Text table of two or more reports, sorted by MOTA then IDF1, descending,
// ties keeping their original order.
std::string compare(const std::vector<EvalReport>& reports);

}  // namespace memosort::eval
