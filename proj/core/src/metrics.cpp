#include "memosort/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>

#include "memosort/assign.hpp"
#include "memosort/geometry.hpp"
#include "memosort/linalg.hpp"

namespace memosort::eval {
namespace {

using FrameIndex = std::map<int, std::vector<const TrackedBox*>>;

FrameIndex index_by_frame(const std::vector<TrackedBox>& rows,
                          const char* what) {
  FrameIndex by_frame;
  std::set<std::pair<int, int>> seen;
  for (const TrackedBox& row : rows) {
    if (!seen.insert({row.frame, row.id}).second) {
      throw std::invalid_argument(std::string("evaluate: duplicate (frame, "
                                              "id) row in ") +
                                  what);
    }
    by_frame[row.frame].push_back(&row);
  }
  return by_frame;
}

}  // namespace

EvalReport evaluate(const std::vector<TrackedBox>& truth,
                    const std::vector<TrackedBox>& results,
                    double iou_match_threshold) {
  if (!(iou_match_threshold > 0.0) || !(iou_match_threshold <= 1.0)) {
    throw std::invalid_argument("evaluate: threshold outside (0, 1]");
  }
  if (truth.empty()) {
    throw std::invalid_argument("evaluate: no truth boxes");
  }
  const FrameIndex truth_frames = index_by_frame(truth, "truth");
  const FrameIndex result_frames = index_by_frame(results, "results");

  std::set<int> frames;
  for (const auto& [f, _] : truth_frames) frames.insert(f);
  for (const auto& [f, _] : result_frames) frames.insert(f);

  EvalReport rep;
  rep.truth_boxes = static_cast<long>(truth.size());
  rep.result_boxes = static_cast<long>(results.size());

  std::map<std::pair<int, int>, long> overlap;  // (truth id, result id)
  std::map<int, int> prev_match, last_match;    // truth id -> result id
  static const std::vector<const TrackedBox*> kNone;
  for (const int frame : frames) {
    const auto tit = truth_frames.find(frame);
    const auto rit = result_frames.find(frame);
    const std::vector<const TrackedBox*>& ts =
        tit != truth_frames.end() ? tit->second : kNone;
    const std::vector<const TrackedBox*>& rs =
        rit != result_frames.end() ? rit->second : kNone;

    Matrix ious(ts.size(), rs.size());
    for (size_t i = 0; i < ts.size(); ++i) {
      for (size_t j = 0; j < rs.size(); ++j) {
        ious(i, j) = iou(ts[i]->box, rs[j]->box);
        if (ious(i, j) >= iou_match_threshold) {
          ++overlap[{ts[i]->id, rs[j]->id}];
        }
      }
    }

    // keep yesterday's pairs that still overlap, then assign the rest
    std::vector<char> t_used(ts.size(), 0), r_used(rs.size(), 0);
    std::map<int, size_t> t_by_id, r_by_id;
    for (size_t i = 0; i < ts.size(); ++i) t_by_id[ts[i]->id] = i;
    for (size_t j = 0; j < rs.size(); ++j) r_by_id[rs[j]->id] = j;
    std::vector<std::pair<int, int>> matches;
    for (const auto& [tid, rid] : prev_match) {
      const auto ti = t_by_id.find(tid);
      const auto ri = r_by_id.find(rid);
      if (ti == t_by_id.end() || ri == r_by_id.end()) continue;
      if (ious(ti->second, ri->second) < iou_match_threshold) continue;
      matches.emplace_back(tid, rid);
      t_used[ti->second] = 1;
      r_used[ri->second] = 1;
    }
    std::vector<size_t> t_free, r_free;
    for (size_t i = 0; i < ts.size(); ++i) {
      if (!t_used[i]) t_free.push_back(i);
    }
    for (size_t j = 0; j < rs.size(); ++j) {
      if (!r_used[j]) r_free.push_back(j);
    }
    Matrix cost(t_free.size(), r_free.size());
    for (size_t a = 0; a < t_free.size(); ++a) {
      for (size_t b = 0; b < r_free.size(); ++b) {
        const double ov = ious(t_free[a], r_free[b]);
        cost(a, b) = ov >= iou_match_threshold
                         ? 1.0 - ov
                         : std::numeric_limits<double>::infinity();
      }
    }
    for (const auto& [a, b] : assign::solve(cost, 1.0).pairs) {
      matches.emplace_back(ts[t_free[a]]->id, rs[r_free[b]]->id);
      t_used[t_free[a]] = 1;
      r_used[r_free[b]] = 1;
    }

    rep.misses += static_cast<long>(std::count(t_used.begin(), t_used.end(), 0));
    rep.false_positives +=
        static_cast<long>(std::count(r_used.begin(), r_used.end(), 0));
    for (const auto& [tid, rid] : matches) {
      const auto it = last_match.find(tid);
      if (it != last_match.end() && it->second != rid) ++rep.id_switches;
      last_match[tid] = rid;
    }
    prev_match.clear();
    prev_match.insert(matches.begin(), matches.end());
  }
  rep.mota = 1.0 - static_cast<double>(rep.misses + rep.false_positives +
                                       rep.id_switches) /
                       static_cast<double>(rep.truth_boxes);

  // global identity matching on overlap counts
  std::set<int> truth_ids, result_ids;
  for (const TrackedBox& t : truth) truth_ids.insert(t.id);
  for (const TrackedBox& r : results) result_ids.insert(r.id);
  long idtp = 0;
  if (!result_ids.empty()) {
    const std::vector<int> tids(truth_ids.begin(), truth_ids.end());
    const std::vector<int> rids(result_ids.begin(), result_ids.end());
    long max_count = 0;
    for (const auto& [_, c] : overlap) max_count = std::max(max_count, c);
    Matrix cost(tids.size(), rids.size());
    for (size_t i = 0; i < tids.size(); ++i) {
      for (size_t j = 0; j < rids.size(); ++j) {
        const auto it = overlap.find({tids[i], rids[j]});
        const long c = it != overlap.end() ? it->second : 0;
        cost(i, j) = static_cast<double>(max_count - c);
      }
    }
    for (const auto& [i, j] :
         assign::solve(cost, static_cast<double>(max_count)).pairs) {
      const auto it = overlap.find({tids[i], rids[j]});
      if (it != overlap.end()) idtp += it->second;
    }
  }
  rep.idf1 = 2.0 * static_cast<double>(idtp) /
             static_cast<double>(rep.truth_boxes + rep.result_boxes);
  return rep;
}

double prediction_rmse(const MekfModel& model, const synth::Scenario& scenario,
                       int burn_in) {
  if (burn_in < 0) throw std::invalid_argument("prediction rmse: burn_in < 0");
  double total = 0.0;
  long steps = 0;
  const int n_targets = static_cast<int>(scenario.truth.size());
  for (int k = 0; k < n_targets; ++k) {
    std::vector<std::optional<BBox>> det(scenario.frames);
    for (int f = 0; f < scenario.frames; ++f) {
      for (size_t i = 0; i < scenario.det_target[f].size(); ++i) {
        if (scenario.det_target[f][i] == k) {
          det[f] = scenario.detections[f][i].box;
        }
      }
    }
    int first = 0;
    while (first < scenario.frames && !det[first].has_value()) ++first;
    if (first >= scenario.frames) continue;
    TrackState s = model.init_track(*det[first]);
    int updates = 1;
    for (int f = first + 1; f < scenario.frames; ++f) {
      const Prediction p = model.predict(s);
      if (det[f].has_value()) {
        if (updates >= burn_in) {
          const double dx = p.mean(0) - scenario.truth[k][f].x();
          const double dy = p.mean(1) - scenario.truth[k][f].y();
          total += dx * dx + dy * dy;
          ++steps;
        }
        s = model.update(p, *det[f]);
        ++updates;
      } else {
        s = model.coast(p);
      }
    }
  }
  if (steps == 0) {
    throw std::invalid_argument("prediction rmse: nothing to evaluate");
  }
  return std::sqrt(total / static_cast<double>(steps));
}

std::string compare(const std::vector<EvalReport>& reports) {
  if (reports.size() < 2) {
    throw std::invalid_argument("compare: need at least two reports");
  }
  std::vector<const EvalReport*> order;
  order.reserve(reports.size());
  for (const EvalReport& r : reports) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(),
                   [](const EvalReport* a, const EvalReport* b) {
                     if (a->mota != b->mota) return a->mota > b->mota;
                     return a->idf1 > b->idf1;
                   });
  size_t name_w = 4;
  for (const EvalReport& r : reports) name_w = std::max(name_w, r.name.size());
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-*s  %7s %7s %6s %6s %6s %8s\n",
                static_cast<int>(name_w), "name", "MOTA", "IDF1", "IDSW", "FP",
                "FN", "RMSE");
  out += buf;
  for (const EvalReport* r : order) {
    std::snprintf(buf, sizeof buf, "%-*s  %7.4f %7.4f %6ld %6ld %6ld %8.2f\n",
                  static_cast<int>(name_w), r->name.c_str(), r->mota, r->idf1,
                  r->id_switches, r->false_positives, r->misses, r->pred_rmse);
    out += buf;
  }
  return out;
}

}  // namespace memosort::eval
