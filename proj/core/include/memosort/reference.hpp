#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "memosort/linalg.hpp"

// Independent, deliberately naive implementations used to cross-check the
// production code, plus the self-test suites built on them. Everything here
// trades speed for obviousness; none of it is used on the tracking path.
namespace memosort::reference {

struct BruteForceResult {
  std::vector<std::pair<int, int>> pairs;  // sorted by row
  int cardinality = 0;
  double total_cost = 0.0;
};

// Exhaustive search over every partial injection of rows into columns:
// maximizes the number of finite-cost pairs, then minimizes their total,
// breaking ties by the same lexicographic rule as assign::solve. Exponential;
// keep matrices small (<= ~8x8).
BruteForceResult brute_force_assignment(const Matrix& cost);

struct SuiteReport {
  bool passed = false;
  std::string detail;  // one-line summary, includes the failure if any
};

// Random rectangular matrices up to 6x6 (some with infinity sentinels)
// solved by assign::solve and by brute force; totals must agree to 1e-9.
SuiteReport assignment_selftest(std::uint64_t seed, int trials);

// Textbook constant-velocity Kalman filter over [x,y,w,h,vx,vy,vw,vh] on raw
// arrays with its own Gauss-Jordan solve — no Eigen, no code shared with the
// production filter. Mirrors the same noise-scale conventions (diagonal Q/R
// from the last accepted detection's extents) so a compensation-free
// production filter must reproduce it exactly.
class PlainKf {
 public:
  PlainKf(double sigma_p, double sigma_v, double sigma_m, double min_extent,
          double init_vel_factor);

  void init(const double det[4]);  // x, y, w, h
  void predict();
  bool update(const double det[4]);  // false if the gain solve was singular
  void coast();                      // adopt the prediction on a missed frame

  const double* mean() const { return m_; }
  double cov(int r, int c) const { return p_[r][c]; }

 private:
  void clamp_extents();
  void symmetrize();

  double sp_, sv_, sm_, min_ext_, velf_;
  double m_[8] = {};
  double p_[8][8] = {};
  double ref_w_ = 0.0, ref_h_ = 0.0;
};

// Random 50-step detection sequences (with dropouts) run through the
// production filter with zero-output heads and through PlainKf; every mean
// and covariance component must agree within 1e-9.
SuiteReport degeneracy_selftest(std::uint64_t seed, int sequences, int steps);

// Central finite differences of a scalar function, one coordinate at a time.
Vector finite_difference_gradient(const std::function<double(const Vector&)>& f,
                                  const Vector& x, double eps = 1e-5);

// Largest relative disagreement between two gradients. Pairs whose larger
// magnitude sits below `floor` are compared absolutely against the floor, so
// fp noise on near-zero entries doesn't swamp the statistic.
double max_rel_error(const Vector& a, const Vector& b, double floor = 1e-5);

}  // namespace memosort::reference
