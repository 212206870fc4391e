#include "memosort/reference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "memosort/assign.hpp"
#include "memosort/mekf.hpp"
#include "memosort/nnet.hpp"
#include "memosort/rng.hpp"

namespace memosort::reference {
namespace {

// Gauss-Jordan inverse with partial pivoting; false on a zero pivot.
bool invert4(const double s[4][4], double inv[4][4]) {
  double a[4][8];
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      a[i][j] = s[i][j];
      a[i][4 + j] = (i == j) ? 1.0 : 0.0;
    }
  }
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    if (a[piv][col] == 0.0) return false;
    if (piv != col) {
      for (int j = 0; j < 8; ++j) std::swap(a[piv][j], a[col][j]);
    }
    const double d = a[col][col];
    for (int j = 0; j < 8; ++j) a[col][j] /= d;
    for (int r = 0; r < 4; ++r) {
      if (r == col || a[r][col] == 0.0) continue;
      const double f = a[r][col];
      for (int j = 0; j < 8; ++j) a[r][j] -= f * a[col][j];
    }
  }
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) inv[i][j] = a[i][4 + j];
  }
  return true;
}

struct SearchState {
  const Matrix* cost;
  int m, n;
  std::vector<int> choice;        // col per row, -1 = unmatched
  std::vector<char> used;         // col consumed
  std::vector<int> best_choice;
  int best_card = -1;
  double best_cost = 0.0;
};

// Lexicographic comparison of complete choice vectors, unmatched (-1)
// ordered after every real column.
bool lex_smaller(const std::vector<int>& a, const std::vector<int>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    const int ai = a[i] < 0 ? std::numeric_limits<int>::max() : a[i];
    const int bi = b[i] < 0 ? std::numeric_limits<int>::max() : b[i];
    if (ai != bi) return ai < bi;
  }
  return false;
}

void search(SearchState& s, int row, int card, double cost_so_far) {
  if (row == s.m) {
    if (card > s.best_card ||
        (card == s.best_card && cost_so_far < s.best_cost) ||
        (card == s.best_card && cost_so_far == s.best_cost &&
         lex_smaller(s.choice, s.best_choice))) {
      s.best_card = card;
      s.best_cost = cost_so_far;
      s.best_choice = s.choice;
    }
    return;
  }
  for (int j = 0; j < s.n; ++j) {
    const double e = (*s.cost)(row, j);
    if (s.used[j] || !std::isfinite(e)) continue;
    s.used[j] = 1;
    s.choice[row] = j;
    search(s, row + 1, card + 1, cost_so_far + e);
    s.used[j] = 0;
  }
  s.choice[row] = -1;
  search(s, row + 1, card, cost_so_far);
}

}  // namespace

BruteForceResult brute_force_assignment(const Matrix& cost) {
  SearchState s;
  s.cost = &cost;
  s.m = static_cast<int>(cost.rows());
  s.n = static_cast<int>(cost.cols());
  s.choice.assign(s.m, -1);
  s.used.assign(s.n, 0);
  search(s, 0, 0, 0.0);
  BruteForceResult out;
  out.cardinality = s.best_card;
  out.total_cost = s.best_cost;
  for (int r = 0; r < s.m; ++r) {
    if (s.best_choice[r] >= 0) out.pairs.emplace_back(r, s.best_choice[r]);
  }
  return out;
}

SuiteReport assignment_selftest(std::uint64_t seed, int trials) {
  Rng rng(seed);
  const double huge_gate = 1e18;  // no demotion: compare raw optima
  for (int t = 0; t < trials; ++t) {
    const int m = 1 + static_cast<int>(rng.uniform_int(6));
    const int n = 1 + static_cast<int>(rng.uniform_int(6));
    const bool with_inf = rng.uniform() < 0.25;
    Matrix cost(m, n);
    for (int r = 0; r < m; ++r) {
      for (int j = 0; j < n; ++j) {
        const double e = rng.uniform();
        cost(r, j) = (with_inf && rng.uniform() < 0.2)
                         ? std::numeric_limits<double>::infinity()
                         : e;
      }
    }
    const BruteForceResult oracle = brute_force_assignment(cost);
    const assign::Assignment got = assign::solve(cost, huge_gate);
    double got_cost = 0.0;
    for (const auto& [r, j] : got.pairs) got_cost += cost(r, j);
    const int got_card = static_cast<int>(got.pairs.size());
    if (got_card != oracle.cardinality ||
        std::abs(got_cost - oracle.total_cost) >
            1e-9 * (1.0 + std::abs(oracle.total_cost))) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "trial %d (%dx%d): solver %d pairs cost %.12f, "
                    "brute force %d pairs cost %.12f",
                    t, m, n, got_card, got_cost, oracle.cardinality,
                    oracle.total_cost);
      return {false, buf};
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf),
                "%d random assignments matched the brute-force optimum",
                trials);
  return {true, buf};
}

PlainKf::PlainKf(double sigma_p, double sigma_v, double sigma_m,
                 double min_extent, double init_vel_factor)
    : sp_(sigma_p),
      sv_(sigma_v),
      sm_(sigma_m),
      min_ext_(min_extent),
      velf_(init_vel_factor) {}

void PlainKf::init(const double det[4]) {
  for (int i = 0; i < 8; ++i) m_[i] = 0.0;
  m_[0] = det[0];
  m_[1] = det[1];
  m_[2] = std::max(det[2], min_ext_);
  m_[3] = std::max(det[3], min_ext_);
  ref_w_ = det[2];
  ref_h_ = det[3];
  const double pw = 2.0 * sm_ * ref_w_;
  const double ph = 2.0 * sm_ * ref_h_;
  const double stds[8] = {pw, ph, pw, ph, velf_ * pw, velf_ * ph,
                          velf_ * pw, velf_ * ph};
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) p_[i][j] = 0.0;
    p_[i][i] = stds[i] * stds[i];
  }
}

void PlainKf::predict() {
  for (int i = 0; i < 4; ++i) m_[i] += m_[i + 4];
  // P <- F P F^T + Q with F = [[I, I], [0, I]]
  double fp[8][8];
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      fp[i][j] = p_[i][j] + (i < 4 ? p_[i + 4][j] : 0.0);
    }
  }
  const double qs[8] = {sp_ * ref_w_, sp_ * ref_h_, sp_ * ref_w_,
                        sp_ * ref_h_, sv_ * ref_w_, sv_ * ref_h_,
                        sv_ * ref_w_, sv_ * ref_h_};
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      p_[i][j] = fp[i][j] + (j < 4 ? fp[i][j + 4] : 0.0);
    }
    p_[i][i] += qs[i] * qs[i];
  }
  symmetrize();
}

void PlainKf::coast() { clamp_extents(); }

bool PlainKf::update(const double det[4]) {
  double s[4][4];
  const double rs[4] = {sm_ * ref_w_, sm_ * ref_h_, sm_ * ref_w_,
                        sm_ * ref_h_};
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) s[a][b] = p_[a][b];
    s[a][a] += rs[a] * rs[a];
  }
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) {
      const double v = 0.5 * (s[a][b] + s[b][a]);
      s[a][b] = s[b][a] = v;
    }
  }
  double inv[4][4];
  if (!invert4(s, inv)) return false;
  double k[8][4];  // K = P H^T S^{-1}: P's first four columns times inv
  for (int i = 0; i < 8; ++i) {
    for (int a = 0; a < 4; ++a) {
      double acc = 0.0;
      for (int b = 0; b < 4; ++b) acc += p_[i][b] * inv[b][a];
      k[i][a] = acc;
    }
  }
  double innov[4];
  for (int a = 0; a < 4; ++a) innov[a] = det[a] - m_[a];
  for (int i = 0; i < 8; ++i) {
    double acc = 0.0;
    for (int a = 0; a < 4; ++a) acc += k[i][a] * innov[a];
    m_[i] += acc;
  }
  double np[8][8];  // P <- (I - K H) P
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      double acc = p_[i][j];
      for (int a = 0; a < 4; ++a) acc -= k[i][a] * p_[a][j];
      np[i][j] = acc;
    }
  }
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) p_[i][j] = np[i][j];
  }
  ref_w_ = det[2];
  ref_h_ = det[3];
  clamp_extents();
  return true;
}

void PlainKf::clamp_extents() {
  m_[2] = std::max(m_[2], min_ext_);
  m_[3] = std::max(m_[3], min_ext_);
  symmetrize();
}

void PlainKf::symmetrize() {
  for (int i = 0; i < 8; ++i) {
    for (int j = i + 1; j < 8; ++j) {
      const double v = 0.5 * (p_[i][j] + p_[j][i]);
      p_[i][j] = p_[j][i] = v;
    }
  }
}

SuiteReport degeneracy_selftest(std::uint64_t seed, int sequences, int steps) {
  const double frame_w = 1920.0, frame_h = 1080.0;
  const NoiseConfig noise;
  // Random weights, but init() leaves every head's output layer at zero, so
  // the filter must collapse to the textbook form.
  Rng weight_rng(seed ^ 0x5eedULL);
  const MekfModel model(GateWeights::init(8, 4, 16, 16, weight_rng), noise,
                        frame_w, frame_h);
  Rng rng(seed);
  double worst = 0.0;
  for (int t = 0; t < sequences; ++t) {
    double x = 100.0 + (frame_w - 200.0) * rng.uniform();
    double y = 100.0 + (frame_h - 200.0) * rng.uniform();
    double w = 10.0 + 70.0 * rng.uniform();
    double h = 10.0 + 70.0 * rng.uniform();
    TrackState st = model.init_track(BBox(x, y, w, h));
    PlainKf kf(noise.sigma_p, noise.sigma_v, noise.sigma_m, noise.min_extent,
               noise.init_vel_factor);
    const double det0[4] = {x, y, w, h};
    kf.init(det0);
    for (int k = 0; k < steps; ++k) {
      x += rng.uniform(-5.0, 5.0);
      y += rng.uniform(-5.0, 5.0);
      w = std::clamp(w * (1.0 + rng.uniform(-0.05, 0.05)), 10.0, 200.0);
      h = std::clamp(h * (1.0 + rng.uniform(-0.05, 0.05)), 10.0, 200.0);
      const bool miss = rng.uniform() < 0.2;
      const Prediction p = model.predict(st);
      kf.predict();
      if (miss) {
        st = model.coast(p);
        kf.coast();
      } else {
        st = model.update(p, BBox(x, y, w, h));
        const double det[4] = {x, y, w, h};
        if (!kf.update(det)) {
          return {false, "textbook oracle hit a singular innovation matrix"};
        }
      }
      for (int i = 0; i < 8; ++i) {
        worst = std::max(worst, std::abs(st.mean(i) - kf.mean()[i]));
        for (int j = 0; j < 8; ++j) {
          worst = std::max(worst, std::abs(st.cov(i, j) - kf.cov(i, j)));
        }
      }
      if (worst > 1e-9) {
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "sequence %d step %d: max |production - textbook| "
                      "%.3e exceeds 1e-9",
                      t, k, worst);
        return {false, buf};
      }
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "%d sequences x %d steps: max |production - textbook| = %.3e",
                sequences, steps, worst);
  return {true, buf};
}

Vector finite_difference_gradient(const std::function<double(const Vector&)>& f,
                                  const Vector& x, double eps) {
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + eps;
    const double hi = f(probe);
    probe(i) = x(i) - eps;
    const double lo = f(probe);
    probe(i) = x(i);
    g(i) = (hi - lo) / (2.0 * eps);
  }
  return g;
}

double max_rel_error(const Vector& a, const Vector& b, double floor) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("max_rel_error: length mismatch");
  }
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a(i)), std::abs(b(i)), floor});
    worst = std::max(worst, std::abs(a(i) - b(i)) / scale);
  }
  return worst;
}

}  // namespace memosort::reference
