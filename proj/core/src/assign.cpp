#include "memosort/assign.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace memosort::assign {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Shortest-augmenting-path solver on a dense square matrix. On return
// col_of[r] is the column matched to row r and (u, v) are dual potentials
// with c(r, j) - u[r] - v[j] >= 0 up to roundoff, tight on matched edges.
void jv_square(const Matrix& c, std::vector<int>& col_of,
               std::vector<int>& row_of, std::vector<double>& u,
               std::vector<double>& v) {
  const int k = static_cast<int>(c.rows());
  col_of.assign(k, -1);
  row_of.assign(k, -1);
  u.assign(k, 0.0);
  v.assign(k, 0.0);
  std::vector<double> shortest(k);
  std::vector<int> path(k), remaining(k);
  std::vector<char> in_rows(k), in_cols(k);
  for (int cur = 0; cur < k; ++cur) {
    std::fill(shortest.begin(), shortest.end(), kInf);
    std::fill(in_rows.begin(), in_rows.end(), char{0});
    std::fill(in_cols.begin(), in_cols.end(), char{0});
    std::iota(remaining.begin(), remaining.end(), 0);
    int num_remaining = k;
    double min_val = 0.0;
    int i = cur;
    int sink = -1;
    while (sink == -1) {
      in_rows[i] = 1;
      double lowest = kInf;
      int index = 0;
      for (int it = 0; it < num_remaining; ++it) {
        const int j = remaining[it];
        const double reduced = min_val + c(i, j) - u[i] - v[j];
        if (reduced < shortest[j]) {
          shortest[j] = reduced;
          path[j] = i;
        }
        if (shortest[j] < lowest ||
            (shortest[j] == lowest && row_of[j] == -1)) {
          lowest = shortest[j];
          index = it;
        }
      }
      min_val = lowest;
      const int j = remaining[index];
      if (row_of[j] == -1) {
        sink = j;
      } else {
        i = row_of[j];
      }
      in_cols[j] = 1;
      remaining[index] = remaining[--num_remaining];
    }
    u[cur] += min_val;
    for (int r = 0; r < k; ++r) {
      if (in_rows[r] && r != cur) u[r] += min_val - shortest[col_of[r]];
    }
    for (int j = 0; j < k; ++j) {
      if (in_cols[j]) v[j] -= min_val - shortest[j];
    }
    int j = sink;
    for (;;) {
      const int r = path[j];
      row_of[j] = r;
      std::swap(col_of[r], j);
      if (r == cur) break;
    }
  }
}

struct SubSolution {
  std::vector<int> col_of;  // per entry of `rows`: a column of the parent or -1
  int cardinality = 0;
  double finite_cost = 0.0;
};

// Max-cardinality min-cost matching on the restriction of `cost` to the given
// row/col subsets. Rectangular shapes are squared up with zero-cost padding
// and the infinity sentinel becomes `big`, which exceeds any sum of finite
// entries, so the solver first maximizes admissible matches and then their
// cost.
SubSolution solve_subset(const Matrix& cost, const std::vector<int>& rows,
                         const std::vector<int>& cols, double big,
                         std::vector<double>* u_out = nullptr,
                         std::vector<double>* v_out = nullptr) {
  const int m = static_cast<int>(rows.size());
  const int n = static_cast<int>(cols.size());
  SubSolution out;
  out.col_of.assign(m, -1);
  if (m == 0 || n == 0) return out;
  const int k = std::max(m, n);
  Matrix padded = Matrix::Zero(k, k);
  for (int r = 0; r < m; ++r) {
    for (int j = 0; j < n; ++j) {
      const double e = cost(rows[r], cols[j]);
      padded(r, j) = std::isfinite(e) ? e : big;
    }
  }
  std::vector<int> col_of_sq, row_of_sq;
  std::vector<double> u, v;
  jv_square(padded, col_of_sq, row_of_sq, u, v);
  for (int r = 0; r < m; ++r) {
    const int j = col_of_sq[r];
    if (j < n && std::isfinite(cost(rows[r], cols[j]))) {
      out.col_of[r] = cols[j];
      out.cardinality += 1;
      out.finite_cost += cost(rows[r], cols[j]);
    }
  }
  if (u_out) *u_out = std::move(u);
  if (v_out) *v_out = std::move(v);
  return out;
}

}  // namespace

Assignment solve(const Matrix& cost, double gate) {
  if (!std::isfinite(gate)) {
    throw std::invalid_argument("assign: gate must be finite");
  }
  const int m = static_cast<int>(cost.rows());
  const int n = static_cast<int>(cost.cols());
  double max_finite = 0.0;
  for (int r = 0; r < m; ++r) {
    for (int j = 0; j < n; ++j) {
      const double e = cost(r, j);
      if (std::isnan(e) || e < 0.0) {
        throw std::invalid_argument("assign: cost entries must be >= 0 or +inf");
      }
      if (std::isfinite(e)) max_finite = std::max(max_finite, e);
    }
  }

  Assignment out;
  if (m == 0 || n == 0) {
    for (int r = 0; r < m; ++r) out.unmatched_rows.push_back(r);
    for (int j = 0; j < n; ++j) out.unmatched_cols.push_back(j);
    return out;
  }

  const int k = std::max(m, n);
  const double big = (max_finite + 1.0) * (k + 1);
  std::vector<int> all_rows(m), all_cols(n);
  std::iota(all_rows.begin(), all_rows.end(), 0);
  std::iota(all_cols.begin(), all_cols.end(), 0);
  std::vector<double> u, v;
  const SubSolution best = solve_subset(cost, all_rows, all_cols, big, &u, &v);
  const int target_card = best.cardinality;
  const double target_cost = best.finite_cost;
  const double eps = 1e-10 * (1.0 + max_finite);
  const double tight_tol = 1e-8 * (1.0 + big);

  // Lexicographic refinement: rows in ascending order take the smallest
  // column that still admits an optimal completion; unmatched sorts last.
  // Only edges with zero reduced cost can appear in an optimal matching, so
  // the duals prune the candidates; an exact sub-solve then verifies each.
  // `incumbent` always holds one known-optimal completion of the fixed rows,
  // so agreeing with it needs no verification.
  std::vector<int> choice(m, -1);
  std::vector<char> col_used(n, 0);
  std::vector<int> incumbent = best.col_of;
  double fixed_cost = 0.0;
  int fixed_card = 0;
  for (int r = 0; r < m; ++r) {
    std::vector<int> rest_rows;
    for (int rr = r + 1; rr < m; ++rr) rest_rows.push_back(rr);
    int chosen = -2;
    for (int j = 0; j < n && chosen == -2; ++j) {
      if (col_used[j] || !std::isfinite(cost(r, j))) continue;
      if (cost(r, j) - u[r] - v[j] > tight_tol) continue;
      if (j == incumbent[r]) {
        chosen = j;
        break;
      }
      std::vector<int> rest_cols;
      for (int jj = 0; jj < n; ++jj) {
        if (!col_used[jj] && jj != j) rest_cols.push_back(jj);
      }
      const SubSolution sub = solve_subset(cost, rest_rows, rest_cols, big);
      if (fixed_card + 1 + sub.cardinality == target_card &&
          fixed_cost + cost(r, j) + sub.finite_cost <= target_cost + eps) {
        chosen = j;
        for (std::size_t idx = 0; idx < rest_rows.size(); ++idx) {
          incumbent[rest_rows[idx]] = sub.col_of[idx];
        }
      }
    }
    if (chosen == -2) {
      if (incumbent[r] == -1) {
        chosen = -1;
      } else {
        std::vector<int> rest_cols;
        for (int jj = 0; jj < n; ++jj) {
          if (!col_used[jj]) rest_cols.push_back(jj);
        }
        const SubSolution sub = solve_subset(cost, rest_rows, rest_cols, big);
        if (fixed_card + sub.cardinality == target_card &&
            fixed_cost + sub.finite_cost <= target_cost + eps) {
          chosen = -1;
          for (std::size_t idx = 0; idx < rest_rows.size(); ++idx) {
            incumbent[rest_rows[idx]] = sub.col_of[idx];
          }
        } else {
          chosen = incumbent[r];  // numeric fallback: keep the known optimum
        }
      }
    }
    choice[r] = chosen;
    if (chosen >= 0) {
      col_used[chosen] = 1;
      fixed_cost += cost(r, chosen);
      fixed_card += 1;
    }
  }

  std::vector<char> col_matched(n, 0);
  for (int r = 0; r < m; ++r) {
    const int j = choice[r];
    if (j >= 0 && cost(r, j) <= gate) {
      out.pairs.emplace_back(r, j);
      col_matched[j] = 1;
    } else {
      out.unmatched_rows.push_back(r);
    }
  }
  for (int j = 0; j < n; ++j) {
    if (!col_matched[j]) out.unmatched_cols.push_back(j);
  }
  return out;
}

}  // namespace memosort::assign
