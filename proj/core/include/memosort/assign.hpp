#pragma once

#include <utility>
#include <vector>

#include "memosort/linalg.hpp"

namespace memosort::assign {

// Result of a rectangular assignment. Pairs are (row, col), sorted by row.
struct Assignment {
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> unmatched_rows;
  std::vector<int> unmatched_cols;
};

// Minimum-cost rectangular assignment with a per-pair admissibility gate.
//
// Entries must be >= 0 or +infinity (an inadmissible pairing); `gate` must be
// finite. Matching maximizes the number of admissible pairs, then minimizes
// their total cost. Any matched pair whose cost exceeds `gate` is demoted to
// unmatched afterwards, so the gate changes which pairs survive but not which
// assignment is optimal.
//
// Ties between optimal matchings are broken lexicographically: rows in
// ascending order each take the smallest column consistent with optimality,
// with "unmatched" ordered after every column. The result is therefore
// independent of internal iteration order.
Assignment solve(const Matrix& cost, double gate);

}  // namespace memosort::assign
