// hungarian.hpp - minimum-cost perfect matching on a square cost matrix
// (Jonker-Volgenant style shortest augmenting paths, O(n^3)), followed by a
// canonicalization pass that picks the lexicographically smallest optimal
// assignment so ties resolve deterministically (lowest row to lowest column).
#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace softret {

using CostMatrix = std::vector<std::vector<double>>;

namespace detail {

// Shortest-augmenting-path assignment. Returns row -> column.
inline std::vector<int> solve_assignment_raw(const CostMatrix& cost) {
  const int n = static_cast<int>(cost.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
  std::vector<int> match(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(n) + 1, inf);
    std::vector<char> used(static_cast<size_t>(n) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      int i0 = match[static_cast<size_t>(j0)], j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        double cur = cost[static_cast<size_t>(i0 - 1)][static_cast<size_t>(j - 1)] -
                     u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(match[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<size_t>(j0)] != 0);
    do {
      int j1 = way[static_cast<size_t>(j0)];
      match[static_cast<size_t>(j0)] = match[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(static_cast<size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    if (match[static_cast<size_t>(j)] > 0) row_to_col[static_cast<size_t>(match[static_cast<size_t>(j)] - 1)] = j - 1;
  return row_to_col;
}

inline double assignment_cost(const CostMatrix& cost, const std::vector<int>& row_to_col) {
  double total = 0.0;
  for (size_t i = 0; i < row_to_col.size(); ++i) total += cost[i][static_cast<size_t>(row_to_col[i])];
  return total;
}

// Recursively fix rows to their lowest-index column that still admits an
// optimal completion. n is small here (robot finger counts), so re-solving
// subproblems is cheap.
inline void lexicalize(const CostMatrix& cost, double optimal, std::vector<int>& row_to_col) {
  const int n = static_cast<int>(cost.size());
  const double tol = 1e-9 * (1.0 + std::abs(optimal));
  std::vector<int> fixed_cols;
  std::vector<int> rows_left(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) rows_left[static_cast<size_t>(i)] = i;
  double fixed_cost = 0.0;
  std::vector<char> col_taken(static_cast<size_t>(n), 0);

  for (int i = 0; i < n; ++i) {
    int chosen = -1;
    for (int j = 0; j < n && chosen < 0; ++j) {
      if (col_taken[static_cast<size_t>(j)]) continue;
      // Try row i -> column j; solve the rest.
      std::vector<int> sub_rows, sub_cols;
      for (int r = i + 1; r < n; ++r) sub_rows.push_back(r);
      for (int c = 0; c < n; ++c)
        if (!col_taken[static_cast<size_t>(c)] && c != j) sub_cols.push_back(c);
      double rest = 0.0;
      if (!sub_rows.empty()) {
        CostMatrix sub(sub_rows.size(), std::vector<double>(sub_cols.size(), 0.0));
        for (size_t r = 0; r < sub_rows.size(); ++r)
          for (size_t c = 0; c < sub_cols.size(); ++c)
            sub[r][c] = cost[static_cast<size_t>(sub_rows[r])][static_cast<size_t>(sub_cols[c])];
        std::vector<int> sub_sol = solve_assignment_raw(sub);
        rest = assignment_cost(sub, sub_sol);
      }
      double total = fixed_cost + cost[static_cast<size_t>(i)][static_cast<size_t>(j)] + rest;
      if (total <= optimal + tol) chosen = j;
    }
    if (chosen < 0) return;  // numerical trouble; keep the raw solution
    col_taken[static_cast<size_t>(chosen)] = 1;
    fixed_cost += cost[static_cast<size_t>(i)][static_cast<size_t>(chosen)];
    row_to_col[static_cast<size_t>(i)] = chosen;
  }
}

}  // namespace detail

struct AssignmentResult {
  std::vector<int> row_to_col;
  double total_cost = 0.0;
};

// Minimum-total-cost perfect matching; ties resolve to the lexicographically
// smallest row -> column vector.
inline AssignmentResult solve_assignment(const CostMatrix& cost) {
  const size_t n = cost.size();
  if (n == 0) throw std::invalid_argument("solve_assignment: empty cost matrix");
  for (const auto& row : cost) {
    if (row.size() != n) throw std::invalid_argument("solve_assignment: cost matrix must be square");
    for (double c : row)
      if (!std::isfinite(c)) throw std::invalid_argument("solve_assignment: non-finite cost entry");
  }
  AssignmentResult result;
  result.row_to_col = detail::solve_assignment_raw(cost);
  result.total_cost = detail::assignment_cost(cost, result.row_to_col);
  detail::lexicalize(cost, result.total_cost, result.row_to_col);
  result.total_cost = detail::assignment_cost(cost, result.row_to_col);
  return result;
}

}  // namespace softret
