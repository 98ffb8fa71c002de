#include "lsc/assignment.hpp"

#include <limits>

#include "lsc/types.hpp"

namespace lsc {

std::vector<int> min_cost_assignment(const std::vector<double>& cost, int rows, int cols) {
  if (rows < 0 || cols < rows) throw Error("assignment needs rows <= cols");
  if (cost.size() != static_cast<std::size_t>(rows) * cols) throw Error("assignment cost matrix size mismatch");
  if (rows == 0) return {};
  const double inf = std::numeric_limits<double>::infinity();
  const auto a = [&](int i, int j) { return cost[static_cast<std::size_t>(i - 1) * cols + (j - 1)]; };

  // 1-based potentials; column 0 is the virtual start.
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
  std::vector<int> match(cols + 1, 0), way(cols + 1, 0);
  for (int i = 1; i <= rows; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(cols + 1, inf);
    std::vector<char> used(cols + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double cur = a(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(rows, -1);
  for (int j = 1; j <= cols; ++j) {
    if (match[j] != 0) row_to_col[match[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace lsc
