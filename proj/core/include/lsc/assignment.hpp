#pragma once

#include <vector>

namespace lsc {

/// Minimum-cost assignment of every row to a distinct column of a
/// rows x cols cost matrix (row-major), rows <= cols. Returns the column of
/// each row. Hungarian method with potentials, O(rows^2 * cols).
std::vector<int> min_cost_assignment(const std::vector<double>& cost, int rows, int cols);

}  // namespace lsc
