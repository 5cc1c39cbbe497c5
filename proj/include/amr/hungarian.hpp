#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace amr::detail {

// Kuhn-Munkres with potentials for a rows x cols cost matrix (row-major,
// rows <= cols). Returns the column assigned to each row.
std::vector<std::size_t> min_cost_assignment(std::span<const double> cost,
                                             std::size_t rows, std::size_t cols);

// Optimal assignment whose column sequence is lexicographically smallest
// among all optimal ones (ties within a relative 1e-12 of the optimum).
std::vector<std::size_t> lexicographic_min_assignment(std::span<const double> cost,
                                                      std::size_t rows,
                                                      std::size_t cols);

} // namespace amr::detail
