#include "amr/hungarian.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace amr::detail {

std::vector<std::size_t> min_cost_assignment(std::span<const double> cost,
                                             std::size_t rows, std::size_t cols) {
    if (rows > cols) {
        throw std::invalid_argument("assignment needs rows <= cols");
    }
    if (cost.size() != rows * cols) {
        throw std::invalid_argument("cost matrix size mismatch");
    }
    constexpr double inf = std::numeric_limits<double>::infinity();
    const auto at = [&](std::size_t r, std::size_t c) { return cost[(r - 1) * cols + (c - 1)]; };

    // 1-based potentials; column 0 is a virtual source.
    std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
    std::vector<std::size_t> owner(cols + 1, 0), way(cols + 1, 0);

    for (std::size_t r = 1; r <= rows; ++r) {
        owner[0] = r;
        std::size_t col0 = 0;
        std::vector<double> min_slack(cols + 1, inf);
        std::vector<bool> used(cols + 1, false);
        do {
            used[col0] = true;
            const std::size_t row0 = owner[col0];
            double delta = inf;
            std::size_t col1 = 0;
            for (std::size_t c = 1; c <= cols; ++c) {
                if (used[c]) continue;
                const double slack = at(row0, c) - u[row0] - v[c];
                if (slack < min_slack[c]) {
                    min_slack[c] = slack;
                    way[c] = col0;
                }
                if (min_slack[c] < delta) {
                    delta = min_slack[c];
                    col1 = c;
                }
            }
            for (std::size_t c = 0; c <= cols; ++c) {
                if (used[c]) {
                    u[owner[c]] += delta;
                    v[c] -= delta;
                } else {
                    min_slack[c] -= delta;
                }
            }
            col0 = col1;
        } while (owner[col0] != 0);
        // augment along the alternating path
        do {
            const std::size_t col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
        } while (col0 != 0);
    }

    std::vector<std::size_t> assigned(rows);
    for (std::size_t c = 1; c <= cols; ++c) {
        if (owner[c] != 0) {
            assigned[owner[c] - 1] = c - 1;
        }
    }
    return assigned;
}

namespace {

// Optimal cost of assigning rows [first_row, rows) to columns not in `taken`.
double completion_cost(std::span<const double> cost, std::size_t rows, std::size_t cols,
                       std::size_t first_row, const std::vector<bool> &taken) {
    std::vector<std::size_t> free_cols;
    for (std::size_t c = 0; c < cols; ++c) {
        if (!taken[c]) free_cols.push_back(c);
    }
    const std::size_t sub_rows = rows - first_row;
    if (sub_rows == 0) return 0.0;
    std::vector<double> sub(sub_rows * free_cols.size());
    for (std::size_t r = 0; r < sub_rows; ++r) {
        for (std::size_t j = 0; j < free_cols.size(); ++j) {
            sub[r * free_cols.size() + j] = cost[(first_row + r) * cols + free_cols[j]];
        }
    }
    const auto picks = min_cost_assignment(sub, sub_rows, free_cols.size());
    double total = 0.0;
    for (std::size_t r = 0; r < sub_rows; ++r) {
        total += sub[r * free_cols.size() + picks[r]];
    }
    return total;
}

} // namespace

std::vector<std::size_t> lexicographic_min_assignment(std::span<const double> cost,
                                                      std::size_t rows,
                                                      std::size_t cols) {
    const auto first = min_cost_assignment(cost, rows, cols);
    double optimum = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        optimum += cost[r * cols + first[r]];
    }
    const double tol = 1e-12 * (1.0 + std::abs(optimum));

    std::vector<std::size_t> out;
    out.reserve(rows);
    std::vector<bool> taken(cols, false);
    double prefix = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        bool placed = false;
        for (std::size_t c = 0; c < cols && !placed; ++c) {
            if (taken[c]) continue;
            taken[c] = true;
            const double candidate =
                prefix + cost[r * cols + c] + completion_cost(cost, rows, cols, r + 1, taken);
            if (candidate <= optimum + tol) {
                out.push_back(c);
                prefix += cost[r * cols + c];
                placed = true;
            } else {
                taken[c] = false;
            }
        }
        if (!placed) {
            // Rounding pushed every branch over the tolerance; keep the
            // solver's own choice for the remaining rows.
            return first;
        }
    }
    return out;
}

} // namespace amr::detail
