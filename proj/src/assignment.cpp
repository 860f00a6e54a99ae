#include "hoi/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace hoi {
namespace {

bool is_forbidden(double v) { return std::isinf(v) && v > 0.0; }

// Square min-cost perfect matching via potentials and shortest augmenting
// paths. `a` is n*n row-major; returns row index matched to each column.
std::vector<int> hungarian_square(const std::vector<double>& a, int n) {
    const double kInf = std::numeric_limits<double>::max();
    std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
    std::vector<int> match(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<size_t>(n) + 1, kInf);
        std::vector<bool> used(static_cast<size_t>(n) + 1, false);
        do {
            used[static_cast<size_t>(j0)] = true;
            const int i0 = match[static_cast<size_t>(j0)];
            double delta = kInf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) continue;
                const double cur = a[static_cast<size_t>(i0 - 1) * n + (j - 1)] - u[static_cast<size_t>(i0)] -
                                   v[static_cast<size_t>(j)];
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
            const int j1 = way[static_cast<size_t>(j0)];
            match[static_cast<size_t>(j0)] = match[static_cast<size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_of_col(static_cast<size_t>(n), -1);
    for (int j = 1; j <= n; ++j) row_of_col[static_cast<size_t>(j - 1)] = match[static_cast<size_t>(j)] - 1;
    return row_of_col;
}

// Min-cost maximal matching over a row/column selection of `cost`. Returns
// nullopt when forbidden cells make a maximal matching impossible.
std::optional<double> optimal_submatching(const CostMatrix& cost, const std::vector<int>& rows,
                                          const std::vector<int>& cols) {
    const int nr = static_cast<int>(rows.size());
    const int nc = static_cast<int>(cols.size());
    if (nr == 0 || nc == 0) return 0.0;
    const int n = std::max(nr, nc);
    double max_abs = 0.0;
    for (int r : rows)
        for (int c : cols) {
            const double v = cost.at(r, c);
            if (!is_forbidden(v)) max_abs = std::max(max_abs, std::abs(v));
        }
    const double big = (max_abs + 1.0) * (n + 1) * 4.0;
    std::vector<double> a(static_cast<size_t>(n) * n, 0.0);  // dummy rows/cols cost 0
    for (int i = 0; i < nr; ++i)
        for (int j = 0; j < nc; ++j) {
            const double v = cost.at(rows[static_cast<size_t>(i)], cols[static_cast<size_t>(j)]);
            a[static_cast<size_t>(i) * n + j] = is_forbidden(v) ? big : v;
        }
    const auto row_of_col = hungarian_square(a, n);
    double total = 0.0;
    for (int j = 0; j < nc; ++j) {
        const int i = row_of_col[static_cast<size_t>(j)];
        if (i >= nr) continue;  // matched to a padding row
        const double v = cost.at(rows[static_cast<size_t>(i)], cols[static_cast<size_t>(j)]);
        if (is_forbidden(v)) return std::nullopt;
        total += v;
    }
    return total;
}

}  // namespace

Assignment solve_assignment(const CostMatrix& cost) {
    const int rows = cost.rows();
    const int cols = cost.cols();
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const double v = cost.at(r, c);
            if (std::isnan(v) || (std::isinf(v) && v < 0.0))
                throw ShapeError("cost matrix entries must be finite or the forbidden sentinel");
        }

    std::vector<int> all_cols(static_cast<size_t>(cols));
    for (int c = 0; c < cols; ++c) all_cols[static_cast<size_t>(c)] = c;
    std::vector<int> tail_rows(static_cast<size_t>(rows));
    for (int r = 0; r < rows; ++r) tail_rows[static_cast<size_t>(r)] = r;

    const auto optimum = optimal_submatching(cost, tail_rows, all_cols);
    if (!optimum) throw NoFeasibleMatching("forbidden cells block every maximal matching");
    const double tol = 1e-9 * (1.0 + std::abs(*optimum));

    // Build the lexicographically smallest optimal match list row by row:
    // fix the smallest column that still admits an optimal completion.
    Assignment result;
    std::vector<int> avail = all_cols;
    double fixed_cost = 0.0;
    for (int r = 0; r < rows; ++r) {
        std::vector<int> rest_rows;
        for (int rr = r + 1; rr < rows; ++rr) rest_rows.push_back(rr);
        bool matched = false;
        for (size_t ci = 0; ci < avail.size(); ++ci) {
            const int c = avail[ci];
            const double v = cost.at(r, c);
            if (is_forbidden(v)) continue;
            std::vector<int> rest_cols = avail;
            rest_cols.erase(rest_cols.begin() + static_cast<long>(ci));
            const auto sub = optimal_submatching(cost, rest_rows, rest_cols);
            if (sub && std::abs(fixed_cost + v + *sub - *optimum) <= tol) {
                result.matches.emplace_back(r, c);
                fixed_cost += v;
                avail.erase(avail.begin() + static_cast<long>(ci));
                matched = true;
                break;
            }
        }
        if (!matched && rows <= cols) throw NoFeasibleMatching("row " + std::to_string(r) + " unmatchable");
    }
    if (static_cast<int>(result.matches.size()) != std::min(rows, cols))
        throw NoFeasibleMatching("matching is not maximal");
    result.total_cost = fixed_cost;
    return result;
}

std::vector<std::optional<int>> associate_heads(const std::vector<BoundingBox>& humans,
                                                const std::vector<ScoredBox>& heads,
                                                const HeadAssociationConfig& config) {
    std::vector<std::optional<int>> out(humans.size());
    if (humans.empty() || heads.empty()) return out;

    const int nh = static_cast<int>(humans.size());
    const int nk = static_cast<int>(heads.size());
    double max_admissible = 0.0;
    CostMatrix cost(nh, nk + nh, assignment_forbidden());
    for (int i = 0; i < nh; ++i) {
        for (int k = 0; k < nk; ++k) {
            if (ioh(humans[static_cast<size_t>(i)], heads[static_cast<size_t>(k)].box) <=
                config.ioh_threshold)
                continue;
            const double dx = humans[static_cast<size_t>(i)].center_x() -
                              heads[static_cast<size_t>(k)].box.center_x();
            const double dy = humans[static_cast<size_t>(i)].center_y() -
                              heads[static_cast<size_t>(k)].box.center_y();
            const double dist_ratio =
                std::sqrt(dx * dx + dy * dy) / humans[static_cast<size_t>(i)].shorter_edge();
            const double c = config.distance_weight * dist_ratio +
                             config.confidence_weight * (1.0 - heads[static_cast<size_t>(k)].confidence);
            cost.at(i, k) = c;
            max_admissible = std::max(max_admissible, c);
        }
    }
    // Dummy columns let a human stay headless; priced so that real admissible
    // matches are always preferred and match cardinality is maximized.
    const double dummy = (max_admissible + 1.0) * (nh + 1);
    for (int i = 0; i < nh; ++i) cost.at(i, nk + i) = dummy;

    const Assignment solved = solve_assignment(cost);
    for (const auto& [row, col] : solved.matches)
        if (col < nk) out[static_cast<size_t>(row)] = col;
    return out;
}

}  // namespace hoi
