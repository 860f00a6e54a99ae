#pragma once

#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "hoi/geometry.hpp"

namespace hoi {

// Cost sentinel for cells that must never be matched.
inline double assignment_forbidden() { return std::numeric_limits<double>::infinity(); }

struct Assignment {
    std::vector<std::pair<int, int>> matches;  // (row, col), sorted by row
    double total_cost = 0.0;
};

// Minimum-cost maximal matching on a dense R x C cost matrix (Jonker-Volgenant
// style shortest augmenting paths). Exactly min(R,C) pairs are returned unless
// forbidden cells make that impossible, which raises NoFeasibleMatching.
// Among cost-optimal matchings the lexicographically smallest match list wins.
class CostMatrix {
public:
    CostMatrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), cells_(static_cast<size_t>(rows) * cols, fill) {
        if (rows <= 0 || cols <= 0) throw ShapeError("cost matrix must be non-empty");
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    double& at(int r, int c) { return cells_[static_cast<size_t>(r) * cols_ + c]; }
    double at(int r, int c) const { return cells_[static_cast<size_t>(r) * cols_ + c]; }

private:
    int rows_, cols_;
    std::vector<double> cells_;
};

Assignment solve_assignment(const CostMatrix& cost);

struct ScoredBox {
    BoundingBox box;
    double confidence;  // in [0,1]
};

struct HeadAssociationConfig {
    double ioh_threshold = 0.7;
    double distance_weight = 0.5;
    double confidence_weight = 0.5;
};

// Assigns detected heads to humans. Cost mixes the center distance ratio
// (distance over the human box's shorter edge) with (1 - confidence); heads
// whose IoH with the human is <= threshold are inadmissible. Humans with no
// admissible head stay unmatched.
std::vector<std::optional<int>> associate_heads(const std::vector<BoundingBox>& humans,
                                                const std::vector<ScoredBox>& heads,
                                                const HeadAssociationConfig& config = {});

}  // namespace hoi
