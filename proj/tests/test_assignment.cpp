#include <algorithm>
#include <numeric>
#include <optional>

#include "doctest.h"
#include "hoi/assignment.hpp"
#include "hoi/rng.hpp"

using namespace hoi;

namespace {

// Permutation-enumeration oracle: min-cost maximal matching by brute force,
// with lexicographically smallest match list among optima.
std::optional<Assignment> brute_force(const CostMatrix& cost) {
    const int rows = cost.rows(), cols = cost.cols();
    const bool rows_small = rows <= cols;
    const int n_small = std::min(rows, cols);
    const int n_large = std::max(rows, cols);

    std::vector<int> pick(static_cast<size_t>(n_large));
    std::iota(pick.begin(), pick.end(), 0);
    std::optional<Assignment> best;
    do {
        Assignment cand;
        bool feasible = true;
        double total = 0.0;
        for (int i = 0; i < n_small; ++i) {
            const int r = rows_small ? i : pick[static_cast<size_t>(i)];
            const int c = rows_small ? pick[static_cast<size_t>(i)] : i;
            const double v = cost.at(r, c);
            if (std::isinf(v)) {
                feasible = false;
                break;
            }
            total += v;
            cand.matches.emplace_back(r, c);
        }
        if (!feasible) continue;
        std::sort(cand.matches.begin(), cand.matches.end());
        cand.total_cost = total;
        if (!best || cand.total_cost < best->total_cost - 1e-12 ||
            (std::abs(cand.total_cost - best->total_cost) <= 1e-12 &&
             cand.matches < best->matches))
            best = cand;
    } while (std::next_permutation(pick.begin(), pick.end()));
    return best;
}

CostMatrix random_matrix(Rng& rng, int rows, int cols, double forbid_prob = 0.0) {
    CostMatrix cost(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            cost.at(r, c) =
                rng.bernoulli(forbid_prob) ? assignment_forbidden() : rng.uniform(0.0, 100.0);
    return cost;
}

}  // namespace

TEST_CASE("zero diagonal picks the diagonal") {
    CostMatrix cost(2, 2);
    cost.at(0, 0) = 0;
    cost.at(0, 1) = 9;
    cost.at(1, 0) = 9;
    cost.at(1, 1) = 0;
    const Assignment a = solve_assignment(cost);
    CHECK(a.matches == std::vector<std::pair<int, int>>{{0, 0}, {1, 1}});
    CHECK(a.total_cost == doctest::Approx(0.0));
}

TEST_CASE("2x2 where the greedy diagonal is suboptimal") {
    CostMatrix cost(2, 2);
    cost.at(0, 0) = 1;
    cost.at(0, 1) = 2;
    cost.at(1, 0) = 2;
    cost.at(1, 1) = 4;
    const Assignment a = solve_assignment(cost);
    CHECK(a.matches == std::vector<std::pair<int, int>>{{0, 1}, {1, 0}});
    CHECK(a.total_cost == doctest::Approx(4.0));
}

TEST_CASE("lexicographic tie-break among equal-cost optima") {
    CostMatrix cost(2, 2, 1.0);  // every matching costs 2
    const Assignment a = solve_assignment(cost);
    CHECK(a.matches == std::vector<std::pair<int, int>>{{0, 0}, {1, 1}});

    CostMatrix swap_cost(3, 3, 5.0);
    swap_cost.at(0, 2) = 1.0;  // forces (0,2); remaining 2x2 全 ties -> smallest
    const Assignment b = solve_assignment(swap_cost);
    CHECK(b.matches == std::vector<std::pair<int, int>>{{0, 2}, {1, 0}, {2, 1}});
}

TEST_CASE("forbidden cells are never matched; infeasible matrices throw") {
    CostMatrix cost(2, 2);
    cost.at(0, 0) = assignment_forbidden();
    cost.at(0, 1) = 1.0;
    cost.at(1, 0) = 1.0;
    cost.at(1, 1) = assignment_forbidden();
    const Assignment a = solve_assignment(cost);
    CHECK(a.matches == std::vector<std::pair<int, int>>{{0, 1}, {1, 0}});

    CostMatrix blocked(2, 2);
    blocked.at(0, 0) = assignment_forbidden();
    blocked.at(0, 1) = assignment_forbidden();
    blocked.at(1, 0) = 1.0;
    blocked.at(1, 1) = 1.0;
    CHECK_THROWS_AS(solve_assignment(blocked), NoFeasibleMatching);
}

TEST_CASE("solver equals the permutation oracle on random matrices") {
    Rng rng(23);
    for (int trial = 0; trial < 300; ++trial) {
        const int rows = 1 + static_cast<int>(rng.below(6));
        const int cols = 1 + static_cast<int>(rng.below(6));
        const CostMatrix cost = random_matrix(rng, rows, cols, trial % 3 == 0 ? 0.25 : 0.0);
        const auto expected = brute_force(cost);
        if (!expected) {
            CHECK_THROWS_AS(solve_assignment(cost), NoFeasibleMatching);
            continue;
        }
        const Assignment got = solve_assignment(cost);
        CHECK(got.total_cost == doctest::Approx(expected->total_cost).epsilon(1e-9));
        CHECK(got.matches == expected->matches);
    }
}

TEST_CASE("associate_heads: contained high-confidence head matches") {
    const std::vector<BoundingBox> humans = {{0, 0, 10, 20}};
    const std::vector<ScoredBox> heads = {{BoundingBox(3, 1, 7, 5), 1.0}};
    const auto result = associate_heads(humans, heads);
    REQUIRE(result.size() == 1);
    REQUIRE(result[0].has_value());
    CHECK(*result[0] == 0);
}

TEST_CASE("associate_heads: one shared head goes to exactly one human") {
    // Two overlapping humans, one head inside both.
    const std::vector<BoundingBox> humans = {{0, 0, 10, 20}, {2, 0, 12, 20}};
    const std::vector<ScoredBox> heads = {{BoundingBox(4, 1, 8, 5), 0.9}};
    const auto result = associate_heads(humans, heads);
    const int matched = (result[0].has_value() ? 1 : 0) + (result[1].has_value() ? 1 : 0);
    CHECK(matched == 1);
}

TEST_CASE("associate_heads: empty head list maps everyone to none") {
    const std::vector<BoundingBox> humans = {{0, 0, 10, 20}, {20, 0, 30, 20}};
    const auto result = associate_heads(humans, {});
    CHECK_FALSE(result[0].has_value());
    CHECK_FALSE(result[1].has_value());
}

TEST_CASE("associate_heads: crossing scenario equals brute-force min cost") {
    // Two humans standing close, heads offset so the naive containment rule
    // would mismatch: both heads overlap both humans, but distances differ.
    const std::vector<BoundingBox> humans = {{0, 0, 12, 30}, {8, 0, 20, 30}};
    const std::vector<ScoredBox> heads = {
        {BoundingBox(9, 1, 12.5, 5), 0.95},  // closer to human 1's top
        {BoundingBox(3, 1, 8.5, 5), 0.80},   // over human 0
    };
    const HeadAssociationConfig config{/*ioh_threshold=*/0.1, 0.5, 0.5};
    const auto result = associate_heads(humans, heads, config);

    // Oracle: enumerate all injective partial matchings over admissible cells,
    // maximize cardinality, then minimize cost.
    struct Option {
        std::vector<std::optional<int>> pick;
        double cost;
        int size;
    };
    std::vector<Option> options;
    for (int h0 = -1; h0 < 2; ++h0)
        for (int h1 = -1; h1 < 2; ++h1) {
            if (h0 >= 0 && h0 == h1) continue;
            Option opt{{std::nullopt, std::nullopt}, 0.0, 0};
            bool ok = true;
            for (int i = 0; i < 2; ++i) {
                const int pick = i == 0 ? h0 : h1;
                if (pick < 0) continue;
                const auto& human = humans[static_cast<size_t>(i)];
                const auto& head = heads[static_cast<size_t>(pick)];
                if (ioh(human, head.box) <= config.ioh_threshold) {
                    ok = false;
                    break;
                }
                const double dx = human.center_x() - head.box.center_x();
                const double dy = human.center_y() - head.box.center_y();
                opt.cost += 0.5 * std::sqrt(dx * dx + dy * dy) / human.shorter_edge() +
                            0.5 * (1.0 - head.confidence);
                opt.pick[static_cast<size_t>(i)] = pick;
                opt.size += 1;
            }
            if (ok) options.push_back(opt);
        }
    const auto best = *std::min_element(options.begin(), options.end(),
                                        [](const Option& a, const Option& b) {
                                            if (a.size != b.size) return a.size > b.size;
                                            return a.cost < b.cost;
                                        });
    CHECK(result == best.pick);
}

TEST_CASE("raising a matched head's confidence never unmatches it") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<BoundingBox> humans;
        for (int i = 0; i < 3; ++i) {
            const double x = rng.uniform(0, 60);
            humans.emplace_back(x, 0.0, x + 14.0, 30.0);
        }
        std::vector<ScoredBox> heads;
        for (int k = 0; k < 3; ++k) {
            const double x = rng.uniform(0, 70);
            heads.push_back({BoundingBox(x, 1.0, x + 5.0, 6.0), rng.uniform(0.2, 0.8)});
        }
        const HeadAssociationConfig config{0.3, 0.5, 0.5};
        const auto before = associate_heads(humans, heads, config);
        for (size_t i = 0; i < humans.size(); ++i) {
            if (!before[i]) continue;
            auto boosted = heads;
            boosted[static_cast<size_t>(*before[i])].confidence =
                std::min(1.0, boosted[static_cast<size_t>(*before[i])].confidence + 0.15);
            const auto after = associate_heads(humans, boosted, config);
            bool still_matched = false;
            for (const auto& pick : after)
                if (pick && *pick == *before[i]) still_matched = true;
            CHECK(still_matched);
        }
    }
}

TEST_CASE("associate_heads is injective over heads and humans") {
    Rng rng(37);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<BoundingBox> humans;
        std::vector<ScoredBox> heads;
        const int nh = 1 + static_cast<int>(rng.below(4));
        const int nk = 1 + static_cast<int>(rng.below(4));
        for (int i = 0; i < nh; ++i) {
            const double x = rng.uniform(0, 50);
            humans.emplace_back(x, 0.0, x + 12.0, 26.0);
        }
        for (int k = 0; k < nk; ++k) {
            const double x = rng.uniform(0, 55);
            heads.push_back({BoundingBox(x, 0.5, x + 4.0, 4.5), rng.uniform(0.0, 1.0)});
        }
        const auto result = associate_heads(humans, heads, {0.2, 0.5, 0.5});
        std::vector<int> used;
        for (const auto& pick : result)
            if (pick) used.push_back(*pick);
        std::sort(used.begin(), used.end());
        CHECK(std::adjacent_find(used.begin(), used.end()) == used.end());
    }
}
