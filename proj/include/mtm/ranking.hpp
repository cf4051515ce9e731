#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mtm/error.hpp"

namespace mtm {

// Descending ranks of a score vector plus the top-kappa indicator.
struct RankVector {
    std::vector<int> ranks;        // 1 = largest score
    int kappa = 0;
    std::vector<bool> top_flags;   // ranks[i] <= kappa
    std::size_t tie_count = 0;     // adjacent equal scores in sorted order

    auto size() const noexcept -> std::size_t { return ranks.size(); }
    auto in_top(std::size_t i) const -> bool { return top_flags.at(i); }

    // Rows in rank order (order[0] has rank 1).
    auto order() const -> std::vector<std::size_t>
    {
        std::vector<std::size_t> out(ranks.size());
        for (std::size_t i = 0; i < ranks.size(); ++i) {
            out[static_cast<std::size_t>(ranks[i] - 1)] = i;
        }
        return out;
    }
};

inline void check_kappa(int kappa, std::size_t n)
{
    if (kappa < 1 || static_cast<std::size_t>(kappa) > n) {
        throw InvalidArgument("kappa must lie in [1, " + std::to_string(n) + "], got " + std::to_string(kappa));
    }
}

// Ties are broken by ascending row index so the output is deterministic.
inline auto rank_descending(std::span<const double> scores, int kappa) -> RankVector
{
    const auto n = scores.size();
    check_kappa(kappa, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(scores[i])) {
            throw InvalidArgument("non-finite score at row " + std::to_string(i));
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
        [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RankVector out;
    out.kappa = kappa;
    out.ranks.resize(n);
    out.top_flags.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        out.ranks[order[r]] = static_cast<int>(r + 1);
        out.top_flags[order[r]] = static_cast<int>(r + 1) <= kappa;
        if (r > 0 && scores[order[r]] == scores[order[r - 1]]) {
            ++out.tie_count;
        }
    }
    return out;
}

// Rank of a single row under the same tie rule, without sorting.
inline auto rank_of(std::span<const double> scores, std::size_t i) -> int
{
    int above = 0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        if (scores[j] > scores[i] || (scores[j] == scores[i] && j < i)) {
            ++above;
        }
    }
    return above + 1;
}

} // namespace mtm
