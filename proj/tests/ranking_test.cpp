#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "mtm/ranking.hpp"

namespace mtm {
namespace {

auto ranks_of(const std::vector<double>& s, int kappa) { return rank_descending(s, kappa); }

TEST(Ranking, SmallExample)
{
    const auto r = ranks_of({0.3, 0.9, 0.5}, 2);
    EXPECT_EQ(r.ranks, (std::vector<int>{3, 1, 2}));
    EXPECT_EQ(r.top_flags, (std::vector<bool>{false, true, true}));
    EXPECT_EQ(r.kappa, 2);
}

TEST(Ranking, TiesGoToTheLowerRowIndex)
{
    const auto r = ranks_of({1.0, 1.0, 1.0, 1.0}, 1);
    EXPECT_EQ(r.ranks, (std::vector<int>{1, 2, 3, 4}));
    EXPECT_TRUE(r.top_flags[0]);
    EXPECT_EQ(r.tie_count, 3u);
}

TEST(Ranking, MatchesNaiveSortOracle)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    std::vector<double> s(1000);
    for (auto& v : s) v = u(rng);
    const int kappa = 137;
    const auto r = ranks_of(s, kappa);

    // Oracle: count strictly larger scores (plus earlier equal ones).
    for (std::size_t i = 0; i < s.size(); ++i) {
        int above = 0;
        for (std::size_t j = 0; j < s.size(); ++j) above += (s[j] > s[i] || (s[j] == s[i] && j < i)) ? 1 : 0;
        ASSERT_EQ(r.ranks[i], above + 1);
        ASSERT_EQ(r.top_flags[i], above < kappa);
        ASSERT_EQ(rank_of(s, i), r.ranks[i]);
    }
    EXPECT_EQ(std::count(r.top_flags.begin(), r.top_flags.end(), true), kappa);

    std::vector<int> sorted = r.ranks;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < sorted.size(); ++k) EXPECT_EQ(sorted[k], static_cast<int>(k + 1));
}

TEST(Ranking, InvariantUnderIncreasingAffineMaps)
{
    std::mt19937_64 rng(4);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> s(200);
    for (auto& v : s) v = z(rng);
    const auto base = ranks_of(s, 20);
    for (double scale : {0.01, 2.0, 1e3}) {
        std::vector<double> t(s);
        for (auto& v : t) v = scale * v - 7.0;
        EXPECT_EQ(ranks_of(t, 20).ranks, base.ranks);
    }
}

TEST(Ranking, OrderListsRowsByRank)
{
    const auto r = ranks_of({0.1, 0.7, 0.4, 0.9}, 2);
    EXPECT_EQ(r.order(), (std::vector<std::size_t>{3, 1, 2, 0}));
}

TEST(Ranking, RejectsBadInput)
{
    EXPECT_THROW(ranks_of({1.0, 2.0}, 0), InvalidArgument);
    EXPECT_THROW(ranks_of({1.0, 2.0}, 3), InvalidArgument);
    EXPECT_THROW(ranks_of({1.0, std::nan("")}, 1), InvalidArgument);
}

} // namespace
} // namespace mtm
