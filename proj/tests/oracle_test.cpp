#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "mtm/oracle.hpp"
#include "test_support.hpp"

namespace mtm::oracle {
namespace {

using testing::random_orthonormal_design;
using testing::random_vector;

// Ranges seen on a dense grid; they can miss thin cells, so they are only
// ever compared one-sidedly or on instances whose cells are wide.
auto dense_ranges(const std::vector<Eigen::VectorXd>& models, const Eigen::MatrixXd& S) -> std::vector<RankRange>
{
    const auto n = static_cast<std::size_t>(S.rows());
    std::vector<RankRange> out(n, {static_cast<int>(n) + 1, 0});
    for (const auto& v : models) {
        const Eigen::VectorXd pred = S * v;
        const auto rv = rank_descending(std::span<const double>(pred.data(), n), 1);
        for (std::size_t i = 0; i < n; ++i) {
            out[i].min_rank = std::min(out[i].min_rank, rv.ranks[i]);
            out[i].max_rank = std::max(out[i].max_rank, rv.ranks[i]);
        }
    }
    return out;
}

auto circle(const Eigen::VectorXd& w0, double eps, int samples) -> std::vector<Eigen::VectorXd>
{
    std::vector<Eigen::VectorXd> out;
    for (int s = 0; s < samples; ++s) {
        const double th = 2.0 * std::numbers::pi * (s + 0.5) / samples;
        out.push_back(w0 + std::sqrt(eps) * Eigen::Vector2d(std::cos(th), std::sin(th)));
    }
    return out;
}

TEST(Oracle, ZeroRadiusGivesBaselineRanks)
{
    std::mt19937_64 rng(1);
    const auto Z = random_orthonormal_design(8, 2, rng);
    const Eigen::VectorXd w0 = random_vector(2, rng);
    const Eigen::VectorXd pred = Z * w0;
    const auto base = rank_descending(std::span<const double>(pred.data(), 8), 3);
    for (std::size_t i = 0; i < 8; ++i) {
        const auto r = angle_sweep_single(Z, w0, 0.0, 3, i);
        EXPECT_EQ(r.min_rank, base.ranks[i]);
        EXPECT_EQ(r.max_rank, base.ranks[i]);
    }
}

TEST(Oracle, TwoPointsSwapExactlyWhenTheGapBoundIsPositive)
{
    Eigen::MatrixXd Z(2, 2);
    Z << 1.0, 1.0, 1.0, -1.0;
    Z /= std::sqrt(2.0);
    const Eigen::Vector2d w0(1.0, 0.5); // row 0 on top
    for (double eps : {0.1, 0.2, 0.249, 0.251, 0.5}) {
        const double B = (Z.row(1) - Z.row(0)).dot(w0) + std::sqrt(eps) * (Z.row(1) - Z.row(0)).norm();
        const auto r = angle_sweep_single(Z, w0, eps, 1, 1);
        EXPECT_EQ(r.min_rank == 1, B > 0.0) << "eps " << eps;
        EXPECT_EQ(r.max_rank, 2);
    }
}

TEST(Oracle, AngleSweepAgreesWithDenseCircle)
{
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const auto Z = random_orthonormal_design(7, 2, rng);
        const Eigen::VectorXd w0 = random_vector(2, rng);
        const double eps = 0.05 + 0.1 * trial;
        const auto exact = angle_sweep_ranges(Z, w0, eps);
        auto models = circle(w0, eps, 200000);
        models.push_back(w0);
        const auto dense = dense_ranges(models, Z);
        for (std::size_t i = 0; i < exact.size(); ++i) {
            EXPECT_EQ(exact[i].min_rank, dense[i].min_rank) << "trial " << trial << " row " << i;
            EXPECT_EQ(exact[i].max_rank, dense[i].max_rank) << "trial " << trial << " row " << i;
        }
    }
}

TEST(Oracle, InteriorModelsNeverBeatTheBoundary)
{
    std::mt19937_64 rng(3);
    const auto Z = random_orthonormal_design(9, 2, rng);
    const Eigen::VectorXd w0 = random_vector(2, rng);
    const double eps = 0.3;
    const auto exact = angle_sweep_ranges(Z, w0, eps);
    std::vector<Eigen::VectorXd> inside;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int s = 0; s < 20000; ++s) {
        const double th = 2.0 * std::numbers::pi * u(rng);
        inside.push_back(w0 + std::sqrt(eps * u(rng)) * Eigen::Vector2d(std::cos(th), std::sin(th)));
    }
    const auto sampled = dense_ranges(inside, Z);
    for (std::size_t i = 0; i < exact.size(); ++i) {
        EXPECT_LE(exact[i].min_rank, sampled[i].min_rank);
        EXPECT_GE(exact[i].max_rank, sampled[i].max_rank);
    }
}

TEST(Oracle, IdenticalTargetsHaveNoBreakpoints)
{
    std::mt19937_64 rng(4);
    const Eigen::VectorXd y = random_vector(10, rng);
    Eigen::MatrixXd P(10, 2);
    P << y, y;
    const auto ranges = simplex_sweep_ranges(P);
    const auto base = rank_descending(std::span<const double>(y.data(), 10), 1);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_EQ(ranges[i].min_rank, base.ranks[i]);
        EXPECT_EQ(ranges[i].max_rank, base.ranks[i]);
    }
}

TEST(Oracle, CrossingPairSwapsAtTheTiePoint)
{
    // pred_0 = t, pred_1 = 1 - t: tied at t = 0.5.
    Eigen::MatrixXd P(3, 2);
    P << 1.0, 0.0, 0.0, 1.0, -1.0, -1.0;
    const auto r0 = simplex_sweep_k2(P, 1, 0);
    const auto r1 = simplex_sweep_k2(P, 1, 1);
    EXPECT_EQ(r0.min_rank, 1);
    EXPECT_EQ(r0.max_rank, 2);
    EXPECT_EQ(r1.min_rank, 1);
    EXPECT_EQ(r1.max_rank, 2);
    EXPECT_EQ(simplex_sweep_k2(P, 1, 2).min_rank, 3);
    const std::vector<std::size_t> members{0, 1};
    const auto g = simplex_sweep_group(P, members, 1);
    EXPECT_EQ(g.min_count, 1);
    EXPECT_EQ(g.max_count, 1);
}

TEST(Oracle, SimplexSweepAgreesWithDenseSegment)
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd P(10, 2);
        P << random_vector(10, rng), random_vector(10, rng);
        const auto exact = simplex_sweep_ranges(P);
        std::vector<Eigen::VectorXd> models;
        for (int s = 0; s <= 200000; ++s) {
            const double t = s / 200000.0;
            models.push_back(Eigen::Vector2d(t, 1.0 - t));
        }
        const auto dense = dense_ranges(models, P);
        for (std::size_t i = 0; i < 10; ++i) {
            EXPECT_EQ(exact[i].min_rank, dense[i].min_rank);
            EXPECT_EQ(exact[i].max_rank, dense[i].max_rank);
        }

        const std::vector<std::size_t> members{0, 3, 5, 8};
        int lo = 10, hi = 0;
        for (const auto& a : models) {
            const Eigen::VectorXd pred = P * a;
            const auto rv = rank_descending(std::span<const double>(pred.data(), 10), 4);
            int c = 0;
            for (auto m : members) c += rv.top_flags[m] ? 1 : 0;
            lo = std::min(lo, c);
            hi = std::max(hi, c);
        }
        const auto g = simplex_sweep_group(P, members, 4);
        EXPECT_EQ(g.min_count, lo);
        EXPECT_EQ(g.max_count, hi);
    }
}

TEST(Oracle, MonteCarloWithoutSamplesFindsNothing)
{
    std::mt19937_64 rng(6);
    const auto Z = random_orthonormal_design(12, 3, rng);
    const auto flips = monte_carlo_flips_ball(Z, random_vector(3, rng), 1.0, 4, 0, 1);
    EXPECT_EQ(std::count(flips.begin(), flips.end(), true), 0);
    Eigen::MatrixXd P(5, 2);
    P << random_vector(5, rng), random_vector(5, rng);
    const auto sflips = monte_carlo_flips_simplex(P, 2, 0, 1);
    EXPECT_EQ(std::count(sflips.begin(), sflips.end(), true), 0);
}

TEST(Oracle, MonteCarloFindsClosedFormWitnesses)
{
    std::mt19937_64 rng(7);
    const auto Z = random_orthonormal_design(12, 3, rng);
    const Eigen::VectorXd w0 = random_vector(3, rng);
    const double eps = 0.5;
    const int kappa = 4;
    const auto flips = monte_carlo_flips_ball(Z, w0, eps, kappa, 1, 9);
    const Eigen::VectorXd base_pred = Z * w0;
    const auto base = rank_descending(std::span<const double>(base_pred.data(), 12), kappa);
    for (Eigen::Index i = 0; i < 12; ++i) {
        const Eigen::VectorXd u = Z.row(i).transpose().normalized();
        for (double s : {1.0, -1.0}) {
            const Eigen::VectorXd pred = Z * (w0 + s * std::sqrt(eps) * u);
            const auto rv = rank_descending(std::span<const double>(pred.data(), 12), kappa);
            for (std::size_t j = 0; j < 12; ++j) {
                if (rv.top_flags[j] != base.top_flags[j]) EXPECT_TRUE(flips[j]);
            }
        }
    }

    // One-hot weights are always in the simplex pool.
    Eigen::MatrixXd P(4, 2);
    P << 4.0, 0.0, 3.0, 1.0, 0.0, 4.0, 1.0, 3.0;
    const auto sflips = monte_carlo_flips_simplex(P, 2, 1, 3);
    EXPECT_EQ(sflips, (std::vector<bool>{true, true, true, true}));
}

TEST(Oracle, RejectsWrongDimensions)
{
    std::mt19937_64 rng(8);
    const auto Z = random_orthonormal_design(6, 3, rng);
    EXPECT_THROW(angle_sweep_ranges(Z, random_vector(3, rng), 1.0), InvalidArgument);
    EXPECT_THROW(simplex_sweep_ranges(Eigen::MatrixXd::Zero(4, 3)), InvalidArgument);
    EXPECT_THROW(simplex_sweep_k2(Eigen::MatrixXd::Zero(4, 2), 5, 0), InvalidArgument);
}

} // namespace
} // namespace mtm::oracle
