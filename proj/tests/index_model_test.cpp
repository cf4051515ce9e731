#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <random>
#include <span>
#include <vector>

#include "mtm/index_model.hpp"
#include "test_support.hpp"

namespace mtm {
namespace {

using testing::make_dataset;
using testing::random_orthonormal_design;
using testing::random_vector;

auto ids(std::size_t n) -> std::vector<std::string>
{
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("r" + std::to_string(i));
    return out;
}

auto names(Eigen::Index k) -> std::vector<std::string>
{
    std::vector<std::string> out;
    for (Eigen::Index j = 0; j < k; ++j) out.push_back("y" + std::to_string(j));
    return out;
}

auto raw_ensemble(const Eigen::MatrixXd& P) -> IndexEnsemble
{
    return build_ensemble_from_raw(P, names(P.cols()), ids(static_cast<std::size_t>(P.rows())), Standardization::none);
}

auto random_ensemble(Eigen::Index n, Eigen::Index K, std::mt19937_64& rng) -> IndexEnsemble
{
    Eigen::MatrixXd P(n, K);
    for (Eigen::Index k = 0; k < K; ++k) P.col(k) = random_vector(n, rng);
    return raw_ensemble(P);
}

auto sample_simplex(Eigen::Index K, std::mt19937_64& rng) -> Eigen::VectorXd
{
    std::exponential_distribution<double> e(1.0);
    Eigen::VectorXd a(K);
    for (Eigen::Index k = 0; k < K; ++k) a(k) = e(rng);
    return a / a.sum();
}

auto ranks(const Eigen::VectorXd& pred, int kappa) -> RankVector
{
    return rank_descending(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())), kappa);
}

TEST(IndexModel, ZscoreStandardization)
{
    std::mt19937_64 rng(1);
    Eigen::MatrixXd raw(30, 2);
    raw << 5.0 + 3.0 * random_vector(30, rng).array(), -2.0 + 0.1 * random_vector(30, rng).array();
    const auto e = build_ensemble_from_raw(raw, names(2), ids(30));
    for (Eigen::Index k = 0; k < 2; ++k) {
        const double mu = e.predictions.col(k).mean();
        const double sd = std::sqrt((e.predictions.col(k).array() - mu).square().sum() / 29.0);
        EXPECT_NEAR(mu, 0.0, 1e-8);
        EXPECT_NEAR(sd, 1.0, 1e-8);
    }
    EXPECT_NEAR(e.alpha(0), 0.5, 1e-15);
    EXPECT_LT((e.combined() - 0.5 * (e.predictions.col(0) + e.predictions.col(1))).norm(), 1e-10);

    Eigen::MatrixXd flat(5, 2);
    flat << random_vector(5, rng), Eigen::VectorXd::Constant(5, 3.0);
    try {
        build_ensemble_from_raw(flat, {"a", "flat"}, ids(5));
        FAIL();
    } catch (const DataError& err) {
        EXPECT_NE(std::string(err.what()).find("flat"), std::string::npos);
    }
}

TEST(IndexModel, PercentileStandardizationIsAverageRank)
{
    Eigen::MatrixXd raw(5, 1);
    raw << 10.0, 30.0, 20.0, 20.0, 40.0;
    const auto e = build_ensemble_from_raw(raw, {"y"}, ids(5), Standardization::percentile);
    const Eigen::VectorXd expect = (Eigen::VectorXd(5) << 0.0, 0.75, 0.375, 0.375, 1.0).finished();
    EXPECT_LT((e.predictions.col(0) - expect).norm(), 1e-12);
}

TEST(IndexModel, OpposedPredictionsTieAndBreakByIndex)
{
    Eigen::MatrixXd P(2, 2);
    P << 1.0, -1.0, -1.0, 1.0;
    const auto e = raw_ensemble(P);
    EXPECT_LT(e.combined().norm(), 1e-15);
    const auto r = ranks(e.combined(), 1);
    EXPECT_EQ(r.ranks, (std::vector<int>{1, 2}));
}

TEST(IndexModel, OneHotReproducesSingleTargetRanking)
{
    std::mt19937_64 rng(2);
    const auto e = random_ensemble(40, 3, rng);
    for (Eigen::Index k = 0; k < 3; ++k) {
        EXPECT_EQ(ranks(e.combined(Eigen::VectorXd::Unit(3, k)), 5).ranks, ranks(e.predictions.col(k), 5).ranks);
    }
    const auto single = random_ensemble(15, 1, rng);
    EXPECT_EQ(ranks(single.combined(), 3).ranks, ranks(single.predictions.col(0), 3).ranks);
}

TEST(IndexModel, PositiveScalingKeepsTheRanking)
{
    std::mt19937_64 rng(3);
    const auto e = random_ensemble(50, 3, rng);
    for (int s = 0; s < 20; ++s) {
        const auto a = sample_simplex(3, rng);
        for (double c : {0.1, 0.5, 7.0}) EXPECT_EQ(ranks(e.combined(c * a), 10).ranks, ranks(e.combined(a), 10).ranks);
    }
}

TEST(IndexModel, IndexVariableEqualsIndexModelOnRawPredictions)
{
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::MatrixXd X(20, 3);
        X.col(0).setOnes();
        X.rightCols(2) = Eigen::MatrixXd::NullaryExpr(20, 2, [&] { return std::normal_distribution<double>(1.0, 2.0)(rng); });
        Eigen::MatrixXd Y(20, 2);
        Y << random_vector(20, rng, 3.0), random_vector(20, rng);
        const auto [ds, basis] = orthonormalize(make_dataset(X, Y, {}, Basis::original));
        const std::vector<LinearModel> models{fit_ols(ds, "y0"), fit_ols(ds, "y1")};
        const Eigen::Vector2d alpha(0.3, 0.7);
        const auto iv = fit_index_variable(ds, alpha, {"y0", "y1"});
        const auto e = build_ensemble(models, ds, Standardization::none);
        EXPECT_LT((iv.predict(ds.features()) - e.combined(alpha)).cwiseAbs().maxCoeff(), 1e-8);

        const auto one_hot = fit_index_variable(ds, Eigen::Vector2d(0.0, 1.0), {"y0", "y1"});
        EXPECT_LT((one_hot.weights - models[1].weights).norm(), 1e-12);
    }
    EXPECT_THROW(fit_index_variable(make_dataset(random_orthonormal_design(5, 2, rng), random_vector(5, rng)), Eigen::Vector2d(0.6, 0.6), {"y0", "y0"}),
        InvalidArgument);
}

TEST(IndexModel, SameTargetTwiceIsTheSingleTargetFit)
{
    std::mt19937_64 rng(5);
    const auto Z = random_orthonormal_design(20, 3, rng);
    const Eigen::VectorXd y = random_vector(20, rng);
    Eigen::MatrixXd Y(20, 2);
    Y << y, y;
    const auto ds = make_dataset(Z, Y);
    EXPECT_LT((fit_index_variable(ds, Eigen::Vector2d(0.5, 0.5), {"y0", "y1"}).weights - fit_ols(ds, "y0").weights).norm(), 1e-12);
}

TEST(IndexModel, GapBoundsDominateSampledGaps)
{
    std::mt19937_64 rng(6);
    const auto e = random_ensemble(12, 3, rng);
    const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
    for (std::size_t i = 0; i < 6; ++i) {
        const std::size_t j = 11 - i;
        double best = -1e300;
        for (int s = 0; s < 10000; ++s) {
            const Eigen::VectorXd a = sample_simplex(3, rng);
            best = std::max(best, e.combined(a)(static_cast<Eigen::Index>(i)) - e.combined(a)(static_cast<Eigen::Index>(j)));
        }
        const double tight = gap_sup_multi(e, i, j, 1.0);
        EXPECT_GE(tight + 1e-12, best);
        EXPECT_GE(gap_bound_multi(e, i, j, uniform), tight);
        EXPECT_GE(gap_sup_multi(e, i, j), gap_sup_multi(e, i, j, 1.0) - 1e-15);
    }

    // K = 1: the stated bound is the gap plus its absolute value.
    Eigen::MatrixXd P(2, 1);
    P << 0.2, 0.7;
    const auto one = raw_ensemble(P);
    EXPECT_NEAR(gap_bound_multi(one, 0, 1, Eigen::VectorXd::Ones(1)), 0.0, 1e-15);
    EXPECT_NEAR(gap_bound_multi(one, 1, 0, Eigen::VectorXd::Ones(1)), 1.0, 1e-15);
    EXPECT_THROW(gap_bound_multi(one, 0, 0, Eigen::VectorXd::Ones(1)), InvalidArgument);
}

TEST(IndexModel, MaxPredictionAlpha)
{
    Eigen::MatrixXd P(2, 3);
    P << 0.2, 0.9, 0.1, 0.5, 0.5, 0.1;
    const auto e = raw_ensemble(P);
    EXPECT_EQ(max_prediction_alpha(e, 0), Eigen::Vector3d(0.0, 1.0, 0.0));
    EXPECT_EQ(max_prediction_alpha(e, 1), Eigen::Vector3d(1.0, 0.0, 0.0)); // ties go to the lower index
    EXPECT_EQ(min_prediction_alpha(e, 0), Eigen::Vector3d(0.0, 0.0, 1.0));

    Eigen::MatrixXd Q(3, 1);
    Q << 1.0, 2.0, 3.0;
    EXPECT_EQ(max_prediction_alpha(raw_ensemble(Q), 1), Eigen::VectorXd::Ones(1));

    std::mt19937_64 rng(7);
    const auto r = random_ensemble(10, 4, rng);
    for (std::size_t i = 0; i < 10; ++i) {
        const double top = r.combined(max_prediction_alpha(r, i))(static_cast<Eigen::Index>(i));
        EXPECT_DOUBLE_EQ(top, r.predictions.row(static_cast<Eigen::Index>(i)).maxCoeff());
        for (int s = 0; s < 1000; ++s) EXPECT_GE(top + 1e-12, r.combined(sample_simplex(4, rng))(static_cast<Eigen::Index>(i)));
    }
}

TEST(IndexModel, PruningMatchesFlipSearch)
{
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const auto e = random_ensemble(10, 2 + trial % 2, rng);
        const int kappa = 2 + trial % 3;
        const auto pruned = prune_never_top_multi(e, kappa);
        FlipOptions exact;
        exact.exact = true;
        for (auto i : pruned.never_top) {
            const auto r = flip_search_multi(e, kappa, i, exact);
            EXPECT_GT(r.min_rank, kappa);
            for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(e.k()); ++k) {
                EXPECT_FALSE(ranks(e.combined(Eigen::VectorXd::Unit(static_cast<Eigen::Index>(e.k()), k)), kappa).top_flags[i]);
            }
        }
        EXPECT_TRUE(prune_never_top_multi(e, 10).never_top.empty());
    }
}

TEST(IndexModel, FlipSearchMatchesSegmentSweep)
{
    std::mt19937_64 rng(9);
    FlipOptions exact;
    exact.exact = true;
    for (int trial = 0; trial < 20; ++trial) {
        const auto e = random_ensemble(8, 2, rng);
        const auto oracle = oracle::simplex_sweep_ranges(e.predictions);
        for (int kappa : {2, 3}) {
            const auto reports = flip_search_multi_rows(e, kappa, all_rows(8), exact);
            int flips = 0;
            for (const auto& r : reports) {
                ASSERT_EQ(r.status, FlipStatus::certified);
                EXPECT_EQ(r.min_rank, oracle[r.row].min_rank) << "trial " << trial << " row " << r.row;
                EXPECT_EQ(r.max_rank, oracle[r.row].max_rank) << "trial " << trial << " row " << r.row;
                const bool flippable = oracle[r.row].min_rank <= kappa && kappa < oracle[r.row].max_rank;
                EXPECT_EQ(r.flippable, flippable);
                flips += flippable ? 1 : 0;
                if (r.flippable) {
                    ASSERT_TRUE(r.witness.has_value());
                    EXPECT_NEAR(r.witness->sum(), 1.0, 1e-12);
                    EXPECT_GE(r.witness->minCoeff(), 0.0);
                }
            }
            EXPECT_DOUBLE_EQ(ambiguity_multi(reports), flips / 8.0);
        }
    }
}

TEST(IndexModel, IdenticalTargetsAreNeverAmbiguous)
{
    std::mt19937_64 rng(10);
    const Eigen::VectorXd y = random_vector(30, rng);
    Eigen::MatrixXd P(30, 3);
    P << y, y, y;
    const auto e = raw_ensemble(P);
    for (const auto& r : flip_search_multi_rows(e, 6, all_rows(30))) {
        EXPECT_EQ(r.min_rank, r.max_rank);
        EXPECT_FALSE(r.flippable);
    }
    EXPECT_EQ(ambiguity_multi(e, 6, all_rows(30)), 0.0);
}

TEST(IndexModel, AmbiguityCoversOneHotDisagreements)
{
    std::mt19937_64 rng(11);
    const auto e = random_ensemble(30, 3, rng);
    const int kappa = 6;
    std::vector<bool> disagree(30, false);
    for (Eigen::Index a = 0; a < 3; ++a) {
        for (Eigen::Index b = a + 1; b < 3; ++b) {
            const auto ra = ranks(e.predictions.col(a), kappa), rb = ranks(e.predictions.col(b), kappa);
            for (std::size_t i = 0; i < 30; ++i) disagree[i] = disagree[i] || ra.top_flags[i] != rb.top_flags[i];
        }
    }
    const double lower = static_cast<double>(std::count(disagree.begin(), disagree.end(), true)) / 30.0;
    EXPECT_GE(ambiguity_multi(e, kappa, all_rows(30)), lower);
    EXPECT_GT(lower, 0.0);

    std::vector<FlipReport> reports(200);
    for (std::size_t k = 0; k < 200; ++k) reports[k].flippable = k < 10;
    EXPECT_DOUBLE_EQ(ambiguity_multi(reports), 0.05);
}

} // namespace
} // namespace mtm
