#pragma once

#include <Eigen/Core>

#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include "mtm/dataset.hpp"
#include "mtm/error.hpp"
#include "mtm/flip.hpp"
#include "mtm/linear_fit.hpp"
#include "mtm/oracle.hpp"

namespace mtm {

// Upper bound on pred_i - pred_j over the ball; it is attained, so it is the
// supremum, not just a bound.
struct GapBound {
    std::size_t i = 0;
    std::size_t j = 0;
    double value = 0.0;
};

inline auto gap_bound_value(const Eigen::MatrixXd& Z, const Eigen::VectorXd& w0, double eps, std::size_t i, std::size_t j) -> double
{
    const auto ri = Z.row(static_cast<Eigen::Index>(i));
    const auto rj = Z.row(static_cast<Eigen::Index>(j));
    return (ri - rj).dot(w0.transpose()) + std::sqrt(eps) * (ri - rj).norm();
}

inline auto gap_bound(const Dataset& ds, const RashomonBall& ball, std::size_t i, std::size_t j) -> GapBound
{
    require_orthonormal(ds);
    if (i >= ds.n() || j >= ds.n()) throw InvalidArgument("row out of range");
    if (i == j) throw InvalidArgument("gap bound needs two distinct rows");
    return {i, j, gap_bound_value(ds.features(), ball.center.weights, ball.epsilon, i, j)};
}

// w* = w0 + sqrt(eps) x / ||x|| maximizes x.w over the ball.
inline auto max_prediction_model(const RashomonBall& ball, const Eigen::VectorXd& x) -> Eigen::VectorXd
{
    const double nrm = x.norm();
    if (nrm == 0.0) throw InvalidArgument("feature vector is zero");
    return ball.center.weights + (ball.radius() / nrm) * x;
}

inline auto min_prediction_model(const RashomonBall& ball, const Eigen::VectorXd& x) -> Eigen::VectorXd
{
    const double nrm = x.norm();
    if (nrm == 0.0) throw InvalidArgument("feature vector is zero");
    return ball.center.weights - (ball.radius() / nrm) * x;
}

inline auto single_target_problem(const Dataset& ds, const RashomonBall& ball) -> FlipProblem
{
    require_orthonormal(ds);
    if (ball.center.weights.size() != ds.features().cols()) throw InvalidArgument("ball dimension does not match dataset");
    auto Z = std::make_shared<const Eigen::MatrixXd>(ds.features());
    const Eigen::VectorXd w0 = ball.center.weights;
    const double eps = ball.epsilon;

    FlipProblem p;
    p.family = MipFamily::flip_single;
    p.scores = *Z;
    p.region = BallRegion{w0, eps};
    p.baseline = w0;
    p.row_ids = ds.row_ids();
    p.gap_upper = [Z, w0, eps](std::size_t i, std::size_t j) { return gap_bound_value(*Z, w0, eps, i, j); };
    const double outer = std::sqrt(w0.squaredNorm() + eps);
    p.big_m = [Z, outer](std::size_t i) {
        const auto ii = static_cast<Eigen::Index>(i);
        return outer * (Z->rowwise() - Z->row(ii)).rowwise().norm().maxCoeff();
    };
    p.raise = [Z, ball](std::size_t i) { return max_prediction_model(ball, Z->row(static_cast<Eigen::Index>(i)).transpose()); };
    p.lower = [Z, ball](std::size_t i) { return min_prediction_model(ball, Z->row(static_cast<Eigen::Index>(i)).transpose()); };
    p.prediction_scale = (*Z * w0).cwiseAbs().maxCoeff() + std::sqrt(eps) * Z->rowwise().norm().maxCoeff();
    return p;
}

// Certified unflippable rows: baseline-out rows with at least kappa rows that
// beat them for every model, and baseline-top rows beating at least n - kappa
// rows for every model (stable-selected).
struct PruneResult {
    std::vector<std::size_t> never_top;
    std::vector<std::size_t> always_top;
};

inline auto prune_unflippable(const Dataset& ds, const RashomonBall& ball, int kappa) -> PruneResult
{
    FlipEngine engine(single_target_problem(ds, ball), kappa, {});
    return {engine.pruned_never_top(), engine.pruned_always_top()};
}

inline auto flip_search(const Dataset& ds, const RashomonBall& ball, int kappa, std::size_t i, const FlipOptions& options = {}) -> FlipReport
{
    FlipEngine engine(single_target_problem(ds, ball), kappa, options);
    return engine.flip(i);
}

inline auto flip_search_rows(const Dataset& ds, const RashomonBall& ball, int kappa, std::span<const std::size_t> rows, const FlipOptions& options = {})
    -> std::vector<FlipReport>
{
    FlipEngine engine(single_target_problem(ds, ball), kappa, options);
    return engine.flip_rows(rows);
}

inline auto ambiguity_single(const Dataset& ds, const RashomonBall& ball, int kappa, std::span<const std::size_t> sample, AmbiguityMode mode,
    const FlipOptions& options = {}) -> double
{
    if (sample.empty()) throw InvalidArgument("ambiguity needs a nonempty sample");
    const auto reports = flip_search_rows(ds, ball, kappa, sample, options);
    return ambiguity_from_reports(reports, mode);
}

// Cross-checks reports against the exact planar sweep (d = 1 only) and marks
// them oracle-certified with exact extremes. Throws on any disagreement.
inline void certify_with_angle_sweep(const Dataset& ds, const RashomonBall& ball, std::vector<FlipReport>& reports)
{
    require_orthonormal(ds);
    if (ds.d() != 1) throw InvalidArgument("angle-sweep certification needs d = 1");
    const auto ranges = oracle::angle_sweep_ranges(ds.features(), ball.center.weights, ball.epsilon);
    for (auto& r : reports) {
        oracle::RankRange o = ranges.at(r.row);
        o.min_rank = std::min(o.min_rank, r.baseline_rank);
        o.max_rank = std::max(o.max_rank, r.baseline_rank);
        const bool flippable = r.baseline_top() ? o.max_rank > r.kappa : o.min_rank <= r.kappa;
        const bool ok = flippable == r.flippable && (!r.min_exact || r.min_rank == o.min_rank) && (!r.max_exact || r.max_rank == o.max_rank);
        if (r.status == FlipStatus::certified && !ok) throw Error("oracle certification failed for row " + r.row_id);
        r.status = FlipStatus::certified;
        r.flippable = flippable;
        r.min_rank = o.min_rank;
        r.max_rank = o.max_rank;
        r.min_exact = r.max_exact = true;
        r.method = FlipMethod::oracle_certified;
    }
}

} // namespace mtm
