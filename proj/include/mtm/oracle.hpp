#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "mtm/error.hpp"
#include "mtm/ranking.hpp"

// Independent low-dimensional oracles. They enumerate the cells of the
// ordering arrangement directly and never touch the branch-and-bound code.
//
// Ties: a model that ties two rows with distinct feature vectors sits on a
// measure-zero boundary between cells, and every such boundary model is a
// limit of models on both sides. Extremes are therefore taken over open cells
// (arc and interval midpoints); rows that coincide everywhere keep the
// ascending-index order.

namespace mtm::oracle {

struct RankRange {
    int min_rank = 0;
    int max_rank = 0;
};

struct CountRange {
    int min_count = 0;
    int max_count = 0;
};

namespace detail {

// Breakpoints closer than this are the same tie set computed along different
// pairs (every pair shares one tie line when d = 1); cells this thin are far
// below the solver's ordering margin.
inline constexpr double kMergeTolerance = 1e-10;

inline void ranks_into(const Eigen::VectorXd& pred, std::vector<RankRange>& out, bool first)
{
    const auto n = static_cast<std::size_t>(pred.size());
    const auto rv = rank_descending(std::span<const double>(pred.data(), n), 1);
    for (std::size_t i = 0; i < n; ++i) {
        const int r = rv.ranks[i];
        if (first) {
            out[i] = {r, r};
        } else {
            out[i].min_rank = std::min(out[i].min_rank, r);
            out[i].max_rank = std::max(out[i].max_rank, r);
        }
    }
}

// Midpoints of the arcs cut out of [0, 2pi) by the sorted critical angles.
inline auto arc_midpoints(std::vector<double> angles) -> std::vector<double>
{
    constexpr double two_pi = 2.0 * std::numbers::pi;
    if (angles.empty()) return {0.0};
    for (auto& a : angles) a = std::fmod(std::fmod(a, two_pi) + two_pi, two_pi);
    std::sort(angles.begin(), angles.end());
    angles.erase(std::unique(angles.begin(), angles.end(), [](double a, double b) { return b - a < kMergeTolerance; }), angles.end());
    std::vector<double> mids;
    for (std::size_t k = 0; k + 1 < angles.size(); ++k) mids.push_back(0.5 * (angles[k] + angles[k + 1]));
    if (angles.front() + two_pi - angles.back() >= kMergeTolerance || angles.size() == 1) {
        mids.push_back(0.5 * (angles.back() + angles.front() + two_pi));
    }
    return mids;
}

// Sorted interior breakpoints of the pairwise tie points t in (0,1) for
// predictions t * P(:,0) + (1 - t) * P(:,1), and midpoints of the pieces.
inline auto segment_midpoints(const Eigen::MatrixXd& P) -> std::vector<double>
{
    const auto n = P.rows();
    std::vector<double> ts{0.0, 1.0};
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = a + 1; b < n; ++b) {
            // gap(t) = t * da + (1 - t) * db
            const double da = P(b, 0) - P(a, 0);
            const double db = P(b, 1) - P(a, 1);
            const double denom = da - db;
            if (denom == 0.0) continue;
            const double t = -db / denom;
            if (t > 0.0 && t < 1.0) ts.push_back(t);
        }
    }
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end(), [](double a, double b) { return b - a < kMergeTolerance; }), ts.end());
    ts.back() = 1.0;
    std::vector<double> mids;
    for (std::size_t k = 0; k + 1 < ts.size(); ++k) mids.push_back(0.5 * (ts[k] + ts[k + 1]));
    return mids;
}

} // namespace detail

// Exact rank ranges of every row over the disc ||w - w0||^2 <= eps in the
// plane. The ordering cells are cones through the origin, so every cell that
// meets the disc also meets its boundary circle: sweeping the circle suffices.
inline auto angle_sweep_ranges(const Eigen::MatrixXd& Z, const Eigen::VectorXd& w0, double eps) -> std::vector<RankRange>
{
    if (Z.cols() != 2 || w0.size() != 2) throw InvalidArgument("angle sweep needs two-dimensional weights (d = 1)");
    if (!(eps >= 0.0)) throw InvalidArgument("epsilon must be nonnegative");
    const auto n = static_cast<std::size_t>(Z.rows());
    std::vector<RankRange> out(n);
    if (eps == 0.0) {
        detail::ranks_into(Z * w0, out, true);
        return out;
    }
    const double r = std::sqrt(eps);
    std::vector<double> crit;
    for (Eigen::Index a = 0; a < Z.rows(); ++a) {
        for (Eigen::Index b = a + 1; b < Z.rows(); ++b) {
            const Eigen::Vector2d g = (Z.row(b) - Z.row(a)).transpose();
            const double gn = g.norm();
            if (gn == 0.0) continue;
            // g.w0 + r |g| cos(theta - phi) = 0
            const double c = -g.dot(w0) / (r * gn);
            if (c <= -1.0 || c >= 1.0) continue;
            const double phi = std::atan2(g(1), g(0));
            const double delta = std::acos(c);
            crit.push_back(phi + delta);
            crit.push_back(phi - delta);
        }
    }
    bool first = true;
    for (double th : detail::arc_midpoints(std::move(crit))) {
        const Eigen::Vector2d w = w0 + r * Eigen::Vector2d(std::cos(th), std::sin(th));
        detail::ranks_into(Z * w, out, first);
        first = false;
    }
    return out;
}

inline auto angle_sweep_single(const Eigen::MatrixXd& Z, const Eigen::VectorXd& w0, double eps, int kappa, std::size_t i) -> RankRange
{
    check_kappa(kappa, static_cast<std::size_t>(Z.rows()));
    if (i >= static_cast<std::size_t>(Z.rows())) throw InvalidArgument("row out of range");
    return angle_sweep_ranges(Z, w0, eps)[i];
}

// Exact rank ranges for K = 2 combining weights alpha = (t, 1 - t).
inline auto simplex_sweep_ranges(const Eigen::MatrixXd& P) -> std::vector<RankRange>
{
    if (P.cols() != 2) throw InvalidArgument("simplex sweep needs K = 2");
    std::vector<RankRange> out(static_cast<std::size_t>(P.rows()));
    bool first = true;
    for (double t : detail::segment_midpoints(P)) {
        detail::ranks_into(t * P.col(0) + (1.0 - t) * P.col(1), out, first);
        first = false;
    }
    return out;
}

inline auto simplex_sweep_k2(const Eigen::MatrixXd& P, int kappa, std::size_t i) -> RankRange
{
    check_kappa(kappa, static_cast<std::size_t>(P.rows()));
    if (i >= static_cast<std::size_t>(P.rows())) throw InvalidArgument("row out of range");
    return simplex_sweep_ranges(P)[i];
}

// Exact min/max number of `members` in the top-kappa set over alpha = (t, 1 - t).
inline auto simplex_sweep_group(const Eigen::MatrixXd& P, std::span<const std::size_t> members, int kappa) -> CountRange
{
    if (P.cols() != 2) throw InvalidArgument("simplex sweep needs K = 2");
    const auto n = static_cast<std::size_t>(P.rows());
    check_kappa(kappa, n);
    CountRange out{std::numeric_limits<int>::max(), std::numeric_limits<int>::min()};
    for (double t : detail::segment_midpoints(P)) {
        const Eigen::VectorXd pred = t * P.col(0) + (1.0 - t) * P.col(1);
        const auto rv = rank_descending(std::span<const double>(pred.data(), n), kappa);
        int count = 0;
        for (auto m : members) count += rv.top_flags.at(m) ? 1 : 0;
        out.min_count = std::min(out.min_count, count);
        out.max_count = std::max(out.max_count, count);
    }
    return out;
}

// Sampling lower bound on the flippable set over the ball: a row is flagged
// when some sampled member of the ball puts it on the other side of kappa
// than the center does. The candidate pool also holds, for every row, the
// closed-form maximizer and minimizer of its prediction.
inline auto monte_carlo_flips_ball(const Eigen::MatrixXd& Z, const Eigen::VectorXd& w0, double eps, int kappa, std::int64_t samples, std::uint64_t seed)
    -> std::vector<bool>
{
    const auto n = static_cast<std::size_t>(Z.rows());
    check_kappa(kappa, n);
    std::vector<bool> flipped(n, false);
    if (samples <= 0) return flipped;
    const Eigen::VectorXd base_pred = Z * w0;
    const auto base = rank_descending(std::span<const double>(base_pred.data(), n), kappa);
    const double r = std::sqrt(eps);
    const auto m = w0.size();

    auto record = [&](const Eigen::VectorXd& w) {
        const Eigen::VectorXd pred = Z * w;
        const auto rv = rank_descending(std::span<const double>(pred.data(), n), kappa);
        for (std::size_t i = 0; i < n; ++i) {
            if (rv.top_flags[i] != base.top_flags[i]) flipped[i] = true;
        }
    };

    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
        const double nrm = Z.row(i).norm();
        if (nrm == 0.0) continue;
        const Eigen::VectorXd u = Z.row(i).transpose() / nrm;
        record(w0 + r * u);
        record(w0 - r * u);
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::VectorXd dir(m);
    for (std::int64_t s = 0; s < samples; ++s) {
        for (Eigen::Index k = 0; k < m; ++k) dir(k) = normal(rng);
        const double len = dir.norm();
        if (len == 0.0) continue;
        const double rad = r * std::pow(unif(rng), 1.0 / static_cast<double>(m));
        record(w0 + (rad / len) * dir);
    }
    return flipped;
}

// Sampling lower bound on the rows whose top-kappa status varies over the
// simplex: uniform (Dirichlet(1)) samples plus every one-hot weight.
inline auto monte_carlo_flips_simplex(const Eigen::MatrixXd& P, int kappa, std::int64_t samples, std::uint64_t seed) -> std::vector<bool>
{
    const auto n = static_cast<std::size_t>(P.rows());
    const auto K = P.cols();
    check_kappa(kappa, n);
    std::vector<bool> seen_in(n, false), seen_out(n, false);
    if (samples <= 0) return std::vector<bool>(n, false);

    auto record = [&](const Eigen::VectorXd& alpha) {
        const Eigen::VectorXd pred = P * alpha;
        const auto rv = rank_descending(std::span<const double>(pred.data(), n), kappa);
        for (std::size_t i = 0; i < n; ++i) {
            if (rv.top_flags[i]) seen_in[i] = true;
            else seen_out[i] = true;
        }
    };
    for (Eigen::Index k = 0; k < K; ++k) record(Eigen::VectorXd::Unit(K, k));

    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> expo(1.0);
    Eigen::VectorXd alpha(K);
    for (std::int64_t s = 0; s < samples; ++s) {
        for (Eigen::Index k = 0; k < K; ++k) alpha(k) = expo(rng);
        alpha /= alpha.sum();
        record(alpha);
    }
    std::vector<bool> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = seen_in[i] && seen_out[i];
    return out;
}

} // namespace mtm::oracle
