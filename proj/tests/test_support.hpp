#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mtm/dataset.hpp"
#include "mtm/qp.hpp"
#include "mtm/solver.hpp"

namespace mtm::testing {

// Random n x m matrix with orthonormal columns whose first column is 1/sqrt(n).
inline auto random_orthonormal_design(Eigen::Index n, Eigen::Index m, std::mt19937_64& rng) -> Eigen::MatrixXd
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd X(n, m);
    X.col(0).setOnes();
    for (Eigen::Index j = 1; j < m; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) X(i, j) = normal(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        if (qr.matrixQR()(j, j) < 0) Q.col(j) *= -1.0;
    }
    Q.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
    return Q;
}

// Dataset over an already orthonormal design Z (first column constant) with
// targets named y0, y1, ...; rows are r0, r1, ... and all in the train split.
inline auto make_dataset(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& Y, std::vector<std::string> groups = {}, Basis basis = Basis::orthonormal)
    -> Dataset
{
    const auto n = static_cast<std::size_t>(Z.rows());
    std::vector<std::string> names{kInterceptName}, targets, ids;
    for (Eigen::Index j = 1; j < Z.cols(); ++j) names.push_back("z" + std::to_string(j));
    for (Eigen::Index k = 0; k < Y.cols(); ++k) targets.push_back("y" + std::to_string(k));
    for (std::size_t i = 0; i < n; ++i) ids.push_back("r" + std::to_string(i));
    if (groups.empty()) groups.assign(n, "g");
    return Dataset(Z, names, Y, targets, std::move(groups), ids, std::vector<Split>(n, Split::train), basis);
}

inline auto random_vector(Eigen::Index n, std::mt19937_64& rng, double sd = 1.0) -> Eigen::VectorXd
{
    std::normal_distribution<double> normal(0.0, sd);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
    return v;
}

inline auto ball_gap_bound(const Eigen::MatrixXd& Z, const Eigen::VectorXd& w0, double eps)
{
    return [&Z, w0, eps](std::size_t i, std::size_t j) {
        const Eigen::VectorXd g = (Z.row(static_cast<Eigen::Index>(i)) - Z.row(static_cast<Eigen::Index>(j))).transpose();
        return g.dot(w0) + std::sqrt(eps) * g.norm();
    };
}

inline auto simplex_gap_bound(const Eigen::MatrixXd& P, double sum_lo = 0.1)
{
    return [&P, sum_lo](std::size_t i, std::size_t j) {
        const double g = (P.row(static_cast<Eigen::Index>(i)) - P.row(static_cast<Eigen::Index>(j))).maxCoeff();
        return g > 0 ? g : sum_lo * g;
    };
}

inline auto flip_single_instance(const Eigen::MatrixXd& Z, const Eigen::VectorXd& w0, double eps, std::size_t i, Direction dir) -> MipInstance
{
    MipInstance inst;
    inst.family = MipFamily::flip_single;
    inst.direction = dir;
    inst.scores = Z;
    inst.pivots = {i};
    inst.region = BallRegion{w0, eps};
    double far = 0.0;
    for (Eigen::Index j = 0; j < Z.rows(); ++j) far = std::max(far, (Z.row(j) - Z.row(static_cast<Eigen::Index>(i))).norm());
    inst.big_m = {std::sqrt(w0.squaredNorm() + eps) * far};
    return inst;
}

inline auto simplex_instance(const Eigen::MatrixXd& P, MipFamily family, std::vector<std::size_t> pivots, int kappa, Direction dir) -> MipInstance
{
    MipInstance inst;
    inst.family = family;
    inst.direction = dir;
    inst.scores = P;
    inst.pivots = std::move(pivots);
    inst.kappa = kappa;
    inst.region = SoftSimplexRegion{static_cast<std::size_t>(P.cols()), 0.1, 1.0};
    inst.big_m.assign(inst.pivots.size(), P.maxCoeff() - P.minCoeff());
    inst.alpha_term = 0.5;
    return inst;
}

// Exhaustive optimum over every sign pattern of the pivot pairs, each checked
// for feasibility with an exact projection. Only for tiny instances.
inline auto brute_force_optimum(const MipInstance& inst) -> std::optional<int>
{
    struct Pair {
        std::size_t a, j;
    };
    std::vector<Pair> pairs;
    for (std::size_t a = 0; a < inst.pivots.size(); ++a) {
        for (std::size_t j = 0; j < inst.n(); ++j) {
            if (j == inst.pivots[a]) continue;
            pairs.push_back({a, j});
        }
    }
    const auto m = static_cast<Eigen::Index>(inst.continuous_dim());
    const bool ball = std::holds_alternative<BallRegion>(inst.region);
    Eigen::VectorXd center;
    Eigen::Index base = 0;
    if (ball) {
        center = std::get<BallRegion>(inst.region).center;
    } else {
        center = Eigen::VectorXd::Constant(m, 0.55 / static_cast<double>(m));
        base = 2 * m + 2;
    }
    std::optional<int> best;
    const std::uint64_t total = std::uint64_t{1} << pairs.size();
    for (std::uint64_t mask = 0; mask < total; ++mask) {
        std::vector<std::size_t> active;
        Eigen::MatrixXd A(base + static_cast<Eigen::Index>(pairs.size()), m);
        Eigen::VectorXd b(A.rows());
        Eigen::Index r = 0;
        if (!ball) {
            const auto& s = std::get<SoftSimplexRegion>(inst.region);
            for (Eigen::Index k = 0; k < m; ++k) {
                A.row(r) = Eigen::RowVectorXd::Unit(m, k);
                b(r++) = 0.0;
                A.row(r) = -Eigen::RowVectorXd::Unit(m, k);
                b(r++) = -1.0;
            }
            A.row(r).setOnes();
            b(r++) = s.sum_lo;
            A.row(r).setConstant(-1.0);
            b(r++) = -s.sum_hi;
            for (Eigen::Index q = 0; q < r; ++q) {
                const double nrm = A.row(q).norm();
                A.row(q) /= nrm;
                b(q) /= nrm;
            }
        }
        std::vector<int> above(inst.pivots.size(), 0);
        bool skip = false;
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            const bool up = (mask >> k) & 1U;
            const auto p = inst.pivots[pairs[k].a];
            Eigen::VectorXd g = (inst.scores.row(static_cast<Eigen::Index>(pairs[k].j)) - inst.scores.row(static_cast<Eigen::Index>(p))).transpose();
            if (g.norm() == 0.0) {
                // identical rows: index order only
                if (up != (pairs[k].j < p)) skip = true;
                above[pairs[k].a] += up ? 1 : 0;
                A.row(r).setZero();
                b(r++) = 0.0;
                continue;
            }
            if (!up) g = -g;
            const double nrm = g.norm();
            A.row(r) = (g / nrm).transpose();
            b(r++) = inst.margin / nrm;
            above[pairs[k].a] += up ? 1 : 0;
        }
        if (skip) continue;
        auto res = qp::project(center, A, b, 1e-13);
        if (res.status != qp::QpStatus::optimal) continue;
        if (ball) {
            const auto& bl = std::get<BallRegion>(inst.region);
            if ((res.x - bl.center).squaredNorm() > bl.radius2 * (1 + 1e-12)) continue;
        }
        int value = 0;
        for (std::size_t a = 0; a < inst.pivots.size(); ++a) {
            value += inst.family == MipFamily::group_rate ? (above[a] < inst.kappa ? 1 : 0) : above[a];
        }
        if (!best || (inst.direction == Direction::minimize ? value < *best : value > *best)) best = value;
    }
    return best;
}

} // namespace mtm::testing
