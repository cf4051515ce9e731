#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

#include "mtm/dataset.hpp"
#include "mtm/error.hpp"

namespace mtm {

struct LinearModel {
    Eigen::VectorXd weights;   // orthonormal basis
    double rss = 0.0;
    std::string target_name;

    auto predict(const Eigen::MatrixXd& Z) const -> Eigen::VectorXd { return Z * weights; }
};

inline auto residual_sum_of_squares(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, const Eigen::VectorXd& w) -> double
{
    return (y - Z * w).squaredNorm();
}

inline void require_orthonormal(const Dataset& ds)
{
    if (ds.basis() != Basis::orthonormal) {
        throw InvalidArgument("operation needs an orthonormalized dataset (call orthonormalize first)");
    }
}

// Least squares against an arbitrary response vector on an orthonormal design.
inline auto fit_ols(const Dataset& ds, const Eigen::VectorXd& y, std::string target_name) -> LinearModel
{
    require_orthonormal(ds);
    if (y.size() != ds.features().rows()) throw InvalidArgument("response length does not match dataset");
    LinearModel m;
    m.weights = ds.features().transpose() * y;
    m.rss = residual_sum_of_squares(ds.features(), y, m.weights);
    m.target_name = std::move(target_name);
    return m;
}

// With Z^T Z = I the normal equations collapse to w0 = Z^T y.
inline auto fit_ols(const Dataset& ds, const std::string& target) -> LinearModel
{
    return fit_ols(ds, ds.target(target), target);
}

enum class EpsilonMode { absolute, relative };

inline auto to_string(EpsilonMode m) -> std::string { return m == EpsilonMode::absolute ? "absolute" : "relative"; }

// The epsilon-Rashomon set of an OLS fit on an orthonormal design:
// {w : RSS(w) <= RSS(w0) + eps} = {w : ||w - w0||^2 <= eps}.
struct RashomonBall {
    LinearModel center;
    double epsilon = 0.0;            // absolute RSS slack, always
    EpsilonMode epsilon_mode = EpsilonMode::relative;
    double epsilon_input = 0.0;      // value the caller supplied

    auto radius() const -> double { return std::sqrt(epsilon); }
};

inline auto make_ball(const LinearModel& center, double epsilon_input, EpsilonMode mode = EpsilonMode::relative) -> RashomonBall
{
    if (!(epsilon_input >= 0.0) || !std::isfinite(epsilon_input)) throw InvalidArgument("epsilon must be finite and nonnegative");
    RashomonBall b;
    b.center = center;
    b.epsilon_mode = mode;
    b.epsilon_input = epsilon_input;
    b.epsilon = mode == EpsilonMode::relative ? epsilon_input * center.rss : epsilon_input;
    return b;
}

inline constexpr double kBallBoundaryTolerance = 1e-12;

inline auto ball_membership(const RashomonBall& ball, const Eigen::VectorXd& w) -> bool
{
    if (w.size() != ball.center.weights.size()) throw InvalidArgument("weight vector has wrong length");
    return (w - ball.center.weights).squaredNorm() <= ball.epsilon + kBallBoundaryTolerance * std::max(1.0, ball.epsilon);
}

} // namespace mtm
