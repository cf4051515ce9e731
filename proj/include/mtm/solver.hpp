#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mtm/error.hpp"
#include "mtm/qp.hpp"

namespace mtm {

// Exact branch-and-bound for the three ordering MIPs:
//
//   flip_single  min/max  sum_j I(j > i)        over w in a Euclidean ball
//   flip_multi   min/max  sum_j I(j > i) -/+ 0.5 sum(alpha)   over the soft simplex
//   group_rate   min/max  sum_{i in G} T_i -/+ 0.5 sum(alpha)  over the soft simplex
//
// Every row j has a prediction that is linear in the continuous variable v
// (v = w or alpha): pred_j(v) = scores.row(j) . v. The indicator pair
// I(j > i) + I(i > j) = 1 is linked to the ordering by big-M rows
//
//   pred_j - pred_i <= M * I(j > i),    pred_i - pred_j <= M * I(i > j).
//
// Branching on an indicator is equivalent to adding the half-space it selects,
// so a node is the base region intersected with the chosen half-spaces. Node
// bounds come from fixing every indicator whose other side is infeasible over
// the node region (checked exactly with a projection QP), which is at least as
// strong as the closed-form gap-bound logic applied at the root.

enum class MipFamily { flip_single, flip_multi, group_rate };
enum class Direction { minimize, maximize };
// target_reached: the search stopped early because the incumbent met a
// caller-supplied target; `count` is feasible but not proven optimal.
enum class MipStatus { optimal, infeasible, budget_exhausted, target_reached };

inline auto to_string(MipFamily f) -> std::string
{
    switch (f) {
    case MipFamily::flip_single: return "flip_single";
    case MipFamily::flip_multi: return "flip_multi";
    case MipFamily::group_rate: return "group_rate";
    }
    return "flip_single";
}

inline auto to_string(Direction d) -> std::string { return d == Direction::minimize ? "min" : "max"; }

inline auto to_string(MipStatus s) -> std::string
{
    switch (s) {
    case MipStatus::optimal: return "optimal";
    case MipStatus::infeasible: return "infeasible";
    case MipStatus::budget_exhausted: return "budget_exhausted";
    case MipStatus::target_reached: return "target_reached";
    }
    return "optimal";
}

struct BallRegion {
    Eigen::VectorXd center;
    double radius2 = 0.0;
};

// 0 <= alpha_k <= 1, sum_lo <= sum(alpha) <= sum_hi.
struct SoftSimplexRegion {
    std::size_t dim = 0;
    double sum_lo = 0.1;
    double sum_hi = 1.0;
};

using ContinuousRegion = std::variant<BallRegion, SoftSimplexRegion>;

// State of the indicator I(row > pivot).
enum class PairFix : std::int8_t {
    free = 0,
    above = 1, // row ranks above pivot on the whole region
    below = 2, // pivot ranks above row on the whole region
    tied = 3,  // predictions coincide on the whole region; index order decides
};

struct MipInstance {
    MipFamily family = MipFamily::flip_single;
    Direction direction = Direction::minimize;
    Eigen::MatrixXd scores;                  // n x dim
    std::vector<std::size_t> pivots;         // rows whose rank enters the objective
    int kappa = 0;                           // group_rate only
    ContinuousRegion region;
    std::vector<double> big_m;               // one per pivot
    double margin = 1e-9;                    // strict-order separation, prediction units
    double alpha_term = 0.0;                 // 0.5 for the soft-simplex families
    std::vector<std::vector<PairFix>> fixed; // [pivot][row]; empty until presolved
    std::vector<std::vector<float>> pair_bound; // |gap bound| per pair, branching tie-break

    auto n() const noexcept -> std::size_t { return static_cast<std::size_t>(scores.rows()); }
    auto continuous_dim() const noexcept -> std::size_t { return static_cast<std::size_t>(scores.cols()); }
    auto indicator_count() const noexcept -> std::size_t
    {
        const auto per_pivot = 2 * (n() - 1);
        return pivots.size() * per_pivot + (family == MipFamily::group_rate ? pivots.size() : 0);
    }
};

struct Budget {
    std::int64_t max_nodes = 1'000'000;
    double max_seconds = 60.0;
};

struct SolveOptions {
    Budget budget;
    std::vector<Eigen::VectorXd> hints; // candidate points tried as initial incumbents
    std::optional<int> stop_at;         // stop once the incumbent count is at least this good
};

struct MipSolution {
    MipStatus status = MipStatus::infeasible;
    int count = 0;                    // integer part of the objective
    double objective_value = 0.0;     // count -/+ alpha_term * sum(alpha)
    double bound = 0.0;               // proven bound on count (equals count when optimal)
    std::vector<std::vector<bool>> indicators; // [pivot][row]: I(row > pivot)
    std::vector<bool> top;            // group_rate: T per pivot
    Eigen::VectorXd continuous;       // w, or alpha normalized to sum 1
    std::int64_t node_count = 0;
    double wall_time = 0.0;
    bool has_solution() const noexcept { return continuous.size() > 0; }
};

// Upper bound on pred_i - pred_j over the whole base region.
using GapUpperBound = std::function<double(std::size_t i, std::size_t j)>;

struct PresolveStats {
    std::size_t fixed_pairs = 0;
    std::size_t free_pairs = 0;
    std::size_t tied_pairs = 0;
    auto fix_rate() const -> double
    {
        const auto total = fixed_pairs + free_pairs + tied_pairs;
        return total == 0 ? 1.0 : static_cast<double>(fixed_pairs + tied_pairs) / static_cast<double>(total);
    }
};

// Fixes every indicator pair whose gap bound is sign-definite over the base
// region. Sound for any valid upper bound: a pair is only fixed to the side
// that every feasible point must take.
inline auto root_presolve(MipInstance instance, const GapUpperBound& upper_gap, PresolveStats* stats = nullptr) -> MipInstance
{
    const auto n = instance.n();
    PresolveStats local;
    instance.fixed.assign(instance.pivots.size(), std::vector<PairFix>(n, PairFix::free));
    instance.pair_bound.assign(instance.pivots.size(), std::vector<float>(n, 0.0F));
    for (std::size_t a = 0; a < instance.pivots.size(); ++a) {
        const auto p = instance.pivots[a];
        for (std::size_t j = 0; j < n; ++j) {
            if (j == p) continue;
            const double up = upper_gap(p, j);   // sup (pred_p - pred_j)
            const double down = upper_gap(j, p); // sup (pred_j - pred_p)
            instance.pair_bound[a][j] = static_cast<float>(std::max(std::abs(up), std::abs(down)));
            auto& f = instance.fixed[a][j];
            if (up < instance.margin && down < instance.margin) {
                f = PairFix::tied;
                ++local.tied_pairs;
            } else if (up < instance.margin) {
                f = PairFix::above;
                ++local.fixed_pairs;
            } else if (down < instance.margin) {
                f = PairFix::below;
                ++local.fixed_pairs;
            } else {
                ++local.free_pairs;
            }
        }
    }
    if (stats) *stats = local;
    return instance;
}

namespace detail {

struct Cut {
    std::uint32_t pivot; // position in instance.pivots
    std::uint32_t row;
    std::int8_t side;    // +1: row above pivot, -1: pivot above row
};

class BranchAndBound {
public:
    BranchAndBound(const MipInstance& inst, const Budget& budget)
        : inst_(inst)
        , budget_(budget)
        , n_(inst.n())
        , dim_(static_cast<Eigen::Index>(inst.continuous_dim()))
    {
        if (inst_.pivots.empty()) throw InvalidArgument("MIP instance has no pivot rows");
        if (inst_.big_m.size() != inst_.pivots.size()) throw InvalidArgument("MIP instance needs one big-M per pivot");
        for (auto p : inst_.pivots) {
            if (p >= n_) throw InvalidArgument("pivot row out of range");
        }
        if (inst_.family == MipFamily::group_rate && (inst_.kappa < 1 || static_cast<std::size_t>(inst_.kappa) > n_)) {
            throw InvalidArgument("group_rate instance needs 1 <= kappa <= n");
        }
        if (std::holds_alternative<BallRegion>(inst_.region)) {
            const auto& ball = std::get<BallRegion>(inst_.region);
            center_ = ball.center;
            if (center_.size() != dim_) throw InvalidArgument("ball center has wrong dimension");
        } else {
            const auto& s = std::get<SoftSimplexRegion>(inst_.region);
            if (static_cast<Eigen::Index>(s.dim) != dim_) throw InvalidArgument("simplex dimension mismatch");
            center_ = Eigen::VectorXd::Constant(dim_, 0.5 * (s.sum_lo + s.sum_hi) / static_cast<double>(dim_));
            base_rows_ = 2 * dim_ + 2;
        }
        if (inst_.fixed.empty()) {
            root_state_.assign(inst_.pivots.size(), std::vector<PairFix>(n_, PairFix::free));
            // Identical rows are tied everywhere, regardless of presolve.
            for (std::size_t a = 0; a < inst_.pivots.size(); ++a) {
                for (std::size_t j = 0; j < n_; ++j) {
                    if (j != inst_.pivots[a] && gap_vector(a, j).norm() == 0.0) root_state_[a][j] = PairFix::tied;
                }
            }
        } else {
            root_state_ = inst_.fixed;
        }
    }

    auto run(std::span<const Eigen::VectorXd> hints, std::optional<int> stop_at = std::nullopt) -> MipSolution
    {
        start_ = std::chrono::steady_clock::now();
        const bool minimize = inst_.direction == Direction::minimize;
        best_ = minimize ? std::numeric_limits<int>::max() : std::numeric_limits<int>::min();

        for (const auto& h : hints) {
            if (h.size() == dim_ && in_base_region(h)) try_incumbent(h, {});
        }

        struct Node {
            std::vector<Cut> cuts;
            std::vector<std::vector<PairFix>> state;
            std::vector<Eigen::VectorXd> pool;
        };
        std::vector<Node> stack;
        stack.push_back(Node{{}, root_state_, {}});

        bool exhausted = false;
        bool stopped = false;
        auto target_met = [&] {
            return stop_at && has_incumbent() && (minimize ? best_ <= *stop_at : best_ >= *stop_at);
        };
        double open_bound_min = std::numeric_limits<double>::infinity();
        double open_bound_max = -std::numeric_limits<double>::infinity();

        while (!stack.empty()) {
            if (target_met()) {
                stopped = true;
                break;
            }
            if (nodes_ >= budget_.max_nodes || elapsed() > budget_.max_seconds) {
                exhausted = true;
                break;
            }
            Node node = std::move(stack.back());
            stack.pop_back();
            ++nodes_;

            // Region point for this node.
            auto base = region_point(node.cuts, nullptr);
            if (!base.feasible) continue;
            if (base.point) node.pool.insert(node.pool.begin(), *base.point);
            if (node.pool.empty()) continue;

            if (!propagate(node.cuts, node.state, node.pool)) continue;

            const auto [lb, ub] = bounds(node.state);
            if (minimize ? (has_incumbent() && lb >= best_) : (has_incumbent() && ub <= best_)) continue;

            for (const auto& pt : node.pool) try_incumbent(pt, node.state);
            if (minimize ? (has_incumbent() && lb >= best_) : (has_incumbent() && ub <= best_)) continue;

            // Pick the branching pair. The projection sits on the node's
            // boundary, so branch around the pool centroid, which is interior
            // and splits the region more evenly.
            Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim_);
            for (const auto& pt : node.pool) centroid += pt;
            centroid /= static_cast<double>(node.pool.size());
            const Eigen::VectorXd pred = inst_.scores * (lb == ub ? node.pool.front() : centroid);
            std::optional<Cut> forced;
            std::optional<std::pair<std::uint32_t, std::uint32_t>> branch;
            if (lb == ub) {
                // Value is determined but no clean point has certified it yet:
                // resolve an ambiguous pair at the reference point.
                auto amb = ambiguous_pair(pred, node.state);
                if (!amb) continue; // the reference point was clean; try_incumbent consumed it
                const auto fix = node.state[amb->first][amb->second];
                if (fix == PairFix::free) {
                    branch = amb;
                } else {
                    forced = Cut{amb->first, amb->second, static_cast<std::int8_t>(fix == PairFix::above ? 1 : -1)};
                }
            } else {
                branch = select_branch(pred, node.state);
                if (!branch) {
                    // No free pair on an undecided pivot yet bounds differ:
                    // cannot happen for consistent states, treat as leaf.
                    continue;
                }
            }

            auto make_child = [&](const Cut& cut) {
                Node child;
                child.cuts = node.cuts;
                child.cuts.push_back(cut);
                child.state = node.state;
                if (child.state[cut.pivot][cut.row] == PairFix::free) {
                    child.state[cut.pivot][cut.row] = cut.side > 0 ? PairFix::above : PairFix::below;
                }
                for (const auto& pt : node.pool) {
                    if (satisfies(pt, cut)) child.pool.push_back(pt);
                }
                return child;
            };

            if (forced) {
                stack.push_back(make_child(*forced));
                continue;
            }
            const auto [a, j] = *branch;
            // Explore first the side that helps the objective.
            std::int8_t first = preferred_side();
            stack.push_back(make_child(Cut{a, j, static_cast<std::int8_t>(-first)}));
            stack.push_back(make_child(Cut{a, j, first}));
        }

        MipSolution sol;
        sol.node_count = nodes_;
        sol.wall_time = elapsed();
        if (stopped && !stack.empty()) {
            sol.status = MipStatus::target_reached;
            for (auto& node : stack) {
                const auto [lb, ub] = bounds(node.state);
                open_bound_min = std::min(open_bound_min, static_cast<double>(lb));
                open_bound_max = std::max(open_bound_max, static_cast<double>(ub));
            }
        } else if (exhausted) {
            for (auto& node : stack) {
                const auto [lb, ub] = bounds(node.state);
                open_bound_min = std::min(open_bound_min, static_cast<double>(lb));
                open_bound_max = std::max(open_bound_max, static_cast<double>(ub));
            }
            sol.status = MipStatus::budget_exhausted;
        } else {
            sol.status = has_incumbent() ? MipStatus::optimal : MipStatus::infeasible;
        }
        if (has_incumbent()) {
            sol.count = best_;
            sol.continuous = best_point_;
            fill_assignment(sol);
            const double sum = inst_.alpha_term != 0.0 ? sol.continuous.sum() : 0.0;
            sol.objective_value = best_ + (minimize ? -1.0 : 1.0) * inst_.alpha_term * sum;
        }
        if (exhausted || sol.status == MipStatus::target_reached) {
            sol.bound = minimize ? std::min(open_bound_min, static_cast<double>(has_incumbent() ? best_ : std::numeric_limits<int>::max()))
                                 : std::max(open_bound_max, static_cast<double>(has_incumbent() ? best_ : std::numeric_limits<int>::min()));
        } else {
            sol.bound = best_;
        }
        return sol;
    }

    // Bounds on the integer objective after presolve and one round of exact
    // propagation at the root. Exposed for admissibility tests.
    auto root_bounds() -> std::optional<std::pair<int, int>>
    {
        auto state = root_state_;
        std::vector<Eigen::VectorXd> pool;
        auto base = region_point({}, nullptr);
        if (!base.feasible) return std::nullopt;
        if (base.point) pool.push_back(*base.point);
        if (pool.empty() || !propagate({}, state, pool)) return std::nullopt;
        return bounds(state);
    }

private:
    struct RegionResult {
        bool feasible = false;
        std::optional<Eigen::VectorXd> point;
    };

    auto elapsed() const -> double
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

    auto has_incumbent() const -> bool { return best_point_.size() > 0; }

    auto gap_vector(std::size_t a, std::size_t j) const -> Eigen::VectorXd
    {
        return (inst_.scores.row(static_cast<Eigen::Index>(j)) - inst_.scores.row(static_cast<Eigen::Index>(inst_.pivots[a]))).transpose();
    }

    auto pair_norm(std::size_t a, std::size_t j) const -> double
    {
        const auto p = static_cast<Eigen::Index>(inst_.pivots[a]);
        return (inst_.scores.row(static_cast<Eigen::Index>(j)) - inst_.scores.row(p)).norm();
    }

    auto satisfies(const Eigen::VectorXd& v, const Cut& cut) const -> bool
    {
        const auto p = static_cast<Eigen::Index>(inst_.pivots[cut.pivot]);
        const double gap = inst_.scores.row(static_cast<Eigen::Index>(cut.row)).dot(v) - inst_.scores.row(p).dot(v);
        return cut.side * gap >= kPoolSlack * inst_.margin;
    }

    auto in_base_region(const Eigen::VectorXd& v) const -> bool
    {
        if (std::holds_alternative<BallRegion>(inst_.region)) {
            const auto& ball = std::get<BallRegion>(inst_.region);
            return (v - ball.center).squaredNorm() <= ball.radius2 * (1.0 + 1e-12) + 1e-300;
        }
        const auto& s = std::get<SoftSimplexRegion>(inst_.region);
        const double sum = v.sum();
        return (v.array() >= -1e-12).all() && (v.array() <= 1.0 + 1e-12).all() && sum >= s.sum_lo - 1e-12 && sum <= s.sum_hi + 1e-12;
    }

    // Projection of the region center onto base region plus cuts (plus one
    // optional extra cut). Ball regions are feasible iff the projection lies
    // inside the ball.
    auto region_point(const std::vector<Cut>& cuts, const Cut* extra) -> RegionResult
    {
        const auto rows = base_rows_ + static_cast<Eigen::Index>(cuts.size()) + (extra ? 1 : 0);
        Eigen::MatrixXd A(rows, dim_);
        Eigen::VectorXd b(rows);
        Eigen::Index r = 0;
        if (base_rows_ > 0) {
            const auto& s = std::get<SoftSimplexRegion>(inst_.region);
            const double inv = 1.0 / std::sqrt(static_cast<double>(dim_));
            for (Eigen::Index k = 0; k < dim_; ++k) {
                A.row(r).setZero();
                A(r, k) = 1.0;
                b(r++) = 0.0;
                A.row(r).setZero();
                A(r, k) = -1.0;
                b(r++) = -1.0;
            }
            A.row(r).setConstant(inv);
            b(r++) = s.sum_lo * inv;
            A.row(r).setConstant(-inv);
            b(r++) = -s.sum_hi * inv;
        }
        auto put = [&](const Cut& c) {
            Eigen::VectorXd g = gap_vector(c.pivot, c.row) * static_cast<double>(c.side);
            const double nrm = g.norm();
            A.row(r) = (g / nrm).transpose();
            b(r++) = inst_.margin / nrm;
        };
        for (const auto& c : cuts) put(c);
        if (extra) put(*extra);

        ++qp_calls_;
        auto res = qp::project(center_, A, b, 1e-13 * (1.0 + center_.norm()));
        RegionResult out;
        if (res.status == qp::QpStatus::infeasible) return out;
        if (res.status == qp::QpStatus::iteration_limit) {
            // Unresolved: never prune on it.
            out.feasible = true;
            return out;
        }
        if (std::holds_alternative<BallRegion>(inst_.region)) {
            const auto& ball = std::get<BallRegion>(inst_.region);
            if ((res.x - ball.center).squaredNorm() > ball.radius2 * (1.0 + 1e-12) + 1e-300) return out;
        }
        out.feasible = true;
        out.point = std::move(res.x);
        return out;
    }

    // Fixes every free pair with an infeasible side. Returns false if the
    // node admits no separated point for some pair.
    auto propagate(const std::vector<Cut>& cuts, std::vector<std::vector<PairFix>>& state, std::vector<Eigen::VectorXd>& pool) -> bool
    {
        std::vector<Eigen::VectorXd> preds;
        preds.reserve(pool.size());
        for (const auto& pt : pool) preds.push_back(inst_.scores * pt);
        // A pool point proves a side feasible only if it meets the cut margin
        // (up to solver slack); otherwise the child would be empty.
        const double half = kPoolSlack * inst_.margin;

        for (std::uint32_t a = 0; a < inst_.pivots.size(); ++a) {
            if (pivot_decided(state[a])) continue;
            const auto p = static_cast<Eigen::Index>(inst_.pivots[a]);
            for (std::uint32_t j = 0; j < n_; ++j) {
                if (state[a][j] != PairFix::free) continue;
                bool up = false, down = false;
                for (const auto& pr : preds) {
                    const double gap = pr(j) - pr(p);
                    up = up || gap >= half;
                    down = down || gap <= -half;
                    if (up && down) break;
                }
                for (std::int8_t side : {std::int8_t{1}, std::int8_t{-1}}) {
                    bool& seen = side > 0 ? up : down;
                    if (seen) continue;
                    const Cut extra{a, j, side};
                    auto res = region_point(cuts, &extra);
                    if (res.feasible) {
                        seen = true;
                        if (res.point) {
                            preds.push_back(inst_.scores * *res.point);
                            pool.push_back(std::move(*res.point));
                            if (pool.size() > kMaxPool) {
                                pool.erase(pool.begin() + 1);
                                preds.erase(preds.begin() + 1);
                            }
                        }
                    }
                }
                if (!up && !down) return false;
                if (!up) state[a][j] = PairFix::below;
                else if (!down) state[a][j] = PairFix::above;
            }
        }
        return true;
    }

    struct PivotCounts {
        int above = 0;
        int below = 0;
        int free = 0;
    };

    auto counts(std::size_t a, const std::vector<PairFix>& st) const -> PivotCounts
    {
        PivotCounts c;
        const auto p = inst_.pivots[a];
        for (std::size_t j = 0; j < n_; ++j) {
            if (j == p) continue;
            switch (st[j]) {
            case PairFix::above: ++c.above; break;
            case PairFix::below: ++c.below; break;
            case PairFix::tied: (j < p ? ++c.above : ++c.below); break;
            case PairFix::free: ++c.free; break;
            }
        }
        return c;
    }

    auto pivot_decided(const std::vector<PairFix>& st) const -> bool
    {
        if (inst_.family != MipFamily::group_rate) return false;
        int above = 0, below = 0;
        const auto n = static_cast<int>(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            if (st[j] == PairFix::above) ++above;
            else if (st[j] == PairFix::below) ++below;
        }
        // tied pairs are counted by `counts`; ignoring them here only delays the decision
        return above >= inst_.kappa || below >= n - inst_.kappa;
    }

    auto bounds(const std::vector<std::vector<PairFix>>& state) const -> std::pair<int, int>
    {
        if (inst_.family != MipFamily::group_rate) {
            const auto c = counts(0, state[0]);
            return {c.above, c.above + c.free};
        }
        int lb = 0, ub = 0;
        const int n = static_cast<int>(n_);
        for (std::size_t a = 0; a < inst_.pivots.size(); ++a) {
            const auto c = counts(a, state[a]);
            if (c.below >= n - inst_.kappa) {
                ++lb;
                ++ub;
            } else if (c.above < inst_.kappa) {
                ++ub;
            }
        }
        return {lb, ub};
    }

    auto preferred_side() const -> std::int8_t
    {
        const bool minimize = inst_.direction == Direction::minimize;
        if (inst_.family == MipFamily::group_rate) return minimize ? 1 : -1;
        return minimize ? -1 : 1;
    }

    // Undecided pivots of a group_rate node are those whose T is still open.
    auto pivot_open(std::size_t a, const std::vector<PairFix>& st) const -> bool
    {
        if (inst_.family != MipFamily::group_rate) return true;
        const auto c = counts(a, st);
        const int n = static_cast<int>(n_);
        return !(c.below >= n - inst_.kappa) && c.above < inst_.kappa;
    }

    // Most fractional free indicator: with a pair-specific big-M proportional
    // to ||x_j - x_p|| the relaxation value of I(j > p) at the reference point
    // is 1/2 + gap / (2M), so the pair closest to 1/2 is the one whose
    // hyperplane is nearest. A shared M would favor near-duplicate rows whose
    // gap is small everywhere. Ties go to the larger root gap bound.
    auto select_branch(const Eigen::VectorXd& pred, const std::vector<std::vector<PairFix>>& state) const
        -> std::optional<std::pair<std::uint32_t, std::uint32_t>>
    {
        std::optional<std::pair<std::uint32_t, std::uint32_t>> best;
        double best_frac = std::numeric_limits<double>::infinity();
        float best_tie = -1.0F;
        for (std::uint32_t a = 0; a < inst_.pivots.size(); ++a) {
            if (!pivot_open(a, state[a])) continue;
            const auto p = static_cast<Eigen::Index>(inst_.pivots[a]);
            for (std::uint32_t j = 0; j < n_; ++j) {
                if (state[a][j] != PairFix::free) continue;
                const double nrm = pair_norm(a, j);
                if (nrm == 0.0) continue;
                const double frac = std::abs(pred(j) - pred(p)) / nrm;
                const float tie = inst_.pair_bound.empty() ? 0.0F : inst_.pair_bound[a][j];
                if (frac < best_frac || (frac == best_frac && tie > best_tie)) {
                    best_frac = frac;
                    best_tie = tie;
                    best = std::make_pair(a, j);
                }
            }
        }
        return best;
    }

    auto ambiguous_pair(const Eigen::VectorXd& pred, const std::vector<std::vector<PairFix>>& state) const
        -> std::optional<std::pair<std::uint32_t, std::uint32_t>>
    {
        const double half = 0.5 * inst_.margin;
        for (std::uint32_t a = 0; a < inst_.pivots.size(); ++a) {
            const auto p = static_cast<Eigen::Index>(inst_.pivots[a]);
            for (std::uint32_t j = 0; j < n_; ++j) {
                if (j == static_cast<std::uint32_t>(p) || state[a][j] == PairFix::tied) continue;
                const double gap = pred(j) - pred(p);
                const auto f = state[a][j];
                const bool bad = std::abs(gap) < half || (f == PairFix::above && gap < 0) || (f == PairFix::below && gap > 0);
                if (bad) return std::make_pair(a, j);
            }
        }
        return std::nullopt;
    }

    // Objective at a point if every pair is separated by at least margin/2.
    auto evaluate(const Eigen::VectorXd& v) const -> std::optional<int>
    {
        const Eigen::VectorXd pred = inst_.scores * v;
        const double half = 0.5 * inst_.margin;
        int total = 0;
        for (std::size_t a = 0; a < inst_.pivots.size(); ++a) {
            const auto p = inst_.pivots[a];
            int above = 0;
            for (std::size_t j = 0; j < n_; ++j) {
                if (j == p) continue;
                if (!root_state_.empty() && root_state_[a][j] == PairFix::tied) {
                    above += j < p ? 1 : 0;
                    continue;
                }
                const double gap = pred(static_cast<Eigen::Index>(j)) - pred(static_cast<Eigen::Index>(p));
                if (std::abs(gap) < half) return std::nullopt;
                above += gap > 0 ? 1 : 0;
            }
            if (inst_.family == MipFamily::group_rate) {
                total += above < inst_.kappa ? 1 : 0;
            } else {
                total += above;
            }
        }
        return total;
    }

    void try_incumbent(const Eigen::VectorXd& v, const std::vector<std::vector<PairFix>>&)
    {
        auto val = evaluate(v);
        if (!val) return;
        const bool minimize = inst_.direction == Direction::minimize;
        if (!has_incumbent() || (minimize ? *val < best_ : *val > best_)) {
            best_ = *val;
            best_point_ = v;
        }
    }

    void fill_assignment(MipSolution& sol) const
    {
        if (inst_.alpha_term != 0.0) {
            const double sum = sol.continuous.sum();
            if (sum > 0) sol.continuous /= sum;
        }
        const Eigen::VectorXd pred = inst_.scores * sol.continuous;
        sol.indicators.assign(inst_.pivots.size(), std::vector<bool>(n_, false));
        sol.top.assign(inst_.pivots.size(), false);
        for (std::size_t a = 0; a < inst_.pivots.size(); ++a) {
            const auto p = inst_.pivots[a];
            int above = 0;
            for (std::size_t j = 0; j < n_; ++j) {
                if (j == p) continue;
                bool is_above;
                if (root_state_[a][j] == PairFix::tied) {
                    is_above = j < p;
                } else {
                    is_above = pred(static_cast<Eigen::Index>(j)) > pred(static_cast<Eigen::Index>(p));
                }
                sol.indicators[a][j] = is_above;
                above += is_above ? 1 : 0;
            }
            sol.top[a] = inst_.family == MipFamily::group_rate && above < inst_.kappa;
        }
    }

    static constexpr std::size_t kMaxPool = 24;
    static constexpr double kPoolSlack = 1.0 - 1e-6;

    const MipInstance& inst_;
    Budget budget_;
    std::size_t n_;
    Eigen::Index dim_;
    Eigen::Index base_rows_ = 0;
    Eigen::VectorXd center_;
    std::vector<std::vector<PairFix>> root_state_;
    std::chrono::steady_clock::time_point start_;
    std::int64_t nodes_ = 0;
    std::int64_t qp_calls_ = 0;
    int best_ = 0;
    Eigen::VectorXd best_point_;
};

} // namespace detail

// Solves the instance to proven optimality unless the budget runs out, in
// which case the best incumbent and the open-node bound are returned. `hints`
// are candidate points (closed-form witnesses) used as initial incumbents.
inline auto solve(const MipInstance& instance, const Budget& budget = {}, std::span<const Eigen::VectorXd> hints = {}) -> MipSolution
{
    detail::BranchAndBound bb(instance, budget);
    return bb.run(hints);
}

inline auto solve(const MipInstance& instance, const SolveOptions& options) -> MipSolution
{
    detail::BranchAndBound bb(instance, options.budget);
    return bb.run(options.hints, options.stop_at);
}

inline auto root_bounds(const MipInstance& instance) -> std::optional<std::pair<int, int>>
{
    detail::BranchAndBound bb(instance, Budget{});
    return bb.root_bounds();
}

// One big-M linking row pair of the formulation.
struct LinkingRow {
    std::size_t pivot = 0;
    std::size_t other = 0;
    Eigen::VectorXd coefficients; // pred_other - pred_pivot = coefficients . v
    double big_m = 0.0;
};

inline auto linking_rows(const MipInstance& instance) -> std::vector<LinkingRow>
{
    std::vector<LinkingRow> rows;
    for (std::size_t a = 0; a < instance.pivots.size(); ++a) {
        const auto p = instance.pivots[a];
        for (std::size_t j = 0; j < instance.n(); ++j) {
            if (j == p) continue;
            rows.push_back(LinkingRow{p, j,
                (instance.scores.row(static_cast<Eigen::Index>(j)) - instance.scores.row(static_cast<Eigen::Index>(p))).transpose(),
                instance.big_m[a]});
        }
    }
    return rows;
}

// Checks a returned assignment against the explicit formulation: indicator
// complementarity, big-M ordering rows, continuous region, and the T linking
// rows of group_rate. Returns an empty string when everything holds.
inline auto verify_solution(const MipInstance& instance, const MipSolution& sol, double tol = 1e-7) -> std::string
{
    if (!sol.has_solution()) return "no solution";
    const auto& v = sol.continuous;
    if (std::holds_alternative<BallRegion>(instance.region)) {
        const auto& ball = std::get<BallRegion>(instance.region);
        if ((v - ball.center).squaredNorm() > ball.radius2 + 1e-9 * std::max(1.0, ball.radius2)) return "point outside ball";
    } else {
        const auto& s = std::get<SoftSimplexRegion>(instance.region);
        if ((v.array() < -tol).any() || (v.array() > 1 + tol).any()) return "alpha outside box";
        if (v.sum() < s.sum_lo - tol || v.sum() > s.sum_hi + tol) return "alpha sum outside bounds";
    }
    const Eigen::VectorXd pred = instance.scores * v;
    const int n = static_cast<int>(instance.n());
    for (std::size_t a = 0; a < instance.pivots.size(); ++a) {
        const auto p = instance.pivots[a];
        const double M = instance.big_m[a];
        int above = 0;
        for (std::size_t j = 0; j < instance.n(); ++j) {
            if (j == p) continue;
            const double i_up = sol.indicators[a][j] ? 1.0 : 0.0;
            const double i_down = 1.0 - i_up; // complementarity row
            const double gap = pred(static_cast<Eigen::Index>(j)) - pred(static_cast<Eigen::Index>(p));
            if (gap > M * i_up + tol * std::max(1.0, M)) return "big-M row (other above) violated";
            if (-gap > M * i_down + tol * std::max(1.0, M)) return "big-M row (pivot above) violated";
            above += sol.indicators[a][j] ? 1 : 0;
        }
        if (instance.family == MipFamily::group_rate) {
            const double t = sol.top[a] ? 1.0 : 0.0;
            if (instance.kappa - above > instance.kappa * t + tol) return "top linking row (lower) violated";
            if ((1 + above) - instance.kappa > (n - instance.kappa) * (1 - t) + tol) return "top linking row (upper) violated";
        }
    }
    return {};
}

} // namespace mtm
