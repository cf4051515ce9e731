#pragma once

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mtm/error.hpp"
#include "mtm/parallel.hpp"
#include "mtm/ranking.hpp"
#include "mtm/solver.hpp"

namespace mtm {

enum class FlipMethod { pruned_unflippable, closed_form_flip, mip_certified, oracle_certified };
enum class FlipStatus { certified, undetermined };

inline auto to_string(FlipMethod m) -> std::string
{
    switch (m) {
    case FlipMethod::pruned_unflippable: return "pruned_unflippable";
    case FlipMethod::closed_form_flip: return "closed_form_flip";
    case FlipMethod::mip_certified: return "mip_certified";
    case FlipMethod::oracle_certified: return "oracle_certified";
    }
    return "mip_certified";
}

inline auto to_string(FlipStatus s) -> std::string { return s == FlipStatus::certified ? "certified" : "undetermined"; }

// Per-row result of a flip search. min_rank/max_rank are exact when the
// matching *_exact flag is set; otherwise they are certified bounds that sit on
// the correct side of kappa (which is all that flippability needs).
struct FlipReport {
    std::size_t row = 0;
    std::string row_id;
    int kappa = 0;
    int baseline_rank = 0;
    int min_rank = 0;
    int max_rank = 0;
    bool min_exact = false;
    bool max_exact = false;
    bool flippable = false;
    FlipMethod method = FlipMethod::mip_certified;
    FlipStatus status = FlipStatus::certified;
    std::optional<Eigen::VectorXd> witness;     // model (w or alpha) on the other side of kappa
    std::optional<Eigen::VectorXd> witness_alt; // model keeping the baseline side, when known
    std::int64_t nodes = 0;

    auto baseline_top() const noexcept -> bool { return baseline_rank <= kappa; }
    auto ever_top() const noexcept -> bool { return min_rank <= kappa; }
    auto ever_out() const noexcept -> bool { return max_rank > kappa; }
};

struct FlipOptions {
    bool exact = false;              // solve both rank extremes even when the side is already known
    double margin = 1e-9;            // ordering margin relative to the prediction scale
    Budget budget;
    unsigned workers = 1;
};

// Everything a flip search needs, independent of whether the continuous
// family is a Rashomon ball (weights) or the soft simplex (combining weights).
struct FlipProblem {
    MipFamily family = MipFamily::flip_single;
    Eigen::MatrixXd scores;          // n x m; pred_j(v) = scores.row(j) . v
    ContinuousRegion region;
    Eigen::VectorXd baseline;        // reference model inside the region
    double alpha_term = 0.0;
    GapUpperBound gap_upper;         // sup over the region of pred_i - pred_j
    std::function<double(std::size_t)> big_m;
    std::function<Eigen::VectorXd(std::size_t)> raise; // maximizer of pred_i
    std::function<Eigen::VectorXd(std::size_t)> lower; // minimizer of pred_i
    std::vector<std::string> row_ids;
    double prediction_scale = 1.0;   // bound on |pred| over the region
};

class FlipEngine {
public:
    FlipEngine(FlipProblem problem, int kappa, FlipOptions options)
        : p_(std::move(problem))
        , kappa_(kappa)
        , options_(options)
    {
        n_ = static_cast<std::size_t>(p_.scores.rows());
        check_kappa(kappa_, n_);
        baseline_pred_ = p_.scores * p_.baseline;
        baseline_ = rank_descending(std::span<const double>(baseline_pred_.data(), n_), kappa_);
        margin_ = options_.margin * std::max(1.0, p_.prediction_scale);
    }

    auto n() const noexcept -> std::size_t { return n_; }
    auto kappa() const noexcept -> int { return kappa_; }
    auto baseline_ranks() const noexcept -> const RankVector& { return baseline_; }
    auto margin() const noexcept -> double { return margin_; }

    // Rows j that rank above i for every model in the family.
    auto dominators(std::size_t i) const -> int
    {
        int count = 0;
        for (std::size_t j = 0; j < n_; ++j) {
            if (j == i) continue;
            const double up = p_.gap_upper(i, j);
            if (up < 0.0) ++count;
            else if (j < i && up <= 0.0 && p_.gap_upper(j, i) <= 0.0) ++count; // always tied, index order
        }
        return count;
    }

    // Rows j that rank below i for every model in the family.
    auto dominated(std::size_t i) const -> int
    {
        int count = 0;
        for (std::size_t j = 0; j < n_; ++j) {
            if (j == i) continue;
            const double down = p_.gap_upper(j, i);
            if (down < 0.0) ++count;
            else if (j > i && down <= 0.0 && p_.gap_upper(i, j) <= 0.0) ++count;
        }
        return count;
    }

    // Rows never in the top kappa (non-top rows with at least kappa dominators).
    auto pruned_never_top() const -> std::vector<std::size_t>
    {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < n_; ++i) {
            if (!baseline_.top_flags[i] && dominators(i) >= kappa_) out.push_back(i);
        }
        return out;
    }

    // Baseline-top rows that stay in the top kappa for every model.
    auto pruned_always_top() const -> std::vector<std::size_t>
    {
        std::vector<std::size_t> out;
        const int n = static_cast<int>(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            if (baseline_.top_flags[i] && dominated(i) >= n - kappa_) out.push_back(i);
        }
        return out;
    }

    auto instance(std::size_t i, Direction dir) const -> MipInstance
    {
        MipInstance inst;
        inst.family = p_.family;
        inst.direction = dir;
        inst.scores = p_.scores;
        inst.pivots = {i};
        inst.region = p_.region;
        inst.big_m = {p_.big_m(i)};
        inst.margin = margin_;
        inst.alpha_term = p_.alpha_term;
        return root_presolve(std::move(inst), p_.gap_upper);
    }

    auto rank_under(const Eigen::VectorXd& v, std::size_t i) const -> int
    {
        const Eigen::VectorXd pred = p_.scores * v;
        return rank_of(std::span<const double>(pred.data(), n_), i);
    }

    auto flip(std::size_t i) const -> FlipReport
    {
        if (i >= n_) throw InvalidArgument("row out of range");
        FlipReport r;
        r.row = i;
        r.row_id = i < p_.row_ids.size() ? p_.row_ids[i] : std::to_string(i);
        r.kappa = kappa_;
        r.baseline_rank = baseline_.ranks[i];
        r.min_rank = r.max_rank = r.baseline_rank;
        const bool top = r.baseline_top();
        const int n = static_cast<int>(n_);

        // Every pair sign-definite: the rank is the same for the whole family.
        if (const int dom = dominators(i); dom + dominated(i) == n - 1) {
            r.method = FlipMethod::pruned_unflippable;
            r.min_rank = r.max_rank = dom + 1;
            r.min_exact = r.max_exact = true;
            r.witness_alt = p_.baseline;
            return r;
        }

        // Side that could flip: non-top rows must reach the top kappa (minimize
        // rank), top rows must leave it (maximize rank).
        if (!top) {
            const int dom = dominators(i);
            if (dom >= kappa_) {
                r.method = FlipMethod::pruned_unflippable;
                r.min_rank = 1 + dom;
            } else {
                const auto w = p_.raise(i);
                const int rk = rank_under(w, i);
                if (rk <= kappa_ && separated(w, i)) {
                    r.method = FlipMethod::closed_form_flip;
                    r.flippable = true;
                    r.min_rank = rk;
                    r.witness = w;
                } else {
                    solve_side(i, Direction::minimize, r, options_.exact ? std::nullopt : std::optional<int>(kappa_ - 1));
                }
            }
            r.witness_alt = p_.baseline;
        } else {
            const int dtd = dominated(i);
            if (dtd >= n - kappa_) {
                r.method = FlipMethod::pruned_unflippable;
                r.max_rank = n - dtd;
            } else {
                const auto w = p_.lower(i);
                const int rk = rank_under(w, i);
                if (rk > kappa_ && separated(w, i)) {
                    r.method = FlipMethod::closed_form_flip;
                    r.flippable = true;
                    r.max_rank = rk;
                    r.witness = w;
                } else {
                    solve_side(i, Direction::maximize, r, options_.exact ? std::nullopt : std::optional<int>(kappa_));
                }
            }
            r.witness_alt = p_.baseline;
        }

        if (options_.exact && r.status == FlipStatus::certified) {
            if (!r.min_exact) exact_side(i, Direction::minimize, r);
            if (!r.max_exact && r.status == FlipStatus::certified) exact_side(i, Direction::maximize, r);
        }
        // The reference model is a family member too. When it ties rows that
        // differ (a measure-zero point no open cell reproduces), its
        // index-order rank still bounds the extremes.
        r.min_rank = std::min(r.min_rank, r.baseline_rank);
        r.max_rank = std::max(r.max_rank, r.baseline_rank);
        return r;
    }

    auto flip_rows(std::span<const std::size_t> rows) const -> std::vector<FlipReport>
    {
        std::vector<FlipReport> out(rows.size());
        parallel_for(rows.size(), options_.workers, [&](std::size_t k) { out[k] = flip(rows[k]); });
        return out;
    }

    auto flip_all() const -> std::vector<FlipReport>
    {
        std::vector<std::size_t> rows(n_);
        for (std::size_t i = 0; i < n_; ++i) rows[i] = i;
        return flip_rows(rows);
    }

private:
    // A closed-form witness counts only if its ordering of row i is strict, so
    // it lies in an open cell the solver would also accept.
    auto separated(const Eigen::VectorXd& v, std::size_t i) const -> bool
    {
        const Eigen::VectorXd pred = p_.scores * v;
        const auto ii = static_cast<Eigen::Index>(i);
        for (Eigen::Index j = 0; j < pred.size(); ++j) {
            if (j == ii) continue;
            if (std::abs(pred(j) - pred(ii)) < 0.5 * margin_ && (p_.scores.row(j) - p_.scores.row(ii)).squaredNorm() > 0.0) return false;
        }
        return true;
    }

    auto hints_for(std::size_t i, Direction dir) const -> std::vector<Eigen::VectorXd>
    {
        return {dir == Direction::minimize ? p_.raise(i) : p_.lower(i), p_.baseline};
    }

    // Decision solve for the flippable side; `stop` lets the search end as soon
    // as a flip is found.
    void solve_side(std::size_t i, Direction dir, FlipReport& r, std::optional<int> stop) const
    {
        SolveOptions so;
        so.budget = options_.budget;
        so.hints = hints_for(i, dir);
        so.stop_at = stop;
        const auto sol = solve(instance(i, dir), so);
        r.nodes += sol.node_count;
        r.method = FlipMethod::mip_certified;
        const bool minimize = dir == Direction::minimize;
        const bool proven = sol.status == MipStatus::optimal;
        const int found = sol.count + 1;
        const int bound = static_cast<int>(sol.bound) + 1;
        if (sol.status == MipStatus::infeasible) throw Error("flip search found no feasible ordering for row " + std::to_string(i));
        const bool flips = sol.has_solution() && (minimize ? found <= kappa_ : found > kappa_);
        if (flips) {
            r.flippable = true;
            r.witness = sol.continuous;
        }
        if (minimize) {
            r.min_rank = flips || proven ? found : bound;
            r.min_exact = proven;
        } else {
            r.max_rank = flips || proven ? found : bound;
            r.max_exact = proven;
        }
        if (!flips && !proven) {
            // Budget ran out: the bound may still certify that no flip exists.
            const bool certified_stable = minimize ? bound > kappa_ : bound <= kappa_;
            if (!certified_stable) r.status = FlipStatus::undetermined;
            if (minimize) r.min_rank = bound;
            else r.max_rank = bound;
        }
    }

    void exact_side(std::size_t i, Direction dir, FlipReport& r) const
    {
        SolveOptions so;
        so.budget = options_.budget;
        so.hints = hints_for(i, dir);
        if (r.witness) so.hints.push_back(*r.witness);
        const auto sol = solve(instance(i, dir), so);
        r.nodes += sol.node_count;
        if (sol.status != MipStatus::optimal) {
            r.status = FlipStatus::undetermined;
            return;
        }
        if (dir == Direction::minimize) {
            r.min_rank = sol.count + 1;
            r.min_exact = true;
        } else {
            r.max_rank = sol.count + 1;
            r.max_exact = true;
        }
    }

    FlipProblem p_;
    int kappa_;
    FlipOptions options_;
    std::size_t n_ = 0;
    Eigen::VectorXd baseline_pred_;
    RankVector baseline_;
    double margin_ = 0.0;
};

inline auto all_rows(std::size_t n) -> std::vector<std::size_t>
{
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    return rows;
}

enum class AmbiguityMode { all, top };

inline auto to_string(AmbiguityMode m) -> std::string { return m == AmbiguityMode::all ? "all" : "top"; }

// mode=all: fraction of the reports that are flippable. mode=top: baseline-top
// rows that can be pushed out, divided by kappa (literal formula, so a sample
// missing some baseline-top rows cannot reach 1).
inline auto ambiguity_from_reports(std::span<const FlipReport> reports, AmbiguityMode mode) -> double
{
    if (reports.empty()) throw InvalidArgument("ambiguity needs a nonempty sample");
    int count = 0;
    for (const auto& r : reports) {
        if (!r.flippable) continue;
        if (mode == AmbiguityMode::all || r.baseline_top()) ++count;
    }
    if (mode == AmbiguityMode::all) return static_cast<double>(count) / static_cast<double>(reports.size());
    return static_cast<double>(count) / static_cast<double>(reports.front().kappa);
}

} // namespace mtm
