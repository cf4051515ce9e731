#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mtm/dataset.hpp"
#include "mtm/error.hpp"
#include "mtm/index_model.hpp"
#include "mtm/linear_fit.hpp"
#include "mtm/ranking.hpp"
#include "mtm/solver.hpp"

namespace mtm {

// kappa as an integer ("25") or a top percentage ("3%", "top 3%"); percentages
// round up so a nonzero percentage always selects at least one row.
inline auto parse_kappa(std::string_view text, std::size_t n) -> int
{
    auto s = detail::trim(text);
    if (s.starts_with("top")) s = detail::trim(s.substr(3));
    if (s.empty()) throw InvalidArgument("empty kappa");
    int kappa = 0;
    if (s.back() == '%') {
        double pct = 0.0;
        if (!detail::parse_double(detail::trim(s.substr(0, s.size() - 1)), pct) || !(pct > 0.0) || pct > 100.0) {
            throw InvalidArgument("kappa percentage must be in (0, 100]: '" + std::string(text) + "'");
        }
        // Guard against 3% of 100 evaluating to 3.0000000000000004.
        const double raw = pct / 100.0 * static_cast<double>(n);
        kappa = static_cast<int>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
        kappa = std::max(kappa, 1);
    } else {
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), kappa);
        if (ec != std::errc{} || ptr != s.data() + s.size()) throw InvalidArgument("kappa must be an integer or a percentage: '" + std::string(text) + "'");
    }
    check_kappa(kappa, n);
    return kappa;
}

enum class RangeDirection { min, max, both };

inline auto parse_direction(const std::string& text) -> RangeDirection
{
    if (text == "min") return RangeDirection::min;
    if (text == "max") return RangeDirection::max;
    if (text == "both") return RangeDirection::both;
    throw InvalidArgument("direction must be min, max or both");
}

struct GroupExtreme {
    int count = 0;
    double rate = 0.0;             // count / kappa
    Eigen::VectorXd alpha;         // witness, normalized to sum 1
    MipStatus status = MipStatus::optimal;
    double bound = 0.0;            // proven bound on count
    std::int64_t nodes = 0;
};

struct GroupRateReport {
    std::string group_label;
    int kappa = 0;
    std::size_t group_size = 0;
    std::optional<GroupExtreme> min;
    std::optional<GroupExtreme> max;
    std::vector<std::string> target_names;
    std::vector<int> one_hot_counts; // group count under each single-target ranking

    auto min_count() const -> int { return min.value().count; }
    auto max_count() const -> int { return max.value().count; }
    auto certified() const -> bool
    {
        return (!min || min->status == MipStatus::optimal) && (!max || max->status == MipStatus::optimal);
    }
};

// Number of `members` in the top-kappa set of the combined scores.
inline auto group_count(const Eigen::VectorXd& scores, std::span<const std::size_t> members, int kappa) -> int
{
    const auto rv = rank_descending(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())), kappa);
    int c = 0;
    for (auto m : members) c += rv.top_flags.at(m) ? 1 : 0;
    return c;
}

inline auto group_members(std::span<const std::string> groups, const std::string& label) -> std::vector<std::size_t>
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        if (groups[i] == label) out.push_back(i);
    }
    return out;
}

inline auto group_rate_instance(const IndexEnsemble& e, std::vector<std::size_t> members, int kappa, Direction dir, double margin, const MultiOptions& mo)
    -> MipInstance
{
    MipInstance inst;
    inst.family = MipFamily::group_rate;
    inst.direction = dir;
    inst.scores = e.predictions;
    inst.pivots = std::move(members);
    inst.kappa = kappa;
    inst.region = SoftSimplexRegion{e.k(), mo.sum_lo, 1.0};
    inst.big_m.assign(inst.pivots.size(), e.predictions.maxCoeff() - e.predictions.minCoeff());
    inst.margin = margin * std::max(1.0, e.predictions.cwiseAbs().maxCoeff());
    inst.alpha_term = 0.5;
    const auto& P = e.predictions;
    const double lo = mo.sum_lo;
    return root_presolve(std::move(inst), [&P, lo](std::size_t i, std::size_t j) {
        const double g = (P.row(static_cast<Eigen::Index>(i)) - P.row(static_cast<Eigen::Index>(j))).maxCoeff();
        return g > 0.0 ? g : lo * g;
    });
}

// Exact extremes of the number of group members in the top kappa over all
// combining weights.
inline auto group_rate_extremes(const IndexEnsemble& e, std::span<const std::string> groups, const std::string& label, int kappa, RangeDirection direction,
    const FlipOptions& options = {}, const MultiOptions& mo = {}) -> GroupRateReport
{
    if (groups.size() != e.n()) throw InvalidArgument("group labels do not match the ensemble");
    check_kappa(kappa, e.n());
    const auto members = group_members(groups, label);
    if (members.empty()) throw InvalidArgument("group label '" + label + "' not present");

    GroupRateReport rep;
    rep.group_label = label;
    rep.kappa = kappa;
    rep.group_size = members.size();
    rep.target_names = e.target_names;
    std::vector<Eigen::VectorXd> hints{e.alpha};
    for (Eigen::Index k = 0; k < e.predictions.cols(); ++k) {
        const Eigen::VectorXd one_hot = Eigen::VectorXd::Unit(e.predictions.cols(), k);
        rep.one_hot_counts.push_back(group_count(e.predictions.col(k), members, kappa));
        hints.push_back(one_hot);
    }

    auto run = [&](Direction dir) {
        GroupExtreme x;
        const int n = static_cast<int>(e.n());
        const int size = static_cast<int>(members.size());
        if (size == n || size == 0) {
            // Selection is zero-sum: the whole population always fills kappa.
            x.count = size == n ? kappa : 0;
            x.alpha = e.alpha;
        } else {
            SolveOptions so;
            so.budget = options.budget;
            so.hints = hints;
            const auto inst = group_rate_instance(e, members, kappa, dir, options.margin, mo);
            const auto sol = solve(inst, so);
            if (!sol.has_solution()) throw Error("group-rate search found no feasible ordering");
            x.count = sol.count;
            x.alpha = sol.continuous;
            x.status = sol.status;
            x.bound = sol.bound;
            x.nodes = sol.node_count;
        }
        if (x.status == MipStatus::optimal) x.bound = x.count;
        x.rate = static_cast<double>(x.count) / static_cast<double>(kappa);
        return x;
    };
    if (direction != RangeDirection::max) rep.min = run(Direction::minimize);
    if (direction != RangeDirection::min) rep.max = run(Direction::maximize);
    return rep;
}

// Error raised inside a workflow phase; keeps the original kind tag.
class PhaseError : public Error {
public:
    PhaseError(const std::string& phase, const Error& cause)
        : Error(phase + ": " + cause.what())
        , phase_(phase)
        , kind_(cause.kind())
    {
    }
    auto phase() const noexcept -> const std::string& { return phase_; }
    auto kind() const noexcept -> const char* override { return kind_.c_str(); }

private:
    std::string phase_;
    std::string kind_;
};

template <class Fn>
auto run_phase(const std::string& phase, Fn&& fn) -> decltype(fn())
{
    try {
        return fn();
    } catch (const PhaseError&) {
        throw;
    } catch (const Error& e) {
        throw PhaseError(phase, e);
    }
}

// Selection metrics of one scoring rule on one split.
struct SelectionMetrics {
    std::string model;              // target name, or "index"
    Eigen::VectorXd alpha;
    int kappa = 0;
    int group_count = 0;
    double group_percent = 0.0;     // 100 * group_count / kappa
    std::vector<double> concentration; // per target: 100 * sum over selected / sum over all
};

struct WorkflowConfig {
    std::vector<std::string> targets;
    std::string group_label;
    std::string kappa = "3%";
    Standardization standardization = Standardization::zscore;
    FlipOptions options;
    MultiOptions multi;
};

struct WorkflowReport {
    std::vector<std::string> targets;
    std::string group_label;
    std::string kappa_text;
    std::size_t n_train = 0;
    std::size_t n_tune = 0;
    std::size_t n_holdout = 0;
    std::size_t rank = 0;
    std::vector<std::size_t> dropped_columns;
    Standardizer standardizer;         // frozen on tune
    GroupRateReport tune_range;        // max over alpha on tune
    std::vector<SelectionMetrics> tune;    // one-hot models, then the index model
    std::vector<SelectionMetrics> holdout; // same rules evaluated on holdout

    auto index_holdout() const -> const SelectionMetrics& { return holdout.back(); }
};

inline auto selection_metrics(const std::string& name, const Eigen::VectorXd& alpha, const Eigen::MatrixXd& standardized,
    std::span<const std::size_t> members, const Eigen::MatrixXd& outcomes, int kappa) -> SelectionMetrics
{
    SelectionMetrics m;
    m.model = name;
    m.alpha = alpha;
    m.kappa = kappa;
    const Eigen::VectorXd scores = standardized * alpha;
    const auto rv = rank_descending(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())), kappa);
    for (auto i : members) m.group_count += rv.top_flags[i] ? 1 : 0;
    m.group_percent = 100.0 * m.group_count / kappa;
    for (Eigen::Index k = 0; k < outcomes.cols(); ++k) {
        double selected = 0.0;
        for (std::size_t i = 0; i < rv.size(); ++i) {
            if (rv.top_flags[i]) selected += outcomes(static_cast<Eigen::Index>(i), k);
        }
        const double total = outcomes.col(k).sum();
        m.concentration.push_back(total != 0.0 ? 100.0 * selected / total : 0.0);
    }
    return m;
}

// Three-phase workflow: per-target OLS on train, fairness-maximizing alpha on
// tune (standardization frozen there), evaluation of every rule on holdout.
inline auto fairness_workflow(const Dataset& ds, const WorkflowConfig& cfg) -> WorkflowReport
{
    if (ds.basis() != Basis::original) throw InvalidArgument("workflow expects a dataset in the original basis");
    if (cfg.targets.empty()) throw InvalidArgument("workflow needs at least one target");
    WorkflowReport rep;
    rep.targets = cfg.targets;
    rep.group_label = cfg.group_label;
    rep.kappa_text = cfg.kappa;

    const auto train_rows = ds.rows_in(Split::train);
    const auto tune_rows = ds.rows_in(Split::tune);
    const auto hold_rows = ds.rows_in(Split::holdout);

    struct Fitted {
        OrthoBasis basis;
        std::vector<LinearModel> models;
    };
    const auto fitted = run_phase("train", [&] {
        if (train_rows.size() < 2) throw DataError("train split needs at least two rows");
        auto [ortho, basis] = orthonormalize(ds.subset(train_rows));
        Fitted f{std::move(basis), {}};
        for (const auto& t : cfg.targets) f.models.push_back(fit_ols(ortho, t));
        return f;
    });
    rep.n_train = train_rows.size();
    rep.rank = fitted.basis.rank;
    rep.dropped_columns = fitted.basis.dropped_columns;

    auto raw_on = [&](const std::vector<std::size_t>& rows) {
        const auto part = ds.subset(rows);
        const Eigen::MatrixXd Z = fitted.basis.apply(part.features());
        Eigen::MatrixXd raw(Z.rows(), static_cast<Eigen::Index>(fitted.models.size()));
        for (std::size_t k = 0; k < fitted.models.size(); ++k) raw.col(static_cast<Eigen::Index>(k)) = Z * fitted.models[k].weights;
        return std::make_pair(part, raw);
    };
    auto outcomes_of = [&](const Dataset& part) {
        Eigen::MatrixXd y(static_cast<Eigen::Index>(part.n()), static_cast<Eigen::Index>(cfg.targets.size()));
        for (std::size_t k = 0; k < cfg.targets.size(); ++k) y.col(static_cast<Eigen::Index>(k)) = part.target(cfg.targets[k]);
        return y;
    };
    auto rules = [&](const IndexEnsemble& e, const Dataset& part, const Eigen::VectorXd& index_alpha, int kappa) {
        std::vector<SelectionMetrics> out;
        const auto members = group_members(part.groups(), cfg.group_label);
        const auto y = outcomes_of(part);
        for (std::size_t k = 0; k < cfg.targets.size(); ++k) {
            out.push_back(selection_metrics(cfg.targets[k], Eigen::VectorXd::Unit(static_cast<Eigen::Index>(e.k()), static_cast<Eigen::Index>(k)),
                e.predictions, members, y, kappa));
        }
        out.push_back(selection_metrics("index", index_alpha, e.predictions, members, y, kappa));
        return out;
    };

    Eigen::VectorXd alpha_star;
    run_phase("tune", [&] {
        if (tune_rows.size() < 2) throw DataError("tune split needs at least two rows");
        auto [part, raw] = raw_on(tune_rows);
        auto e = build_ensemble_from_raw(raw, cfg.targets, part.row_ids(), cfg.standardization);
        rep.standardizer = e.standardizer;
        const int kappa = parse_kappa(cfg.kappa, part.n());
        rep.tune_range = group_rate_extremes(e, part.groups(), cfg.group_label, kappa, RangeDirection::max, cfg.options, cfg.multi);
        alpha_star = rep.tune_range.max->alpha;
        rep.tune = rules(e, part, alpha_star, kappa);
        rep.n_tune = part.n();
        return 0;
    });

    run_phase("holdout", [&] {
        if (hold_rows.size() < 2) throw DataError("holdout split needs at least two rows");
        auto [part, raw] = raw_on(hold_rows);
        auto e = build_ensemble_from_raw(raw, part.row_ids(), rep.standardizer);
        const int kappa = parse_kappa(cfg.kappa, part.n());
        rep.holdout = rules(e, part, alpha_star, kappa);
        rep.n_holdout = part.n();
        return 0;
    });
    return rep;
}

} // namespace mtm
