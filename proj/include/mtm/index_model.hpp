#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mtm/dataset.hpp"
#include "mtm/error.hpp"
#include "mtm/flip.hpp"
#include "mtm/linear_fit.hpp"
#include "mtm/oracle.hpp"

namespace mtm {

enum class Standardization { none, zscore, percentile };

inline auto to_string(Standardization s) -> std::string
{
    switch (s) {
    case Standardization::none: return "none";
    case Standardization::zscore: return "zscore";
    case Standardization::percentile: return "percentile";
    }
    return "none";
}

inline auto parse_standardization(const std::string& text) -> Standardization
{
    if (text == "none") return Standardization::none;
    if (text == "zscore") return Standardization::zscore;
    if (text == "percentile") return Standardization::percentile;
    throw InvalidArgument("unknown standardization '" + text + "' (expected none, zscore or percentile)");
}

// Per-target map from raw predictions to the common scale. Parameters are
// fitted once (on the tune split in the workflow) and then frozen.
struct Standardizer {
    Standardization mode = Standardization::zscore;
    std::vector<std::string> target_names;
    std::vector<double> mean;
    std::vector<double> sd;
    std::vector<std::vector<double>> reference; // sorted fitted values, percentile mode

    auto apply(const Eigen::MatrixXd& raw) const -> Eigen::MatrixXd
    {
        if (static_cast<std::size_t>(raw.cols()) != target_names.size()) throw InvalidArgument("prediction matrix has wrong number of targets");
        Eigen::MatrixXd out(raw.rows(), raw.cols());
        for (Eigen::Index k = 0; k < raw.cols(); ++k) {
            const auto kk = static_cast<std::size_t>(k);
            switch (mode) {
            case Standardization::none:
                out.col(k) = raw.col(k);
                break;
            case Standardization::zscore:
                out.col(k) = (raw.col(k).array() - mean[kk]) / sd[kk];
                break;
            case Standardization::percentile: {
                // Mid-rank ECDF of the reference sample; on the reference
                // itself this is the average ascending rank mapped to [0, 1].
                const auto& ref = reference[kk];
                const double denom = static_cast<double>(ref.size() - 1);
                for (Eigen::Index i = 0; i < raw.rows(); ++i) {
                    const double v = raw(i, k);
                    const auto lo = std::lower_bound(ref.begin(), ref.end(), v);
                    const auto hi = std::upper_bound(lo, ref.end(), v);
                    const double less = static_cast<double>(lo - ref.begin());
                    const double equal = static_cast<double>(hi - lo);
                    const double pos = equal > 0 ? less + 0.5 * (equal - 1.0) : less - 0.5;
                    out(i, k) = std::clamp(pos / denom, 0.0, 1.0);
                }
                break;
            }
            }
        }
        return out;
    }
};

inline auto fit_standardizer(const Eigen::MatrixXd& raw, std::vector<std::string> target_names, Standardization mode) -> Standardizer
{
    if (raw.rows() < 2) throw InvalidArgument("standardization needs at least two rows");
    if (static_cast<std::size_t>(raw.cols()) != target_names.size()) throw InvalidArgument("target names do not match predictions");
    Standardizer s;
    s.mode = mode;
    s.target_names = std::move(target_names);
    const double n = static_cast<double>(raw.rows());
    for (Eigen::Index k = 0; k < raw.cols(); ++k) {
        const double mu = raw.col(k).mean();
        const double var = (raw.col(k).array() - mu).square().sum() / (n - 1.0);
        const double sd = std::sqrt(var);
        if (mode == Standardization::zscore && !(sd > 1e-12 * std::max(1.0, std::abs(mu)))) {
            throw DataError("predictions for target '" + s.target_names[static_cast<std::size_t>(k)] + "' have zero variance");
        }
        s.mean.push_back(mu);
        s.sd.push_back(sd);
        std::vector<double> ref(raw.col(k).data(), raw.col(k).data() + raw.rows());
        std::sort(ref.begin(), ref.end());
        s.reference.push_back(mode == Standardization::percentile ? std::move(ref) : std::vector<double>{});
    }
    return s;
}

// K standardized prediction vectors combined as P * alpha.
struct IndexEnsemble {
    Eigen::MatrixXd predictions; // n x K, standardized
    std::vector<std::string> target_names;
    std::vector<std::string> row_ids;
    Standardizer standardizer;
    Eigen::VectorXd alpha;       // reference combining weight (uniform by default)

    auto n() const noexcept -> std::size_t { return static_cast<std::size_t>(predictions.rows()); }
    auto k() const noexcept -> std::size_t { return static_cast<std::size_t>(predictions.cols()); }
    auto combined() const -> Eigen::VectorXd { return predictions * alpha; }
    auto combined(const Eigen::VectorXd& a) const -> Eigen::VectorXd
    {
        if (a.size() != predictions.cols()) throw InvalidArgument("alpha has wrong length");
        return predictions * a;
    }
};

inline void check_simplex(const Eigen::VectorXd& alpha, double tol = 1e-9)
{
    if (alpha.size() == 0) throw InvalidArgument("alpha is empty");
    if ((alpha.array() < -tol).any() || std::abs(alpha.sum() - 1.0) > tol || !alpha.allFinite()) {
        throw InvalidArgument("alpha must lie on the simplex (nonnegative, summing to 1)");
    }
}

inline auto raw_predictions(std::span<const LinearModel> models, const Dataset& ds) -> Eigen::MatrixXd
{
    require_orthonormal(ds);
    if (models.empty()) throw InvalidArgument("ensemble needs at least one model");
    Eigen::MatrixXd raw(ds.n(), static_cast<Eigen::Index>(models.size()));
    for (std::size_t k = 0; k < models.size(); ++k) {
        if (models[k].weights.size() != ds.features().cols()) throw InvalidArgument("model '" + models[k].target_name + "' does not match the design");
        raw.col(static_cast<Eigen::Index>(k)) = models[k].predict(ds.features());
    }
    return raw;
}

inline auto model_names(std::span<const LinearModel> models) -> std::vector<std::string>
{
    std::vector<std::string> names;
    for (const auto& m : models) names.push_back(m.target_name);
    return names;
}

// Ensemble from raw per-target predictions (n x K), standardized on themselves.
inline auto build_ensemble_from_raw(const Eigen::MatrixXd& raw, std::vector<std::string> names, std::vector<std::string> row_ids,
    Standardization mode = Standardization::zscore) -> IndexEnsemble
{
    IndexEnsemble e;
    e.standardizer = fit_standardizer(raw, std::move(names), mode);
    e.predictions = e.standardizer.apply(raw);
    e.target_names = e.standardizer.target_names;
    e.row_ids = std::move(row_ids);
    e.alpha = Eigen::VectorXd::Constant(raw.cols(), 1.0 / static_cast<double>(raw.cols()));
    return e;
}

// Ensemble from raw predictions with a standardizer frozen elsewhere.
inline auto build_ensemble_from_raw(const Eigen::MatrixXd& raw, std::vector<std::string> row_ids, const Standardizer& frozen) -> IndexEnsemble
{
    IndexEnsemble e;
    e.standardizer = frozen;
    e.predictions = frozen.apply(raw);
    e.target_names = frozen.target_names;
    e.row_ids = std::move(row_ids);
    e.alpha = Eigen::VectorXd::Constant(raw.cols(), 1.0 / static_cast<double>(raw.cols()));
    return e;
}

inline auto build_ensemble(std::span<const LinearModel> models, const Dataset& ds, Standardization mode = Standardization::zscore) -> IndexEnsemble
{
    return build_ensemble_from_raw(raw_predictions(models, ds), model_names(models), ds.row_ids(), mode);
}

inline auto build_ensemble(std::span<const LinearModel> models, const Dataset& ds, const Standardizer& frozen) -> IndexEnsemble
{
    return build_ensemble_from_raw(raw_predictions(models, ds), ds.row_ids(), frozen);
}

// OLS against the composite target sum_k alpha_k y_k.
inline auto fit_index_variable(const Dataset& ds, const Eigen::VectorXd& alpha, const std::vector<std::string>& targets) -> LinearModel
{
    if (static_cast<std::size_t>(alpha.size()) != targets.size()) throw InvalidArgument("alpha and targets differ in length");
    check_simplex(alpha);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ds.n()));
    std::string name = "index(";
    for (std::size_t k = 0; k < targets.size(); ++k) {
        y += alpha(static_cast<Eigen::Index>(k)) * ds.target(targets[k]);
        name += (k ? "," : "") + targets[k];
    }
    return fit_ols(ds, y, name + ")");
}

// Bound on pred_i - pred_j over all alpha, as stated for index models:
// Delta(alpha_ref) + sum_k |gap_k|. Valid but never negative.
inline auto gap_bound_multi(const IndexEnsemble& e, std::size_t i, std::size_t j, const Eigen::VectorXd& alpha_ref) -> double
{
    if (i == j) throw InvalidArgument("gap bound needs two distinct rows");
    const Eigen::VectorXd g = (e.predictions.row(static_cast<Eigen::Index>(i)) - e.predictions.row(static_cast<Eigen::Index>(j))).transpose();
    return g.dot(alpha_ref) + g.cwiseAbs().sum();
}

// Exact supremum of pred_i - pred_j over the soft simplex
// {alpha in [0,1]^K, lo <= sum(alpha) <= 1}: the best vertex.
inline auto gap_sup_multi(const IndexEnsemble& e, std::size_t i, std::size_t j, double sum_lo = 0.1) -> double
{
    const double g = (e.predictions.row(static_cast<Eigen::Index>(i)) - e.predictions.row(static_cast<Eigen::Index>(j))).maxCoeff();
    return g > 0.0 ? g : sum_lo * g;
}

inline auto max_prediction_alpha(const IndexEnsemble& e, std::size_t i) -> Eigen::VectorXd
{
    Eigen::Index k = 0;
    e.predictions.row(static_cast<Eigen::Index>(i)).maxCoeff(&k); // first maximum on ties
    return Eigen::VectorXd::Unit(e.predictions.cols(), k);
}

inline auto min_prediction_alpha(const IndexEnsemble& e, std::size_t i) -> Eigen::VectorXd
{
    Eigen::Index k = 0;
    e.predictions.row(static_cast<Eigen::Index>(i)).minCoeff(&k);
    return Eigen::VectorXd::Unit(e.predictions.cols(), k);
}

struct MultiOptions {
    double sum_lo = 0.1; // lower bound on sum(alpha) in the soft simplex
};

inline auto multi_target_problem(const IndexEnsemble& e, const MultiOptions& mo = {}) -> FlipProblem
{
    if (e.k() < 1) throw InvalidArgument("ensemble has no targets");
    auto P = std::make_shared<const Eigen::MatrixXd>(e.predictions);
    const double lo = mo.sum_lo;
    FlipProblem p;
    p.family = MipFamily::flip_multi;
    p.scores = *P;
    p.region = SoftSimplexRegion{e.k(), lo, 1.0};
    p.baseline = e.alpha;
    p.alpha_term = 0.5;
    p.row_ids = e.row_ids;
    p.gap_upper = [P, lo](std::size_t i, std::size_t j) {
        const double g = (P->row(static_cast<Eigen::Index>(i)) - P->row(static_cast<Eigen::Index>(j))).maxCoeff();
        return g > 0.0 ? g : lo * g;
    };
    const double M = P->maxCoeff() - P->minCoeff();
    p.big_m = [M](std::size_t) { return M; };
    p.raise = [P](std::size_t i) {
        Eigen::Index k = 0;
        P->row(static_cast<Eigen::Index>(i)).maxCoeff(&k);
        return Eigen::VectorXd::Unit(P->cols(), k);
    };
    p.lower = [P](std::size_t i) {
        Eigen::Index k = 0;
        P->row(static_cast<Eigen::Index>(i)).minCoeff(&k);
        return Eigen::VectorXd::Unit(P->cols(), k);
    };
    p.prediction_scale = P->cwiseAbs().maxCoeff();
    return p;
}

// Rows never in the top kappa for any alpha (Pareto-dominated by at least
// kappa rows) and rows in the top kappa for every alpha.
struct MultiPruneResult {
    std::vector<std::size_t> never_top;
    std::vector<std::size_t> always_top;
};

inline auto prune_never_top_multi(const IndexEnsemble& e, int kappa, const MultiOptions& mo = {}) -> MultiPruneResult
{
    FlipEngine engine(multi_target_problem(e, mo), kappa, {});
    return {engine.pruned_never_top(), engine.pruned_always_top()};
}

inline auto flip_search_multi(const IndexEnsemble& e, int kappa, std::size_t i, const FlipOptions& options = {}, const MultiOptions& mo = {}) -> FlipReport
{
    FlipEngine engine(multi_target_problem(e, mo), kappa, options);
    return engine.flip(i);
}

inline auto flip_search_multi_rows(const IndexEnsemble& e, int kappa, std::span<const std::size_t> rows, const FlipOptions& options = {},
    const MultiOptions& mo = {}) -> std::vector<FlipReport>
{
    FlipEngine engine(multi_target_problem(e, mo), kappa, options);
    return engine.flip_rows(rows);
}

// Fraction of the sample whose top-kappa status varies with alpha.
inline auto ambiguity_multi(std::span<const FlipReport> reports) -> double
{
    return ambiguity_from_reports(reports, AmbiguityMode::all);
}

inline auto ambiguity_multi(const IndexEnsemble& e, int kappa, std::span<const std::size_t> sample, const FlipOptions& options = {}) -> double
{
    if (sample.empty()) throw InvalidArgument("ambiguity needs a nonempty sample");
    const auto reports = flip_search_multi_rows(e, kappa, sample, options);
    return ambiguity_multi(reports);
}

// Cross-checks reports against the exact K = 2 segment sweep.
inline void certify_with_segment_sweep(const IndexEnsemble& e, std::vector<FlipReport>& reports)
{
    if (e.k() != 2) throw InvalidArgument("segment-sweep certification needs K = 2");
    const auto ranges = oracle::simplex_sweep_ranges(e.predictions);
    for (auto& r : reports) {
        oracle::RankRange o = ranges.at(r.row);
        o.min_rank = std::min(o.min_rank, r.baseline_rank);
        o.max_rank = std::max(o.max_rank, r.baseline_rank);
        const bool flippable = o.min_rank <= r.kappa && o.max_rank > r.kappa;
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
