#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "mtm/dataset.hpp"
#include "mtm/error.hpp"
#include "mtm/flip.hpp"
#include "mtm/index_model.hpp"
#include "mtm/linear_fit.hpp"
#include "mtm/rashomon_single.hpp"

namespace mtm {

enum class Family { rashomon, index };

inline auto to_string(Family f) -> std::string { return f == Family::rashomon ? "rashomon" : "index"; }

inline auto parse_family(const std::string& text) -> Family
{
    if (text == "rashomon") return Family::rashomon;
    if (text == "index") return Family::index;
    throw InvalidArgument("family must be rashomon or index");
}

// Rows whose top-kappa decision is the same for every model in the family.
// Rows with an undetermined search are left out of both sets.
struct StableSet {
    int kappa = 0;
    Family family = Family::rashomon;
    std::vector<std::size_t> stable_selected;
    std::vector<std::size_t> stable_unselected;
    std::vector<std::size_t> flippable;
    std::vector<std::size_t> undetermined;
    double stable_fraction = 0.0; // |stable_selected| / kappa
};

inline auto stable_points(std::span<const FlipReport> reports, int kappa, Family family, std::size_t n) -> StableSet
{
    if (reports.size() != n) throw InvalidArgument("stable points need a report for every row");
    std::vector<bool> seen(n, false);
    StableSet s;
    s.kappa = kappa;
    s.family = family;
    for (const auto& r : reports) {
        if (r.row >= n || seen[r.row]) throw InvalidArgument("reports do not cover each row exactly once");
        if (r.kappa != kappa) throw InvalidArgument("report computed for a different kappa");
        seen[r.row] = true;
        if (r.status == FlipStatus::undetermined) s.undetermined.push_back(r.row);
        else if (r.flippable) s.flippable.push_back(r.row);
        else if (r.baseline_top()) s.stable_selected.push_back(r.row);
        else s.stable_unselected.push_back(r.row);
    }
    s.stable_fraction = static_cast<double>(s.stable_selected.size()) / static_cast<double>(kappa);
    return s;
}

// Stable fraction only depends on the baseline-top rows, so the sweep solves
// just those.
struct StableSweepPoint {
    int kappa = 0;
    double stable_fraction = 0.0;
    std::size_t stable_selected = 0;
    std::size_t undetermined = 0;
};

inline auto stable_sweep(const FlipEngine& engine) -> StableSweepPoint
{
    const auto order = engine.baseline_ranks().order();
    const auto kappa = engine.kappa();
    std::vector<std::size_t> top(order.begin(), order.begin() + kappa);
    const auto reports = engine.flip_rows(top);
    StableSweepPoint p;
    p.kappa = kappa;
    for (const auto& r : reports) {
        if (r.status == FlipStatus::undetermined) ++p.undetermined;
        else if (!r.flippable) ++p.stable_selected;
    }
    p.stable_fraction = static_cast<double>(p.stable_selected) / static_cast<double>(kappa);
    return p;
}

inline auto stable_fraction_rashomon(const Dataset& ds, const RashomonBall& ball, std::span<const int> kappas, const FlipOptions& options = {})
    -> std::vector<StableSweepPoint>
{
    std::vector<StableSweepPoint> out;
    const auto problem = single_target_problem(ds, ball);
    for (int k : kappas) out.push_back(stable_sweep(FlipEngine(problem, k, options)));
    return out;
}

inline auto stable_fraction_index(const IndexEnsemble& e, std::span<const int> kappas, const FlipOptions& options = {}, const MultiOptions& mo = {})
    -> std::vector<StableSweepPoint>
{
    std::vector<StableSweepPoint> out;
    const auto problem = multi_target_problem(e, mo);
    for (int k : kappas) out.push_back(stable_sweep(FlipEngine(problem, k, options)));
    return out;
}

struct CurvePoint {
    double epsilon_input = 0.0;
    double epsilon = 0.0; // absolute RSS slack
    double ambiguity_all = 0.0;
    double ambiguity_top = 0.0;
    std::size_t flippable = 0;
    std::size_t undetermined = 0;
    std::size_t reused = 0; // flips carried over from a smaller epsilon
};

struct CurveOptions {
    EpsilonMode mode = EpsilonMode::relative;
    bool reuse = true;
};

// Ambiguity over an ascending list of epsilons. Balls share a center, so a
// flip witness found for a smaller epsilon stays a member of every larger ball
// and is accepted without another search.
inline auto ambiguity_curve(const Dataset& ds, const LinearModel& center, int kappa, std::span<const double> epsilons, std::span<const std::size_t> sample,
    const FlipOptions& options = {}, const CurveOptions& co = {}) -> std::vector<CurvePoint>
{
    require_orthonormal(ds);
    if (sample.empty()) throw InvalidArgument("ambiguity needs a nonempty sample");
    for (std::size_t k = 0; k < epsilons.size(); ++k) {
        if (!(epsilons[k] >= 0.0)) throw InvalidArgument("epsilons must be nonnegative");
        if (k > 0 && !(epsilons[k] > epsilons[k - 1])) throw InvalidArgument("epsilons must be strictly ascending");
    }
    std::vector<CurvePoint> out;
    std::vector<FlipReport> previous;
    for (double e_in : epsilons) {
        const auto ball = make_ball(center, e_in, co.mode);
        FlipEngine engine(single_target_problem(ds, ball), kappa, options);
        std::vector<FlipReport> reports(sample.size());
        std::vector<std::size_t> todo;
        CurvePoint pt;
        pt.epsilon_input = e_in;
        pt.epsilon = ball.epsilon;
        for (std::size_t k = 0; k < sample.size(); ++k) {
            if (co.reuse && !previous.empty() && previous[k].flippable && previous[k].witness && ball_membership(ball, *previous[k].witness)) {
                reports[k] = previous[k];
                ++pt.reused;
            } else {
                todo.push_back(k);
            }
        }
        std::vector<std::size_t> rows;
        for (auto k : todo) rows.push_back(sample[k]);
        auto fresh = engine.flip_rows(rows);
        for (std::size_t t = 0; t < todo.size(); ++t) reports[todo[t]] = std::move(fresh[t]);
        for (const auto& r : reports) {
            pt.flippable += r.flippable ? 1 : 0;
            pt.undetermined += r.status == FlipStatus::undetermined ? 1 : 0;
        }
        pt.ambiguity_all = ambiguity_from_reports(reports, AmbiguityMode::all);
        pt.ambiguity_top = ambiguity_from_reports(reports, AmbiguityMode::top);
        out.push_back(pt);
        previous = std::move(reports);
    }
    return out;
}

} // namespace mtm
