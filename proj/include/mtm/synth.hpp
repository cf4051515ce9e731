#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mtm/dataset.hpp"
#include "mtm/error.hpp"

namespace mtm {

// Semi-synthetic data: one age feature (plus its centered square), a
// protected group concentrated in a middle age band, a target that falls with
// age and a target whose age slope is b. With curvature q > 0 both targets
// also bend down away from the middle of the age range, so fitted scores can
// peak at an interior age; q = 0 gives the purely linear construction.
struct SynthConfig {
    std::size_t n = 600;
    double b = 0.0;
    double age_min = 20.0;
    double age_max = 80.0;
    std::pair<double, double> group_band{0.4, 0.6}; // age quantiles
    double p_in_band = 0.6;
    double p_out_band = 0.1;
    double noise_sd = 0.5;
    double curvature = 0.0;       // 0 = purely linear targets
    std::uint64_t seed = 7;
};

inline constexpr const char* kSynthProtected = "protected";
inline constexpr const char* kSynthOther = "other";

inline void validate(const SynthConfig& cfg)
{
    if (cfg.n < 10) throw InvalidArgument("synthetic data needs n >= 10");
    const auto [lo, hi] = cfg.group_band;
    if (!(0.0 <= lo && lo < hi && hi <= 1.0)) throw InvalidArgument("group band must satisfy 0 <= low < high <= 1");
    if (!(cfg.age_max > cfg.age_min)) throw InvalidArgument("age range is empty");
    if (!(cfg.p_in_band > cfg.p_out_band)) throw InvalidArgument("p_in_band must exceed p_out_band");
    if (cfg.p_in_band > 1.0 || cfg.p_out_band < 0.0) throw InvalidArgument("group probabilities must lie in [0, 1]");
    if (!(cfg.noise_sd >= 0.0) || !(cfg.curvature >= 0.0) || !std::isfinite(cfg.b)) throw InvalidArgument("invalid noise, curvature or slope");
}

// Standardizes a signal to mean 0 and sd 1; a constant signal is centered only.
inline auto standardize_signal(Eigen::VectorXd v) -> Eigen::VectorXd
{
    v.array() -= v.mean();
    const double sd = std::sqrt(v.squaredNorm() / static_cast<double>(v.size() - 1));
    if (sd > 1e-12) v /= sd;
    return v;
}

inline auto generate(const SynthConfig& cfg) -> Dataset
{
    validate(cfg);
    const auto n = static_cast<Eigen::Index>(cfg.n);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> age_dist(cfg.age_min, cfg.age_max);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);

    const double span = cfg.age_max - cfg.age_min;
    const double mid = 0.5 * (cfg.age_min + cfg.age_max);
    const double band_lo = cfg.age_min + cfg.group_band.first * span;
    const double band_hi = cfg.age_min + cfg.group_band.second * span;

    Eigen::VectorXd age(n), a(n);
    std::vector<std::string> groups(cfg.n), ids(cfg.n);
    std::vector<Split> splits(cfg.n);
    for (Eigen::Index i = 0; i < n; ++i) {
        age(i) = age_dist(rng);
        a(i) = (age(i) - mid) / (0.5 * span);
        const bool in_band = age(i) >= band_lo && age(i) <= band_hi;
        const bool member = unit(rng) < (in_band ? cfg.p_in_band : cfg.p_out_band);
        const auto ii = static_cast<std::size_t>(i);
        groups[ii] = member ? kSynthProtected : kSynthOther;
        ids[ii] = "s" + std::to_string(i);
        splits[ii] = split_for_row(ids[ii], cfg.seed);
    }

    Eigen::VectorXd s1 = standardize_signal(-a - cfg.curvature * a.cwiseAbs2());
    Eigen::VectorXd s2 = standardize_signal(cfg.b * a - cfg.curvature * a.cwiseAbs2());
    Eigen::MatrixXd targets(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        targets(i, 0) = s1(i) + cfg.noise_sd * noise(rng);
        targets(i, 1) = s2(i) + cfg.noise_sd * noise(rng);
    }

    // The squared term is only a feature when the targets actually bend.
    const bool bent = cfg.curvature > 0.0;
    Eigen::MatrixXd features(n, bent ? 3 : 2);
    features.col(0).setOnes();
    features.col(1) = age;
    std::vector<std::string> names{kInterceptName, "age"};
    if (bent) {
        features.col(2) = a.cwiseAbs2();
        names.emplace_back("age_centered_sq");
    }
    return Dataset(std::move(features), std::move(names), std::move(targets), {"y1", "y2"}, std::move(groups), std::move(ids), std::move(splits));
}

} // namespace mtm
