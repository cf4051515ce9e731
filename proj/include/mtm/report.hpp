#pragma once

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <iomanip>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mtm/dataset.hpp"
#include "mtm/fairness.hpp"
#include "mtm/flip.hpp"
#include "mtm/metrics.hpp"
#include "mtm/solver.hpp"

namespace mtm {

inline constexpr const char* kSoftwareVersion = "0.1.0";

// Ordered keys keep every serialized output byte-stable across runs.
using Json = nlohmann::ordered_json;

// Replay information embedded in every output: command, seed, budgets,
// epsilon mode, standardization and anything else the caller adds. There is
// deliberately no timestamp.
class Metadata {
public:
    explicit Metadata(std::string command)
    {
        json_["software"] = "mtm";
        json_["version"] = kSoftwareVersion;
        json_["command"] = std::move(command);
    }

    template <typename T>
    auto set(const std::string& key, T&& value) -> Metadata&
    {
        json_[key] = std::forward<T>(value);
        return *this;
    }

    auto json() const -> const Json& { return json_; }

    // "# key: value" lines for CSV headers; values are compact JSON.
    void write_comment_lines(std::ostream& os) const
    {
        for (const auto& [key, value] : json_.items()) {
            os << "# " << key << ": " << (value.is_string() ? value.get<std::string>() : value.dump()) << "\n";
        }
    }

private:
    Json json_ = Json::object();
};

inline auto to_json(const Eigen::VectorXd& v) -> Json
{
    Json a = Json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
    return a;
}

inline auto format_number(double v) -> std::string
{
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

// One JSON-lines record per flip report. `witness_key` is "witness" for
// weight vectors and "witness_alpha" for combining weights.
inline auto to_json(const FlipReport& r, const std::string& witness_key) -> Json
{
    Json j;
    j["row_id"] = r.row_id;
    j["baseline_rank"] = r.baseline_rank;
    j["min_rank"] = r.min_rank;
    j["max_rank"] = r.max_rank;
    j["min_exact"] = r.min_exact;
    j["max_exact"] = r.max_exact;
    j["flippable"] = r.flippable;
    j["method"] = to_string(r.method);
    j["status"] = to_string(r.status);
    j["nodes"] = r.nodes;
    j[witness_key] = r.witness ? to_json(*r.witness) : Json(nullptr);
    return j;
}

// First line is {"metadata": ...}; every following line is one report.
inline void write_jsonl(std::ostream& os, const Metadata& meta, std::span<const FlipReport> reports, const std::string& witness_key)
{
    os << Json{{"metadata", meta.json()}}.dump() << "\n";
    for (const auto& r : reports) os << to_json(r, witness_key).dump() << "\n";
}

inline void write_json(std::ostream& os, const Metadata& meta, Json body)
{
    Json doc;
    doc["metadata"] = meta.json();
    for (auto& [key, value] : body.items()) doc[key] = std::move(value);
    os << doc.dump(2) << "\n";
}

// Plot-ready CSV with '#' metadata lines before the header.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline void write_table(std::ostream& os, const Metadata& meta, const CsvTable& table)
{
    meta.write_comment_lines(os);
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) os << (c ? "," : "") << detail::csv_escape(cells[c]);
        os << "\n";
    };
    line(table.header);
    for (const auto& r : table.rows) line(r);
}

inline auto curve_table(std::span<const CurvePoint> curve, const std::string& target) -> CsvTable
{
    CsvTable t{{"epsilon", "ambiguity_all", "ambiguity_top", "target", "epsilon_absolute", "flippable", "undetermined"}, {}};
    for (const auto& p : curve) {
        t.rows.push_back({format_number(p.epsilon_input), format_number(p.ambiguity_all), format_number(p.ambiguity_top), target,
            format_number(p.epsilon), std::to_string(p.flippable), std::to_string(p.undetermined)});
    }
    return t;
}

inline auto stable_table(std::span<const StableSweepPoint> sweep, Family family) -> CsvTable
{
    CsvTable t{{"kappa", "stable_fraction", "family", "stable_selected", "undetermined"}, {}};
    for (const auto& p : sweep) {
        t.rows.push_back({std::to_string(p.kappa), format_number(p.stable_fraction), to_string(family), std::to_string(p.stable_selected),
            std::to_string(p.undetermined)});
    }
    return t;
}

inline auto to_json(const GroupExtreme& x) -> Json
{
    Json j;
    j["count"] = x.count;
    j["rate"] = x.rate;
    j["alpha"] = to_json(x.alpha);
    j["status"] = to_string(x.status);
    j["bound"] = x.bound;
    j["nodes"] = x.nodes;
    return j;
}

inline auto to_json(const GroupRateReport& r) -> Json
{
    Json j;
    j["group_label"] = r.group_label;
    j["kappa"] = r.kappa;
    j["group_size"] = r.group_size;
    j["min"] = r.min ? to_json(*r.min) : Json(nullptr);
    j["max"] = r.max ? to_json(*r.max) : Json(nullptr);
    Json one_hot = Json::array();
    for (std::size_t k = 0; k < r.target_names.size(); ++k) {
        one_hot.push_back(Json{{"target", r.target_names[k]}, {"count", r.one_hot_counts[k]},
            {"rate", static_cast<double>(r.one_hot_counts[k]) / static_cast<double>(r.kappa)}});
    }
    j["one_hot"] = std::move(one_hot);
    return j;
}

inline auto to_json(const SelectionMetrics& m, std::span<const std::string> targets) -> Json
{
    Json j;
    j["model"] = m.model;
    j["alpha"] = to_json(m.alpha);
    j["kappa"] = m.kappa;
    j["group_count"] = m.group_count;
    j["group_percent"] = m.group_percent;
    Json c;
    for (std::size_t k = 0; k < targets.size(); ++k) c[targets[k]] = m.concentration[k];
    j["concentration_percent"] = std::move(c);
    return j;
}

inline auto to_json(const WorkflowReport& r) -> Json
{
    Json j;
    j["targets"] = r.targets;
    j["group_label"] = r.group_label;
    j["kappa"] = r.kappa_text;
    j["n_train"] = r.n_train;
    j["n_tune"] = r.n_tune;
    j["n_holdout"] = r.n_holdout;
    j["rank"] = r.rank;
    j["dropped_columns"] = r.dropped_columns;
    Json st;
    st["mode"] = to_string(r.standardizer.mode);
    st["mean"] = r.standardizer.mean;
    st["sd"] = r.standardizer.sd;
    j["standardizer"] = std::move(st);
    j["tune_range"] = to_json(r.tune_range);
    Json tune = Json::array(), hold = Json::array();
    for (const auto& m : r.tune) tune.push_back(to_json(m, r.targets));
    for (const auto& m : r.holdout) hold.push_back(to_json(m, r.targets));
    j["tune"] = std::move(tune);
    j["holdout"] = std::move(hold);
    return j;
}

// Summary table: one row per (split, model) with group share and the
// percent of each outcome captured by the selected set.
inline auto workflow_table(const WorkflowReport& r) -> CsvTable
{
    CsvTable t;
    t.header = {"split", "model", "kappa", "group_count", "group_percent"};
    for (const auto& name : r.targets) t.header.push_back("concentration_" + name);
    auto add = [&](const std::string& split, const std::vector<SelectionMetrics>& ms) {
        for (const auto& m : ms) {
            std::vector<std::string> row{split, m.model, std::to_string(m.kappa), std::to_string(m.group_count), format_number(m.group_percent)};
            for (double c : m.concentration) row.push_back(format_number(c));
            t.rows.push_back(std::move(row));
        }
    };
    add("tune", r.tune);
    add("holdout", r.holdout);
    return t;
}

// Replayable instance dump: region, objective, and every big-M linking row.
inline auto instance_to_json(const MipInstance& inst) -> Json
{
    Json j;
    j["family"] = to_string(inst.family);
    j["direction"] = inst.direction == Direction::minimize ? "min" : "max";
    j["n"] = inst.n();
    j["continuous_dim"] = inst.continuous_dim();
    j["indicator_count"] = inst.indicator_count();
    j["kappa"] = inst.kappa;
    j["margin"] = inst.margin;
    j["alpha_term"] = inst.alpha_term;
    if (std::holds_alternative<BallRegion>(inst.region)) {
        const auto& b = std::get<BallRegion>(inst.region);
        j["region"] = Json{{"type", "ball"}, {"center", to_json(b.center)}, {"radius2", b.radius2}};
    } else {
        const auto& s = std::get<SoftSimplexRegion>(inst.region);
        j["region"] = Json{{"type", "soft_simplex"}, {"dim", s.dim}, {"sum_lo", s.sum_lo}, {"sum_hi", s.sum_hi}};
    }
    j["pivots"] = inst.pivots;
    j["big_m"] = inst.big_m;
    Json scores = Json::array();
    for (Eigen::Index i = 0; i < inst.scores.rows(); ++i) scores.push_back(to_json(Eigen::VectorXd(inst.scores.row(i).transpose())));
    j["scores"] = std::move(scores);
    Json rows = Json::array();
    for (const auto& r : linking_rows(inst)) {
        Json row{{"pivot", r.pivot}, {"other", r.other}, {"coefficients", to_json(r.coefficients)}, {"big_m", r.big_m}};
        if (!inst.fixed.empty()) {
            const auto a = static_cast<std::size_t>(std::find(inst.pivots.begin(), inst.pivots.end(), r.pivot) - inst.pivots.begin());
            static constexpr const char* names[] = {"free", "above", "below", "tied"};
            row["fixed"] = names[static_cast<int>(inst.fixed[a][r.other])];
        }
        rows.push_back(std::move(row));
    }
    j["linking_rows"] = std::move(rows);
    return j;
}

} // namespace mtm
