#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "mtm/mtm.hpp"

namespace {

using mtm::Json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitBudget = 4;

// Inputs above this size are too large for the exact oracles.
constexpr std::size_t kCertifyMaxRows = 400;

struct Global {
    std::uint64_t seed = 7;
    std::int64_t node_budget = 1'000'000;
    double time_budget = 60.0;
    bool certify = false;
    std::vector<std::string> drop_regex;
    std::vector<std::string> keep_regex;
    unsigned workers = 1;
};

struct DataArgs {
    std::string path;
    std::vector<std::string> features;
    std::string group_column = "group";
    std::string split_column;
    std::string id_column;
    std::vector<std::string> ignore;
    std::string rows = "all";
    bool drop_missing = false;
};

void add_data_options(CLI::App* cmd, DataArgs& d)
{
    cmd->add_option("--data", d.path, "input CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--features", d.features, "feature columns (default: every unclaimed column)")->delimiter(',');
    cmd->add_option("--group-column", d.group_column, "group column name")->capture_default_str();
    cmd->add_option("--split-column", d.split_column, "split column (default: 'split' if present)");
    cmd->add_option("--id-column", d.id_column, "row id column (default: 'row_id' if present)");
    cmd->add_option("--ignore-columns", d.ignore, "columns that are neither features nor analysed")->delimiter(',');
    cmd->add_option("--rows", d.rows, "rows to analyse")->check(CLI::IsMember({"all", "train", "tune", "holdout"}))->capture_default_str();
    cmd->add_flag("--drop-missing", d.drop_missing, "drop rows with missing cells instead of failing");
}

auto header_columns(const std::string& path) -> std::vector<std::string>
{
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
    auto cells = mtm::detail::split_csv_line(line, 0);
    for (auto& c : cells) c = std::string(mtm::detail::trim(c));
    return cells;
}

struct Loaded {
    mtm::Dataset ds;
    std::size_t rows_dropped_missing = 0;
};

auto load(const DataArgs& d, const Global& g, const std::vector<std::string>& targets) -> Loaded
{
    const auto header = header_columns(d.path);
    auto has = [&](const std::string& name) { return std::find(header.begin(), header.end(), name) != header.end(); };
    mtm::CsvSchema schema;
    schema.features = d.features;
    schema.targets = targets;
    schema.group = d.group_column;
    if (!d.split_column.empty()) schema.split = d.split_column;
    else if (has("split")) schema.split = "split";
    if (!d.id_column.empty()) schema.row_id = d.id_column;
    else if (has("row_id")) schema.row_id = "row_id";
    if (schema.features.empty()) {
        // Unlisted columns become features unless explicitly ignored (for
        // example outcome columns not analysed by this command).
        for (const auto& h : header) {
            const bool claimed = std::find(targets.begin(), targets.end(), h) != targets.end() || h == schema.group
                || (schema.split && h == *schema.split) || (schema.row_id && h == *schema.row_id)
                || std::find(d.ignore.begin(), d.ignore.end(), h) != d.ignore.end();
            if (!claimed) schema.features.push_back(h);
        }
    }
    mtm::LoadOptions lo;
    lo.missing = d.drop_missing ? mtm::MissingPolicy::drop_rows : mtm::MissingPolicy::reject;
    lo.split_seed = g.seed;
    mtm::LoadReport rep;
    auto ds = mtm::load_csv(d.path, schema, lo, &rep);
    if (!g.drop_regex.empty()) ds = mtm::drop_columns_matching(ds, g.drop_regex);
    if (!g.keep_regex.empty()) ds = mtm::keep_columns_matching(ds, g.keep_regex);
    if (d.rows != "all") ds = ds.subset(ds.rows_in(*mtm::parse_split(d.rows)));
    return {std::move(ds), rep.rows_dropped_missing};
}

auto flip_options(const Global& g, bool exact) -> mtm::FlipOptions
{
    mtm::FlipOptions o;
    o.exact = exact;
    o.budget.max_nodes = g.node_budget;
    o.budget.max_seconds = g.time_budget;
    o.workers = g.workers;
    return o;
}

auto base_metadata(const std::string& command, const Global& g) -> mtm::Metadata
{
    mtm::Metadata m(command);
    m.set("seed", g.seed).set("node_budget", g.node_budget).set("time_budget_seconds", g.time_budget).set("workers", g.workers);
    m.set("drop_regex", g.drop_regex).set("keep_regex", g.keep_regex).set("certify", g.certify);
    return m;
}

void add_data_metadata(mtm::Metadata& m, const DataArgs& d, const Loaded& l)
{
    std::vector<std::string> features(l.ds.feature_names().begin() + 1, l.ds.feature_names().end());
    m.set("data", d.path).set("rows", d.rows).set("n", l.ds.n()).set("features", features).set("rows_dropped_missing", l.rows_dropped_missing);
}

// Opens --out; "-" means stdout.
class Output {
public:
    explicit Output(const std::string& path)
    {
        if (path != "-") {
            file_.open(path, std::ios::binary);
            if (!file_) throw mtm::InvalidArgument("cannot write '" + path + "'");
        }
    }
    auto stream() -> std::ostream& { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

private:
    std::ofstream file_;
};

struct Fitted {
    mtm::Dataset ortho;
    mtm::OrthoBasis basis;
    std::vector<mtm::LinearModel> models;
};

auto fit_all(const mtm::Dataset& ds, const std::vector<std::string>& targets) -> Fitted
{
    auto [ortho, basis] = mtm::orthonormalize(ds);
    Fitted f{std::move(ortho), std::move(basis), {}};
    for (const auto& t : targets) f.models.push_back(mtm::fit_ols(f.ortho, t));
    return f;
}

auto sample_rows(std::size_t n, std::size_t size, std::uint64_t seed) -> std::vector<std::size_t>
{
    auto rows = mtm::all_rows(n);
    if (size == 0 || size >= n) return rows;
    std::mt19937_64 rng(seed);
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(size);
    std::sort(rows.begin(), rows.end());
    return rows;
}

void require_certifiable(std::size_t n)
{
    if (n > kCertifyMaxRows) throw mtm::InvalidArgument("--certify is limited to " + std::to_string(kCertifyMaxRows) + " rows");
}

auto count_undetermined(const std::vector<mtm::FlipReport>& reports) -> std::size_t
{
    return static_cast<std::size_t>(std::count_if(reports.begin(), reports.end(), [](const auto& r) { return r.status == mtm::FlipStatus::undetermined; }));
}

// Every flip the sampling oracle finds must be among the certified flips.
void check_sampling_oracle(const std::vector<bool>& sampled, const std::vector<mtm::FlipReport>& reports)
{
    for (const auto& r : reports) {
        if (sampled.at(r.row) && !r.flippable && r.status == mtm::FlipStatus::certified) {
            throw mtm::Error("certification failed: sampling oracle flips row " + r.row_id);
        }
    }
}

// ---------------------------------------------------------------- commands

auto cmd_fit(const Global& g, const DataArgs& d, const std::vector<std::string>& targets, const std::string& out) -> int
{
    const auto l = load(d, g, targets);
    const auto f = fit_all(l.ds, targets);
    auto meta = base_metadata("fit", g);
    add_data_metadata(meta, d, l);
    meta.set("rank", f.basis.rank).set("dropped_columns", f.basis.dropped_columns);
    Json models = Json::array();
    for (const auto& m : f.models) {
        // Original-basis coefficients: pred = X * transform * w.
        const Eigen::VectorXd beta = f.basis.transform * m.weights;
        Json coef;
        for (std::size_t j = 0; j < l.ds.feature_names().size(); ++j) coef[l.ds.feature_names()[j]] = beta(static_cast<Eigen::Index>(j));
        models.push_back(Json{{"target", m.target_name}, {"rss", m.rss}, {"weights_orthonormal", mtm::to_json(m.weights)}, {"coefficients", coef}});
    }
    Output o(out);
    mtm::write_json(o.stream(), meta, Json{{"models", models}});
    return kExitOk;
}

struct SingleArgs {
    std::string target;
    std::string kappa;
    std::vector<double> epsilons;
    std::string mode = "all";
    std::string sample = "all";
    std::size_t sample_size = 0;
    std::string epsilon_mode = "relative";
    std::string out;
    std::string reports_out;
};

auto cmd_ambiguity_single(const Global& g, const DataArgs& d, const SingleArgs& a) -> int
{
    const auto l = load(d, g, {a.target});
    const auto f = fit_all(l.ds, {a.target});
    const int kappa = mtm::parse_kappa(a.kappa, l.ds.n());
    const auto emode = a.epsilon_mode == "absolute" ? mtm::EpsilonMode::absolute : mtm::EpsilonMode::relative;
    const auto options = flip_options(g, g.certify);

    std::vector<std::size_t> sample;
    if (a.sample == "top") {
        const Eigen::VectorXd pred = f.ortho.features() * f.models[0].weights;
        const auto order = mtm::rank_descending(std::span<const double>(pred.data(), l.ds.n()), kappa).order();
        sample.assign(order.begin(), order.begin() + kappa);
        std::sort(sample.begin(), sample.end());
    } else {
        sample = sample_rows(l.ds.n(), a.sample_size, g.seed);
    }

    auto curve = mtm::ambiguity_curve(f.ortho, f.models[0], kappa, a.epsilons, sample, options, {emode, true});

    std::vector<mtm::FlipReport> last;
    if (g.certify || !a.reports_out.empty()) {
        // Fresh reports at the largest epsilon (also the certification target).
        const auto ball = mtm::make_ball(f.models[0], a.epsilons.back(), emode);
        last = mtm::flip_search_rows(f.ortho, ball, kappa, sample, options);
        if (g.certify) {
            require_certifiable(l.ds.n());
            if (f.ortho.d() == 1) {
                mtm::certify_with_angle_sweep(f.ortho, ball, last);
            } else {
                check_sampling_oracle(mtm::oracle::monte_carlo_flips_ball(f.ortho.features(), ball.center.weights, ball.epsilon, kappa, 100'000, g.seed), last);
            }
        }
    }

    auto meta = base_metadata("ambiguity-single", g);
    add_data_metadata(meta, d, l);
    meta.set("target", a.target).set("kappa", kappa).set("kappa_input", a.kappa).set("epsilon_mode", a.epsilon_mode).set("mode", a.mode);
    meta.set("sample", a.sample).set("sample_size", sample.size()).set("baseline_rss", f.models[0].rss);
    {
        Output o(a.out);
        mtm::write_table(o.stream(), meta, mtm::curve_table(curve, a.target));
    }
    if (!a.reports_out.empty()) {
        Output o(a.reports_out);
        mtm::write_jsonl(o.stream(), meta, last, "witness");
    }
    const bool undetermined = std::any_of(curve.begin(), curve.end(), [](const auto& p) { return p.undetermined > 0; }) || count_undetermined(last) > 0;
    return undetermined ? kExitBudget : kExitOk;
}

struct MultiArgs {
    std::vector<std::string> targets;
    std::string kappa;
    std::string standardize = "zscore";
    std::string sample = "all";
    std::size_t sample_size = 0;
    double sum_lo = 0.1;
    std::string out;
};

auto cmd_ambiguity_multi(const Global& g, const DataArgs& d, const MultiArgs& a) -> int
{
    const auto l = load(d, g, a.targets);
    const auto f = fit_all(l.ds, a.targets);
    const auto e = mtm::build_ensemble(f.models, f.ortho, mtm::parse_standardization(a.standardize));
    const int kappa = mtm::parse_kappa(a.kappa, l.ds.n());
    std::vector<std::size_t> sample;
    if (a.sample == "top") {
        const Eigen::VectorXd pred = e.combined();
        const auto order = mtm::rank_descending(std::span<const double>(pred.data(), e.n()), kappa).order();
        sample.assign(order.begin(), order.begin() + kappa);
        std::sort(sample.begin(), sample.end());
    } else {
        sample = sample_rows(l.ds.n(), a.sample_size, g.seed);
    }
    const mtm::MultiOptions mo{a.sum_lo};
    auto reports = mtm::flip_search_multi_rows(e, kappa, sample, flip_options(g, g.certify), mo);
    if (g.certify) {
        require_certifiable(l.ds.n());
        if (e.k() == 2) {
            mtm::certify_with_segment_sweep(e, reports);
        } else {
            check_sampling_oracle(mtm::oracle::monte_carlo_flips_simplex(e.predictions, kappa, 100'000, g.seed), reports);
        }
    }
    auto meta = base_metadata("ambiguity-multi", g);
    add_data_metadata(meta, d, l);
    meta.set("targets", a.targets).set("kappa", kappa).set("kappa_input", a.kappa).set("standardization", a.standardize).set("sum_lo", a.sum_lo);
    meta.set("sample", a.sample).set("sample_size", sample.size());
    meta.set("ambiguity", mtm::ambiguity_multi(reports)).set("undetermined", count_undetermined(reports));
    Output o(a.out);
    mtm::write_jsonl(o.stream(), meta, reports, "witness_alpha");
    return count_undetermined(reports) > 0 ? kExitBudget : kExitOk;
}

struct RangeArgs {
    std::vector<std::string> targets;
    std::string group;
    std::string kappa;
    std::string direction = "both";
    std::string standardize = "zscore";
    double sum_lo = 0.1;
    std::string out;
    std::string dump_instance;
};

auto cmd_fairness_range(const Global& g, const DataArgs& d, const RangeArgs& a) -> int
{
    const auto l = load(d, g, a.targets);
    const auto f = fit_all(l.ds, a.targets);
    const auto e = mtm::build_ensemble(f.models, f.ortho, mtm::parse_standardization(a.standardize));
    const int kappa = mtm::parse_kappa(a.kappa, l.ds.n());
    const mtm::MultiOptions mo{a.sum_lo};
    const auto options = flip_options(g, true);
    const auto rep = mtm::group_rate_extremes(e, l.ds.groups(), a.group, kappa, mtm::parse_direction(a.direction), options, mo);

    Json oracle = nullptr;
    if (g.certify) {
        require_certifiable(l.ds.n());
        if (e.k() != 2) throw mtm::InvalidArgument("--certify for fairness-range needs exactly two targets");
        const auto members = mtm::group_members(l.ds.groups(), a.group);
        const auto exact = mtm::oracle::simplex_sweep_group(e.predictions, members, kappa);
        if ((rep.min && rep.min->status == mtm::MipStatus::optimal && rep.min->count != exact.min_count)
            || (rep.max && rep.max->status == mtm::MipStatus::optimal && rep.max->count != exact.max_count)) {
            throw mtm::Error("certification failed: group range disagrees with the segment sweep");
        }
        oracle = Json{{"min_count", exact.min_count}, {"max_count", exact.max_count}};
    }
    if (!a.dump_instance.empty()) {
        const auto dir = a.direction == "min" ? mtm::Direction::minimize : mtm::Direction::maximize;
        Output o(a.dump_instance);
        o.stream() << mtm::instance_to_json(mtm::group_rate_instance(e, mtm::group_members(l.ds.groups(), a.group), kappa, dir, options.margin, mo)).dump(2) << "\n";
    }

    auto meta = base_metadata("fairness-range", g);
    add_data_metadata(meta, d, l);
    meta.set("targets", a.targets).set("group", a.group).set("kappa", kappa).set("kappa_input", a.kappa).set("direction", a.direction);
    meta.set("standardization", a.standardize).set("sum_lo", a.sum_lo);
    Json body{{"report", mtm::to_json(rep)}};
    if (!oracle.is_null()) body["oracle"] = oracle;
    Output o(a.out);
    mtm::write_json(o.stream(), meta, std::move(body));
    return rep.certified() ? kExitOk : kExitBudget;
}

struct StableArgs {
    std::string family = "index";
    std::string target;
    std::vector<std::string> targets;
    std::vector<std::string> kappas;
    double epsilon = 0.01;
    std::string epsilon_mode = "relative";
    std::string standardize = "zscore";
    double sum_lo = 0.1;
    std::string out;
};

auto cmd_stable_points(const Global& g, const DataArgs& d, const StableArgs& a) -> int
{
    const auto family = mtm::parse_family(a.family);
    std::vector<std::string> targets = family == mtm::Family::rashomon ? std::vector<std::string>{a.target} : a.targets;
    if (targets.empty() || targets[0].empty()) throw mtm::InvalidArgument(family == mtm::Family::rashomon ? "--target is required" : "--targets is required");
    const auto l = load(d, g, targets);
    const auto f = fit_all(l.ds, targets);
    std::vector<int> kappas;
    for (const auto& k : a.kappas) kappas.push_back(mtm::parse_kappa(k, l.ds.n()));
    const auto options = flip_options(g, false);

    auto meta = base_metadata("stable-points", g);
    add_data_metadata(meta, d, l);
    meta.set("family", a.family).set("targets", targets).set("kappa_input", a.kappas);
    std::vector<mtm::StableSweepPoint> sweep;
    if (family == mtm::Family::rashomon) {
        const auto emode = a.epsilon_mode == "absolute" ? mtm::EpsilonMode::absolute : mtm::EpsilonMode::relative;
        sweep = mtm::stable_fraction_rashomon(f.ortho, mtm::make_ball(f.models[0], a.epsilon, emode), kappas, options);
        meta.set("epsilon", a.epsilon).set("epsilon_mode", a.epsilon_mode);
    } else {
        const auto e = mtm::build_ensemble(f.models, f.ortho, mtm::parse_standardization(a.standardize));
        sweep = mtm::stable_fraction_index(e, kappas, options, {a.sum_lo});
        meta.set("standardization", a.standardize).set("sum_lo", a.sum_lo);
    }
    Output o(a.out);
    mtm::write_table(o.stream(), meta, mtm::stable_table(sweep, family));
    const bool undetermined = std::any_of(sweep.begin(), sweep.end(), [](const auto& p) { return p.undetermined > 0; });
    return undetermined ? kExitBudget : kExitOk;
}

auto cmd_synth(const Global& g, mtm::SynthConfig cfg, const std::string& out) -> int
{
    cfg.seed = g.seed;
    const auto ds = mtm::generate(cfg);
    Output o(out);
    mtm::write_csv(o.stream(), ds);
    return kExitOk;
}

struct WorkflowArgs {
    std::vector<std::string> targets;
    std::string group;
    std::string kappa = "3%";
    std::string standardize = "zscore";
    double sum_lo = 0.1;
    std::string out;
    std::string table_out;
};

auto cmd_fairness_workflow(const Global& g, DataArgs d, const WorkflowArgs& a) -> int
{
    d.rows = "all"; // the workflow uses the split tags itself
    const auto l = load(d, g, a.targets);
    mtm::WorkflowConfig cfg;
    cfg.targets = a.targets;
    cfg.group_label = a.group;
    cfg.kappa = a.kappa;
    cfg.standardization = mtm::parse_standardization(a.standardize);
    cfg.options = flip_options(g, true);
    cfg.multi.sum_lo = a.sum_lo;
    const auto rep = mtm::fairness_workflow(l.ds, cfg);

    auto meta = base_metadata("fairness-workflow", g);
    add_data_metadata(meta, d, l);
    meta.set("targets", a.targets).set("group", a.group).set("kappa_input", a.kappa).set("standardization", a.standardize).set("sum_lo", a.sum_lo);
    {
        Output o(a.out);
        mtm::write_json(o.stream(), meta, Json{{"workflow", mtm::to_json(rep)}});
    }
    if (!a.table_out.empty()) {
        Output o(a.table_out);
        mtm::write_table(o.stream(), meta, mtm::workflow_table(rep));
    }
    return rep.tune_range.certified() ? kExitOk : kExitBudget;
}

auto error_json(const std::string& kind, const std::string& message) -> std::string
{
    return Json{{"error", kind}, {"message", message}}.dump();
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Predictive multiplicity for top-k selection"};
    app.require_subcommand(1);
    app.fallthrough();
    Global g;
    app.add_option("--seed", g.seed, "seed for sampling, splits and synthetic data")->capture_default_str();
    app.add_option("--node-budget", g.node_budget, "branch-and-bound node limit per search")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--time-budget", g.time_budget, "seconds per search")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_flag("--certify", g.certify, "cross-check results against exact oracles (small inputs)")->group("");
    app.add_option("--drop-regex", g.drop_regex, "drop feature columns matching a regex")->delimiter(',');
    app.add_option("--keep-regex", g.keep_regex, "keep only feature columns matching a regex")->delimiter(',');
    app.add_option("--workers", g.workers, "parallel per-row searches")->check(CLI::PositiveNumber)->capture_default_str();

    std::function<int()> run;

    DataArgs fit_data;
    std::vector<std::string> fit_targets;
    std::string fit_out;
    auto* fit = app.add_subcommand("fit", "fit per-target OLS models");
    add_data_options(fit, fit_data);
    fit->add_option("--targets", fit_targets)->required()->delimiter(',');
    fit->add_option("--out", fit_out)->required();
    fit->callback([&] { run = [&] { return cmd_fit(g, fit_data, fit_targets, fit_out); }; });

    DataArgs s_data;
    SingleArgs s;
    auto* single = app.add_subcommand("ambiguity-single", "top-k ambiguity curve over Rashomon balls");
    add_data_options(single, s_data);
    single->add_option("--target", s.target)->required();
    single->add_option("--kappa", s.kappa, "integer or percentage such as 3%")->required();
    single->add_option("--epsilons", s.epsilons, "ascending epsilons")->required()->delimiter(',');
    single->add_option("--mode", s.mode)->check(CLI::IsMember({"all", "top"}))->capture_default_str();
    single->add_option("--sample", s.sample, "all rows, or the baseline top-k only")->check(CLI::IsMember({"all", "top"}))->capture_default_str();
    single->add_option("--sample-size", s.sample_size, "random sample size (0 = all)");
    single->add_option("--epsilon-mode", s.epsilon_mode)->check(CLI::IsMember({"relative", "absolute"}))->capture_default_str();
    single->add_option("--out", s.out)->required();
    single->add_option("--reports-out", s.reports_out, "per-row JSON-lines reports at the largest epsilon");
    single->callback([&] { run = [&] { return cmd_ambiguity_single(g, s_data, s); }; });

    DataArgs m_data;
    MultiArgs m;
    auto* multi = app.add_subcommand("ambiguity-multi", "per-row flip reports over combining weights");
    add_data_options(multi, m_data);
    multi->add_option("--targets", m.targets)->required()->delimiter(',');
    multi->add_option("--kappa", m.kappa)->required();
    multi->add_option("--standardize", m.standardize)->check(CLI::IsMember({"zscore", "percentile", "none"}))->capture_default_str();
    multi->add_option("--sample", m.sample)->check(CLI::IsMember({"all", "top"}))->capture_default_str();
    multi->add_option("--sample-size", m.sample_size, "random sample size (0 = all)");
    multi->add_option("--sum-lo", m.sum_lo, "lower bound on sum(alpha)")->capture_default_str();
    multi->add_option("--out", m.out)->required();
    multi->callback([&] { run = [&] { return cmd_ambiguity_multi(g, m_data, m); }; });

    DataArgs r_data;
    RangeArgs r;
    auto* range = app.add_subcommand("fairness-range", "min/max group count in the top-k over combining weights");
    add_data_options(range, r_data);
    range->add_option("--targets", r.targets)->required()->delimiter(',');
    range->add_option("--group", r.group, "group label")->required();
    range->add_option("--kappa", r.kappa)->required();
    range->add_option("--direction", r.direction)->check(CLI::IsMember({"min", "max", "both"}))->capture_default_str();
    range->add_option("--standardize", r.standardize)->check(CLI::IsMember({"zscore", "percentile", "none"}))->capture_default_str();
    range->add_option("--sum-lo", r.sum_lo)->capture_default_str();
    range->add_option("--out", r.out)->required();
    range->add_option("--dump-instance", r.dump_instance, "write the MIP instance as JSON");
    range->callback([&] { run = [&] { return cmd_fairness_range(g, r_data, r); }; });

    DataArgs st_data;
    StableArgs st;
    auto* stable = app.add_subcommand("stable-points", "stable selected fraction per kappa");
    add_data_options(stable, st_data);
    stable->add_option("--family", st.family)->check(CLI::IsMember({"rashomon", "index"}))->capture_default_str();
    stable->add_option("--target", st.target, "target (rashomon family)");
    stable->add_option("--targets", st.targets, "targets (index family)")->delimiter(',');
    stable->add_option("--kappa-sweep", st.kappas)->required()->delimiter(',');
    stable->add_option("--epsilon", st.epsilon, "Rashomon epsilon (rashomon family)")->capture_default_str();
    stable->add_option("--epsilon-mode", st.epsilon_mode)->check(CLI::IsMember({"relative", "absolute"}))->capture_default_str();
    stable->add_option("--standardize", st.standardize)->check(CLI::IsMember({"zscore", "percentile", "none"}))->capture_default_str();
    stable->add_option("--sum-lo", st.sum_lo)->capture_default_str();
    stable->add_option("--out", st.out)->required();
    stable->callback([&] { run = [&] { return cmd_stable_points(g, st_data, st); }; });

    mtm::SynthConfig sc;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "write the semi-synthetic dataset");
    synth->add_option("--n", sc.n)->capture_default_str();
    synth->add_option("--b", sc.b, "age slope of the second target")->capture_default_str();
    synth->add_option("--noise-sd", sc.noise_sd)->capture_default_str();
    synth->add_option("--curvature", sc.curvature, "bend of both targets in age (0 = linear)")->capture_default_str();
    synth->add_option("--p-in-band", sc.p_in_band)->capture_default_str();
    synth->add_option("--p-out-band", sc.p_out_band)->capture_default_str();
    synth->add_option("--out", synth_out)->required();
    synth->callback([&] { run = [&] { return cmd_synth(g, sc, synth_out); }; });

    DataArgs w_data;
    WorkflowArgs w;
    auto* workflow = app.add_subcommand("fairness-workflow", "train/tune/holdout fairness-maximizing index model");
    add_data_options(workflow, w_data);
    workflow->add_option("--targets", w.targets)->required()->delimiter(',');
    workflow->add_option("--group", w.group)->required();
    workflow->add_option("--kappa", w.kappa)->capture_default_str();
    workflow->add_option("--standardize", w.standardize)->check(CLI::IsMember({"zscore", "percentile", "none"}))->capture_default_str();
    workflow->add_option("--sum-lo", w.sum_lo)->capture_default_str();
    workflow->add_option("--out", w.out)->required();
    workflow->add_option("--table-out", w.table_out, "per-model selection summary as CSV");
    workflow->callback([&] { run = [&] { return cmd_fairness_workflow(g, w_data, w); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << error_json("usage", e.what()) << "\n";
        return kExitUsage;
    }

    try {
        return run();
    } catch (const mtm::InvalidArgument& e) {
        std::cerr << error_json(e.kind(), e.what()) << "\n";
        return kExitUsage;
    } catch (const mtm::Error& e) {
        std::cerr << error_json(e.kind(), e.what()) << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << error_json("error", e.what()) << "\n";
        return kExitData;
    }
}
