#pragma once

#include <Eigen/Core>
#include <Eigen/QR>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mtm/error.hpp"

namespace mtm {

enum class Split { train, tune, holdout };

inline auto to_string(Split s) -> std::string
{
    switch (s) {
    case Split::train: return "train";
    case Split::tune: return "tune";
    case Split::holdout: return "holdout";
    }
    return "train";
}

inline auto parse_split(std::string_view text) -> std::optional<Split>
{
    if (text == "train") return Split::train;
    if (text == "tune") return Split::tune;
    if (text == "holdout" || text == "test") return Split::holdout;
    return std::nullopt;
}

// FNV-1a over the seed bytes followed by the row id. Stable across platforms,
// unlike std::hash.
inline auto split_hash(std::string_view row_id, std::uint64_t seed) -> std::uint64_t
{
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](unsigned char byte) {
        h ^= byte;
        h *= 1099511628211ULL;
    };
    for (int b = 0; b < 8; ++b) {
        mix(static_cast<unsigned char>((seed >> (8 * b)) & 0xffU));
    }
    for (char c : row_id) {
        mix(static_cast<unsigned char>(c));
    }
    return h;
}

inline auto split_for_row(std::string_view row_id, std::uint64_t seed) -> Split
{
    switch (split_hash(row_id, seed) % 3) {
    case 0: return Split::train;
    case 1: return Split::tune;
    default: return Split::holdout;
    }
}

// Which coordinate system the feature matrix lives in. An orthonormal design
// has a constant (1/sqrt(n)) leading column instead of the raw intercept.
enum class Basis { original, orthonormal };

// Immutable table: n x (d+1) features with leading intercept, K targets,
// group labels, row ids and split tags.
class Dataset {
public:
    Dataset() = default;

    Dataset(Eigen::MatrixXd features, std::vector<std::string> feature_names, Eigen::MatrixXd targets,
        std::vector<std::string> target_names, std::vector<std::string> groups, std::vector<std::string> row_ids,
        std::vector<Split> splits, Basis basis = Basis::original)
        : features_(std::move(features))
        , feature_names_(std::move(feature_names))
        , targets_(std::move(targets))
        , target_names_(std::move(target_names))
        , groups_(std::move(groups))
        , row_ids_(std::move(row_ids))
        , splits_(std::move(splits))
        , basis_(basis)
    {
        validate();
    }

    auto n() const noexcept -> std::size_t { return static_cast<std::size_t>(features_.rows()); }
    // Number of non-intercept columns.
    auto d() const noexcept -> std::size_t { return static_cast<std::size_t>(features_.cols()) - 1; }
    auto k() const noexcept -> std::size_t { return static_cast<std::size_t>(targets_.cols()); }

    auto features() const noexcept -> const Eigen::MatrixXd& { return features_; }
    auto feature_names() const noexcept -> const std::vector<std::string>& { return feature_names_; }
    auto targets() const noexcept -> const Eigen::MatrixXd& { return targets_; }
    auto target_names() const noexcept -> const std::vector<std::string>& { return target_names_; }
    auto groups() const noexcept -> const std::vector<std::string>& { return groups_; }
    auto row_ids() const noexcept -> const std::vector<std::string>& { return row_ids_; }
    auto splits() const noexcept -> const std::vector<Split>& { return splits_; }
    auto basis() const noexcept -> Basis { return basis_; }

    auto target_index(const std::string& name) const -> std::size_t
    {
        auto it = std::find(target_names_.begin(), target_names_.end(), name);
        if (it == target_names_.end()) {
            throw InvalidArgument("unknown target '" + name + "'");
        }
        return static_cast<std::size_t>(it - target_names_.begin());
    }

    auto target(const std::string& name) const -> Eigen::VectorXd { return targets_.col(static_cast<Eigen::Index>(target_index(name))); }

    auto subset(const std::vector<std::size_t>& rows) const -> Dataset
    {
        Eigen::MatrixXd f(rows.size(), features_.cols());
        Eigen::MatrixXd t(rows.size(), targets_.cols());
        std::vector<std::string> g, ids;
        std::vector<Split> s;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const auto src = static_cast<Eigen::Index>(rows[r]);
            f.row(static_cast<Eigen::Index>(r)) = features_.row(src);
            t.row(static_cast<Eigen::Index>(r)) = targets_.row(src);
            g.push_back(groups_.at(rows[r]));
            ids.push_back(row_ids_.at(rows[r]));
            s.push_back(splits_.at(rows[r]));
        }
        return Dataset(std::move(f), feature_names_, std::move(t), target_names_, std::move(g), std::move(ids), std::move(s), basis_);
    }

    auto rows_in(Split split) const -> std::vector<std::size_t>
    {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < splits_.size(); ++i) {
            if (splits_[i] == split) out.push_back(i);
        }
        return out;
    }

    auto with_features(Eigen::MatrixXd features, std::vector<std::string> names, Basis basis) const -> Dataset
    {
        return Dataset(std::move(features), std::move(names), targets_, target_names_, groups_, row_ids_, splits_, basis);
    }

    auto with_targets(Eigen::MatrixXd targets, std::vector<std::string> names) const -> Dataset
    {
        return Dataset(features_, feature_names_, std::move(targets), std::move(names), groups_, row_ids_, splits_, basis_);
    }

private:
    void validate() const
    {
        const auto rows = features_.rows();
        if (rows < 2) throw DataError("dataset needs at least 2 rows");
        if (features_.cols() < 1) throw DataError("dataset has no feature columns");
        if (targets_.cols() < 1) throw DataError("dataset needs at least one target");
        if (targets_.rows() != rows || static_cast<Eigen::Index>(groups_.size()) != rows
            || static_cast<Eigen::Index>(row_ids_.size()) != rows || static_cast<Eigen::Index>(splits_.size()) != rows) {
            throw DataError("dataset columns have inconsistent lengths");
        }
        if (static_cast<Eigen::Index>(feature_names_.size()) != features_.cols()
            || static_cast<Eigen::Index>(target_names_.size()) != targets_.cols()) {
            throw DataError("column name count does not match data");
        }
        if (!features_.allFinite() || !targets_.allFinite()) throw DataError("dataset contains non-finite values");
        const double lead = features_(0, 0);
        const double expected = basis_ == Basis::original ? 1.0 : 1.0 / std::sqrt(static_cast<double>(rows));
        for (Eigen::Index i = 0; i < rows; ++i) {
            if (std::abs(features_(i, 0) - expected) > 1e-9 * std::max(1.0, std::abs(lead))) {
                throw DataError("feature column 0 must be the constant intercept column");
            }
        }
    }

    Eigen::MatrixXd features_;
    std::vector<std::string> feature_names_;
    Eigen::MatrixXd targets_;
    std::vector<std::string> target_names_;
    std::vector<std::string> groups_;
    std::vector<std::string> row_ids_;
    std::vector<Split> splits_;
    Basis basis_ = Basis::original;
};

inline constexpr const char* kInterceptName = "(intercept)";

// Column-role mapping for CSV ingestion. An empty feature list means "every
// column not claimed by another role".
struct CsvSchema {
    std::vector<std::string> features;
    std::vector<std::string> targets;
    std::string group;
    std::optional<std::string> split;
    std::optional<std::string> row_id;
};

enum class MissingPolicy { reject, drop_rows };

struct LoadOptions {
    MissingPolicy missing = MissingPolicy::reject;
    std::uint64_t split_seed = 0;
};

struct LoadReport {
    std::size_t rows_read = 0;
    std::size_t rows_dropped_missing = 0;
};

namespace detail {

inline auto split_csv_line(const std::string& line, std::size_t row) -> std::vector<std::string>
{
    // RFC 4180 fields: quotes group text and a doubled quote is a literal one.
    std::vector<std::string> cells(1);
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char c = line[k];
        if (quoted) {
            if (c != '"') {
                cells.back() += c;
            } else if (k + 1 < line.size() && line[k + 1] == '"') {
                cells.back() += '"';
                ++k;
            } else {
                quoted = false;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.emplace_back();
        } else {
            cells.back() += c;
        }
    }
    if (quoted) throw ParseError("unterminated quoted field", row);
    return cells;
}

inline auto trim(std::string_view s) -> std::string_view
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline auto parse_double(std::string_view text, double& out) -> bool
{
    text = trim(text);
    if (text.empty()) return false;
    if (text.front() == '+') text.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(out);
}

inline auto csv_escape(const std::string& s) -> std::string
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline auto format_double(double v) -> std::string
{
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

} // namespace detail

inline auto read_csv(std::istream& in, const CsvSchema& schema, const LoadOptions& options = {}, LoadReport* report = nullptr) -> Dataset
{
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("CSV has no header row");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3); // UTF-8 BOM
    auto header = detail::split_csv_line(line, 0);
    for (auto& h : header) h = std::string(detail::trim(h));

    std::map<std::string, std::size_t> col;
    for (std::size_t c = 0; c < header.size(); ++c) col.emplace(header[c], c);
    auto need = [&](const std::string& name) -> std::size_t {
        auto it = col.find(name);
        if (it == col.end()) throw SchemaError("missing column '" + name + "'");
        return it->second;
    };

    if (schema.targets.empty()) throw SchemaError("schema must name at least one target column");
    if (schema.group.empty()) throw SchemaError("schema must name exactly one group column");

    std::vector<std::size_t> target_cols;
    for (const auto& t : schema.targets) target_cols.push_back(need(t));
    const auto group_col = need(schema.group);
    std::optional<std::size_t> split_col, id_col;
    if (schema.split) split_col = need(*schema.split);
    if (schema.row_id) id_col = need(*schema.row_id);

    std::vector<std::string> feature_names = schema.features;
    if (feature_names.empty()) {
        std::set<std::size_t> claimed(target_cols.begin(), target_cols.end());
        claimed.insert(group_col);
        if (split_col) claimed.insert(*split_col);
        if (id_col) claimed.insert(*id_col);
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (!claimed.contains(c)) feature_names.push_back(header[c]);
        }
    }
    if (feature_names.empty()) throw SchemaError("schema must name at least one feature column");
    std::vector<std::size_t> feature_cols;
    for (const auto& f : feature_names) feature_cols.push_back(need(f));

    std::vector<std::vector<double>> feats, targs;
    std::vector<std::string> groups, ids;
    std::vector<Split> splits;
    LoadReport local;

    std::size_t row = 0;
    std::optional<std::size_t> first_missing;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        ++row;
        ++local.rows_read;
        auto cells = detail::split_csv_line(line, row);
        if (cells.size() != header.size()) {
            throw ParseError("expected " + std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()), row);
        }

        bool missing = false;
        std::vector<double> f(feature_cols.size()), t(target_cols.size());
        auto read_numeric = [&](std::size_t c, double& out, const char* role) {
            if (detail::trim(cells[c]).empty()) {
                missing = true;
                return;
            }
            if (!detail::parse_double(cells[c], out)) {
                throw ParseError(std::string("non-numeric ") + role + " cell '" + cells[c] + "' in column '" + header[c] + "'", row);
            }
        };
        for (std::size_t j = 0; j < feature_cols.size(); ++j) read_numeric(feature_cols[j], f[j], "feature");
        for (std::size_t j = 0; j < target_cols.size(); ++j) read_numeric(target_cols[j], t[j], "target");
        const auto group = std::string(detail::trim(cells[group_col]));
        if (group.empty()) missing = true;

        if (missing) {
            if (!first_missing) first_missing = row;
            ++local.rows_dropped_missing;
            continue;
        }

        std::string id = id_col ? std::string(detail::trim(cells[*id_col])) : std::to_string(row - 1);
        Split split = split_for_row(id, options.split_seed);
        if (split_col) {
            auto parsed = parse_split(detail::trim(cells[*split_col]));
            if (!parsed) throw ParseError("unknown split tag '" + cells[*split_col] + "'", row);
            split = *parsed;
        }
        feats.push_back(std::move(f));
        targs.push_back(std::move(t));
        groups.push_back(group);
        ids.push_back(std::move(id));
        splits.push_back(split);
    }

    if (first_missing && options.missing == MissingPolicy::reject) {
        throw ParseError("missing value (" + std::to_string(local.rows_dropped_missing) + " rows with missing values)", *first_missing);
    }
    if (feats.size() < 2) throw DataError("dataset needs at least two complete rows");

    const auto n = static_cast<Eigen::Index>(feats.size());
    Eigen::MatrixXd X(n, static_cast<Eigen::Index>(feature_cols.size() + 1));
    Eigen::MatrixXd Y(n, static_cast<Eigen::Index>(target_cols.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        for (std::size_t j = 0; j < feature_cols.size(); ++j) X(i, static_cast<Eigen::Index>(j + 1)) = feats[static_cast<std::size_t>(i)][j];
        for (std::size_t j = 0; j < target_cols.size(); ++j) Y(i, static_cast<Eigen::Index>(j)) = targs[static_cast<std::size_t>(i)][j];
    }
    feature_names.insert(feature_names.begin(), kInterceptName);
    if (report) *report = local;
    return Dataset(std::move(X), std::move(feature_names), std::move(Y), schema.targets, std::move(groups), std::move(ids), std::move(splits));
}

inline auto load_csv(const std::string& path, const CsvSchema& schema, const LoadOptions& options = {}, LoadReport* report = nullptr) -> Dataset
{
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open '" + path + "'");
    return read_csv(in, schema, options, report);
}

// Writes row_id, features (without intercept), targets, group, split. The
// matching schema is returned by `written_schema`.
inline void write_csv(std::ostream& out, const Dataset& ds, const std::string& group_name = "group")
{
    if (ds.basis() != Basis::original) throw InvalidArgument("only original-basis datasets can be written as CSV");
    out << "row_id";
    for (std::size_t j = 1; j < ds.feature_names().size(); ++j) out << ',' << detail::csv_escape(ds.feature_names()[j]);
    for (const auto& t : ds.target_names()) out << ',' << detail::csv_escape(t);
    out << ',' << detail::csv_escape(group_name) << ",split\n";
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out << detail::csv_escape(ds.row_ids()[i]);
        for (Eigen::Index j = 1; j < ds.features().cols(); ++j) out << ',' << detail::format_double(ds.features()(r, j));
        for (Eigen::Index j = 0; j < ds.targets().cols(); ++j) out << ',' << detail::format_double(ds.targets()(r, j));
        out << ',' << detail::csv_escape(ds.groups()[i]) << ',' << to_string(ds.splits()[i]) << '\n';
    }
}

inline auto written_schema(const Dataset& ds, const std::string& group_name = "group") -> CsvSchema
{
    CsvSchema s;
    s.features.assign(ds.feature_names().begin() + 1, ds.feature_names().end());
    s.targets = ds.target_names();
    s.group = group_name;
    s.split = "split";
    s.row_id = "row_id";
    return s;
}

namespace detail {

inline auto select_features(const Dataset& ds, const std::vector<std::string>& patterns, bool keep_matches) -> Dataset
{
    std::vector<std::regex> regs;
    for (const auto& p : patterns) {
        try {
            regs.emplace_back(p, std::regex::ECMAScript);
        } catch (const std::regex_error& e) {
            throw InvalidArgument("invalid regex '" + p + "': " + e.what());
        }
    }
    std::vector<Eigen::Index> kept{0};
    std::vector<std::string> names{ds.feature_names()[0]};
    for (std::size_t j = 1; j < ds.feature_names().size(); ++j) {
        const auto& name = ds.feature_names()[j];
        const bool hit = std::any_of(regs.begin(), regs.end(), [&](const std::regex& r) { return std::regex_search(name, r); });
        if (hit == keep_matches) {
            kept.push_back(static_cast<Eigen::Index>(j));
            names.push_back(name);
        }
    }
    if (kept.size() == 1) throw DataError("column selection removed every feature column (empty design)");
    Eigen::MatrixXd X(ds.features().rows(), static_cast<Eigen::Index>(kept.size()));
    for (std::size_t c = 0; c < kept.size(); ++c) X.col(static_cast<Eigen::Index>(c)) = ds.features().col(kept[c]);
    return ds.with_features(std::move(X), std::move(names), ds.basis());
}

} // namespace detail

// Removes feature columns whose name matches any pattern (regex search, not
// full match). The intercept is never removed.
inline auto drop_columns_matching(const Dataset& ds, const std::vector<std::string>& patterns) -> Dataset
{
    return detail::select_features(ds, patterns, false);
}

// Complement of drop_columns_matching: keeps only matching feature columns.
inline auto keep_columns_matching(const Dataset& ds, const std::vector<std::string>& patterns) -> Dataset
{
    return detail::select_features(ds, patterns, true);
}

// Maps an original design onto orthonormal coordinates: Z = X * transform.
struct OrthoBasis {
    Eigen::MatrixXd transform;               // (d+1) x rank, zero rows for dropped columns
    std::size_t rank = 0;
    std::vector<std::size_t> dropped_columns;
    std::vector<std::size_t> pivot_order;    // retained columns in pivot order

    auto apply(const Eigen::MatrixXd& X) const -> Eigen::MatrixXd
    {
        if (X.cols() != transform.rows()) throw InvalidArgument("design width does not match orthonormal basis");
        return X * transform;
    }
};

inline constexpr double kPivotDropTolerance = 1e-10;

// Column-pivoted Gram-Schmidt for rank detection (column 0 pinned first),
// then a Householder QR of the retained columns for the transform itself.
inline auto compute_ortho_basis(const Eigen::MatrixXd& X, Eigen::MatrixXd* orthonormal = nullptr) -> OrthoBasis
{
    const auto n = X.rows();
    const auto p = X.cols();
    if (p == 0 || n == 0) throw DataError("empty design matrix");

    Eigen::MatrixXd resid = X;
    std::vector<bool> used(static_cast<std::size_t>(p), false);
    std::vector<std::size_t> order;
    double max_pivot = 0.0;

    auto take = [&](Eigen::Index c) {
        const double nrm = resid.col(c).norm();
        const Eigen::VectorXd q = resid.col(c) / nrm;
        used[static_cast<std::size_t>(c)] = true;
        order.push_back(static_cast<std::size_t>(c));
        for (Eigen::Index j = 0; j < p; ++j) {
            if (used[static_cast<std::size_t>(j)]) continue;
            for (int pass = 0; pass < 2; ++pass) resid.col(j) -= q * q.dot(resid.col(j));
        }
    };

    const double lead = resid.col(0).norm();
    if (lead == 0.0) throw DataError("design has rank 0");
    max_pivot = lead;
    take(0);
    while (order.size() < static_cast<std::size_t>(std::min(n, p))) {
        Eigen::Index best = -1;
        double best_norm = -1.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (used[static_cast<std::size_t>(j)]) continue;
            const double nrm = resid.col(j).norm();
            if (nrm > best_norm) {
                best_norm = nrm;
                best = j;
            }
        }
        if (best < 0) break;
        max_pivot = std::max(max_pivot, best_norm);
        // Pivot magnitude relative to the original column scale guards against
        // large-scale columns masking exact collinearity in small ones.
        const double scale = std::max(X.col(best).norm(), std::numeric_limits<double>::min());
        if (best_norm < kPivotDropTolerance * max_pivot || best_norm < kPivotDropTolerance * scale) break;
        take(best);
    }

    OrthoBasis basis;
    basis.rank = order.size();
    basis.pivot_order = order;
    for (Eigen::Index j = 0; j < p; ++j) {
        if (!used[static_cast<std::size_t>(j)]) basis.dropped_columns.push_back(static_cast<std::size_t>(j));
    }

    const auto r = static_cast<Eigen::Index>(basis.rank);
    Eigen::MatrixXd sel(n, r);
    for (Eigen::Index c = 0; c < r; ++c) sel.col(c) = X.col(static_cast<Eigen::Index>(order[static_cast<std::size_t>(c)]));
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(sel);
    Eigen::MatrixXd R = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, r);
    for (Eigen::Index c = 0; c < r; ++c) {
        if (R(c, c) < 0) {
            R.row(c) *= -1.0;
            Q.col(c) *= -1.0;
        }
    }
    const Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(r, r));
    basis.transform = Eigen::MatrixXd::Zero(p, r);
    for (Eigen::Index c = 0; c < r; ++c) basis.transform.row(static_cast<Eigen::Index>(order[static_cast<std::size_t>(c)])) = Rinv.row(c);
    if (orthonormal) *orthonormal = std::move(Q);
    return basis;
}

// Returns the dataset expressed in orthonormal coordinates (Z^T Z = I) and
// the basis that produced it. Rank-deficient columns are dropped, never fatal.
inline auto orthonormalize(const Dataset& ds) -> std::pair<Dataset, OrthoBasis>
{
    if (ds.basis() != Basis::original) throw InvalidArgument("dataset is already orthonormal");
    Eigen::MatrixXd Z;
    auto basis = compute_ortho_basis(ds.features(), &Z);
    // Pin the constant column exactly so the dataset invariant holds bit-for-bit.
    Z.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(ds.n())));
    std::vector<std::string> names;
    for (std::size_t c = 0; c < basis.rank; ++c) names.push_back("q" + std::to_string(c));
    return {ds.with_features(std::move(Z), std::move(names), Basis::orthonormal), std::move(basis)};
}

} // namespace mtm
