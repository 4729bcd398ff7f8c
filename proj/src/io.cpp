#include "rdlcqr/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rdlcqr {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\"");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\"");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    bool quoted = false;
    for (char ch : line) {
        if (ch == '"') quoted = !quoted;
        if (ch == ',' && !quoted) {
            out.push_back(trim(cell));
            cell.clear();
        } else {
            cell.push_back(ch);
        }
    }
    out.push_back(trim(cell));
    return out;
}

bool is_missing(const std::string& cell) {
    std::string lower = cell;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    return lower.empty() || lower == "na" || lower == "nan" || lower == "null";
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorCode::MissingColumn, "column not found: " + name);
    return static_cast<std::size_t>(it - header.begin());
}

double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorCode::ParseError,
                    "row " + std::to_string(row) + ", column " + column + ": cannot parse '" + cell + "'");
    }
}

} // namespace

RdSample parse_csv(const std::string& text, const ColumnMapping& mapping) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "missing header row");
    const std::vector<std::string> header = split_row(line);

    std::vector<std::pair<std::string, std::size_t>> cols;
    cols.emplace_back(mapping.x, column_index(header, mapping.x));
    cols.emplace_back(mapping.y, column_index(header, mapping.y));
    if (!mapping.t.empty()) cols.emplace_back(mapping.t, column_index(header, mapping.t));
    for (const std::string& z : mapping.z) cols.emplace_back(z, column_index(header, z));

    RdSample s;
    if (!mapping.t.empty()) s.t.emplace();
    std::vector<std::vector<double>> zrows;
    std::size_t row = 1;  // header is row 1
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const std::vector<std::string> cells = split_row(line);
        std::vector<double> vals;
        bool missing = false;
        for (const auto& [name, idx] : cols) {
            if (idx >= cells.size() || is_missing(cells[idx])) {
                missing = true;
                break;
            }
            const double v = parse_number(cells[idx], row, name);
            if (!std::isfinite(v)) {
                missing = true;
                break;
            }
            vals.push_back(v);
        }
        if (missing) continue;  // incomplete rows are filtered out
        s.x.push_back(vals[0] - mapping.cutoff);
        s.y.push_back(vals[1]);
        std::size_t k = 2;
        if (s.t) s.t->push_back(vals[k++]);
        if (!mapping.z.empty()) zrows.emplace_back(vals.begin() + static_cast<long>(k), vals.end());
    }
    if (s.x.empty()) throw Error(ErrorCode::EmptyAfterFiltering, "no complete rows after filtering");
    if (!mapping.z.empty()) {
        Eigen::MatrixXd z(static_cast<Eigen::Index>(zrows.size()), static_cast<Eigen::Index>(mapping.z.size()));
        for (std::size_t i = 0; i < zrows.size(); ++i)
            for (std::size_t j = 0; j < mapping.z.size(); ++j)
                z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = zrows[i][j];
        s.z = std::move(z);
    }
    s.cutoff = 0.0;
    s.validate();
    return s;
}

RdSample load_csv(const std::string& path, const ColumnMapping& mapping) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_csv(buf.str(), mapping);
}

nlohmann::json to_json(const InferenceResult& r) {
    using nlohmann::json;
    auto pair = [](const std::pair<double, double>& p) { return json::array({p.first, p.second}); };
    json j;
    j["schema"] = kJsonSchema;
    j["estimand"] = estimand_name(r.estimand);
    j["mode"] = mode_name(r.mode);
    j["point"] = r.point;
    j["bias_hat"] = r.bias_hat;
    j["point_bc"] = r.point_bc;
    j["se_plain"] = r.se_plain;
    j["se_adjusted"] = r.se_adjusted;
    j["tau0"] = r.tau0;
    j["t_plain"] = r.t_plain;
    j["t_adjusted"] = r.t_adjusted;
    j["p_value"] = r.p_value;
    j["ci_plain"] = pair(r.ci_plain);
    j["ci_adjusted"] = pair(r.ci_adjusted);
    j["level"] = r.level;
    j["bandwidths"] = r.bandwidths;
    j["n_eff"] = r.n_eff;
    j["flags"] = r.flags;
    j["diagnostics"] = r.diagnostics;
    return j;
}

nlohmann::json to_json(const BandwidthResult& r) {
    nlohmann::json j;
    j["schema"] = kJsonSchema;
    j["method"] = bandwidth_method_name(r.method);
    j["h_plus"] = r.h_plus;
    j["h_minus"] = r.h_minus;
    j["C2_plus"] = r.C2_plus;
    j["C2_minus"] = r.C2_minus;
    j["C3_plus"] = r.C3_plus;
    j["C3_minus"] = r.C3_minus;
    j["flags"] = r.flags;
    return j;
}

nlohmann::json error_json(const Error& e) {
    nlohmann::json j;
    j["schema"] = kJsonSchema;
    j["error"] = error_code_name(e.code());
    j["exit_code"] = error_exit_code(e.code());
    j["message"] = e.what();
    return j;
}

std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

std::string fmt6(double v) {
    if (!std::isfinite(v)) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

BinnedMeans bin_means(const std::vector<double>& x, const std::vector<double>& y, int bins) {
    if (bins < 1) throw Error(ErrorCode::InvalidInput, "bins must be positive");
    if (x.empty() || x.size() != y.size()) throw Error(ErrorCode::InvalidInput, "bin_means needs matching nonempty x, y");
    const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
    const double lo = *lo_it;
    const double width = (*hi_it - lo) / double(bins);
    std::vector<double> sums(static_cast<std::size_t>(bins), 0.0);
    std::vector<int> counts(static_cast<std::size_t>(bins), 0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        int b = width > 0 ? static_cast<int>((x[i] - lo) / width) : 0;
        b = std::clamp(b, 0, bins - 1);
        sums[b] += y[i];
        ++counts[b];
    }
    BinnedMeans out;
    for (int b = 0; b < bins; ++b) {
        if (counts[b] == 0) continue;
        out.centers.push_back(lo + (double(b) + 0.5) * width);
        out.means.push_back(sums[b] / counts[b]);
        out.counts.push_back(counts[b]);
    }
    return out;
}

} // namespace rdlcqr
