#pragma once

#include "json.hpp"
#include <string>
#include <vector>

#include "rdlcqr/bandwidth.hpp"
#include "rdlcqr/errors.hpp"
#include "rdlcqr/inference_sharp.hpp"

namespace rdlcqr {

struct ColumnMapping {
    std::string x = "x";
    std::string y = "y";
    std::string t;               // empty: no treatment column
    std::vector<std::string> z;
    double cutoff = 0.0;
};

// Reads a headed CSV; the running variable is returned centered at the cutoff
// (sample.cutoff is then 0).
RdSample load_csv(const std::string& path, const ColumnMapping& mapping);
RdSample parse_csv(const std::string& text, const ColumnMapping& mapping);

constexpr int kJsonSchema = 1;

nlohmann::json to_json(const InferenceResult& r);
nlohmann::json to_json(const BandwidthResult& r);
nlohmann::json error_json(const Error& e);
std::string dump_json(const nlohmann::json& j);

// Six significant digits for human-facing tables.
std::string fmt6(double v);

struct BinnedMeans {
    std::vector<double> centers;
    std::vector<double> means;
    std::vector<int> counts;
};
BinnedMeans bin_means(const std::vector<double>& x, const std::vector<double>& y, int bins);

} // namespace rdlcqr
