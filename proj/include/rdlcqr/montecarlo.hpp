#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rdlcqr/dgp.hpp"
#include "rdlcqr/inference_sharp.hpp"

namespace rdlcqr {

// Replication estimators; rows of the summary appear in this order.
enum class McEstimator { cqr, cqr_bc, cqr_bc_fixed_n, llr, kink, fuzzy_null };
std::string mc_estimator_name(McEstimator e);
std::vector<McEstimator> parse_estimators(const std::string& csv, bool fixed_n);

struct StudyConfig {
    DgpSpec dgp;
    EstimatorConfig est;
    Estimand design = Estimand::sharp;
    std::vector<McEstimator> estimators{McEstimator::cqr, McEstimator::cqr_bc};
    double kink_bandwidth = 0.3;
    std::optional<double> tau0;  // fuzzy null value; defaults to the true effect
};

struct RepOutcome {
    bool ok = false;
    double point = 0.0;
    double se = 0.0;
    bool covered = false;
};

struct ReplicationRecord {
    std::vector<RepOutcome> outcomes;  // one per configured estimator
    std::string error;                 // first failure message, if any
};

struct McRow {
    McEstimator estimator = McEstimator::cqr;
    int replications = 0;
    int failures = 0;
    double mean_point = 0.0;
    std::optional<double> mc_sd;
    double mean_se = 0.0;
    double coverage = 0.0;      // rejection rate for fuzzy_null
    double mean_abs_bias = 0.0;
    double rmse = 0.0;
    bool failure_flag = false;  // failures above 5%
};

struct McSummary {
    std::uint64_t seed = 0;
    int replications = 0;
    double truth = 0.0;
    std::vector<McRow> rows;
    double runtime_seconds = 0.0;  // never written to result files
};

ReplicationRecord run_replication(const StudyConfig& cfg, std::uint64_t seed, std::uint64_t rep);

McSummary summarize(const StudyConfig& cfg, const std::vector<ReplicationRecord>& records, std::uint64_t seed);

// Serial reference driver.
McSummary run_study_serial(const StudyConfig& cfg, int reps, std::uint64_t seed);
// OpenMP driver; threads <= 0 uses the RDLCQR_THREADS environment variable or the runtime default.
McSummary run_study(const StudyConfig& cfg, int reps, std::uint64_t seed, int threads = 0,
                    std::vector<ReplicationRecord>* records_out = nullptr);

double study_truth(const StudyConfig& cfg);
int threads_from_env();

std::string summary_csv(const McSummary& s);
std::string records_csv(const StudyConfig& cfg, const std::vector<ReplicationRecord>& records);

} // namespace rdlcqr
