#include "rdlcqr/montecarlo.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <omp.h>
#include <sstream>

#include "rdlcqr/errors.hpp"
#include "rdlcqr/inference_fuzzy.hpp"
#include "rdlcqr/llr.hpp"

namespace rdlcqr {

std::string mc_estimator_name(McEstimator e) {
    switch (e) {
    case McEstimator::cqr: return "cqr";
    case McEstimator::cqr_bc: return "cqr-bc";
    case McEstimator::cqr_bc_fixed_n: return "cqr-bc-fixed-n";
    case McEstimator::llr: return "llr";
    case McEstimator::kink: return "kink";
    case McEstimator::fuzzy_null: return "fuzzy-null";
    }
    return "unknown";
}

std::vector<McEstimator> parse_estimators(const std::string& csv, bool fixed_n) {
    std::vector<McEstimator> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        if (item == "cqr") out.push_back(McEstimator::cqr);
        else if (item == "cqr-bc") out.push_back(McEstimator::cqr_bc);
        else if (item == "cqr-bc-fixed-n") out.push_back(McEstimator::cqr_bc_fixed_n);
        else if (item == "llr") out.push_back(McEstimator::llr);
        else if (item == "kink") out.push_back(McEstimator::kink);
        else if (item == "fuzzy-null") out.push_back(McEstimator::fuzzy_null);
        else throw Error(ErrorCode::InvalidInput, "unknown estimator: " + item);
    }
    if (fixed_n) {
        bool have = false;
        for (McEstimator e : out) have = have || e == McEstimator::cqr_bc_fixed_n;
        if (!have) out.push_back(McEstimator::cqr_bc_fixed_n);
    }
    if (out.empty()) throw Error(ErrorCode::InvalidInput, "no estimators requested");
    return out;
}

namespace {

double estimator_truth(const StudyConfig& cfg, McEstimator e) {
    switch (e) {
    case McEstimator::kink: return true_kink(cfg.dgp.model);
    case McEstimator::fuzzy_null: return fuzzy_true_effect(cfg.dgp);
    default: return true_effect(cfg.dgp.model);
    }
}

bool contains(const std::pair<double, double>& ci, double v) { return ci.first <= v && v <= ci.second; }

RepOutcome from_interval(double point, double se, const std::pair<double, double>& ci, double truth) {
    RepOutcome o;
    o.ok = std::isfinite(point) && std::isfinite(se);
    o.point = point;
    o.se = se;
    o.covered = contains(ci, truth);
    return o;
}

} // namespace

double study_truth(const StudyConfig& cfg) {
    switch (cfg.design) {
    case Estimand::kink: return true_kink(cfg.dgp.model);
    case Estimand::fuzzy: return fuzzy_true_effect(cfg.dgp);
    case Estimand::sharp: break;
    }
    return true_effect(cfg.dgp.model);
}

ReplicationRecord run_replication(const StudyConfig& cfg, std::uint64_t seed, std::uint64_t rep) {
    Rng rng = make_stream(seed, rep);
    DgpSpec spec = cfg.dgp;
    if (cfg.design == Estimand::fuzzy && !spec.fuzzy) spec.fuzzy = FuzzyOverlay{};
    const RdSample sample = draw_sample(spec, rng);

    ReplicationRecord rec;
    rec.outcomes.resize(cfg.estimators.size());
    std::optional<SharpAnalysis> sharp;
    std::string sharp_error;
    auto need_sharp = [&]() -> const SharpAnalysis& {
        if (!sharp && sharp_error.empty()) {
            try {
                sharp = analyze_sharp(sample, cfg.est);
            } catch (const std::exception& e) {
                sharp_error = e.what();
            }
        }
        if (!sharp) throw Error(ErrorCode::InvalidInput, sharp_error);
        return *sharp;
    };

    for (std::size_t i = 0; i < cfg.estimators.size(); ++i) {
        const McEstimator e = cfg.estimators[i];
        const double truth = estimator_truth(cfg, e);
        try {
            switch (e) {
            case McEstimator::cqr: {
                const InferenceResult r = need_sharp().result(SandwichMode::asymptotic);
                rec.outcomes[i] = from_interval(r.point, r.se_plain, r.ci_plain, truth);
                break;
            }
            case McEstimator::cqr_bc:
            case McEstimator::cqr_bc_fixed_n: {
                const SandwichMode mode =
                    e == McEstimator::cqr_bc ? SandwichMode::asymptotic : SandwichMode::fixed_n;
                const InferenceResult r = need_sharp().result(mode);
                rec.outcomes[i] = from_interval(r.point_bc, r.se_adjusted, r.ci_adjusted, truth);
                break;
            }
            case McEstimator::llr: {
                const SharpAnalysis& a = need_sharp();
                const double h = llr_bandwidth(a.pilot_above, a.pilot_below, cfg.est.kernel, sample.size());
                const InferenceResult r =
                    llr_inference(sample, h, h, cfg.est.kernel, a.pilot_above, a.pilot_below, cfg.est.level);
                rec.outcomes[i] = from_interval(r.point, r.se_plain, r.ci_plain, truth);
                break;
            }
            case McEstimator::kink: {
                const InferenceResult r = estimate_kink(sample, cfg.est.q, cfg.kink_bandwidth, cfg.est.kernel,
                                                        cfg.est, SandwichMode::fixed_n);
                rec.outcomes[i] = from_interval(r.point, r.se_plain, r.ci_plain, truth);
                break;
            }
            case McEstimator::fuzzy_null: {
                const FuzzyAnalysis fa = analyze_fuzzy(sample, cfg.est);
                const InferenceResult r = fa.result(SandwichMode::asymptotic, cfg.tau0.value_or(truth), false);
                RepOutcome o;
                o.ok = std::isfinite(r.t_adjusted);
                o.point = r.point;
                o.se = r.se_plain;
                // Rejection indicator of the null-restricted test.
                o.covered = r.p_value < 1.0 - cfg.est.level;
                rec.outcomes[i] = o;
                break;
            }
            }
        } catch (const std::exception& ex) {
            rec.outcomes[i] = RepOutcome{};
            if (rec.error.empty()) rec.error = mc_estimator_name(e) + ": " + ex.what();
        }
    }
    return rec;
}

McSummary summarize(const StudyConfig& cfg, const std::vector<ReplicationRecord>& records, std::uint64_t seed) {
    McSummary s;
    s.seed = seed;
    s.replications = static_cast<int>(records.size());
    s.truth = study_truth(cfg);
    for (std::size_t j = 0; j < cfg.estimators.size(); ++j) {
        McRow row;
        row.estimator = cfg.estimators[j];
        row.replications = s.replications;
        const double truth = estimator_truth(cfg, row.estimator);
        int ok = 0;
        int n_point = 0;
        double sum = 0.0, sum_se = 0.0, hits = 0.0, sq_err = 0.0;
        for (const ReplicationRecord& r : records) {
            const RepOutcome& o = r.outcomes[j];
            if (!o.ok) {
                ++row.failures;
                continue;
            }
            ++ok;
            hits += o.covered ? 1.0 : 0.0;
            if (std::isfinite(o.point) && std::isfinite(o.se)) {
                ++n_point;
                sum += o.point;
                sum_se += o.se;
                sq_err += (o.point - truth) * (o.point - truth);
            }
        }
        const double nan = std::numeric_limits<double>::quiet_NaN();
        row.coverage = ok > 0 ? hits / double(ok) : nan;
        row.mean_point = n_point > 0 ? sum / double(n_point) : nan;
        row.mean_se = n_point > 0 ? sum_se / double(n_point) : nan;
        row.rmse = n_point > 0 ? std::sqrt(sq_err / double(n_point)) : nan;
        row.mean_abs_bias = std::abs(row.mean_point - truth);
        if (n_point >= 2) {
            double ss = 0.0;
            for (const ReplicationRecord& r : records) {
                const RepOutcome& o = r.outcomes[j];
                if (o.ok && std::isfinite(o.point) && std::isfinite(o.se))
                    ss += (o.point - row.mean_point) * (o.point - row.mean_point);
            }
            row.mc_sd = std::sqrt(ss / double(n_point - 1));
        }
        row.failure_flag = double(row.failures) > 0.05 * double(row.replications);
        s.rows.push_back(row);
    }
    return s;
}

McSummary run_study_serial(const StudyConfig& cfg, int reps, std::uint64_t seed) {
    if (reps < 1) throw Error(ErrorCode::InvalidInput, "reps must be at least 1");
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<ReplicationRecord> records;
    records.reserve(static_cast<std::size_t>(reps));
    for (int r = 0; r < reps; ++r) records.push_back(run_replication(cfg, seed, static_cast<std::uint64_t>(r)));
    McSummary s = summarize(cfg, records, seed);
    s.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return s;
}

int threads_from_env() {
    const char* v = std::getenv("RDLCQR_THREADS");
    if (!v) return 0;
    const int t = std::atoi(v);
    return t > 0 ? t : 0;
}

McSummary run_study(const StudyConfig& cfg, int reps, std::uint64_t seed, int threads,
                    std::vector<ReplicationRecord>* records_out) {
    if (reps < 1) throw Error(ErrorCode::InvalidInput, "reps must be at least 1");
    if (threads <= 0) threads = threads_from_env();
    if (threads <= 0) threads = omp_get_max_threads();
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<ReplicationRecord> records(static_cast<std::size_t>(reps));
#pragma omp parallel for num_threads(threads) schedule(dynamic, 1)
    for (int r = 0; r < reps; ++r) records[r] = run_replication(cfg, seed, static_cast<std::uint64_t>(r));
    // Aggregation walks the records in replication order, so the summary does not depend on threads.
    McSummary s = summarize(cfg, records, seed);
    s.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (records_out) *records_out = std::move(records);
    return s;
}

namespace {

std::string num(double v) {
    if (!std::isfinite(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Messages go into a single CSV field.
std::string csv_text(const std::string& msg) {
    std::string out = "\"";
    for (char c : msg) out += c == '"' ? std::string("'") : std::string(1, c);
    return out + "\"";
}

} // namespace

std::string summary_csv(const McSummary& s) {
    std::ostringstream out;
    out << "estimator,replications,failures,truth,mean_point,mc_sd,mean_se,coverage,mean_abs_bias,rmse,"
           "failure_flag,seed\n";
    for (const McRow& r : s.rows) {
        out << mc_estimator_name(r.estimator) << ',' << r.replications << ',' << r.failures << ',' << num(s.truth)
            << ',' << num(r.mean_point) << ',' << (r.mc_sd ? num(*r.mc_sd) : std::string()) << ','
            << num(r.mean_se) << ',' << num(r.coverage) << ',' << num(r.mean_abs_bias) << ',' << num(r.rmse) << ','
            << (r.failure_flag ? 1 : 0) << ',' << s.seed << '\n';
    }
    return out.str();
}

std::string records_csv(const StudyConfig& cfg, const std::vector<ReplicationRecord>& records) {
    std::ostringstream out;
    out << "rep,estimator,ok,point,se,covered,error\n";
    for (std::size_t r = 0; r < records.size(); ++r) {
        for (std::size_t j = 0; j < cfg.estimators.size(); ++j) {
            const RepOutcome& o = records[r].outcomes[j];
            out << r << ',' << mc_estimator_name(cfg.estimators[j]) << ',' << (o.ok ? 1 : 0) << ','
                << (o.ok ? num(o.point) : std::string()) << ',' << (o.ok ? num(o.se) : std::string()) << ','
                << (o.covered ? 1 : 0) << ',' << (o.ok ? std::string() : csv_text(records[r].error)) << '\n';
        }
    }
    return out.str();
}

} // namespace rdlcqr
