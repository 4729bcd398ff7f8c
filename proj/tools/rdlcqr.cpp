#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rdlcqr/are.hpp"
#include "rdlcqr/inference_fuzzy.hpp"
#include "rdlcqr/io.hpp"
#include "rdlcqr/llr.hpp"
#include "rdlcqr/montecarlo.hpp"

using namespace rdlcqr;

namespace {

struct CommonOpts {
    std::string input;
    std::string x = "x";
    std::string y = "y";
    std::string t;
    std::vector<std::string> z;
    double cutoff = 0.0;
    int q = 7;
    std::string kernel = "triangular";
    std::string bandwidth = "auto";
    bool two_bandwidth = false;
    std::string mode = "asymptotic";
    double level = 0.95;
    std::string out;
};

void add_common(CLI::App* app, CommonOpts& o, bool needs_input) {
    auto* in = app->add_option("--input", o.input, "CSV file with a header row");
    if (needs_input) in->required();
    app->add_option("--x", o.x, "running variable column");
    app->add_option("--y", o.y, "outcome column");
    app->add_option("--t", o.t, "treatment column (fuzzy design)");
    app->add_option("--z", o.z, "covariate column (repeatable)");
    app->add_option("--cutoff", o.cutoff, "cutoff of the running variable");
    app->add_option("--q", o.q, "number of quantile positions")->check(CLI::Range(1, 199));
    app->add_option("--kernel", o.kernel, "triangular, epanechnikov, uniform or gaussian");
    app->add_option("--bandwidth", o.bandwidth, "auto, rot or a positive number");
    app->add_flag("--equal-bandwidth", "one bandwidth on both sides (default)");
    app->add_flag("--two-bandwidth", o.two_bandwidth, "separate bandwidths per side");
    app->add_option("--mode", o.mode, "asymptotic or fixed_n")->check(CLI::IsMember({"asymptotic", "fixed_n"}));
    app->add_option("--level", o.level, "confidence level")->check(CLI::Range(0.5, 0.9999));
    app->add_option("--out", o.out, "output path (default stdout)");
}

EstimatorConfig make_config(const CommonOpts& o) {
    EstimatorConfig cfg;
    cfg.q = o.q;
    cfg.kernel = parse_kernel(o.kernel);
    cfg.level = o.level;
    cfg.bandwidth.equal = !o.two_bandwidth;
    if (o.bandwidth == "auto") {
        cfg.bandwidth.kind = BandwidthRequest::Kind::automatic;
    } else if (o.bandwidth == "rot") {
        cfg.bandwidth.kind = BandwidthRequest::Kind::rot;
    } else {
        cfg.bandwidth.kind = BandwidthRequest::Kind::fixed;
        try {
            cfg.bandwidth.value = std::stod(o.bandwidth);
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidInput, "bandwidth must be auto, rot or a number");
        }
    }
    return cfg;
}

SandwichMode parse_mode(const std::string& m) { return m == "fixed_n" ? SandwichMode::fixed_n : SandwichMode::asymptotic; }

RdSample load(const CommonOpts& o, bool need_t) {
    if (need_t && o.t.empty()) throw Error(ErrorCode::MissingColumn, "fuzzy design needs --t");
    ColumnMapping map;
    map.x = o.x;
    map.y = o.y;
    map.t = o.t;
    map.z = o.z;
    map.cutoff = o.cutoff;
    return load_csv(o.input, map);
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + path);
    f << text;
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

// Covariate-adjusted point estimate, reported next to the inference for the
// unadjusted estimate whose bias and adjusted s.e. it borrows.
void add_covariate_estimate(InferenceResult& r, const RdSample& sample, const EstimatorConfig& cfg) {
    const CovariateFit cf = fit_boundary_with_covariates(sample, cfg.q, r.bandwidths[0], cfg.kernel, cfg.solver);
    const double tilde = cf.treatment_coef;
    const double z = normal_quantile(0.5 + 0.5 * cfg.level);
    r.diagnostics["tau_covariate"] = tilde;
    r.diagnostics["tau_covariate_bc"] = tilde - r.bias_hat;
    r.diagnostics["ci_covariate_lo"] = tilde - r.bias_hat - z * r.se_adjusted;
    r.diagnostics["ci_covariate_hi"] = tilde - r.bias_hat + z * r.se_adjusted;
    r.flags.push_back("covariate_inference_ad_hoc");
}

int run_estimate(const CommonOpts& o, const std::string& design, const std::string& estimator, double tau0,
                 bool invert_ci, double kink_h) {
    const EstimatorConfig cfg = make_config(o);
    const SandwichMode mode = parse_mode(o.mode);
    const RdSample sample = load(o, design == "fuzzy");
    InferenceResult r;
    if (design == "fuzzy") {
        r = analyze_fuzzy(sample, cfg).result(mode, tau0, invert_ci);
    } else if (design == "kink") {
        const double h = cfg.bandwidth.kind == BandwidthRequest::Kind::fixed ? cfg.bandwidth.value : kink_h;
        r = estimate_kink(sample, cfg.q, h, cfg.kernel, cfg, mode);
    } else if (estimator == "llr") {
        const SharpAnalysis a = analyze_sharp(sample, cfg);
        double hp = a.bw.h_plus, hm = a.bw.h_minus;
        if (cfg.bandwidth.kind == BandwidthRequest::Kind::automatic)
            hp = hm = llr_bandwidth(a.pilot_above, a.pilot_below, cfg.kernel, sample.size());
        r = llr_inference(sample, hp, hm, cfg.kernel, a.pilot_above, a.pilot_below, cfg.level);
    } else {
        r = analyze_sharp(sample, cfg).result(mode, tau0);
        if (sample.z) add_covariate_estimate(r, sample, cfg);
    }
    emit(o.out, dump_json(to_json(r)));
    return 0;
}

int run_bandwidth(const CommonOpts& o) {
    EstimatorConfig cfg = make_config(o);
    if (cfg.bandwidth.kind == BandwidthRequest::Kind::fixed)
        throw Error(ErrorCode::InvalidInput, "bandwidth command selects a bandwidth; use auto or rot");
    const RdSample sample = load(o, false);
    const SideData up = split_side(sample, Side::above);
    const SideData down = split_side(sample, Side::below);
    const SidePilot pa = compute_pilot(up.x, up.y, Side::above, cfg.q, cfg.kernel, cfg.grid);
    const SidePilot pb = compute_pilot(down.x, down.y, Side::below, cfg.q, cfg.kernel, cfg.grid);
    BandwidthResult bw;
    choose_bandwidths(cfg, pa, pb, bw);
    emit(o.out, dump_json(to_json(bw)));
    return 0;
}

int run_are(const std::string& laws, const std::string& qs, const std::string& kernel, const std::string& format,
            const std::string& out) {
    std::vector<int> qv;
    for (const std::string& s : split(qs)) qv.push_back(std::stoi(s));
    const AreTable t = are_table(split(laws), qv, parse_kernel(kernel));
    if (format == "json") {
        nlohmann::json j;
        j["schema"] = kJsonSchema;
        j["laws"] = t.laws;
        j["q"] = t.qs;
        j["are"] = t.values;
        emit(out, dump_json(j));
    } else {
        emit(out, format_are_table(t, format));
    }
    return 0;
}

struct SimOpts {
    std::string model = "lee";
    int dgp = 1;
    bool hetero = false;
    bool raw_scale = false;
    bool hetero_literal = false;
    std::size_t n = 500;
    int reps = 1000;
    std::uint64_t seed = 42;
    std::string estimators = "cqr,cqr-bc,llr";
    bool fixed_n = false;
    std::string design = "sharp";
    double kink_h = 0.3;
    std::optional<double> tau0;
    int threads = 0;
    std::string records;
};

int run_simulate(const CommonOpts& o, const SimOpts& s) {
    StudyConfig cfg;
    cfg.est = make_config(o);
    cfg.dgp.model = s.model == "lm" ? MeanModel::lm : MeanModel::lee;
    cfg.dgp.law_index = s.dgp;
    cfg.dgp.heteroskedastic = s.hetero;
    cfg.dgp.raw_scale = s.raw_scale;
    cfg.dgp.hetero_literal = s.hetero_literal;
    cfg.dgp.n = s.n;
    cfg.design = s.design == "fuzzy" ? Estimand::fuzzy : s.design == "kink" ? Estimand::kink : Estimand::sharp;
    cfg.estimators = parse_estimators(s.estimators, s.fixed_n);
    cfg.kink_bandwidth = s.kink_h;
    cfg.tau0 = s.tau0;
    std::vector<ReplicationRecord> records;
    const McSummary summary = run_study(cfg, s.reps, s.seed, s.threads, &records);
    emit(o.out, summary_csv(summary));
    if (!s.records.empty()) emit(s.records, records_csv(cfg, records));
    std::cerr << "simulate: " << s.reps << " replications in " << fmt6(summary.runtime_seconds) << " s\n";
    return 0;
}

struct PlotOpts {
    std::string prefix = "plotdata";
    int bins = 50;
    double from = 0.05;
    double to = 1.0;
    double step = 0.025;
    int curve_points = 50;
};

std::string num17(double v) {
    if (!std::isfinite(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

int run_plotdata(const CommonOpts& o, const PlotOpts& p) {
    EstimatorConfig cfg = make_config(o);
    const RdSample sample = load(o, false);
    const SideData up = split_side(sample, Side::above);
    const SideData down = split_side(sample, Side::below);

    std::ostringstream bins;
    bins << "side,center,mean,count\n";
    for (const SideData* s : {&down, &up}) {
        const BinnedMeans b = bin_means(s->x, s->y, p.bins);
        for (std::size_t i = 0; i < b.centers.size(); ++i)
            bins << (s->side == Side::above ? "above" : "below") << ',' << num17(b.centers[i] + o.cutoff) << ','
                 << num17(b.means[i]) << ',' << b.counts[i] << '\n';
    }
    emit(p.prefix + "_bins.csv", bins.str());

    // Fitted curves: local linear LCQR on each side at the selected bandwidth.
    const SharpAnalysis a = analyze_sharp(sample, cfg);
    std::ostringstream curve;
    curve << "side,x,fit\n";
    for (const SideData* s : {&down, &up}) {
        const double h = s->side == Side::above ? a.bw.h_plus : a.bw.h_minus;
        const auto [lo, hi] = std::minmax_element(s->x.begin(), s->x.end());
        for (int i = 0; i < p.curve_points; ++i) {
            const double pt = *lo + (*hi - *lo) * double(i) / double(p.curve_points - 1);
            std::string val;
            try {
                val = num17(fit_boundary(s->x, s->y, pt, cfg.q, 1, h, cfg.kernel, cfg.solver).cond_mean);
            } catch (const Error&) {
            }
            curve << (s->side == Side::above ? "above" : "below") << ',' << num17(pt + o.cutoff) << ',' << val
                  << '\n';
        }
    }
    emit(p.prefix + "_fit.csv", curve.str());

    std::ostringstream sweep;
    sweep << "h,estimator,point,se,lower,upper,se_ratio,status\n";
    const int steps = static_cast<int>(std::floor((p.to - p.from) / p.step + 1e-9)) + 1;
    for (int i = 0; i < steps; ++i) {
        const double h = p.from + p.step * double(i);
        EstimatorConfig c = cfg;
        c.bandwidth.kind = BandwidthRequest::Kind::fixed;
        c.bandwidth.value = h;
        std::string row_cqr, row_llr;
        try {
            const SharpAnalysis sa = analyze_sharp(sample, c);
            const InferenceResult rc = sa.result(SandwichMode::asymptotic);
            const InferenceResult rl = llr_inference(sample, h, h, c.kernel, sa.pilot_above, sa.pilot_below, c.level);
            const std::string ratio = num17(rc.se_plain / rl.se_plain);
            row_cqr = "lcqr," + num17(rc.point) + ',' + num17(rc.se_plain) + ',' + num17(rc.point - 2 * rc.se_plain) +
                      ',' + num17(rc.point + 2 * rc.se_plain) + ',' + ratio + ",ok";
            row_llr = "llr," + num17(rl.point) + ',' + num17(rl.se_plain) + ',' + num17(rl.point - 2 * rl.se_plain) +
                      ',' + num17(rl.point + 2 * rl.se_plain) + ',' + ratio + ",ok";
        } catch (const Error& e) {
            const std::string status = error_code_name(e.code());
            row_cqr = "lcqr,,,,,," + status;
            row_llr = "llr,,,,,," + status;
        }
        sweep << num17(h) << ',' << row_cqr << '\n' << num17(h) << ',' << row_llr << '\n';
    }
    emit(p.prefix + "_sweep.csv", sweep.str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Local composite quantile regression for regression discontinuity designs"};
    app.require_subcommand(1);

    CommonOpts est_o, bw_o, sim_o, plot_o;
    std::string design = "sharp", estimator = "lcqr";
    double tau0 = 0.0, kink_h = 0.3;
    bool invert_ci = false;
    auto* est = app.add_subcommand("estimate", "point estimate and inference");
    add_common(est, est_o, true);
    est->add_option("--design", design)->check(CLI::IsMember({"sharp", "fuzzy", "kink"}));
    est->add_option("--estimator", estimator)->check(CLI::IsMember({"lcqr", "llr"}));
    est->add_option("--tau0", tau0, "hypothesized effect");
    est->add_flag("--invert-ci", invert_ci, "fuzzy: confidence set by test inversion");
    est->add_option("--kink-bandwidth", kink_h, "kink bandwidth when --bandwidth is not numeric");

    auto* bw = app.add_subcommand("bandwidth", "bandwidth selection only");
    add_common(bw, bw_o, true);

    std::string laws = "normal,laplace,t3,mix3,mix10", qs = "1,5,9,19,99", are_kernel = "triangular",
                are_format = "csv", are_out;
    auto* are = app.add_subcommand("are", "asymptotic relative efficiency table");
    are->add_option("--laws", laws);
    are->add_option("--q", qs);
    are->add_option("--kernel", are_kernel);
    are->add_option("--format", are_format)->check(CLI::IsMember({"csv", "md", "json"}));
    are->add_option("--out", are_out);

    SimOpts so;
    double sim_tau0 = std::numeric_limits<double>::quiet_NaN();
    auto* sim = app.add_subcommand("simulate", "Monte Carlo study");
    add_common(sim, sim_o, false);
    sim->add_option("--model", so.model)->check(CLI::IsMember({"lee", "lm"}));
    sim->add_option("--dgp", so.dgp)->check(CLI::Range(1, 5));
    sim->add_flag("--hetero", so.hetero);
    sim->add_flag("--raw-scale", so.raw_scale, "keep the error law's own variance");
    sim->add_flag("--hetero-literal", so.hetero_literal, "heteroskedastic scale 2 + cos(2 pi x)/10");
    sim->add_option("--n", so.n);
    sim->add_option("--reps", so.reps)->check(CLI::PositiveNumber);
    sim->add_option("--seed", so.seed);
    sim->add_option("--estimators", so.estimators, "cqr,cqr-bc,cqr-bc-fixed-n,llr,kink,fuzzy-null");
    sim->add_flag("--fixed-n", so.fixed_n, "add the fixed-n bias-corrected estimator");
    sim->add_option("--design", so.design)->check(CLI::IsMember({"sharp", "fuzzy", "kink"}));
    sim->add_option("--kink-bandwidth", so.kink_h);
    sim->add_option("--tau0", sim_tau0, "fuzzy null value (default: the true effect)");
    sim->add_option("--threads", so.threads, "worker threads (default RDLCQR_THREADS or all cores)");
    sim->add_option("--records", so.records, "per-replication CSV");

    PlotOpts po;
    auto* plot = app.add_subcommand("plotdata", "binned means, fitted curves and a bandwidth sweep");
    add_common(plot, plot_o, true);
    plot->add_option("--prefix", po.prefix, "output file prefix");
    plot->add_option("--bins", po.bins);
    plot->add_option("--sweep-from", po.from);
    plot->add_option("--sweep-to", po.to);
    plot->add_option("--sweep-step", po.step);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*est) return run_estimate(est_o, design, estimator, tau0, invert_ci, kink_h);
        if (*bw) return run_bandwidth(bw_o);
        if (*are) return run_are(laws, qs, are_kernel, are_format, are_out);
        if (*sim) {
            if (!std::isnan(sim_tau0)) so.tau0 = sim_tau0;
            return run_simulate(sim_o, so);
        }
        if (*plot) return run_plotdata(plot_o, po);
    } catch (const Error& e) {
        std::cout << dump_json(error_json(e));
        return error_exit_code(e.code());
    } catch (const std::exception& e) {
        const Error wrapped(ErrorCode::InvalidInput, e.what());
        std::cout << dump_json(error_json(wrapped));
        return error_exit_code(wrapped.code());
    }
    return 1;
}
