#include "rdlcqr/inference_sharp.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "rdlcqr/errors.hpp"

namespace rdlcqr {

std::string estimand_name(Estimand e) {
    switch (e) {
    case Estimand::sharp: return "sharp";
    case Estimand::fuzzy: return "fuzzy";
    case Estimand::kink: return "kink";
    }
    return "unknown";
}

std::string mode_name(SandwichMode m) { return m == SandwichMode::asymptotic ? "asymptotic" : "fixed_n"; }

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal_distribution<>(), p); }

namespace {

double normal_two_sided_p(double t) {
    if (!std::isfinite(t)) return 0.0;
    return 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal_distribution<>(), std::abs(t)));
}

// Asymptotic matrices on the fixed-n scale: S -> (f/sigma) S, Sigma -> f Sigma.
SandwichSet scaled_asymptotic(const KernelMoments& mom, const QuantileGrid& grid, int p, double fx, double sigma) {
    SandwichSet s = build_asymptotic(mom, grid, p);
    s.S *= fx / sigma;
    s.S_inv *= sigma / fx;
    s.Sigma *= fx;
    return s;
}

// D_n = (1/q) e^T [ (S^-1)_11 f A2 + (S^-1)_12 sum(f) A3 ] with A_j = (1/(2nh)) sum K u^j / sigma.
double fixed_n_bias_factor(const SandwichSet& s1, const QuantileGrid& grid, const std::vector<double>& x, double h,
                           const KernelSpec& kernel, double sigma) {
    const int q = s1.q;
    double a2 = 0.0;
    double a3 = 0.0;
    for (double xi : x) {
        const double u = xi / h;
        const double k = eval_kernel(kernel, u);
        a2 += k * u * u / sigma;
        a3 += k * u * u * u / sigma;
    }
    const double scale = 1.0 / (2.0 * double(x.size()) * h);
    a2 *= scale;
    a3 *= scale;
    const Eigen::VectorXd f = grid.f_at_c;
    const Eigen::VectorXd v = s1.S_inv.topLeftCorner(q, q) * f * a2 + s1.S_inv.block(0, q, q, 1) * (f.sum() * a3);
    return v.sum() / double(q);
}

} // namespace

double SideModel::var_m() const { return intercept_average(s1.middle(), q) / (n * h); }

double SideModel::var_bias() const { return 4.0 * D * D * curvature_entry(s2.middle(), q) / (n * h); }

double SideModel::cov_m_bias() const {
    return 2.0 * D * intercept_curvature_cross(s2.middle(), q) / (double(q) * n * h);
}

SideModel SideEquation::model(SandwichMode mode, const KernelSpec& kernel) const {
    SideModel m;
    m.side = side;
    m.mode = mode;
    m.q = fit1.q;
    m.h = h;
    m.n = double(x.size());
    m.m_hat = fit1.cond_mean;
    m.m2 = m2;
    m.x = x;
    m.fx = nuis.fx_at_cutoff;
    m.sigma = nuis.sigma_at_cutoff;
    m.moments = one_sided_moments(kernel, side, 7);
    if (mode == SandwichMode::asymptotic) {
        m.s1 = scaled_asymptotic(m.moments, nuis.grid, 1, m.fx, m.sigma);
        m.s2 = scaled_asymptotic(m.moments, nuis.grid, 2, m.fx, m.sigma);
        m.D = 0.5 * boundary_constants(m.moments).a;
    } else {
        const std::vector<double> sig(x.size(), m.sigma);
        m.s1 = build_fixed_n(x, nuis.grid, h, kernel, sig, 1);
        m.s2 = build_fixed_n(x, nuis.grid, h, kernel, sig, 2);
        m.D = fixed_n_bias_factor(m.s1, nuis.grid, x, h, kernel, m.sigma);
    }
    return m;
}

CrossTerms cross_terms(const SideModel& a, const SideModel& b, const Eigen::MatrixXd& phi, const KernelSpec& kernel) {
    Eigen::MatrixXd c1, c2;
    if (a.mode == SandwichMode::asymptotic) {
        c1 = a.fx * build_cross_asymptotic(a.moments, phi, 1);
        c2 = a.fx * build_cross_asymptotic(a.moments, phi, 2);
    } else {
        c1 = build_cross_fixed_n(a.x, phi, a.h, b.h, kernel, 1);
        c2 = build_cross_fixed_n(a.x, phi, a.h, b.h, kernel, 2);
    }
    const int q = a.q;
    const double nh = a.n * std::sqrt(a.h * b.h);
    const Eigen::MatrixXd m1 = a.s1.S_inv * c1 * b.s1.S_inv;
    const Eigen::MatrixXd m2 = a.s2.S_inv * c2 * b.s2.S_inv;
    CrossTerms t;
    t.cov_mm = intercept_average(m1, q) / nh;
    t.cov_bb = 4.0 * a.D * b.D * m2(q + 1, q + 1) / nh;
    t.cov_m_a_b_b = 2.0 * b.D * m2.block(0, q + 1, q, 1).sum() / (double(q) * nh);
    t.cov_m_b_b_a = 2.0 * a.D * m2.block(q + 1, 0, 1, q).sum() / (double(q) * nh);
    return t;
}

SideEquation analyze_side(const std::vector<double>& x, const std::vector<double>& y, Side side, double h,
                          const NuisanceEstimates& nuis, const EstimatorConfig& cfg) {
    SideEquation eq;
    eq.side = side;
    eq.h = h;
    eq.x = x;
    eq.y = y;
    eq.nuis = nuis;
    eq.fit1 = fit_boundary(x, y, 0.0, cfg.q, 1, h, cfg.kernel, cfg.solver);
    try {
        eq.fit2 = fit_boundary(x, y, 0.0, cfg.q, 2, h, cfg.kernel, cfg.solver);
        eq.m2 = eq.fit2->second_derivative();
    } catch (const Error&) {
        // Global quartic second derivative at the cutoff.
        eq.m2 = global_poly_fit(x, y, 4).derivative(2, 0.0);
        eq.m2_fallback = true;
    }
    return eq;
}

SharpEstimate estimate_sharp(const RdSample& sample, int q, double h_plus, double h_minus, const KernelSpec& kernel,
                             const SolverOptions& opts) {
    sample.validate();
    const SideData up = split_side(sample, Side::above);
    const SideData down = split_side(sample, Side::below);
    SharpEstimate e;
    e.above = fit_boundary(up.x, up.y, 0.0, q, 1, h_plus, kernel, opts);
    e.below = fit_boundary(down.x, down.y, 0.0, q, 1, h_minus, kernel, opts);
    e.tau_hat = e.above.cond_mean - e.below.cond_mean;
    return e;
}

BiasVariance bias_and_variance(const SideModel& above, const SideModel& below) {
    BiasVariance bv;
    bv.bias_hat = above.bias() - below.bias();
    bv.var_plain = above.var_m() + below.var_m();
    return bv;
}

double adjusted_variance(const SideModel& above, const SideModel& below) {
    double total = 0.0;
    for (const SideModel* m : {&above, &below}) {
        const double v = m->var_m() + m->var_bias() - 2.0 * m->cov_m_bias();
        if (!(v > 0))
            throw Error(ErrorCode::NegativeAdjustedVariance,
                        std::string("adjusted variance is not positive on the ") +
                            (m->side == Side::above ? "above" : "below") + " side");
        total += v;
    }
    return total;
}

InferenceResult adjusted_inference(const SideModel& above, const SideModel& below, double level, double tau0) {
    const BiasVariance bv = bias_and_variance(above, below);
    const double var_adj = adjusted_variance(above, below);
    InferenceResult r;
    r.estimand = Estimand::sharp;
    r.mode = above.mode;
    r.level = level;
    r.tau0 = tau0;
    r.point = above.m_hat - below.m_hat;
    r.bias_hat = bv.bias_hat;
    r.point_bc = r.point - r.bias_hat;
    r.se_plain = std::sqrt(bv.var_plain);
    r.se_adjusted = std::sqrt(var_adj);
    r.t_plain = (r.point - tau0) / r.se_plain;
    r.t_adjusted = (r.point_bc - tau0) / r.se_adjusted;
    r.p_value = normal_two_sided_p(r.t_adjusted);
    const double z = normal_quantile(0.5 + 0.5 * level);
    r.ci_plain = {r.point - z * r.se_plain, r.point + z * r.se_plain};
    r.ci_adjusted = {r.point_bc - z * r.se_adjusted, r.point_bc + z * r.se_adjusted};
    r.bandwidths = {above.h, below.h};
    return r;
}

std::pair<double, double> choose_bandwidths(const EstimatorConfig& cfg, const SidePilot& up, const SidePilot& down,
                                            BandwidthResult& bw) {
    switch (cfg.bandwidth.kind) {
    case BandwidthRequest::Kind::fixed:
        if (!(cfg.bandwidth.value > 0)) throw Error(ErrorCode::InvalidInput, "fixed bandwidth must be positive");
        bw.method = BandwidthMethod::fixed;
        bw.h_plus = bw.h_minus = cfg.bandwidth.value;
        break;
    case BandwidthRequest::Kind::rot:
        bw.method = BandwidthMethod::rot;
        bw.h_plus = up.h_rot;
        bw.h_minus = down.h_rot;
        break;
    case BandwidthRequest::Kind::automatic:
        bw = select_adjusted_mse(up, down, cfg.q, cfg.kernel, cfg.bandwidth.equal);
        break;
    }
    return {bw.h_plus, bw.h_minus};
}

namespace {

void annotate(InferenceResult& r, const SideEquation& up, const SideEquation& down, const BandwidthResult& bw) {
    r.flags.insert(r.flags.end(), bw.flags.begin(), bw.flags.end());
    for (const SideEquation* e : {&up, &down}) {
        const std::string tag = e->side == Side::above ? "plus" : "minus";
        if (e->m2_fallback) r.flags.push_back("SecondDerivativeFallback_" + tag);
        if (!e->fit1.converged || (e->fit2 && !e->fit2->converged)) r.flags.push_back("SolverDiverged_" + tag);
        r.diagnostics["sigma_" + tag] = e->nuis.sigma_at_cutoff;
        r.diagnostics["fx_" + tag] = e->nuis.fx_at_cutoff;
        r.diagnostics["m2_" + tag] = e->m2;
        r.diagnostics["pilot_h_" + tag] = e->nuis.pilot_bandwidth;
        r.diagnostics["m_hat_" + tag] = e->fit1.cond_mean;
    }
    r.n_eff = {up.fit1.n_effective, down.fit1.n_effective};
    if (bw.method == BandwidthMethod::adj_mse_equal || bw.method == BandwidthMethod::adj_mse_two) {
        r.diagnostics["C2_plus"] = bw.C2_plus;
        r.diagnostics["C2_minus"] = bw.C2_minus;
        r.diagnostics["C3_plus"] = bw.C3_plus;
        r.diagnostics["C3_minus"] = bw.C3_minus;
    }
}

} // namespace

SharpAnalysis analyze_sharp(const RdSample& sample, const EstimatorConfig& cfg) {
    sample.validate();
    const SideData up = split_side(sample, Side::above);
    const SideData down = split_side(sample, Side::below);
    SharpAnalysis a;
    a.cfg = cfg;
    a.pilot_above = compute_pilot(up.x, up.y, Side::above, cfg.q, cfg.kernel, cfg.grid);
    a.pilot_below = compute_pilot(down.x, down.y, Side::below, cfg.q, cfg.kernel, cfg.grid);
    const auto [hp, hm] = choose_bandwidths(cfg, a.pilot_above, a.pilot_below, a.bw);
    a.above = analyze_side(up.x, up.y, Side::above, hp, a.pilot_above.nuis, cfg);
    a.below = analyze_side(down.x, down.y, Side::below, hm, a.pilot_below.nuis, cfg);
    return a;
}

InferenceResult SharpAnalysis::result(SandwichMode mode, double tau0) const {
    InferenceResult r = adjusted_inference(above.model(mode, cfg.kernel), below.model(mode, cfg.kernel), cfg.level, tau0);
    annotate(r, above, below, bw);
    r.diagnostics["bandwidth_method_code"] = static_cast<double>(bw.method);
    return r;
}

InferenceResult estimate_kink(const RdSample& sample, int q, double bandwidth, const KernelSpec& kernel,
                              const EstimatorConfig& cfg, SandwichMode mode) {
    sample.validate();
    const SideData up = split_side(sample, Side::above);
    const SideData down = split_side(sample, Side::below);
    InferenceResult r;
    r.estimand = Estimand::kink;
    r.mode = mode;
    r.level = cfg.level;
    double var = 0.0;
    double slope[2] = {0.0, 0.0};
    int idx = 0;
    for (const SideData* s : {&up, &down}) {
        const LcqrFit fit = fit_boundary(s->x, s->y, 0.0, q, 3, bandwidth, kernel, cfg.solver);
        slope[idx] = fit.slopes[0];
        r.n_eff.push_back(fit.n_effective);
        if (!fit.converged) r.flags.push_back(idx == 0 ? "SolverDiverged_plus" : "SolverDiverged_minus");
        const SidePilot pilot = compute_pilot(s->x, s->y, s->side, q, kernel, cfg.grid);
        const double n = double(s->x.size());
        const double sigma = pilot.nuis.sigma_at_cutoff;
        SandwichSet set;
        if (mode == SandwichMode::asymptotic) {
            set = scaled_asymptotic(one_sided_moments(kernel, s->side, 7), pilot.nuis.grid, 3, pilot.fx, sigma);
        } else {
            set = build_fixed_n(s->x, pilot.nuis.grid, bandwidth, kernel, std::vector<double>(s->x.size(), sigma), 3);
        }
        // b1 - m' = v1 / (h sqrt(n h)).
        var += set.middle()(q, q) / (n * bandwidth * bandwidth * bandwidth);
        ++idx;
    }
    r.point = slope[0] - slope[1];
    r.point_bc = r.point;
    r.se_plain = std::sqrt(var);
    r.se_adjusted = r.se_plain;
    r.t_plain = r.t_adjusted = r.point / r.se_plain;
    r.p_value = normal_two_sided_p(r.t_plain);
    const double z = normal_quantile(0.5 + 0.5 * cfg.level);
    r.ci_plain = r.ci_adjusted = {r.point - z * r.se_plain, r.point + z * r.se_plain};
    r.bandwidths = {bandwidth, bandwidth};
    r.flags.push_back("experimental");
    return r;
}

} // namespace rdlcqr
