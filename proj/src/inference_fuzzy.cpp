#include "rdlcqr/inference_fuzzy.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>

#include "rdlcqr/errors.hpp"

namespace rdlcqr {

namespace {

bool is_constant(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
}

// Treatment equation with no noise: an exact fit, zero curvature, no nuisances.
SideEquation constant_equation(const std::vector<double>& x, const std::vector<double>& t, Side side, double h,
                               const EstimatorConfig& cfg) {
    SideEquation eq;
    eq.side = side;
    eq.h = h;
    eq.x = x;
    eq.y = t;
    eq.fit1 = fit_boundary(x, t, 0.0, cfg.q, 1, h, cfg.kernel, cfg.solver);
    eq.m2 = 0.0;
    return eq;
}

struct SideModels {
    SideModel y;
    std::optional<SideModel> t;  // absent when the treatment is constant on this side
    CrossTerms cross;
};

SideModels side_models(const SideEquation& y, const SideEquation& t, bool t_constant, const Eigen::MatrixXd& phi,
                       SandwichMode mode, const KernelSpec& kernel) {
    SideModels m;
    m.y = y.model(mode, kernel);
    if (!t_constant) {
        m.t = t.model(mode, kernel);
        m.cross = cross_terms(m.y, *m.t, phi, kernel);
    }
    return m;
}

double two_sided_p(double t) {
    if (!std::isfinite(t)) return 0.0;
    return 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal_distribution<>(), std::abs(t)));
}

// Per-side pieces of the null-restricted statistic.
struct NullSide {
    double tilde = 0.0;
    double bias = 0.0;
    double var = 0.0;
};

NullSide null_side(const SideModels& m, double tau0) {
    NullSide s;
    const SideModel& y = m.y;
    s.tilde = y.m_hat;
    s.bias = y.bias();
    s.var = y.var_m() + y.var_bias() - 2.0 * y.cov_m_bias();
    if (m.t) {
        const SideModel& t = *m.t;
        const CrossTerms& c = m.cross;
        s.tilde -= tau0 * t.m_hat;
        s.bias -= tau0 * t.bias();
        s.var += tau0 * tau0 * t.var_m() - 2.0 * tau0 * c.cov_mm;
        s.var += tau0 * tau0 * t.var_bias() - 2.0 * tau0 * c.cov_bb;
        s.var += 2.0 * tau0 * c.cov_m_a_b_b + 2.0 * tau0 * c.cov_m_b_b_a;
        s.var -= 2.0 * tau0 * tau0 * t.cov_m_bias();
    }
    return s;
}

NullRestrictedTerms assemble(const SideModels& up, const SideModels& down, double tau0) {
    const NullSide a = null_side(up, tau0);
    const NullSide b = null_side(down, tau0);
    if (!(a.var > 0) || !(b.var > 0))
        throw Error(ErrorCode::NegativeAdjustedVariance, "null-restricted variance is not positive");
    NullRestrictedTerms out;
    out.tau_tilde = a.tilde - b.tilde;
    out.bias = a.bias - b.bias;
    out.variance = a.var + b.var;
    return out;
}

struct ModelPair {
    SideModels up;
    SideModels down;
};

ModelPair models(const FuzzyComponents& comp, SandwichMode mode, const KernelSpec& kernel) {
    return {side_models(comp.y_above, comp.t_above, comp.t_constant_above, comp.phi_above, mode, kernel),
            side_models(comp.y_below, comp.t_below, comp.t_constant_below, comp.phi_below, mode, kernel)};
}

double plain_side_variance(const SideModels& m, double tau) {
    double v = m.y.var_m();
    if (m.t) v += tau * tau * m.t->var_m() - 2.0 * tau * m.cross.cov_mm;
    return v;
}

double side_bias(const SideModels& m, double tau) { return m.y.bias() - (m.t ? tau * m.t->bias() : 0.0); }

double t_statistic(const ModelPair& mp, double tau0) {
    const NullRestrictedTerms nr = assemble(mp.up, mp.down, tau0);
    return (nr.tau_tilde - nr.bias) / std::sqrt(nr.variance);
}

TestInversion invert(const ModelPair& mp, double center, double half_width, double level, int points) {
    const double z = normal_quantile(0.5 + 0.5 * level);
    std::vector<char> accept(static_cast<std::size_t>(points), 0);
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
        grid[i] = center - half_width + 2.0 * half_width * double(i) / double(std::max(points - 1, 1));
#pragma omp parallel for schedule(static)
    for (int i = 0; i < points; ++i) {
        try {
            accept[i] = std::abs(t_statistic(mp, grid[i])) <= z ? 1 : 0;
        } catch (const Error&) {
            accept[i] = 0;
        }
    }
    TestInversion out;
    int first = -1;
    int last = -1;
    for (int i = 0; i < points; ++i) {
        if (!accept[i]) continue;
        if (first < 0) first = i;
        last = i;
    }
    if (first < 0) {
        out.empty = true;
        out.lo = out.hi = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    out.lo = grid[first];
    out.hi = grid[last];
    out.open_lo = first == 0;
    out.open_hi = last == points - 1;
    return out;
}

} // namespace

FuzzyEstimate estimate_fuzzy(const RdSample& sample, const FuzzyBandwidths& bw, const EstimatorConfig& cfg,
                             const SidePilot* pilot_above, const SidePilot* pilot_below) {
    sample.validate();
    if (!sample.t) throw Error(ErrorCode::MissingColumn, "fuzzy design needs a treatment column");
    FuzzyEstimate est;
    FuzzyComponents& c = est.comp;
    for (Side side : {Side::above, Side::below}) {
        const SideData d = split_side(sample, side);
        const SidePilot* given = side == Side::above ? pilot_above : pilot_below;
        const SidePilot pilot = given ? *given : compute_pilot(d.x, d.y, side, cfg.q, cfg.kernel, cfg.grid);
        const double hy = side == Side::above ? bw.hy_plus : bw.hy_minus;
        const double ht = side == Side::above ? bw.ht_plus : bw.ht_minus;

        SideEquation y_eq = analyze_side(d.x, d.y, side, hy, pilot.nuis, cfg);
        SideEquation t_eq;
        Eigen::MatrixXd phi;
        const bool constant = is_constant(d.t);
        if (constant) {
            t_eq = constant_equation(d.x, d.t, side, ht, cfg);
        } else {
            // Same pilot window as the outcome so the residuals pair up. A 0/1
            // treatment has a skewed two-point error law, so no symmetrization.
            GridOptions t_grid = cfg.grid;
            t_grid.symmetrize = false;
            t_grid.iqr_spread = false;
            const NuisanceEstimates t_nuis =
                estimate_sigma_fx(d.x, d.t, side, pilot.nuis.pilot_bandwidth, cfg.q, cfg.kernel, t_grid);
            t_eq = analyze_side(d.x, d.t, side, ht, t_nuis, cfg);
            phi = estimate_phi(pilot.nuis.residuals, t_nuis.residuals, pilot.nuis.grid, t_nuis.grid);
        }
        if (side == Side::above) {
            c.y_above = std::move(y_eq);
            c.t_above = std::move(t_eq);
            c.phi_above = phi;
            c.t_constant_above = constant;
        } else {
            c.y_below = std::move(y_eq);
            c.t_below = std::move(t_eq);
            c.phi_below = phi;
            c.t_constant_below = constant;
        }
    }
    c.numerator = c.y_above.fit1.cond_mean - c.y_below.fit1.cond_mean;
    c.denominator = c.t_above.fit1.cond_mean - c.t_below.fit1.cond_mean;
    c.weak = !(std::abs(c.denominator) >= kWeakIdThreshold);
    if (!c.weak) est.tau_hat = c.numerator / c.denominator;
    return est;
}

BiasVariance fuzzy_bias_and_variance(const FuzzyComponents& comp, SandwichMode mode, const KernelSpec& kernel) {
    if (comp.weak)
        throw Error(ErrorCode::WeakIdentification, "treatment jump below the weak-identification threshold");
    const double tau = comp.numerator / comp.denominator;
    const ModelPair mp = models(comp, mode, kernel);
    const double den2 = comp.denominator * comp.denominator;
    BiasVariance bv;
    bv.bias_hat = (side_bias(mp.up, tau) - side_bias(mp.down, tau)) / comp.denominator;
    bv.var_plain = (plain_side_variance(mp.up, tau) + plain_side_variance(mp.down, tau)) / den2;
    return bv;
}

NullRestrictedTerms null_restricted_terms(const FuzzyComponents& comp, double tau0, SandwichMode mode,
                                          const KernelSpec& kernel) {
    const ModelPair mp = models(comp, mode, kernel);
    return assemble(mp.up, mp.down, tau0);
}

TestInversion invert_null_test(const FuzzyComponents& comp, double center, double half_width, SandwichMode mode,
                               const KernelSpec& kernel, double level, int points) {
    return invert(models(comp, mode, kernel), center, half_width, level, points);
}

InferenceResult null_restricted_test(const FuzzyComponents& comp, double tau0, SandwichMode mode,
                                     const KernelSpec& kernel, double level, bool invert_ci) {
    if (!std::isfinite(tau0)) throw Error(ErrorCode::InvalidInput, "tau0 must be finite");
    const ModelPair mp = models(comp, mode, kernel);
    const NullRestrictedTerms nr = assemble(mp.up, mp.down, tau0);
    const double z = normal_quantile(0.5 + 0.5 * level);

    InferenceResult r;
    r.estimand = Estimand::fuzzy;
    r.mode = mode;
    r.level = level;
    r.tau0 = tau0;
    r.t_adjusted = (nr.tau_tilde - nr.bias) / std::sqrt(nr.variance);
    r.p_value = two_sided_p(r.t_adjusted);
    r.diagnostics["tau_tilde"] = nr.tau_tilde;
    r.diagnostics["tau_tilde_bias"] = nr.bias;
    r.diagnostics["tau_tilde_variance"] = nr.variance;
    r.diagnostics["numerator"] = comp.numerator;
    r.diagnostics["denominator"] = comp.denominator;

    const double nan = std::numeric_limits<double>::quiet_NaN();
    double half_width = 0.0;
    double center = tau0;
    if (comp.weak) {
        r.flags.push_back("WeakIdentification");
        r.point = r.bias_hat = r.point_bc = r.se_plain = r.se_adjusted = r.t_plain = nan;
        r.ci_plain = r.ci_adjusted = {nan, nan};
        half_width = 6.0 * std::sqrt(nr.variance) / kWeakIdThreshold;
    } else {
        const double tau = comp.numerator / comp.denominator;
        const double den2 = comp.denominator * comp.denominator;
        const double var_plain = (plain_side_variance(mp.up, tau) + plain_side_variance(mp.down, tau)) / den2;
        r.point = tau;
        r.bias_hat = (side_bias(mp.up, tau) - side_bias(mp.down, tau)) / comp.denominator;
        r.point_bc = r.point - r.bias_hat;
        r.se_plain = std::sqrt(var_plain);
        r.t_plain = (r.point - tau0) / r.se_plain;
        r.ci_plain = {r.point - z * r.se_plain, r.point + z * r.se_plain};
        // Delta-method scale of the null-restricted variance evaluated at the point estimate.
        r.se_adjusted = std::sqrt(assemble(mp.up, mp.down, tau).variance / den2);
        r.ci_adjusted = {r.point_bc - z * r.se_adjusted, r.point_bc + z * r.se_adjusted};
        center = r.point;
        half_width = 6.0 * r.se_plain;
    }
    if (invert_ci) {
        const TestInversion inv = invert(mp, center, half_width, level, 201);
        r.ci_adjusted = {inv.lo, inv.hi};
        if (inv.empty) r.flags.push_back("InversionEmpty");
        if (inv.open_lo) r.flags.push_back("InversionOpenLow");
        if (inv.open_hi) r.flags.push_back("InversionOpenHigh");
        r.diagnostics["inversion_half_width"] = half_width;
    }
    r.n_eff = {comp.y_above.fit1.n_effective, comp.y_below.fit1.n_effective, comp.t_above.fit1.n_effective,
               comp.t_below.fit1.n_effective};
    r.bandwidths = {comp.y_above.h, comp.y_below.h, comp.t_above.h, comp.t_below.h};
    return r;
}

FuzzyAnalysis analyze_fuzzy(const RdSample& sample, const EstimatorConfig& cfg,
                            std::optional<FuzzyBandwidths> t_override) {
    sample.validate();
    if (!sample.t) throw Error(ErrorCode::MissingColumn, "fuzzy design needs a treatment column");
    const SideData up = split_side(sample, Side::above);
    const SideData down = split_side(sample, Side::below);
    const SidePilot pa = compute_pilot(up.x, up.y, Side::above, cfg.q, cfg.kernel, cfg.grid);
    const SidePilot pb = compute_pilot(down.x, down.y, Side::below, cfg.q, cfg.kernel, cfg.grid);
    FuzzyAnalysis fa;
    fa.cfg = cfg;
    const auto [hp, hm] = choose_bandwidths(cfg, pa, pb, fa.bw_y);
    FuzzyBandwidths bw{hp, hm, hp, hm};
    if (t_override) {
        bw.ht_plus = t_override->ht_plus;
        bw.ht_minus = t_override->ht_minus;
    }
    fa.est = estimate_fuzzy(sample, bw, cfg, &pa, &pb);
    return fa;
}

InferenceResult FuzzyAnalysis::result(SandwichMode mode, double tau0, bool invert_ci) const {
    InferenceResult r = null_restricted_test(est.comp, tau0, mode, cfg.kernel, cfg.level, invert_ci);
    r.flags.insert(r.flags.end(), bw_y.flags.begin(), bw_y.flags.end());
    for (const SideEquation* e : {&est.comp.y_above, &est.comp.y_below, &est.comp.t_above, &est.comp.t_below})
        if (!e->fit1.converged || (e->fit2 && !e->fit2->converged)) {
            r.flags.push_back("SolverDiverged");
            break;
        }
    return r;
}

} // namespace rdlcqr
