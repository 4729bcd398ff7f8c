#include "rdlcqr/llr.hpp"

#include <algorithm>
#include <cmath>

#include "rdlcqr/errors.hpp"

namespace rdlcqr {

LlrFit fit_llr(const std::vector<double>& x, const std::vector<double>& y, double point, double bandwidth,
               const KernelSpec& kernel) {
    if (!(bandwidth > 0)) throw Error(ErrorCode::InvalidInput, "bandwidth must be positive");
    // Weighted normal equations in (1, x - point).
    double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
    int n_eff = 0;
    double first = 0.0;
    bool distinct = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - point;
        const double w = eval_kernel(kernel, d / bandwidth);
        if (w <= 0) continue;
        if (n_eff == 0) first = d;
        else if (d != first) distinct = true;
        ++n_eff;
        s0 += w;
        s1 += w * d;
        s2 += w * d * d;
        t0 += w * y[i];
        t1 += w * d * y[i];
    }
    if (n_eff < 2 || !distinct)
        throw Error(ErrorCode::InsufficientData, "local linear fit needs two distinct weighted points");
    const double det = s0 * s2 - s1 * s1;
    if (!(std::abs(det) > 1e-14 * s0 * s2)) throw Error(ErrorCode::SingularDesign, "local linear design is singular");
    LlrFit fit;
    fit.intercept = (s2 * t0 - s1 * t1) / det;
    fit.slope = (s0 * t1 - s1 * t0) / det;
    fit.cond_mean = fit.intercept;
    fit.bandwidth = bandwidth;
    fit.n_effective = n_eff;
    return fit;
}

namespace {

double side_variance_constant(const SidePilot& p, const KernelSpec& kernel) {
    const BoundaryConstants bc = boundary_constants(one_sided_moments(kernel, p.side, 4));
    const double sigma = p.nuis.sigma_at_cutoff;
    return bc.b * sigma * sigma / (double(p.n) * p.fx);
}

} // namespace

double llr_bandwidth(const SidePilot& above, const SidePilot& below, const KernelSpec& kernel, std::size_t) {
    const double a = boundary_constants(one_sided_moments(kernel, Side::above, 4)).a;
    const double v = side_variance_constant(above, kernel) + side_variance_constant(below, kernel);
    const double dm2 = above.m2 - below.m2;
    double h = std::pow(v / (a * a * dm2 * dm2), 0.2);
    if (!std::isfinite(h) || !(h > 0)) h = 0.5 * (above.h_rot + below.h_rot);
    const double lo = std::max(above.h_floor, below.h_floor);
    const double hi = std::max(lo, std::min(above.h_ceiling, below.h_ceiling));
    return std::clamp(h, lo, hi);
}

InferenceResult llr_inference(const RdSample& sample, double h_plus, double h_minus, const KernelSpec& kernel,
                              const SidePilot& above, const SidePilot& below, double level) {
    sample.validate();
    const SideData up = split_side(sample, Side::above);
    const SideData down = split_side(sample, Side::below);
    const LlrFit fp = fit_llr(up.x, up.y, 0.0, h_plus, kernel);
    const LlrFit fm = fit_llr(down.x, down.y, 0.0, h_minus, kernel);
    const double a = boundary_constants(one_sided_moments(kernel, Side::above, 4)).a;

    InferenceResult r;
    r.estimand = Estimand::sharp;
    r.level = level;
    r.point = fp.cond_mean - fm.cond_mean;
    r.bias_hat = 0.5 * a * (above.m2 * h_plus * h_plus - below.m2 * h_minus * h_minus);
    r.point_bc = r.point - r.bias_hat;
    r.se_plain = std::sqrt(side_variance_constant(above, kernel) / h_plus + side_variance_constant(below, kernel) / h_minus);
    r.se_adjusted = r.se_plain;
    r.t_plain = r.point / r.se_plain;
    r.t_adjusted = r.point_bc / r.se_adjusted;
    r.p_value = std::erfc(std::abs(r.t_plain) / std::sqrt(2.0));
    const double z = normal_quantile(0.5 + 0.5 * level);
    r.ci_plain = {r.point - z * r.se_plain, r.point + z * r.se_plain};
    r.ci_adjusted = {r.point_bc - z * r.se_adjusted, r.point_bc + z * r.se_adjusted};
    r.bandwidths = {h_plus, h_minus};
    r.n_eff = {fp.n_effective, fm.n_effective};
    r.flags.push_back("baseline_llr");
    return r;
}

} // namespace rdlcqr
