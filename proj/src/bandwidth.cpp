#include "rdlcqr/bandwidth.hpp"

#include <algorithm>
#include <cmath>

#include "rdlcqr/errors.hpp"
#include "rdlcqr/sandwich.hpp"

namespace rdlcqr {

std::string bandwidth_method_name(BandwidthMethod m) {
    switch (m) {
    case BandwidthMethod::adj_mse_two: return "adj_mse_two";
    case BandwidthMethod::adj_mse_equal: return "adj_mse_equal";
    case BandwidthMethod::rot: return "rot";
    case BandwidthMethod::fixed: return "fixed";
    }
    return "unknown";
}

std::pair<double, double> bandwidth_limits(const std::vector<double>& x, int q, int p) {
    const std::size_t need = static_cast<std::size_t>(q + p + 1);
    if (x.size() < need) throw Error(ErrorCode::InsufficientData, "side has fewer than q + p + 1 points");
    std::vector<double> d(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = std::abs(x[i]);
    std::sort(d.begin(), d.end());
    const double range = d.back() - d.front();
    const double spacing = x.size() > 1 ? range / double(x.size() - 1) : 0.0;
    // A triangular weight vanishes at |x| = h, so the need-th nearest point must sit strictly inside.
    const double floor = std::max(spacing * double(need), d[need - 1] * (1.0 + 1e-6));
    const double ceiling = std::max(d.back(), floor);
    return {floor, ceiling};
}

double rot_kernel_constant(const KernelSpec& kernel) {
    const KernelMoments m = one_sided_moments(kernel, Side::above, 3);
    const double k2 = 2.0 * m.nu[0];   // int K^2 over the line
    const double mu2 = 2.0 * m.mu[2];  // int u^2 K over the line
    return std::pow(k2 / (mu2 * mu2), 0.2);
}

double rot_formula(double sigma2, double range, double curvature_sum, const KernelSpec& kernel) {
    return rot_kernel_constant(kernel) * std::pow(sigma2 * range / curvature_sum, 0.2);
}

BandwidthResult select_rule_of_thumb(const std::vector<double>& x, const std::vector<double>& y,
                                     const KernelSpec& kernel, int q) {
    if (x.size() < 10) throw Error(ErrorCode::InsufficientData, "rule of thumb needs at least 10 points");
    const PolyFit quartic = global_poly_fit(x, y, 4);
    double curvature = 0.0;
    for (double xi : x) {
        const double m2 = quartic.derivative(2, xi);
        curvature += m2 * m2;
    }
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    double h = rot_formula(quartic.residual_variance, *hi - *lo, curvature, kernel);
    const auto lim = bandwidth_limits(x, q, 2);
    if (!std::isfinite(h)) h = lim.second;
    h = std::clamp(h, lim.first, lim.second);
    BandwidthResult r;
    r.h_plus = h;
    r.h_minus = h;
    r.method = BandwidthMethod::rot;
    return r;
}

SidePilot compute_pilot(const std::vector<double>& x, const std::vector<double>& y, Side side, int q,
                        const KernelSpec& kernel, const GridOptions& grid_opts) {
    SidePilot p;
    p.side = side;
    p.n = x.size();
    p.h_rot = select_rule_of_thumb(x, y, kernel, q).h_plus;
    const auto lim = bandwidth_limits(x, q, 2);
    p.h_floor = lim.first;
    p.h_ceiling = lim.second;
    p.quartic = global_poly_fit(x, y, 4);
    p.nuis = estimate_sigma_fx(x, y, side, p.h_rot, q, kernel, grid_opts);
    p.fx = p.nuis.fx_at_cutoff;
    const double step = side == Side::above ? 0.5 * p.h_rot : -0.5 * p.h_rot;
    const double f0 = boundary_kde(x, side, 0.0, p.h_rot, kernel);
    const double f1 = boundary_kde(x, side, step, p.h_rot, kernel);
    p.fx_prime = (f1 - f0) / step;
    p.m2 = p.quartic.derivative(2, 0.0);
    p.m3 = p.quartic.derivative(3, 0.0);
    return p;
}

AdjMseConstants adj_mse_constants(const SidePilot& pilot, int q, const KernelSpec& kernel, double density_scale) {
    const KernelMoments mom = one_sided_moments(kernel, pilot.side, 7);
    const BoundaryConstants bc = boundary_constants(mom);
    const QuantileGrid& grid = pilot.nuis.grid;
    const SandwichSet s1 = build_asymptotic(mom, grid, 1);
    const SandwichSet s2 = build_asymptotic(mom, grid, 2);
    const double b_y = intercept_average(s1.middle(), q);
    const Eigen::MatrixXd m2 = s2.middle();
    const double b_star = curvature_entry(m2, q);
    const double cross = intercept_curvature_cross(m2, q);

    AdjMseConstants c;
    c.C2 = bc.a_check * pilot.m3 / 6.0 + 0.5 * bc.a_tilde * (pilot.fx_prime / pilot.fx) * pilot.m2;
    const double sigma2 = pilot.nuis.sigma_at_cutoff * pilot.nuis.sigma_at_cutoff;
    const double f = pilot.fx * density_scale;
    c.C3 = sigma2 / f * (b_y + bc.a * bc.a * b_star - 2.0 * bc.a * cross / double(q));
    if (!(c.C3 > 0))
        throw Error(ErrorCode::NegativeAdjustedVariance, "adjusted-variance constant C3 is not positive");
    return c;
}

double adj_mse_bandwidth(double C2, double C3, double n) {
    return std::pow(C3 / (6.0 * C2 * C2), 1.0 / 7.0) * std::pow(n, -1.0 / 7.0);
}

double adj_mse_bandwidth_equal(double C2_plus, double C3_plus, double C2_minus, double C3_minus, double n) {
    const double d = C2_plus - C2_minus;
    return std::pow((C3_plus + C3_minus) / (6.0 * d * d), 1.0 / 7.0) * std::pow(n, -1.0 / 7.0);
}

namespace {

bool degenerate(double c2, const SidePilot& p) {
    return !(std::abs(c2) > 1e-12 * std::max(p.nuis.sigma_at_cutoff, 1e-300));
}

} // namespace

BandwidthResult select_adjusted_mse(const SidePilot& above, const SidePilot& below, int q, const KernelSpec& kernel,
                                    bool equal) {
    BandwidthResult r;
    if (equal) {
        const double n = double(above.n + below.n);
        const AdjMseConstants cp = adj_mse_constants(above, q, kernel, double(above.n) / n);
        const AdjMseConstants cm = adj_mse_constants(below, q, kernel, double(below.n) / n);
        r.C2_plus = cp.C2;
        r.C2_minus = cm.C2;
        r.C3_plus = cp.C3;
        r.C3_minus = cm.C3;
        r.method = BandwidthMethod::adj_mse_equal;
        double h = adj_mse_bandwidth_equal(cp.C2, cp.C3, cm.C2, cm.C3, n);
        const double diff = cp.C2 - cm.C2;
        if (!std::isfinite(h) ||
            !(std::abs(diff) > 1e-12 * std::max(above.nuis.sigma_at_cutoff, below.nuis.sigma_at_cutoff))) {
            r.flags.push_back("DegenerateCurvature");
            r.method = BandwidthMethod::rot;
            h = 0.5 * (above.h_rot + below.h_rot);
        }
        const double lo = std::max(above.h_floor, below.h_floor);
        const double hi = std::max(lo, std::min(above.h_ceiling, below.h_ceiling));
        h = std::clamp(h, lo, hi);
        r.h_plus = h;
        r.h_minus = h;
        return r;
    }
    const AdjMseConstants cp = adj_mse_constants(above, q, kernel, 1.0);
    const AdjMseConstants cm = adj_mse_constants(below, q, kernel, 1.0);
    r.C2_plus = cp.C2;
    r.C2_minus = cm.C2;
    r.C3_plus = cp.C3;
    r.C3_minus = cm.C3;
    r.method = BandwidthMethod::adj_mse_two;
    auto side_h = [&](const AdjMseConstants& c, const SidePilot& p) {
        double h = adj_mse_bandwidth(c.C2, c.C3, double(p.n));
        if (degenerate(c.C2, p) || !std::isfinite(h)) {
            r.flags.push_back("DegenerateCurvature");
            h = p.h_rot;
        }
        return std::clamp(h, p.h_floor, p.h_ceiling);
    };
    r.h_plus = side_h(cp, above);
    r.h_minus = side_h(cm, below);
    return r;
}

} // namespace rdlcqr
