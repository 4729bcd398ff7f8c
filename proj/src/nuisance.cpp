#include "rdlcqr/nuisance.hpp"

#include <algorithm>
#include <cmath>

#include "rdlcqr/are.hpp"
#include "rdlcqr/errors.hpp"

namespace rdlcqr {

namespace {

// Linear-interpolation sample quantile (Hyndman-Fan type 7).
double sample_quantile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double pos = p * double(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

double sample_sd(const std::vector<double>& v) {
    double mean = 0.0;
    for (double e : v) mean += e;
    mean /= double(v.size());
    double ss = 0.0;
    for (double e : v) ss += (e - mean) * (e - mean);
    return v.size() > 1 ? std::sqrt(ss / double(v.size() - 1)) : 0.0;
}

} // namespace

Eigen::VectorXd quantile_positions(int q) {
    Eigen::VectorXd t(q);
    for (int k = 0; k < q; ++k) t[k] = double(k + 1) / double(q + 1);
    return t;
}

Eigen::MatrixXd tau_pair_matrix(const Eigen::VectorXd& tau) {
    const Eigen::Index q = tau.size();
    Eigen::MatrixXd m(q, q);
    for (Eigen::Index k = 0; k < q; ++k)
        for (Eigen::Index l = 0; l < q; ++l) m(k, l) = std::min(tau[k], tau[l]) - tau[k] * tau[l];
    return m;
}

double silverman_bandwidth(const std::vector<double>& v, bool use_iqr) {
    const double sd = sample_sd(v);
    const double iqr = sample_quantile(v, 0.75) - sample_quantile(v, 0.25);
    double spread = sd;
    if (use_iqr && iqr > 0) spread = std::min(sd, iqr / 1.34);
    return 0.9 * spread * std::pow(double(v.size()), -0.2);
}

double gaussian_kde(const std::vector<double>& v, double bw, double at) {
    double s = 0.0;
    for (double e : v) {
        const double u = (at - e) / bw;
        s += std::exp(-0.5 * u * u);
    }
    return s / (double(v.size()) * bw * std::sqrt(2.0 * M_PI));
}

QuantileGrid estimate_grid(const std::vector<double>& res, int q, const GridOptions& opts) {
    if (q < 1) throw Error(ErrorCode::InvalidInput, "q must be at least 1");
    if (res.size() < 2) throw Error(ErrorCode::DegenerateResiduals, "need at least two residuals");
    const double sd = sample_sd(res);
    if (!(sd > 0) || !std::isfinite(sd)) throw Error(ErrorCode::DegenerateResiduals, "residuals have zero spread");

    QuantileGrid g;
    g.q = q;
    g.tau = quantile_positions(q);
    g.c.resize(q);
    g.f_at_c.resize(q);
    for (int k = 0; k < q; ++k) g.c[k] = sample_quantile(res, g.tau[k]);
    if (opts.symmetrize) {
        const Eigen::VectorXd c = g.c;
        for (int k = 0; k < q; ++k) g.c[k] = 0.5 * (c[k] - c[q - 1 - k]);
    }
    const double bw = silverman_bandwidth(res, opts.iqr_spread);
    if (!(bw > 0)) throw Error(ErrorCode::DegenerateResiduals, "density bandwidth collapsed");
    for (int k = 0; k < q; ++k) {
        double f = gaussian_kde(res, bw, g.c[k]);
        if (opts.symmetrize) f = 0.5 * (f + gaussian_kde(res, bw, -g.c[k]));
        if (!(f > 0) || !std::isfinite(f))
            throw Error(ErrorCode::DegenerateResiduals, "error density estimate is not positive");
        g.f_at_c[k] = f;
    }
    g.tau_pair = tau_pair_matrix(g.tau);
    return g;
}

QuantileGrid estimate_grid(const ErrorLaw& law, int q) {
    QuantileGrid g;
    g.q = q;
    g.tau = quantile_positions(q);
    g.c.resize(q);
    g.f_at_c.resize(q);
    for (int k = 0; k < q; ++k) {
        g.c[k] = law.quantile(g.tau[k]);
        g.f_at_c[k] = law.pdf(g.c[k]);
    }
    g.tau_pair = tau_pair_matrix(g.tau);
    return g;
}

Eigen::MatrixXd estimate_phi(const std::vector<double>& res_y, const std::vector<double>& res_t,
                             const QuantileGrid& grid_y, const QuantileGrid& grid_t) {
    if (res_y.size() != res_t.size() || res_y.empty())
        throw Error(ErrorCode::InvalidInput, "paired residuals must have equal, positive length");
    const int q = grid_y.q;
    Eigen::MatrixXd phi(q, grid_t.q);
    const double n = double(res_y.size());
    for (int k = 0; k < q; ++k) {
        for (int l = 0; l < grid_t.q; ++l) {
            double count = 0.0;
            for (std::size_t i = 0; i < res_y.size(); ++i)
                count += (res_y[i] <= grid_y.c[k] && res_t[i] <= grid_t.c[l]) ? 1.0 : 0.0;
            phi(k, l) = count / n - grid_y.tau[k] * grid_t.tau[l];
        }
    }
    return phi;
}

double boundary_kde(const std::vector<double>& x, Side side, double x0, double h, const KernelSpec& kernel) {
    if (x.empty()) throw Error(ErrorCode::InsufficientData, "no points on this side");
    double s = 0.0;
    for (double xi : x) s += eval_kernel(kernel, (xi - x0) / h);
    const double b = kernel.effective_bound();
    const double edge = -x0 / h;  // the cutoff in kernel units
    const double mass = side == Side::above ? kernel_mass(kernel, edge, b) : kernel_mass(kernel, -b, edge);
    return s / (double(x.size()) * h * mass);
}

NuisanceEstimates estimate_sigma_fx(const std::vector<double>& x, const std::vector<double>& y, Side side,
                                    double h, int q, const KernelSpec& kernel, const GridOptions& opts) {
    if (!(h > 0)) throw Error(ErrorCode::InvalidInput, "pilot bandwidth must be positive");
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (eval_kernel(kernel, x[i] / h) > 0) idx.push_back(i);
    if (idx.size() < 5) throw Error(ErrorCode::InsufficientData, "pilot window holds fewer than 5 points");

    const Eigen::Index n = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd design(n, 3);
    Eigen::VectorXd yy(n), w(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const double u = x[idx[r]] / h;
        design(r, 0) = 1.0;
        design(r, 1) = u;
        design(r, 2) = u * u;
        yy[r] = y[idx[r]];
        w[r] = eval_kernel(kernel, u);
    }
    const Eigen::VectorXd sw = w.array().sqrt();
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sw.asDiagonal() * design);
    if (qr.rank() < 3) throw Error(ErrorCode::InsufficientData, "pilot window has fewer than 3 distinct x values");
    const Eigen::VectorXd coef = qr.solve(Eigen::VectorXd(sw.asDiagonal() * yy));
    const Eigen::VectorXd res = yy - design * coef;

    NuisanceEstimates out;
    out.pilot_bandwidth = h;
    out.sigma_at_cutoff = std::sqrt((w.array() * res.array().square()).sum() / w.sum());
    const double scale = std::max(1.0, yy.cwiseAbs().maxCoeff());
    if (!(out.sigma_at_cutoff > 1e-12 * scale))
        throw Error(ErrorCode::DegenerateResiduals, "pilot residuals vanish; sigma estimate is zero");

    const KernelMoments mom = one_sided_moments(kernel, side, 3);
    double ksum = 0.0;
    for (double xi : x) ksum += eval_kernel(kernel, xi / h);
    out.fx_at_cutoff = ksum / (double(x.size()) * h * mom.mu[0]);

    out.residuals.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) out.residuals[r] = res[r] / out.sigma_at_cutoff;
    out.grid = estimate_grid(out.residuals, q, opts);
    return out;
}

double PolyFit::derivative(int order, double at) const {
    double total = 0.0;
    for (Eigen::Index j = order; j < coef.size(); ++j) {
        double factor = 1.0;
        for (int r = 0; r < order; ++r) factor *= double(j - r);
        total += coef[j] * factor * std::pow(at, double(j - order));
    }
    return total;
}

PolyFit global_poly_fit(const std::vector<double>& x, const std::vector<double>& y, int degree) {
    const Eigen::Index n = static_cast<Eigen::Index>(x.size());
    if (n < degree + 2) throw Error(ErrorCode::InsufficientData, "too few points for the global polynomial");
    Eigen::MatrixXd v(n, degree + 1);
    Eigen::VectorXd yy(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double pw = 1.0;
        for (int j = 0; j <= degree; ++j) {
            v(i, j) = pw;
            pw *= x[i];
        }
        yy[i] = y[i];
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(v);
    if (qr.rank() < degree + 1) throw Error(ErrorCode::SingularDesign, "global polynomial design is singular");
    PolyFit fit;
    fit.coef = qr.solve(yy);
    const Eigen::VectorXd res = yy - v * fit.coef;
    fit.residual_variance = res.squaredNorm() / double(n - degree - 1);
    return fit;
}

} // namespace rdlcqr
