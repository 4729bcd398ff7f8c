#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "rdlcqr/kernels.hpp"
#include "rdlcqr/lcqr.hpp"

namespace rdlcqr {

class ErrorLaw;

struct QuantileGrid {
    int q = 0;
    Eigen::VectorXd tau;
    Eigen::VectorXd c;
    Eigen::VectorXd f_at_c;
    Eigen::MatrixXd tau_pair;
    std::optional<Eigen::MatrixXd> phi_pair;
};

Eigen::VectorXd quantile_positions(int q);
Eigen::MatrixXd tau_pair_matrix(const Eigen::VectorXd& tau);

struct GridOptions {
    bool symmetrize = true;
    // Silverman spread min(sd, IQR/1.34). Residuals of a 0/1 treatment form two
    // tight clusters whose IQR sits inside one cluster, so that equation uses sd.
    bool iqr_spread = true;
};

// Empirical grid from standardized residuals.
QuantileGrid estimate_grid(const std::vector<double>& std_residuals, int q, const GridOptions& opts = {});
// Exact grid from a known (unit-variance) law.
QuantileGrid estimate_grid(const ErrorLaw& law, int q);

// phi_{kk'} = F(cY_k, cT_k') - tau_k tau_k' from paired standardized residuals.
Eigen::MatrixXd estimate_phi(const std::vector<double>& res_y, const std::vector<double>& res_t,
                             const QuantileGrid& grid_y, const QuantileGrid& grid_t);

// Gaussian KDE with Silverman's rule bandwidth.
double silverman_bandwidth(const std::vector<double>& v, bool use_iqr = true);
double gaussian_kde(const std::vector<double>& v, double bw, double at);

struct NuisanceEstimates {
    double sigma_at_cutoff = 0.0;
    double fx_at_cutoff = 0.0;       // conditional density of x given the side, at the cutoff
    double pilot_bandwidth = 0.0;
    std::vector<double> residuals;   // standardized, points inside the pilot window
    QuantileGrid grid;
};

// Pilot local quadratic least-squares fit with the given bandwidth; sigma from
// kernel-weighted squared residuals, f_X(0) from the one-sided boundary KDE.
// Residuals keep the order of the in-window points, so two calls on the same x
// with the same bandwidth give paired residuals.
NuisanceEstimates estimate_sigma_fx(const std::vector<double>& x, const std::vector<double>& y,
                                    Side side, double pilot_bandwidth, int q,
                                    const KernelSpec& kernel, const GridOptions& opts = {});

// One-sided boundary KDE of the running variable at point x0 (same side).
double boundary_kde(const std::vector<double>& x, Side side, double x0, double h, const KernelSpec& kernel);

// Global polynomial least squares of the given degree on one side.
struct PolyFit {
    Eigen::VectorXd coef;  // coef[j] multiplies x^j
    double residual_variance = 0.0;
    double derivative(int order, double at) const;
    double value(double at) const { return derivative(0, at); }
};
PolyFit global_poly_fit(const std::vector<double>& x, const std::vector<double>& y, int degree);

} // namespace rdlcqr
