#pragma once

#include <string>
#include <vector>

#include "rdlcqr/kernels.hpp"
#include "rdlcqr/nuisance.hpp"

namespace rdlcqr {

enum class BandwidthMethod { adj_mse_two, adj_mse_equal, rot, fixed };
std::string bandwidth_method_name(BandwidthMethod m);

struct BandwidthRequest {
    enum class Kind { automatic, rot, fixed };
    Kind kind = Kind::automatic;
    double value = 0.0;   // used when kind == fixed
    bool equal = true;    // one bandwidth for both sides
};

// Pilot quantities for one side: global quartic, rule-of-thumb bandwidth and the
// nuisances estimated on it.
struct SidePilot {
    Side side = Side::above;
    std::size_t n = 0;
    PolyFit quartic;
    double h_rot = 0.0;
    double h_floor = 0.0;
    double h_ceiling = 0.0;
    NuisanceEstimates nuis;
    double fx = 0.0;
    double fx_prime = 0.0;
    double m2 = 0.0;
    double m3 = 0.0;
};

// Smallest and largest usable bandwidth for fits of order p with q quantiles.
std::pair<double, double> bandwidth_limits(const std::vector<double>& x, int q, int p);

// C_K [sigma2 * range / curvature_sum]^{1/5}, the plug-in rule with interior
// local-linear kernel constants.
double rot_formula(double sigma2, double range, double curvature_sum, const KernelSpec& kernel);
double rot_kernel_constant(const KernelSpec& kernel);

struct BandwidthResult {
    double h_plus = 0.0;
    double h_minus = 0.0;
    double C2_plus = 0.0;
    double C2_minus = 0.0;
    double C3_plus = 0.0;
    double C3_minus = 0.0;
    BandwidthMethod method = BandwidthMethod::fixed;
    std::vector<std::string> flags;
};

// Rule of thumb on one side (h_plus and h_minus both hold the value).
BandwidthResult select_rule_of_thumb(const std::vector<double>& x, const std::vector<double>& y,
                                     const KernelSpec& kernel, int q = 7);

SidePilot compute_pilot(const std::vector<double>& x, const std::vector<double>& y, Side side, int q,
                        const KernelSpec& kernel, const GridOptions& grid_opts = {});

struct AdjMseConstants {
    double C2 = 0.0;
    double C3 = 0.0;
};

// C2 = a_check m3 / 6 + a_tilde (f'/f) m2 / 2 and C3 = sigma^2/f [b_Y + a^2 b* - 2 a cross / q].
// density_scale multiplies f (n_side/n when pooling over the full sample).
AdjMseConstants adj_mse_constants(const SidePilot& pilot, int q, const KernelSpec& kernel,
                                  double density_scale = 1.0);

double adj_mse_bandwidth(double C2, double C3, double n);
double adj_mse_bandwidth_equal(double C2_plus, double C3_plus, double C2_minus, double C3_minus, double n);

BandwidthResult select_adjusted_mse(const SidePilot& above, const SidePilot& below, int q,
                                    const KernelSpec& kernel, bool equal);

} // namespace rdlcqr
