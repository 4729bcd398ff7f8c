#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rdlcqr/bandwidth.hpp"
#include "rdlcqr/lcqr.hpp"
#include "rdlcqr/nuisance.hpp"
#include "rdlcqr/sandwich.hpp"

namespace rdlcqr {

enum class Estimand { sharp, fuzzy, kink };
std::string estimand_name(Estimand e);
std::string mode_name(SandwichMode m);

struct InferenceResult {
    Estimand estimand = Estimand::sharp;
    SandwichMode mode = SandwichMode::asymptotic;
    double point = 0.0;
    double bias_hat = 0.0;
    double point_bc = 0.0;
    double se_plain = 0.0;
    double se_adjusted = 0.0;
    double tau0 = 0.0;
    double t_plain = 0.0;
    double t_adjusted = 0.0;
    double p_value = 1.0;  // two-sided, from t_adjusted
    std::pair<double, double> ci_plain{0.0, 0.0};
    std::pair<double, double> ci_adjusted{0.0, 0.0};
    double level = 0.95;
    std::vector<double> bandwidths;  // h_plus, h_minus[, hT_plus, hT_minus]
    std::vector<int> n_eff;
    std::vector<std::string> flags;
    std::map<std::string, double> diagnostics;
};

struct EstimatorConfig {
    int q = 7;
    KernelSpec kernel;
    double level = 0.95;
    BandwidthRequest bandwidth;
    SolverOptions solver;
    GridOptions grid;
};

double normal_quantile(double p);

// Everything the variance assembly needs from one equation on one side, with the
// asymptotic or fixed-n matrices already put on a common scale: the asymptotic
// matrices carry f_X/sigma and f_X so that both modes share one set of formulas.
struct SideModel {
    Side side = Side::above;
    SandwichMode mode = SandwichMode::asymptotic;
    int q = 0;
    double h = 0.0;
    double n = 0.0;       // side sample size
    double m_hat = 0.0;
    double m2 = 0.0;
    double D = 0.0;       // bias factor: Bias-hat = D m2 h^2 (a/2 asymptotically)
    SandwichSet s1;       // p = 1
    SandwichSet s2;       // p = 2
    std::vector<double> x;  // side running variable, kept for fixed-n cross terms
    double fx = 0.0;
    double sigma = 0.0;
    KernelMoments moments;

    double bias() const { return D * m2 * h * h; }
    double var_m() const;
    double var_bias() const;
    double cov_m_bias() const;
};

// Cross-equation covariances between two side models on the same side
// (outcome A, treatment B); phi indexes A's quantiles by row.
struct CrossTerms {
    double cov_mm = 0.0;   // Cov(m_A, m_B)
    double cov_bb = 0.0;   // Cov(Bias_A, Bias_B)
    double cov_m_a_b_b = 0.0;  // Cov(m_A, Bias_B)
    double cov_m_b_b_a = 0.0;  // Cov(m_B, Bias_A)
};
CrossTerms cross_terms(const SideModel& a, const SideModel& b, const Eigen::MatrixXd& phi,
                       const KernelSpec& kernel);

// One equation on one side: fits, pilot nuisances and the second derivative.
struct SideEquation {
    Side side = Side::above;
    double h = 0.0;
    std::vector<double> x;
    std::vector<double> y;
    LcqrFit fit1;
    std::optional<LcqrFit> fit2;
    double m2 = 0.0;
    bool m2_fallback = false;
    NuisanceEstimates nuis;

    SideModel model(SandwichMode mode, const KernelSpec& kernel) const;
};

SideEquation analyze_side(const std::vector<double>& x, const std::vector<double>& y, Side side,
                          double h, const NuisanceEstimates& nuis, const EstimatorConfig& cfg);

struct SharpEstimate {
    double tau_hat = 0.0;
    LcqrFit above;
    LcqrFit below;
};

SharpEstimate estimate_sharp(const RdSample& sample, int q, double h_plus, double h_minus,
                             const KernelSpec& kernel, const SolverOptions& opts = {});

struct BiasVariance {
    double bias_hat = 0.0;
    double var_plain = 0.0;
};
BiasVariance bias_and_variance(const SideModel& above, const SideModel& below);

// V per side: Var(m) + Var(Bias) - 2 Cov(m, Bias); throws NegativeAdjustedVariance.
double adjusted_variance(const SideModel& above, const SideModel& below);

InferenceResult adjusted_inference(const SideModel& above, const SideModel& below, double level,
                                   double tau0 = 0.0);

// Full sharp pipeline: pilots, bandwidths, fits, nuisances.
struct SharpAnalysis {
    EstimatorConfig cfg;
    BandwidthResult bw;
    SidePilot pilot_above;
    SidePilot pilot_below;
    SideEquation above;
    SideEquation below;

    InferenceResult result(SandwichMode mode, double tau0 = 0.0) const;
};

// Resolves cfg.bandwidth into (h_plus, h_minus), filling bw with the method and flags.
std::pair<double, double> choose_bandwidths(const EstimatorConfig& cfg, const SidePilot& above,
                                            const SidePilot& below, BandwidthResult& bw);

SharpAnalysis analyze_sharp(const RdSample& sample, const EstimatorConfig& cfg);

// Kink: p = 3 fits per side, point = b1_above - b1_below, plain s.e. from the
// first-slope entry of the p = 3 sandwich.
InferenceResult estimate_kink(const RdSample& sample, int q, double bandwidth, const KernelSpec& kernel,
                              const EstimatorConfig& cfg, SandwichMode mode = SandwichMode::fixed_n);

} // namespace rdlcqr
