#pragma once

#include <optional>

#include "rdlcqr/inference_sharp.hpp"

namespace rdlcqr {

constexpr double kWeakIdThreshold = 0.05;

struct FuzzyBandwidths {
    double hy_plus = 0.0;
    double hy_minus = 0.0;
    double ht_plus = 0.0;
    double ht_minus = 0.0;
};

struct FuzzyComponents {
    SideEquation y_above, y_below, t_above, t_below;
    Eigen::MatrixXd phi_above, phi_below;
    double numerator = 0.0;
    double denominator = 0.0;
    bool weak = false;
    // A treatment indicator constant on one side carries no sampling noise there.
    bool t_constant_above = false;
    bool t_constant_below = false;
};

struct FuzzyEstimate {
    std::optional<double> tau_hat;  // suppressed under weak identification
    FuzzyComponents comp;
};

FuzzyEstimate estimate_fuzzy(const RdSample& sample, const FuzzyBandwidths& bw, const EstimatorConfig& cfg,
                             const SidePilot* pilot_above = nullptr, const SidePilot* pilot_below = nullptr);

// Bias and long-form delta-method variance of the ratio estimator.
BiasVariance fuzzy_bias_and_variance(const FuzzyComponents& comp, SandwichMode mode, const KernelSpec& kernel);

struct NullRestrictedTerms {
    double tau_tilde = 0.0;
    double bias = 0.0;
    double variance = 0.0;
};

// The ten-term per-side variance summed over sides.
NullRestrictedTerms null_restricted_terms(const FuzzyComponents& comp, double tau0, SandwichMode mode,
                                          const KernelSpec& kernel);

struct TestInversion {
    double lo = 0.0;
    double hi = 0.0;
    bool open_lo = false;
    bool open_hi = false;
    bool empty = false;
};

InferenceResult null_restricted_test(const FuzzyComponents& comp, double tau0, SandwichMode mode,
                                     const KernelSpec& kernel, double level, bool invert_ci = false);

TestInversion invert_null_test(const FuzzyComponents& comp, double center, double half_width,
                               SandwichMode mode, const KernelSpec& kernel, double level, int points = 201);

struct FuzzyAnalysis {
    EstimatorConfig cfg;
    BandwidthResult bw_y;
    FuzzyEstimate est;
    InferenceResult result(SandwichMode mode, double tau0, bool invert_ci) const;
};

FuzzyAnalysis analyze_fuzzy(const RdSample& sample, const EstimatorConfig& cfg,
                            std::optional<FuzzyBandwidths> t_override = std::nullopt);

} // namespace rdlcqr
