#pragma once

#include <vector>

#include "rdlcqr/inference_sharp.hpp"

namespace rdlcqr {

struct LlrFit {
    double intercept = 0.0;
    double slope = 0.0;
    double cond_mean = 0.0;
    double bandwidth = 0.0;
    int n_effective = 0;
};

LlrFit fit_llr(const std::vector<double>& x, const std::vector<double>& y, double point, double bandwidth,
               const KernelSpec& kernel);

// MSE-optimal equal bandwidth for local linear regression from quartic pilots.
double llr_bandwidth(const SidePilot& above, const SidePilot& below, const KernelSpec& kernel, std::size_t n);

// tau_llr with plain s.e. b sigma^2 / (n h f) per side; bias uses the pilots'
// quartic second derivatives.
InferenceResult llr_inference(const RdSample& sample, double h_plus, double h_minus, const KernelSpec& kernel,
                              const SidePilot& above, const SidePilot& below, double level);

} // namespace rdlcqr
