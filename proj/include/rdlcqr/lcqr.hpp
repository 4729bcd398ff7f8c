#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "rdlcqr/kernels.hpp"

namespace rdlcqr {

struct RdSample {
    std::vector<double> x;
    std::vector<double> y;
    std::optional<std::vector<double>> t;
    std::optional<Eigen::MatrixXd> z;
    double cutoff = 0.0;

    std::size_t size() const { return x.size(); }
    // Throws InvalidInput on length mismatch, non-finite entries or non-binary t.
    void validate() const;
};

// One side of the cutoff, with the running variable centered at the cutoff.
struct SideData {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> t;  // empty unless the sample has a treatment column
    Side side = Side::above;
    std::size_t size() const { return x.size(); }
};

// Points with x >= cutoff form the above side.
SideData split_side(const RdSample& sample, Side side);

struct SolverOptions {
    double tol = 1e-8;
    int max_iter = 5000;
    double eps_scale = 1e-4;
    bool polish = true;       // snap to the nearest exact vertex after MM
    bool record_trace = true;
};

struct LcqrFit {
    int q = 0;
    int p = 0;
    std::vector<double> intercepts;
    std::vector<double> slopes;  // b_j in the units of (x - point)^j
    double cond_mean = 0.0;
    double bandwidth = 0.0;
    int n_effective = 0;
    double objective_value = 0.0;
    int iterations = 0;
    bool converged = false;
    bool polished = false;
    // Smoothed-objective value after each MM step; non-increasing.
    std::vector<double> trace;

    // Second derivative estimate 2 b_2 (requires p >= 2).
    double second_derivative() const;
};

double check_loss(double tau, double r);

// Composite check-loss objective at a boundary point.
double objective(const std::vector<double>& x, const std::vector<double>& y, double point,
                 const std::vector<double>& intercepts, const std::vector<double>& slopes,
                 int q, double bandwidth, const KernelSpec& kernel);

LcqrFit fit_boundary(const std::vector<double>& x, const std::vector<double>& y, double point,
                     int q, int p, double bandwidth, const KernelSpec& kernel,
                     const SolverOptions& opts = {});

// Generic composite quantile solver shared by fit_boundary and the covariate fit:
// minimizes sum_k sum_i w_i rho_{tau_k}(y_i - a_k - D_i beta). Rows with w_i <= 0 are dropped.
struct CompositeSolution {
    Eigen::VectorXd intercepts;
    Eigen::VectorXd beta;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    bool polished = false;
    std::vector<double> trace;
};

CompositeSolution solve_composite(const Eigen::VectorXd& y, const Eigen::MatrixXd& design,
                                  const Eigen::VectorXd& w, int q, const SolverOptions& opts);

double composite_objective(const Eigen::VectorXd& y, const Eigen::MatrixXd& design,
                           const Eigen::VectorXd& w, const Eigen::VectorXd& intercepts,
                           const Eigen::VectorXd& beta);

struct CovariateFit {
    double treatment_coef = 0.0;
    Eigen::VectorXd covariate_coefs;
    int n_effective = 0;
    int iterations = 0;
    bool converged = false;
};

// Pooled fit with regressors (x, T, T x, Z) where T = 1{x >= cutoff}.
CovariateFit fit_boundary_with_covariates(const RdSample& sample, int q, double bandwidth,
                                          const KernelSpec& kernel, const SolverOptions& opts = {});

} // namespace rdlcqr
