#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "rdlcqr/kernels.hpp"
#include "rdlcqr/nuisance.hpp"

namespace rdlcqr {

enum class SandwichMode { asymptotic, fixed_n };

// Parameters are ordered (a_1..a_q, b_1..b_p); the 11 block is q x q.
struct SandwichSet {
    SandwichMode mode = SandwichMode::asymptotic;
    int q = 0;
    int p = 0;
    Eigen::MatrixXd S;
    Eigen::MatrixXd Sigma;
    Eigen::MatrixXd S_inv;

    Eigen::MatrixXd middle() const { return S_inv * Sigma * S_inv; }
};

constexpr double kMaxCondition = 1e12;

// Inverts a small symmetric matrix; throws SingularS past kMaxCondition.
Eigen::MatrixXd guarded_inverse(const Eigen::MatrixXd& m);

Eigen::MatrixXd build_S(const KernelMoments& mom, const Eigen::VectorXd& f, int p);
Eigen::MatrixXd build_Sigma(const KernelMoments& mom, const Eigen::MatrixXd& pair, int p);

SandwichSet build_asymptotic(const KernelMoments& mom, const QuantileGrid& grid, int p);

// Covariance between the Y and T score vectors; pair is phi (rows index Y quantiles).
Eigen::MatrixXd build_cross_asymptotic(const KernelMoments& mom, const Eigen::MatrixXd& phi, int p);

// Empirical-sum versions. x is the side's centered running variable, sigma_i the
// per-point error scale, n the side's sample size.
SandwichSet build_fixed_n(const std::vector<double>& x, const QuantileGrid& grid, double h,
                          const KernelSpec& kernel, const std::vector<double>& sigma_i, int p);

Eigen::MatrixXd build_cross_fixed_n(const std::vector<double>& x, const Eigen::MatrixXd& phi,
                                    double h_y, double h_t, const KernelSpec& kernel, int p);

struct BoundaryConstants {
    double a = 0.0;
    double a_check = 0.0;
    double a_tilde = 0.0;
    double b = 0.0;
};

BoundaryConstants boundary_constants(const KernelMoments& mom);

struct ScalarConstants {
    BoundaryConstants kernel;
    std::optional<double> b_Y;     // from a p = 1 set
    std::optional<double> b_star;  // from a p >= 2 set
    std::optional<double> cross;   // e^T (S^-1 Sigma S^-1)_{12} column of b_2, p >= 2
    std::optional<double> a_star;  // from a p = 3 set
};

ScalarConstants constants(const SandwichSet& set, const KernelMoments& mom, const QuantileGrid& grid);

// e^T M_11 e / q^2 for any (q+p) square M.
double intercept_average(const Eigen::MatrixXd& m, int q);
// e^T M_{12} e_2 (sum over intercept rows of the b_2 column).
double intercept_curvature_cross(const Eigen::MatrixXd& m, int q);
// e_2^T M_22 e_2.
double curvature_entry(const Eigen::MatrixXd& m, int q);

// b_YT = e^T (S_Y^-1 Sigma_YT S_T^-1)_{11} e / q^2 from p = 1 sets.
double b_YT(const SandwichSet& y_set, const Eigen::MatrixXd& sigma_yt, const SandwichSet& t_set);

} // namespace rdlcqr
