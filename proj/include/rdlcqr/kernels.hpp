#pragma once

#include <array>
#include <limits>
#include <string>
#include <vector>

namespace rdlcqr {

enum class KernelFamily { triangular, epanechnikov, uniform, gaussian };
enum class Side { above, below };

struct KernelSpec {
    KernelFamily family = KernelFamily::triangular;
    // Support is [-support_bound, support_bound]; infinity for the gaussian.
    double support_bound = 1.0;

    static KernelSpec make(KernelFamily family);
    // Finite integration limit: the support bound, or 8 for the gaussian.
    double effective_bound() const;
    bool is_polynomial() const { return family != KernelFamily::gaussian; }
};

KernelSpec parse_kernel(const std::string& name);
std::string kernel_name(KernelFamily family);

double eval_kernel(const KernelSpec& spec, double u);

struct KernelMoments {
    Side side = Side::above;
    std::vector<double> mu;  // mu[j] = int u^j K(u) du over the side
    std::vector<double> nu;  // nu[j] = int u^j K(u)^2 du over the side
};

// Moments over [0, bound] (above) or [-bound, 0] (below); max_order in [3, 16].
KernelMoments one_sided_moments(const KernelSpec& spec, Side side, int max_order = 7);

// Adaptive Gauss-Kronrod integral of u^j K(u)^power over [lo, hi].
double kernel_moment_quadrature(const KernelSpec& spec, int j, int power, double lo, double hi);

// Mass of the kernel over [lo, hi], clipped to the effective support.
double kernel_mass(const KernelSpec& spec, double lo, double hi);

} // namespace rdlcqr
