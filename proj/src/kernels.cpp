#include "rdlcqr/kernels.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "rdlcqr/errors.hpp"

namespace rdlcqr {

namespace {

constexpr double kGaussianBound = 8.0;
const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * M_PI);

// Closed-form int_0^1 u^j K(u)^power du for the polynomial kernels.
double polynomial_half_moment(KernelFamily family, int j, int power) {
    const double jj = j;
    switch (family) {
    case KernelFamily::triangular:
        if (power == 1) return 1.0 / (jj + 1) - 1.0 / (jj + 2);
        return 1.0 / (jj + 1) - 2.0 / (jj + 2) + 1.0 / (jj + 3);
    case KernelFamily::epanechnikov:
        if (power == 1) return 0.75 * (1.0 / (jj + 1) - 1.0 / (jj + 3));
        return 0.5625 * (1.0 / (jj + 1) - 2.0 / (jj + 3) + 1.0 / (jj + 5));
    case KernelFamily::uniform:
        if (power == 1) return 0.5 / (jj + 1);
        return 0.25 / (jj + 1);
    case KernelFamily::gaussian:
        break;
    }
    throw Error(ErrorCode::InvalidInput, "no closed form for the gaussian kernel");
}

// Antiderivative of K from 0 to u, for u in [-bound, bound].
double kernel_cdf0(const KernelSpec& spec, double u) {
    const double s = u < 0 ? -1.0 : 1.0;
    const double a = std::abs(u);
    double v = 0.0;
    switch (spec.family) {
    case KernelFamily::triangular: v = a - 0.5 * a * a; break;
    case KernelFamily::epanechnikov: v = 0.75 * (a - a * a * a / 3.0); break;
    case KernelFamily::uniform: v = 0.5 * a; break;
    case KernelFamily::gaussian: v = 0.5 * std::erf(a / std::sqrt(2.0)); break;
    }
    return s * v;
}

} // namespace

KernelSpec KernelSpec::make(KernelFamily family) {
    KernelSpec k;
    k.family = family;
    k.support_bound = family == KernelFamily::gaussian ? std::numeric_limits<double>::infinity() : 1.0;
    return k;
}

double KernelSpec::effective_bound() const {
    return std::isfinite(support_bound) ? support_bound : kGaussianBound;
}

KernelSpec parse_kernel(const std::string& name) {
    if (name == "triangular") return KernelSpec::make(KernelFamily::triangular);
    if (name == "epanechnikov") return KernelSpec::make(KernelFamily::epanechnikov);
    if (name == "uniform") return KernelSpec::make(KernelFamily::uniform);
    if (name == "gaussian") return KernelSpec::make(KernelFamily::gaussian);
    throw Error(ErrorCode::InvalidInput, "unknown kernel: " + name);
}

std::string kernel_name(KernelFamily family) {
    switch (family) {
    case KernelFamily::triangular: return "triangular";
    case KernelFamily::epanechnikov: return "epanechnikov";
    case KernelFamily::uniform: return "uniform";
    case KernelFamily::gaussian: return "gaussian";
    }
    return "unknown";
}

double eval_kernel(const KernelSpec& spec, double u) {
    const double a = std::abs(u);
    switch (spec.family) {
    case KernelFamily::triangular: return a < 1.0 ? 1.0 - a : 0.0;
    case KernelFamily::epanechnikov: return a < 1.0 ? 0.75 * (1.0 - a * a) : 0.0;
    case KernelFamily::uniform: return a <= 1.0 ? 0.5 : 0.0;
    case KernelFamily::gaussian: return kInvSqrt2Pi * std::exp(-0.5 * u * u);
    }
    return 0.0;
}

double kernel_moment_quadrature(const KernelSpec& spec, int j, int power, double lo, double hi) {
    auto integrand = [&](double u) {
        const double k = eval_kernel(spec, u);
        return std::pow(u, j) * (power == 1 ? k : k * k);
    };
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, lo, hi, 20, 1e-15, &err);
}

KernelMoments one_sided_moments(const KernelSpec& spec, Side side, int max_order) {
    if (max_order < 3 || max_order > 16)
        throw Error(ErrorCode::UnsupportedOrder, "moment order must lie in [3, 16]");
    KernelMoments m;
    m.side = side;
    m.mu.resize(max_order + 1);
    m.nu.resize(max_order + 1);
    const double bound = spec.effective_bound();
    for (int j = 0; j <= max_order; ++j) {
        double mu = 0.0;
        double nu = 0.0;
        if (spec.is_polynomial()) {
            mu = polynomial_half_moment(spec.family, j, 1);
            nu = polynomial_half_moment(spec.family, j, 2);
        } else {
            mu = kernel_moment_quadrature(spec, j, 1, 0.0, bound);
            nu = kernel_moment_quadrature(spec, j, 2, 0.0, bound);
        }
        // Mirror for the below side: int_{-b}^0 u^j K = (-1)^j int_0^b u^j K.
        const double sign = (side == Side::below && j % 2 == 1) ? -1.0 : 1.0;
        m.mu[j] = sign * mu;
        m.nu[j] = sign * nu;
    }
    return m;
}

double kernel_mass(const KernelSpec& spec, double lo, double hi) {
    const double b = spec.effective_bound();
    lo = std::clamp(lo, -b, b);
    hi = std::clamp(hi, -b, b);
    if (hi <= lo) return 0.0;
    return kernel_cdf0(spec, hi) - kernel_cdf0(spec, lo);
}

} // namespace rdlcqr
