#include "rdlcqr/dgp.hpp"

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/beta_distribution.hpp>
#include <boost/random/laplace_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/student_t_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <cmath>
#include <random>

#include "rdlcqr/errors.hpp"

namespace rdlcqr {

namespace {

using Quintic = std::array<double, 6>;

constexpr Quintic kLeeBelow{0.48, 1.27, 7.18, 20.21, 21.54, 7.33};
constexpr Quintic kLeeAbove{0.52, 0.84, -3.00, 7.99, -9.01, 3.56};
constexpr Quintic kLmBelow{3.71, 2.30, 3.28, 1.45, 0.23, 0.03};
constexpr Quintic kLmAbove{0.26, 18.49, -54.81, 74.30, -45.02, 9.83};

// Covariate design: outcome and covariate means, error scales and correlation.
constexpr Quintic kCovYBelow{0.36, 0.96, 5.47, 15.28, 15.87, 5.14};
constexpr Quintic kCovYAbove{0.38, 0.62, -2.84, 8.42, -10.24, 4.31};
constexpr Quintic kCovZBelow{0.49, 1.06, 5.74, 17.14, 19.75, 7.47};
constexpr Quintic kCovZAbove{0.49, 0.61, 0.23, -3.46, 6.43, -3.48};
constexpr double kCovSigmaY = 0.1295;
constexpr double kCovSigmaZ = 0.1353;
constexpr double kCovRho = 0.2692;

double horner(const Quintic& c, double x) {
    double v = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
    return v;
}

const Quintic& coefficients(MeanModel model, bool above) {
    if (model == MeanModel::lee) return above ? kLeeAbove : kLeeBelow;
    return above ? kLmAbove : kLmBelow;
}

double draw_running(Rng& rng) {
    boost::random::beta_distribution<double> beta(2.0, 4.0);
    return 2.0 * beta(rng) - 1.0;
}

} // namespace

Rng make_stream(std::uint64_t seed, std::uint64_t rep) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(rep), static_cast<std::uint32_t>(rep >> 32)};
    return Rng(seq);
}

double mean_function(MeanModel model, double x) { return horner(coefficients(model, x >= 0), x); }

double true_effect(MeanModel model) { return coefficients(model, true)[0] - coefficients(model, false)[0]; }

double true_kink(MeanModel model) { return coefficients(model, true)[1] - coefficients(model, false)[1]; }

double sigma_function(bool heteroskedastic, double x, bool hetero_literal) {
    if (!heteroskedastic) return 0.5;
    const double c = std::cos(2.0 * M_PI * x);
    return hetero_literal ? 2.0 + c / 10.0 : (2.0 + c) / 10.0;
}

double fuzzy_true_effect(const DgpSpec& spec) {
    const FuzzyOverlay overlay = spec.fuzzy.value_or(FuzzyOverlay{});
    return true_effect(spec.model) / (overlay.p_above - overlay.p_below);
}

double draw_error(const ErrorLaw& law, Rng& rng) {
    double base = 0.0;
    switch (law.family()) {
    case ErrorLaw::Family::normal: base = boost::random::normal_distribution<double>()(rng); break;
    case ErrorLaw::Family::laplace: base = boost::random::laplace_distribution<double>()(rng); break;
    case ErrorLaw::Family::student_t: base = boost::random::student_t_distribution<double>(law.df())(rng); break;
    case ErrorLaw::Family::normal_mixture: {
        const double u = boost::random::uniform_01<double>()(rng);
        const auto& w = law.weights();
        std::size_t k = 0;
        double acc = w[0];
        while (u > acc && k + 1 < w.size()) acc += w[++k];
        base = law.sds()[k] * boost::random::normal_distribution<double>()(rng);
        break;
    }
    }
    return law.scale() * base;
}

RdSample draw_sample(const DgpSpec& spec, Rng& rng) {
    if (spec.n < 1) throw Error(ErrorCode::InvalidInput, "sample size must be positive");
    ErrorLaw law = reference_law(spec.law_index);
    if (!spec.raw_scale) law = law.standardized();
    RdSample s;
    s.x.resize(spec.n);
    s.y.resize(spec.n);
    if (spec.fuzzy) s.t.emplace(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const double x = draw_running(rng);
        s.x[i] = x;
        s.y[i] = mean_function(spec.model, x) + sigma_function(spec.heteroskedastic, x, spec.hetero_literal) * draw_error(law, rng);
        if (spec.fuzzy) {
            const double p = x >= 0 ? spec.fuzzy->p_above : spec.fuzzy->p_below;
            (*s.t)[i] = boost::random::bernoulli_distribution<double>(p)(rng) ? 1.0 : 0.0;
        }
    }
    return s;
}

RdSample draw_covariate_sample(const CovariateDgp& spec, Rng& rng) {
    if (spec.model < 1 || spec.model > 4) throw Error(ErrorCode::InvalidInput, "covariate model must be 1..4");
    const double rho = spec.model == 3 ? 0.0 : spec.model == 4 ? 2.0 * kCovRho : kCovRho;
    RdSample s;
    s.x.resize(spec.n);
    s.y.resize(spec.n);
    Eigen::MatrixXd z(spec.n, 1);
    boost::random::normal_distribution<double> std_normal;
    for (std::size_t i = 0; i < spec.n; ++i) {
        const double x = draw_running(rng);
        const double e1 = std_normal(rng);
        const double e2 = std_normal(rng);
        const double ey = kCovSigmaY * e1;
        const double ez = kCovSigmaZ * (rho * e1 + std::sqrt(1.0 - rho * rho) * e2);
        const bool above = x >= 0;
        const double zi = horner(above ? kCovZAbove : kCovZBelow, x) + ez;
        double yi = 0.0;
        if (spec.model == 1) {
            yi = mean_function(MeanModel::lee, x);
        } else {
            yi = horner(above ? kCovYAbove : kCovYBelow, x) + (above ? 0.28 : 0.22) * zi;
        }
        s.x[i] = x;
        s.y[i] = yi + ey;
        z(static_cast<Eigen::Index>(i), 0) = zi;
    }
    s.z = std::move(z);
    return s;
}

} // namespace rdlcqr
