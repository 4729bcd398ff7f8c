#include "rdlcqr/are.hpp"

#include <boost/math/distributions/laplace.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "rdlcqr/errors.hpp"
#include "rdlcqr/nuisance.hpp"
#include "rdlcqr/sandwich.hpp"

namespace rdlcqr {

ErrorLaw ErrorLaw::normal(double sd) {
    ErrorLaw l;
    l.family_ = Family::normal;
    l.scale_ = sd;
    return l;
}

ErrorLaw ErrorLaw::laplace(double scale) {
    ErrorLaw l;
    l.family_ = Family::laplace;
    l.scale_ = scale;
    return l;
}

ErrorLaw ErrorLaw::student_t(double df) {
    if (!(df > 2)) throw Error(ErrorCode::InvalidInput, "student t needs df > 2 for a finite variance");
    ErrorLaw l;
    l.family_ = Family::student_t;
    l.df_ = df;
    return l;
}

ErrorLaw ErrorLaw::normal_mixture(std::vector<double> weights, std::vector<double> sds) {
    if (weights.size() != sds.size() || weights.empty())
        throw Error(ErrorCode::InvalidInput, "mixture weights and sds must match");
    double total = 0.0;
    for (double w : weights) total += w;
    for (double& w : weights) w /= total;
    ErrorLaw l;
    l.family_ = Family::normal_mixture;
    l.weights_ = std::move(weights);
    l.sds_ = std::move(sds);
    return l;
}

ErrorLaw ErrorLaw::scaled(double factor) const {
    ErrorLaw l = *this;
    l.scale_ *= factor;
    return l;
}

ErrorLaw ErrorLaw::standardized() const { return scaled(1.0 / std::sqrt(variance())); }

double ErrorLaw::variance() const {
    double base = 1.0;
    switch (family_) {
    case Family::normal: base = 1.0; break;
    case Family::laplace: base = 2.0; break;
    case Family::student_t: base = df_ / (df_ - 2.0); break;
    case Family::normal_mixture:
        base = 0.0;
        for (std::size_t i = 0; i < weights_.size(); ++i) base += weights_[i] * sds_[i] * sds_[i];
        break;
    }
    return base * scale_ * scale_;
}

double ErrorLaw::pdf(double x) const {
    const double z = x / scale_;
    double base = 0.0;
    switch (family_) {
    case Family::normal: base = boost::math::pdf(boost::math::normal_distribution<>(), z); break;
    case Family::laplace: base = boost::math::pdf(boost::math::laplace_distribution<>(), z); break;
    case Family::student_t: base = boost::math::pdf(boost::math::students_t_distribution<>(df_), z); break;
    case Family::normal_mixture:
        for (std::size_t i = 0; i < weights_.size(); ++i)
            base += weights_[i] * boost::math::pdf(boost::math::normal_distribution<>(0.0, sds_[i]), z);
        break;
    }
    return base / scale_;
}

double ErrorLaw::cdf(double x) const {
    const double z = x / scale_;
    switch (family_) {
    case Family::normal: return boost::math::cdf(boost::math::normal_distribution<>(), z);
    case Family::laplace: return boost::math::cdf(boost::math::laplace_distribution<>(), z);
    case Family::student_t: return boost::math::cdf(boost::math::students_t_distribution<>(df_), z);
    case Family::normal_mixture: {
        double s = 0.0;
        for (std::size_t i = 0; i < weights_.size(); ++i)
            s += weights_[i] * boost::math::cdf(boost::math::normal_distribution<>(0.0, sds_[i]), z);
        return s;
    }
    }
    return 0.0;
}

double ErrorLaw::quantile(double p) const {
    if (!(p > 0 && p < 1)) throw Error(ErrorCode::QuantileInversionFailure, "quantile level must be in (0,1)");
    switch (family_) {
    case Family::normal: return scale_ * boost::math::quantile(boost::math::normal_distribution<>(), p);
    case Family::laplace: return scale_ * boost::math::quantile(boost::math::laplace_distribution<>(), p);
    case Family::student_t:
        return scale_ * boost::math::quantile(boost::math::students_t_distribution<>(df_), p);
    case Family::normal_mixture: break;
    }
    // Bisection on the mixture CDF.
    double sd_max = 0.0;
    for (double s : sds_) sd_max = std::max(sd_max, s);
    double lo = -60.0 * sd_max * scale_;
    double hi = 60.0 * sd_max * scale_;
    if (!(cdf(lo) < p && cdf(hi) > p)) throw Error(ErrorCode::QuantileInversionFailure, "mixture quantile not bracketed");
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (cdf(mid) < p) lo = mid;
        else hi = mid;
    }
    if (hi - lo > 1e-12) throw Error(ErrorCode::QuantileInversionFailure, "mixture bisection did not converge");
    return 0.5 * (lo + hi);
}

std::string ErrorLaw::name() const {
    std::ostringstream os;
    switch (family_) {
    case Family::normal: os << "normal"; break;
    case Family::laplace: os << "laplace"; break;
    case Family::student_t: os << "t" << df_; break;
    case Family::normal_mixture:
        os << "mixture(";
        for (std::size_t i = 0; i < weights_.size(); ++i) os << (i ? "," : "") << weights_[i] << "N(0," << sds_[i] << "^2)";
        os << ")";
        break;
    }
    return os.str();
}

ErrorLaw reference_law(int index) {
    switch (index) {
    case 1: return ErrorLaw::normal();
    case 2: return ErrorLaw::laplace(1.0);
    case 3: return ErrorLaw::student_t(3.0);
    case 4: return ErrorLaw::normal_mixture({0.95, 0.05}, {1.0, 3.0});
    case 5: return ErrorLaw::normal_mixture({0.95, 0.05}, {1.0, 10.0});
    default: break;
    }
    throw Error(ErrorCode::InvalidInput, "error law index must be 1..5");
}

std::string reference_law_key(int index) {
    static const char* keys[] = {"normal", "laplace", "t3", "mix3", "mix10"};
    if (index < 1 || index > 5) throw Error(ErrorCode::InvalidInput, "error law index must be 1..5");
    return keys[index - 1];
}

ErrorLaw parse_law(const std::string& key) {
    for (int i = 1; i <= 5; ++i)
        if (key == reference_law_key(i)) return reference_law(i);
    if (key.size() > 1 && key[0] == 't') return ErrorLaw::student_t(std::stod(key.substr(1)));
    throw Error(ErrorCode::InvalidInput, "unknown error law: " + key);
}

double compute_are(const ErrorLaw& law, int q, const KernelSpec& kernel) {
    const QuantileGrid grid = estimate_grid(law.standardized(), q);
    const KernelMoments mom = one_sided_moments(kernel, Side::above, 7);
    const SandwichSet set = build_asymptotic(mom, grid, 1);
    const ScalarConstants c = constants(set, mom, grid);
    return std::pow(*c.b_Y / c.kernel.b, -0.8);
}

AreTable are_table(const std::vector<std::string>& laws, const std::vector<int>& qs, const KernelSpec& kernel) {
    AreTable t;
    t.laws = laws;
    t.qs = qs;
    t.values.assign(laws.size(), std::vector<double>(qs.size(), 0.0));
    std::vector<ErrorLaw> parsed;
    for (const auto& l : laws) parsed.push_back(parse_law(l));
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t i = 0; i < laws.size(); ++i)
        for (std::size_t j = 0; j < qs.size(); ++j) t.values[i][j] = compute_are(parsed[i], qs[j], kernel);
    return t;
}

std::string format_are_table(const AreTable& t, const std::string& format) {
    std::ostringstream os;
    os << std::setprecision(6);
    if (format == "md") {
        os << "| law |";
        for (int q : t.qs) os << " q=" << q << " |";
        os << "\n|---|";
        for (std::size_t j = 0; j < t.qs.size(); ++j) os << "---|";
        os << "\n";
        for (std::size_t i = 0; i < t.laws.size(); ++i) {
            os << "| " << t.laws[i] << " |";
            for (double v : t.values[i]) os << " " << std::fixed << std::setprecision(4) << v << " |";
            os << "\n";
        }
        return os.str();
    }
    if (format != "csv") throw Error(ErrorCode::InvalidInput, "format must be csv or md");
    os << "law";
    for (int q : t.qs) os << ",q" << q;
    os << "\n";
    for (std::size_t i = 0; i < t.laws.size(); ++i) {
        os << t.laws[i];
        for (double v : t.values[i]) os << "," << v;
        os << "\n";
    }
    return os.str();
}

} // namespace rdlcqr
