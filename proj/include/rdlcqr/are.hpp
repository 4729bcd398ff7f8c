#pragma once

#include <string>
#include <vector>

#include "rdlcqr/kernels.hpp"

namespace rdlcqr {

class ErrorLaw {
public:
    enum class Family { normal, laplace, student_t, normal_mixture };

    static ErrorLaw normal(double sd = 1.0);
    static ErrorLaw laplace(double scale = 1.0);
    static ErrorLaw student_t(double df);
    static ErrorLaw normal_mixture(std::vector<double> weights, std::vector<double> sds);

    // Same law rescaled to unit variance.
    ErrorLaw standardized() const;
    ErrorLaw scaled(double factor) const;

    double pdf(double x) const;
    double cdf(double x) const;
    double quantile(double p) const;
    double variance() const;

    Family family() const { return family_; }
    double df() const { return df_; }
    double scale() const { return scale_; }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<double>& sds() const { return sds_; }
    std::string name() const;

private:
    Family family_ = Family::normal;
    double df_ = 0.0;
    double scale_ = 1.0;   // multiplies the base law
    std::vector<double> weights_;
    std::vector<double> sds_;
};

// The five error laws used by the simulation designs, index 1..5, unstandardized.
ErrorLaw reference_law(int index);
std::string reference_law_key(int index);
// Parses names such as normal, laplace, t3, mix3, mix10.
ErrorLaw parse_law(const std::string& key);

double compute_are(const ErrorLaw& law, int q, const KernelSpec& kernel);

struct AreTable {
    std::vector<std::string> laws;
    std::vector<int> qs;
    std::vector<std::vector<double>> values;  // [law][q]
};

AreTable are_table(const std::vector<std::string>& laws, const std::vector<int>& qs, const KernelSpec& kernel);
std::string format_are_table(const AreTable& table, const std::string& format);

} // namespace rdlcqr
