#pragma once

// Reference computations used only by the tests. Nothing here calls into the
// library, so agreement with the library is a genuine cross-check.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

// Composite 10-point Gauss-Legendre rule on `panels` equal panels.
inline double integrate(const std::function<double(double)>& f, double lo, double hi, int panels = 400) {
    static const double xs[5] = {0.1488743389816312, 0.4333953941292472, 0.6794095682990244, 0.8650633666889845,
                                 0.9739065285171717};
    static const double ws[5] = {0.2955242247147529, 0.2692667193099963, 0.2190863625159820, 0.1494513491505806,
                                 0.0666713443086881};
    const double width = (hi - lo) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = lo + (p + 0.5) * width;
        const double half = 0.5 * width;
        for (int i = 0; i < 5; ++i)
            total += ws[i] * half * (f(mid - half * xs[i]) + f(mid + half * xs[i]));
    }
    return total;
}

inline double triangular(double u) { return std::abs(u) <= 1.0 ? 1.0 - std::abs(u) : 0.0; }
inline double epanechnikov(double u) { return std::abs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0; }
inline double uniform(double u) { return std::abs(u) <= 1.0 ? 0.5 : 0.0; }

inline double rho(double tau, double r) { return r >= 0 ? tau * r : (tau - 1.0) * r; }

// Minimum of sum_i w_i rho_tau(r_i - a) over a, by trying every r_i (the
// objective is piecewise linear with kinks only at data values).
inline double best_intercept_loss(const std::vector<double>& r, const std::vector<double>& w, double tau,
                                  double* arg = nullptr) {
    double best = std::numeric_limits<double>::infinity();
    for (double a : r) {
        double s = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) s += w[i] * rho(tau, r[i] - a);
        if (s < best) {
            best = s;
            if (arg) *arg = a;
        }
    }
    return best;
}

// Composite profile objective for fixed slopes: intercepts optimized exactly.
inline double profile(const std::vector<double>& y, const std::vector<std::vector<double>>& cols,
                      const std::vector<double>& w, const std::vector<double>& beta, int q) {
    std::vector<double> r(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        r[i] = y[i];
        for (std::size_t j = 0; j < beta.size(); ++j) r[i] -= beta[j] * cols[j][i];
    }
    double total = 0.0;
    for (int k = 1; k <= q; ++k) total += best_intercept_loss(r, w, double(k) / double(q + 1));
    return total;
}

// Exact minimum of the composite check loss with one shared slope. The profile
// in the slope is convex and piecewise linear with kinks where two residuals
// cross, so the minimum sits at one of the pairwise slopes.
inline double exact_composite_p1(const std::vector<double>& x, const std::vector<double>& y,
                                 const std::vector<double>& w, int q) {
    std::vector<std::vector<double>> cols{x};
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            if (x[i] == x[j]) continue;
            const double b = (y[i] - y[j]) / (x[i] - x[j]);
            best = std::min(best, profile(y, cols, w, {b}, q));
        }
    return best;
}

// Same idea with two shared slopes (x, x^2): the minimum is at a vertex where
// two independent crossing conditions hold.
inline double exact_composite_p2(const std::vector<double>& x, const std::vector<double>& y,
                                 const std::vector<double>& w, int q) {
    std::vector<double> x2(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) x2[i] = x[i] * x[i];
    std::vector<std::vector<double>> cols{x, x2};
    struct Line {
        double a, b, c;  // a b1 + b b2 = c
    };
    std::vector<Line> lines;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = i + 1; j < x.size(); ++j)
            lines.push_back({x[i] - x[j], x2[i] - x2[j], y[i] - y[j]});
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < lines.size(); ++s)
        for (std::size_t t = s + 1; t < lines.size(); ++t) {
            const double det = lines[s].a * lines[t].b - lines[s].b * lines[t].a;
            if (std::abs(det) < 1e-12) continue;
            const double b1 = (lines[s].c * lines[t].b - lines[s].b * lines[t].c) / det;
            const double b2 = (lines[s].a * lines[t].c - lines[s].c * lines[t].a) / det;
            best = std::min(best, profile(y, cols, w, {b1, b2}, q));
        }
    return best;
}

// Weighted least squares of y on (1, x) by explicit normal-equation sums.
inline std::pair<double, double> naive_wls(const std::vector<double>& x, const std::vector<double>& y,
                                           const std::vector<double>& w) {
    double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        s0 += w[i];
        s1 += w[i] * x[i];
        s2 += w[i] * x[i] * x[i];
        t0 += w[i] * y[i];
        t1 += w[i] * x[i] * y[i];
    }
    const double det = s0 * s2 - s1 * s1;
    return {(s2 * t0 - s1 * t1) / det, (s0 * t1 - s1 * t0) / det};
}

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Inverse of a monotone cdf by plain bisection.
inline double invert_cdf(const std::function<double(double)>& cdf, double p, double lo = -60, double hi = 60) {
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline double slope_of(const std::vector<double>& xs, const std::vector<double>& ys) {
    const double n = double(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    return sxy / sxx;
}

} // namespace oracle
