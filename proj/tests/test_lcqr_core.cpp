#include <doctest.h>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <cmath>

#include "oracles.hpp"
#include "rdlcqr/dgp.hpp"
#include "rdlcqr/errors.hpp"
#include "rdlcqr/lcqr.hpp"

using namespace rdlcqr;

namespace {

const KernelSpec tri = KernelSpec::make(KernelFamily::triangular);

struct Xy {
    std::vector<double> x, y;
};

Xy noisy_sample(std::uint64_t seed, int n, double noise = 0.4) {
    Rng rng = make_stream(seed, 0);
    boost::random::uniform_01<double> u;
    boost::random::normal_distribution<double> z;
    Xy s;
    for (int i = 0; i < n; ++i) {
        const double x = 0.9 * u(rng);
        s.x.push_back(x);
        s.y.push_back(0.5 + 1.5 * x - x * x + noise * z(rng));
    }
    return s;
}

} // namespace

TEST_CASE("objective: worked values") {
    CHECK(objective({0.0}, {1.0}, 0.0, {1.0}, {0.0}, 1, 0.5, tri) == doctest::Approx(0.0));
    CHECK(objective({0.0}, {2.0}, 0.0, {0.0}, {0.0}, 1, 0.5, tri) == doctest::Approx(1.0));
    // Residual -1 at tau = 1/3 and 2/3.
    CHECK(objective({0.0}, {0.0}, 0.0, {1.0, 1.0}, {0.0}, 2, 1.0, tri) == doctest::Approx(1.0));
    CHECK(check_loss(0.25, -2.0) == doctest::Approx(1.5));
    CHECK(check_loss(0.25, 2.0) == doctest::Approx(0.5));
}

TEST_CASE("noiseless linear data is fitted exactly") {
    std::vector<double> x, y;
    for (int i = 0; i < 30; ++i) {
        x.push_back(i / 40.0);
        y.push_back(2.0 + 3.0 * x.back());
    }
    for (int q : {1, 3, 7}) {
        const LcqrFit f = fit_boundary(x, y, 0.0, q, 1, 1.0, tri);
        for (double a : f.intercepts) CHECK(a == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(f.slopes[0] == doctest::Approx(3.0).epsilon(1e-9));
        CHECK(f.objective_value < 1e-9);
        CHECK(f.cond_mean == doctest::Approx(2.0).epsilon(1e-9));
    }
}

TEST_CASE("cond_mean is the mean of the intercepts") {
    const Xy s = noisy_sample(3, 80);
    const LcqrFit f = fit_boundary(s.x, s.y, 0.0, 7, 1, 0.8, tri);
    double m = 0.0;
    for (double a : f.intercepts) m += a;
    CHECK(f.cond_mean == m / 7.0);
    CHECK(f.converged);
}

TEST_CASE("MM matches the exact profile-enumeration minimum, p = 1") {
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        const int q = int(seed % 3) * 2 + 1;
        const Xy s = noisy_sample(seed, 10 + int(seed));
        std::vector<double> w;
        for (double xi : s.x) w.push_back(eval_kernel(tri, xi));
        const LcqrFit f = fit_boundary(s.x, s.y, 0.0, q, 1, 1.0, tri);
        const double exact = oracle::exact_composite_p1(s.x, s.y, w, q);
        CHECK(objective(s.x, s.y, 0.0, f.intercepts, f.slopes, q, 1.0, tri) <= exact * (1 + 1e-8));
    }
}

TEST_CASE("MM matches the exact vertex enumeration, p = 2") {
    for (std::uint64_t seed = 21; seed <= 24; ++seed) {
        const Xy s = noisy_sample(seed, 9);
        std::vector<double> w;
        for (double xi : s.x) w.push_back(eval_kernel(tri, xi));
        const LcqrFit f = fit_boundary(s.x, s.y, 0.0, 3, 2, 1.0, tri);
        const double exact = oracle::exact_composite_p2(s.x, s.y, w, 3);
        CHECK(objective(s.x, s.y, 0.0, f.intercepts, f.slopes, 3, 1.0, tri) <= exact * (1 + 1e-8));
    }
}

TEST_CASE("q = 1 is weighted median regression") {
    const Xy s = noisy_sample(5, 15);
    std::vector<double> w;
    for (double xi : s.x) w.push_back(eval_kernel(tri, xi));
    const LcqrFit f = fit_boundary(s.x, s.y, 0.0, 1, 1, 1.0, tri);
    // Median loss is half the absolute loss.
    double abs_loss = 0.0;
    for (std::size_t i = 0; i < s.x.size(); ++i)
        abs_loss += w[i] * std::abs(s.y[i] - f.intercepts[0] - f.slopes[0] * s.x[i]);
    CHECK(0.5 * abs_loss == doctest::Approx(oracle::exact_composite_p1(s.x, s.y, w, 1)).epsilon(1e-8));
}

TEST_CASE("MM trace is non-increasing") {
    const Xy s = noisy_sample(8, 200, 1.0);
    const LcqrFit f = fit_boundary(s.x, s.y, 0.0, 7, 2, 0.6, tri);
    REQUIRE(f.trace.size() > 1);
    for (std::size_t k = 1; k < f.trace.size(); ++k) CHECK(f.trace[k] <= f.trace[k - 1] * (1 + 1e-12));
}

TEST_CASE("location and scale equivariance") {
    const Xy s = noisy_sample(11, 60);
    const LcqrFit base = fit_boundary(s.x, s.y, 0.0, 5, 1, 0.9, tri);
    std::vector<double> shifted = s.y, scaled = s.y;
    for (double& v : shifted) v += 4.25;
    for (double& v : scaled) v *= 3.0;
    const LcqrFit fs = fit_boundary(s.x, shifted, 0.0, 5, 1, 0.9, tri);
    const LcqrFit fc = fit_boundary(s.x, scaled, 0.0, 5, 1, 0.9, tri);
    for (int k = 0; k < 5; ++k) {
        CHECK(fs.intercepts[k] == doctest::Approx(base.intercepts[k] + 4.25).epsilon(1e-7));
        CHECK(fc.intercepts[k] == doctest::Approx(3.0 * base.intercepts[k]).epsilon(1e-7));
    }
    CHECK(fs.slopes[0] == doctest::Approx(base.slopes[0]).epsilon(1e-7));
    CHECK(fc.slopes[0] == doctest::Approx(3.0 * base.slopes[0]).epsilon(1e-7));
}

TEST_CASE("zero noise: every q gives the same conditional mean") {
    std::vector<double> x, y;
    for (int i = 0; i < 40; ++i) {
        x.push_back(i / 50.0);
        y.push_back(1.0 - 2.0 * x.back() + 0.5 * x.back() * x.back());
    }
    const double m1 = fit_boundary(x, y, 0.0, 1, 2, 1.0, tri).cond_mean;
    for (int q : {3, 5, 9}) CHECK(fit_boundary(x, y, 0.0, q, 2, 1.0, tri).cond_mean == doctest::Approx(m1).epsilon(1e-9));
    CHECK(m1 == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(fit_boundary(x, y, 0.0, 3, 2, 1.0, tri).second_derivative() == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("too few weighted points") {
    CHECK_THROWS_AS(fit_boundary({0.1, 0.2, 0.3}, {1, 2, 3}, 0.0, 7, 1, 1.0, tri), Error);
    try {
        fit_boundary({0.1, 0.2, 5.0, 6.0}, {1, 2, 3, 4}, 0.0, 1, 1, 1.0, tri);
        FAIL("expected InsufficientData");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InsufficientData);
    }
}

TEST_CASE("covariate fit: zero covariates give the pooled fit without covariates") {
    const Xy up = noisy_sample(31, 120), down = noisy_sample(32, 120);
    RdSample s;
    for (std::size_t i = 0; i < up.x.size(); ++i) {
        s.x.push_back(up.x[i]);
        s.y.push_back(up.y[i] + 0.3);
        s.x.push_back(-down.x[i]);
        s.y.push_back(down.y[i]);
    }
    s.z = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s.size()), 1);
    const CovariateFit cf = fit_boundary_with_covariates(s, 5, 0.7, tri);

    // Same pooled problem posed directly to the composite solver.
    std::vector<double> yy, ww, d0, d1;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double w = eval_kernel(tri, s.x[i] / 0.7);
        if (w <= 0) continue;
        yy.push_back(s.y[i]);
        ww.push_back(w);
        d0.push_back(s.x[i] / 0.7);
        d1.push_back(s.x[i] >= 0 ? 1.0 : 0.0);
    }
    const Eigen::Index n = static_cast<Eigen::Index>(yy.size());
    Eigen::MatrixXd d(n, 3);
    for (Eigen::Index r = 0; r < n; ++r) {
        d(r, 0) = d0[r];
        d(r, 1) = d1[r];
        d(r, 2) = d0[r] * d1[r];
    }
    const CompositeSolution sol =
        solve_composite(Eigen::Map<Eigen::VectorXd>(yy.data(), n), d, Eigen::Map<Eigen::VectorXd>(ww.data(), n), 5, {});
    CHECK(cf.treatment_coef == doctest::Approx(sol.beta[1]).epsilon(1e-9));
    CHECK(cf.covariate_coefs[0] == 0.0);

    // A covariate copying y is refused.
    RdSample bad = s;
    bad.z = Eigen::Map<Eigen::VectorXd>(bad.y.data(), static_cast<Eigen::Index>(bad.size()));
    try {
        fit_boundary_with_covariates(bad, 5, 0.7, tri);
        FAIL("expected CollinearCovariates");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::CollinearCovariates);
    }
}

TEST_CASE("sample validation") {
    RdSample s;
    s.x = {0.1, -0.1};
    s.y = {1.0};
    CHECK_THROWS_AS(s.validate(), Error);
    s.y = {1.0, 2.0};
    s.t = std::vector<double>{1.0, 0.5};
    CHECK_THROWS_AS(s.validate(), Error);
    s.t = std::vector<double>{1.0, 0.0};
    CHECK_NOTHROW(s.validate());
    const SideData up = split_side(s, Side::above);
    CHECK(up.size() == 1);
    CHECK(up.t.size() == 1);
}
