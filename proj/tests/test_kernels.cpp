#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "rdlcqr/errors.hpp"
#include "rdlcqr/kernels.hpp"

using namespace rdlcqr;

TEST_CASE("triangular kernel values") {
    const KernelSpec tri = KernelSpec::make(KernelFamily::triangular);
    CHECK(eval_kernel(tri, 0.0) == doctest::Approx(1.0));
    CHECK(eval_kernel(tri, 2.0) == 0.0);
    CHECK(eval_kernel(tri, -0.5) == doctest::Approx(0.5));
    CHECK(eval_kernel(tri, 1.0) == 0.0);
}

TEST_CASE("every kernel is symmetric and integrates to one") {
    for (auto fam : {KernelFamily::triangular, KernelFamily::epanechnikov, KernelFamily::uniform,
                     KernelFamily::gaussian}) {
        const KernelSpec k = KernelSpec::make(fam);
        for (double u : {0.1, 0.37, 0.8, 1.5})
            CHECK(eval_kernel(k, u) == eval_kernel(k, -u));
        const double b = k.effective_bound();
        const double total = oracle::integrate([&](double u) { return eval_kernel(k, u); }, -b, b, 2000);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("triangular one-sided moments, closed form values") {
    const KernelMoments m = one_sided_moments(KernelSpec::make(KernelFamily::triangular), Side::above, 7);
    CHECK(m.mu[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(m.mu[2] == doctest::Approx(1.0 / 12.0).epsilon(1e-14));
    CHECK(m.nu[2] == doctest::Approx(1.0 / 30.0).epsilon(1e-14));
    CHECK(m.nu[1] == doctest::Approx(1.0 / 12.0).epsilon(1e-14));
}

TEST_CASE("below-side moments mirror the above side") {
    for (auto fam : {KernelFamily::triangular, KernelFamily::epanechnikov, KernelFamily::uniform,
                     KernelFamily::gaussian}) {
        const KernelSpec k = KernelSpec::make(fam);
        const KernelMoments up = one_sided_moments(k, Side::above, 7);
        const KernelMoments dn = one_sided_moments(k, Side::below, 7);
        for (int j = 0; j <= 7; ++j) {
            const double sign = j % 2 == 0 ? 1.0 : -1.0;
            CHECK(dn.mu[j] == doctest::Approx(sign * up.mu[j]).epsilon(1e-12));
            CHECK(dn.nu[j] == doctest::Approx(sign * up.nu[j]).epsilon(1e-12));
            // Odd full-line moments vanish.
            if (j % 2 == 1) CHECK(std::abs(up.mu[j] + dn.mu[j]) < 1e-14);
            if (j % 2 == 0) CHECK(up.nu[j] >= 0.0);
        }
        CHECK(up.mu[0] > 0);
        CHECK(up.nu[0] > 0);
    }
}

TEST_CASE("closed-form moments agree with the library quadrature") {
    for (auto fam : {KernelFamily::triangular, KernelFamily::epanechnikov, KernelFamily::uniform}) {
        const KernelSpec k = KernelSpec::make(fam);
        const KernelMoments m = one_sided_moments(k, Side::above, 7);
        for (int j = 0; j <= 7; ++j) {
            CHECK(std::abs(m.mu[j] - kernel_moment_quadrature(k, j, 1, 0.0, 1.0)) < 1e-10);
            CHECK(std::abs(m.nu[j] - kernel_moment_quadrature(k, j, 2, 0.0, 1.0)) < 1e-10);
        }
    }
}

TEST_CASE("gaussian moments against an independent rule") {
    const KernelSpec g = KernelSpec::make(KernelFamily::gaussian);
    const KernelMoments m = one_sided_moments(g, Side::above, 7);
    for (int j = 0; j <= 7; ++j) {
        const double ref = oracle::integrate([j](double u) { return std::pow(u, j) * oracle::normal_pdf(u); }, 0, 8, 800);
        CHECK(std::abs(m.mu[j] - ref) < 1e-10);
    }
    CHECK(m.mu[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("kernel mass clips to the support") {
    const KernelSpec tri = KernelSpec::make(KernelFamily::triangular);
    CHECK(kernel_mass(tri, 0.0, 5.0) == doctest::Approx(0.5));
    CHECK(kernel_mass(tri, -5.0, 5.0) == doctest::Approx(1.0));
}

TEST_CASE("unsupported moment order and unknown kernel names") {
    const KernelSpec tri = KernelSpec::make(KernelFamily::triangular);
    CHECK_THROWS_AS(one_sided_moments(tri, Side::above, 2), Error);
    CHECK_THROWS_AS(parse_kernel("cosine"), Error);
    CHECK(parse_kernel("epanechnikov").family == KernelFamily::epanechnikov);
    CHECK(kernel_name(KernelFamily::uniform) == "uniform");
}
