#include <doctest.h>

#include <cmath>

#include "rdlcqr/dgp.hpp"
#include "rdlcqr/errors.hpp"
#include "rdlcqr/inference_fuzzy.hpp"

using namespace rdlcqr;

namespace {

const KernelSpec tri = KernelSpec::make(KernelFamily::triangular);

EstimatorConfig fixed_cfg(double h) {
    EstimatorConfig cfg;
    cfg.bandwidth.kind = BandwidthRequest::Kind::fixed;
    cfg.bandwidth.value = h;
    return cfg;
}

RdSample fuzzy_sample(std::size_t n, std::uint64_t rep) {
    DgpSpec spec;
    spec.n = n;
    spec.fuzzy = FuzzyOverlay{};
    Rng rng = make_stream(11, rep);
    return draw_sample(spec, rng);
}

RdSample sharp_compliance(std::size_t n) {
    DgpSpec spec;
    spec.n = n;
    Rng rng = make_stream(3, 0);
    RdSample s = draw_sample(spec, rng);
    s.t.emplace();
    for (double x : s.x) s.t->push_back(x >= 0 ? 1.0 : 0.0);
    return s;
}

} // namespace

TEST_CASE("full compliance reduces to the sharp estimator") {
    const RdSample s = sharp_compliance(600);
    const EstimatorConfig cfg = fixed_cfg(0.5);
    const FuzzyAnalysis fa = analyze_fuzzy(s, cfg);
    const SharpAnalysis sa = analyze_sharp(s, cfg);
    REQUIRE(fa.est.tau_hat.has_value());
    CHECK(fa.est.comp.denominator == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fa.est.comp.t_constant_above);
    CHECK(fa.est.comp.t_constant_below);
    for (SandwichMode mode : {SandwichMode::asymptotic, SandwichMode::fixed_n}) {
        const InferenceResult sharp = sa.result(mode);
        const InferenceResult fuzzy = fa.result(mode, 0.0, false);
        CHECK(std::abs(fuzzy.point - sharp.point) < 1e-10);
        const NullRestrictedTerms nr = null_restricted_terms(fa.est.comp, 0.0, mode, tri);
        CHECK(nr.variance == doctest::Approx(sharp.se_adjusted * sharp.se_adjusted).epsilon(1e-10));
        CHECK(nr.tau_tilde == doctest::Approx(sharp.point).epsilon(1e-10));
        CHECK(nr.bias == doctest::Approx(sharp.bias_hat).epsilon(1e-10));
    }
}

TEST_CASE("null-restricted statistic on a noncompliance sample") {
    const RdSample s = fuzzy_sample(2000, 0);
    const FuzzyAnalysis fa = analyze_fuzzy(s, fixed_cfg(0.5));
    REQUIRE(fa.est.tau_hat.has_value());
    CHECK(fa.est.comp.denominator > 0.2);
    CHECK(fa.est.comp.phi_above.rows() == 7);
    const double tau = *fa.est.tau_hat;
    const InferenceResult r = fa.result(SandwichMode::fixed_n, tau, false);
    CHECK(r.point == doctest::Approx(tau));
    // tau_tilde = numerator - tau0 * denominator.
    CHECK(r.diagnostics.at("tau_tilde") ==
          doctest::Approx(fa.est.comp.numerator - tau * fa.est.comp.denominator).epsilon(1e-12));
    CHECK(r.diagnostics.at("tau_tilde_variance") > 0);
    CHECK(r.se_plain > 0);
    // The null variance is quadratic in tau0.
    auto v = [&](double t0) { return null_restricted_terms(fa.est.comp, t0, SandwichMode::fixed_n, tri).variance; };
    const double d2a = v(1.0) - 2 * v(0.0) + v(-1.0);
    const double d2b = v(3.0) - 2 * v(2.0) + v(1.0);
    CHECK(d2a == doctest::Approx(d2b).epsilon(1e-8));
    CHECK(d2a > 0);
}

TEST_CASE("test inversion returns an interval containing the estimate") {
    const RdSample s = fuzzy_sample(2000, 1);
    const FuzzyAnalysis fa = analyze_fuzzy(s, fixed_cfg(0.5));
    const InferenceResult r = fa.result(SandwichMode::fixed_n, 0.0, true);
    CHECK(r.ci_adjusted.first < r.ci_adjusted.second);
    CHECK(std::find(r.flags.begin(), r.flags.end(), "InversionEmpty") == r.flags.end());
    // Every grid point inside the set is accepted at the stated level.
    const double mid = 0.5 * (r.ci_adjusted.first + r.ci_adjusted.second);
    CHECK(fa.result(SandwichMode::fixed_n, mid, false).p_value > 0.05);
}

TEST_CASE("weak identification suppresses the point estimate") {
    const RdSample s = fuzzy_sample(1000, 2);
    FuzzyAnalysis fa = analyze_fuzzy(s, fixed_cfg(0.5));
    fa.est.comp.weak = true;
    CHECK_THROWS_AS(fuzzy_bias_and_variance(fa.est.comp, SandwichMode::fixed_n, tri), Error);
    const InferenceResult r = fa.result(SandwichMode::fixed_n, 0.0, false);
    CHECK(std::isnan(r.point));
    CHECK(std::isfinite(r.t_adjusted));
    CHECK(std::find(r.flags.begin(), r.flags.end(), "WeakIdentification") != r.flags.end());
}

TEST_CASE("fuzzy input validation") {
    DgpSpec spec;
    spec.n = 300;
    Rng rng = make_stream(1, 1);
    const RdSample s = draw_sample(spec, rng);
    try {
        analyze_fuzzy(s, fixed_cfg(0.5));
        FAIL("expected MissingColumn");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingColumn);
    }
    const RdSample f = fuzzy_sample(500, 3);
    const FuzzyAnalysis fa = analyze_fuzzy(f, fixed_cfg(0.5));
    CHECK_THROWS_AS(fa.result(SandwichMode::fixed_n, std::nan(""), false), Error);
}
