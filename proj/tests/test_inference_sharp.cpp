#include <doctest.h>

#include <boost/random/normal_distribution.hpp>
#include <cmath>

#include "rdlcqr/dgp.hpp"
#include "rdlcqr/errors.hpp"
#include "rdlcqr/inference_sharp.hpp"

using namespace rdlcqr;

namespace {

const KernelSpec tri = KernelSpec::make(KernelFamily::triangular);

RdSample grid_sample(int n, double (*mean)(double), double noise_sd, std::uint64_t seed) {
    Rng rng = make_stream(seed, 0);
    boost::random::normal_distribution<double> nd(0.0, 1.0);
    RdSample s;
    for (int i = 0; i < n; ++i) {
        const double x = -1.0 + 2.0 * (i + 0.5) / n;
        s.x.push_back(x);
        s.y.push_back(mean(x) + noise_sd * nd(rng));
    }
    return s;
}

double lee(double x) { return mean_function(MeanModel::lee, x); }
double flat(double x) { return 1.0 + 0.5 * x; }
double cubic_kink(double x) {
    return x >= 0 ? 1.0 + 1.1 * x - x * x + 0.5 * x * x * x : 1.0 + 0.5 * x + 2.0 * x * x - x * x * x;
}

EstimatorConfig fixed_cfg(double h) {
    EstimatorConfig cfg;
    cfg.bandwidth.kind = BandwidthRequest::Kind::fixed;
    cfg.bandwidth.value = h;
    return cfg;
}

RdSample lee_sample(std::size_t n, std::uint64_t rep) {
    DgpSpec spec;
    spec.n = n;
    Rng rng = make_stream(42, rep);
    return draw_sample(spec, rng);
}

} // namespace

TEST_CASE("noiseless jump is recovered up to the smoothing bias") {
    const RdSample s = grid_sample(8000, lee, 0.0, 1);
    const SharpEstimate e = estimate_sharp(s, 7, 0.02, 0.02, tri);
    CHECK(std::abs(e.tau_hat - 0.04) < 1e-3);
}

TEST_CASE("no jump in a linear mean gives zero") {
    const RdSample s = grid_sample(2000, flat, 0.0, 1);
    const SharpEstimate e = estimate_sharp(s, 5, 0.3, 0.3, tri);
    CHECK(std::abs(e.tau_hat) < 1e-8);
}

TEST_CASE("location shift leaves the result alone and scale multiplies it") {
    const RdSample s = lee_sample(1000, 0);
    RdSample shifted = s, scaled = s;
    for (double& v : shifted.y) v += 2.0;
    for (double& v : scaled.y) v *= 3.0;
    const EstimatorConfig cfg = fixed_cfg(0.4);
    const InferenceResult r0 = analyze_sharp(s, cfg).result(SandwichMode::asymptotic);
    const InferenceResult r1 = analyze_sharp(shifted, cfg).result(SandwichMode::asymptotic);
    const InferenceResult r2 = analyze_sharp(scaled, cfg).result(SandwichMode::asymptotic);
    CHECK(r1.point == doctest::Approx(r0.point).epsilon(1e-6));
    CHECK(r1.se_adjusted == doctest::Approx(r0.se_adjusted).epsilon(1e-6));
    CHECK(r2.point == doctest::Approx(3.0 * r0.point).epsilon(1e-6));
    CHECK(r2.point_bc == doctest::Approx(3.0 * r0.point_bc).epsilon(1e-6));
    CHECK(r2.se_adjusted == doctest::Approx(3.0 * r0.se_adjusted).epsilon(1e-6));
}

TEST_CASE("test statistic and interval are built around the corrected point") {
    const RdSample s = lee_sample(1000, 1);
    const SharpAnalysis a = analyze_sharp(s, EstimatorConfig{});
    for (SandwichMode mode : {SandwichMode::asymptotic, SandwichMode::fixed_n}) {
        const InferenceResult base = a.result(mode);
        const InferenceResult r = a.result(mode, base.point_bc);
        CHECK(std::abs(r.t_adjusted) < 1e-12);
        CHECK(r.p_value == doctest::Approx(1.0));
        CHECK(0.5 * (r.ci_adjusted.first + r.ci_adjusted.second) == doctest::Approx(r.point_bc));
        const double z = normal_quantile(0.975);
        CHECK(r.ci_adjusted.second - r.ci_adjusted.first == doctest::Approx(2 * z * r.se_adjusted));
        CHECK(r.point_bc == doctest::Approx(r.point - r.bias_hat));
        CHECK(r.se_adjusted > 0);
        CHECK(r.bandwidths.size() == 2);
    }
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
}

TEST_CASE("asymptotic bias scales as h^2 and variance as 1/(n h)") {
    const RdSample s = lee_sample(2000, 2);
    const SharpAnalysis a = analyze_sharp(s, fixed_cfg(0.3));
    SideEquation eq = a.above;
    const SideModel m0 = eq.model(SandwichMode::asymptotic, tri);
    for (double h : {0.15, 0.6}) {
        eq.h = h;
        const SideModel m = eq.model(SandwichMode::asymptotic, tri);
        CHECK(m.bias() / (h * h) == doctest::Approx(m0.bias() / (0.3 * 0.3)).epsilon(1e-12));
        CHECK(m.var_m() * h == doctest::Approx(m0.var_m() * 0.3).epsilon(1e-12));
        CHECK(m.var_bias() * h == doctest::Approx(m0.var_bias() * 0.3).epsilon(1e-12));
    }
    // The correction adds variance but the adjusted total stays positive.
    CHECK(adjusted_variance(a.above.model(SandwichMode::asymptotic, tri), a.below.model(SandwichMode::asymptotic, tri)) >
          0.0);
}

TEST_CASE("bandwidth choice honours the request") {
    const RdSample s = lee_sample(800, 3);
    EstimatorConfig cfg = fixed_cfg(0.45);
    CHECK(analyze_sharp(s, cfg).bw.h_plus == 0.45);
    cfg.bandwidth.kind = BandwidthRequest::Kind::rot;
    const SharpAnalysis a = analyze_sharp(s, cfg);
    CHECK(a.bw.method == BandwidthMethod::rot);
    CHECK(a.bw.h_plus == a.pilot_above.h_rot);
    cfg = fixed_cfg(-1.0);
    CHECK_THROWS_AS(analyze_sharp(s, cfg), Error);
}

TEST_CASE("kink of a piecewise cubic mean") {
    const RdSample s = grid_sample(6000, cubic_kink, 0.01, 5);
    EstimatorConfig cfg;
    const InferenceResult r = estimate_kink(s, 5, 0.5, tri, cfg);
    CHECK(r.point == doctest::Approx(0.6).epsilon(0.05 / 0.6));
    CHECK(r.se_plain > 0);
    CHECK(r.estimand == Estimand::kink);
    CHECK(std::find(r.flags.begin(), r.flags.end(), "experimental") != r.flags.end());
    const InferenceResult ra = estimate_kink(s, 5, 0.5, tri, cfg, SandwichMode::asymptotic);
    CHECK(ra.point == r.point);
    CHECK(ra.se_plain == doctest::Approx(r.se_plain).epsilon(0.3));
}
