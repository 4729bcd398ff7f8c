#pragma once

#include <array>
#include <boost/random/mersenne_twister.hpp>
#include <cstdint>
#include <optional>

#include "rdlcqr/are.hpp"
#include "rdlcqr/lcqr.hpp"

namespace rdlcqr {

using Rng = boost::random::mt19937_64;

// Independent stream for replication `rep` under `seed`.
Rng make_stream(std::uint64_t seed, std::uint64_t rep);

enum class MeanModel { lee, lm };

struct FuzzyOverlay {
    double p_below = 0.3;
    double p_above = 0.8;
};

struct DgpSpec {
    MeanModel model = MeanModel::lee;
    int law_index = 1;
    bool heteroskedastic = false;
    bool raw_scale = false;   // keep the law's own variance instead of unit variance
    // Heteroskedastic scale: (2 + cos(2 pi x)) / 10 by default; the literal
    // 2 + cos(2 pi x) / 10 reading is kept for sensitivity runs.
    bool hetero_literal = false;
    std::size_t n = 500;
    std::optional<FuzzyOverlay> fuzzy;
};

double mean_function(MeanModel model, double x);
double true_effect(MeanModel model);
double true_kink(MeanModel model);
double sigma_function(bool heteroskedastic, double x, bool hetero_literal = false);
// Outcome jump per unit of treatment: the sharp jump divided by the compliance jump.
double fuzzy_true_effect(const DgpSpec& spec);

double draw_error(const ErrorLaw& law, Rng& rng);
RdSample draw_sample(const DgpSpec& spec, Rng& rng);

// Covariate design: model 1 has no covariate effect; models 2-4 load 0.22/0.28 on z.
struct CovariateDgp {
    int model = 1;
    std::size_t n = 1000;
};
RdSample draw_covariate_sample(const CovariateDgp& spec, Rng& rng);

} // namespace rdlcqr
