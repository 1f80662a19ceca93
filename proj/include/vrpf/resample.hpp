#ifndef VRPF_RESAMPLE_HPP
#define VRPF_RESAMPLE_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vrpf/errors.hpp"
#include "vrpf/linalg.hpp"
#include "vrpf/prc.hpp"
#include "vrpf/rng.hpp"

// Ancestor sampling. The Bernoulli race draws an index with probability
// proportional to c_i * Z_i even though the Z_i (expected acceptance rates)
// are intractable: repeatedly pick a candidate from Categorical(c/sum c),
// then flip its acceptance coin; the first success is an exact draw from
// the normalized c*Z distribution. Multinomial resampling and ESS are the
// standard baselines.

namespace vrpf {

constexpr long kDefaultRaceCap = 1'000'000;

struct RaceOutcome {
    std::size_t ancestor = 0;
    long iterations = 1;
};

/// Positive weights from log weights, scaled by exp(-max) so the largest
/// becomes 1. Normalization-invariant consumers only.
inline Vec weights_from_log(std::span<const double> log_w) {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : log_w)
        if (v > m) m = v;
    Vec w(log_w.size(), 0.0);
    if (m == -std::numeric_limits<double>::infinity()) return w;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_w[i] - m);
    return w;
}

/// One categorical draw proportional to (unnormalized, non-negative) weights.
inline std::size_t categorical_draw(std::span<const double> weights, Stream& stream) {
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw ConfigError("categorical weights must be >= 0");
        total += w;
    }
    if (!(total > 0.0)) throw ConfigError("categorical weights sum to zero");
    const double target = stream.uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (target < acc) return i;
    }
    return weights.size() - 1;
}

/// One Bernoulli race. `coin(i)` must return the outcome of particle i's
/// acceptance coin (true with probability Z_i); coins for particles whose M
/// is exactly zero must return true without consuming randomness.
template <typename Coin>
RaceOutcome bernoulli_race(std::span<const double> log_c, Coin&& coin, Stream& categorical_stream,
                           long race_cap = kDefaultRaceCap, StepContext ctx = {}) {
    if (log_c.empty()) throw ConfigError("bernoulli_race: no particles");
    const Vec weights = weights_from_log(log_c);
    for (long iter = 1; iter <= race_cap; ++iter) {
        const std::size_t candidate = categorical_draw(weights, categorical_stream);
        if (coin(candidate)) return RaceOutcome{candidate, iter};
    }
    throw RunawayError("Bernoulli race exceeded " + std::to_string(race_cap) +
                       " iterations at t=" + std::to_string(ctx.t));
}

/// N independent ancestor draws via the race.
template <typename Coin>
std::vector<RaceOutcome> resample_ancestors(std::span<const double> log_c, Coin&& coin,
                                            std::size_t n_draws, Stream& categorical_stream,
                                            long race_cap = kDefaultRaceCap, StepContext ctx = {}) {
    std::vector<RaceOutcome> out;
    out.reserve(n_draws);
    for (std::size_t i = 0; i < n_draws; ++i) {
        ctx.i = i;
        out.push_back(bernoulli_race(log_c, coin, categorical_stream, race_cap, ctx));
    }
    return out;
}

/// n_draws i.i.d. categorical indices proportional to plain weights.
inline std::vector<std::size_t> multinomial_resample(std::span<const double> weights,
                                                     std::size_t n_draws, Stream& stream) {
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw ConfigError("multinomial_resample: negative weight");
        total += w;
    }
    if (!(total > 0.0)) throw ConfigError("multinomial_resample: all weights are zero");
    std::vector<std::size_t> out;
    out.reserve(n_draws);
    for (std::size_t i = 0; i < n_draws; ++i) out.push_back(categorical_draw(weights, stream));
    return out;
}

inline std::vector<std::size_t> multinomial_resample(std::span<const double> weights,
                                                     Stream& stream) {
    return multinomial_resample(weights, weights.size(), stream);
}

/// Effective sample size 1 / sum(w_i^2) of normalized weights.
inline double ess(std::span<const double> normalized_weights) {
    double s = 0.0;
    for (double w : normalized_weights) s += w * w;
    return 1.0 / s;
}

}  // namespace vrpf

#endif  // VRPF_RESAMPLE_HPP
