#include "doctest.h"

#include <cmath>
#include <vector>

#include "support/stats.hpp"
#include "vrpf/resample.hpp"
#include "vrpf/rng.hpp"

using namespace vrpf;

TEST_SUITE("resample") {

TEST_CASE("degenerate race: equal weights, certain coins") {
    StreamFamily fam = make_default_streams(1);
    const std::vector<double> log_c = {0.0, 0.0};
    auto coin = [](std::size_t) { return true; };
    int first = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const RaceOutcome r = bernoulli_race(log_c, coin, fam.stream("race-categorical"));
        CHECK(r.iterations == 1);
        first += r.ancestor == 0;
    }
    const double p = static_cast<double>(first) / n;
    CHECK(std::abs(p - 0.5) < 3.0 * std::sqrt(0.25 / n));
}

TEST_CASE("race with certain coins follows the categorical weights") {
    StreamFamily fam = make_default_streams(2);
    const std::vector<double> log_c = {std::log(3.0), std::log(1.0)};
    auto coin = [](std::size_t) { return true; };
    int first = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i)
        first += bernoulli_race(log_c, coin, fam.stream("race-categorical")).ancestor == 0;
    const double p = static_cast<double>(first) / n;
    CHECK(std::abs(p - 0.75) < 3.0 * std::sqrt(0.75 * 0.25 / n));
}

TEST_CASE("race with synthetic coins targets normalized c * Z") {
    // c = (1,1), Z = (0.2, 0.6): ancestor 2 with probability 0.75 and
    // geometric iterations with mean sum(c)/sum(cZ) = 2.5.
    StreamFamily fam = make_default_streams(3);
    const std::vector<double> log_c = {0.0, 0.0};
    const std::vector<double> z_prob = {0.2, 0.6};
    Stream& coin_stream = fam.stream("race-coin");
    auto coin = [&](std::size_t i) { return coin_stream.uniform() < z_prob[i]; };

    const int n = 100000;
    int second = 0;
    std::vector<double> iters(n);
    for (int i = 0; i < n; ++i) {
        const RaceOutcome r = bernoulli_race(log_c, coin, fam.stream("race-categorical"));
        second += r.ancestor == 1;
        iters[i] = static_cast<double>(r.iterations);
    }
    const double p2 = static_cast<double>(second) / n;
    CHECK(std::abs(p2 - 0.75) < 3.0 * std::sqrt(0.75 * 0.25 / n));
    CHECK(std::abs(teststat::mean(iters) - 2.5) < 3.0 * teststat::se_of_mean(iters));
}

TEST_CASE("single-particle resampling always picks that particle") {
    StreamFamily fam = make_default_streams(4);
    const std::vector<double> log_c = {2.7};
    auto coin = [](std::size_t) { return true; };
    const auto out = resample_ancestors(log_c, coin, 1, fam.stream("race-categorical"));
    REQUIRE(out.size() == 1);
    CHECK(out[0].ancestor == 0);
}

TEST_CASE("race with certain coins matches multinomial resampling exactly") {
    // Same stream, same normalized weights: the draws must coincide.
    const std::vector<double> log_c = {std::log(0.5), std::log(2.0), std::log(1.0)};
    StreamFamily fam_race = make_default_streams(6);
    StreamFamily fam_multi = make_default_streams(6);
    auto coin = [](std::size_t) { return true; };
    const auto races =
        resample_ancestors(log_c, coin, 64, fam_race.stream("race-categorical"));
    const Vec w = weights_from_log(log_c);
    const auto indices = multinomial_resample(w, 64, fam_multi.stream("race-categorical"));
    for (std::size_t i = 0; i < 64; ++i) CHECK(races[i].ancestor == indices[i]);
    // Identical stream consumption under the short-circuit rule.
    CHECK(fam_race.stream("race-categorical") == fam_multi.stream("race-categorical"));
    CHECK(fam_race.stream("race-coin") == fam_multi.stream("race-coin"));
}

TEST_CASE("multinomial closed cases") {
    StreamFamily fam = make_default_streams(7);
    const std::vector<double> degenerate = {1.0, 0.0};
    for (std::size_t idx : multinomial_resample(degenerate, 50, fam.stream("race-categorical")))
        CHECK(idx == 0);

    const std::vector<double> single = {3.3};
    for (std::size_t idx : multinomial_resample(single, 5, fam.stream("race-categorical")))
        CHECK(idx == 0);

    const std::vector<double> zeros = {0.0, 0.0};
    CHECK_THROWS_AS(multinomial_resample(zeros, 1, fam.stream("race-categorical")), ConfigError);
}

TEST_CASE("multinomial frequencies follow the weights") {
    StreamFamily fam = make_default_streams(8);
    const std::vector<double> w = {1.0, 1.0, 2.0};
    const int n = 100000;
    std::vector<int> counts(3, 0);
    for (std::size_t idx : multinomial_resample(w, n, fam.stream("race-categorical")))
        counts[idx]++;
    const std::vector<double> expect = {0.25, 0.25, 0.5};
    for (int j = 0; j < 3; ++j) {
        const double p = static_cast<double>(counts[j]) / n;
        CHECK(std::abs(p - expect[j]) < 3.0 * std::sqrt(expect[j] * (1 - expect[j]) / n));
    }
}

TEST_CASE("race iterations are geometric") {
    StreamFamily fam = make_default_streams(9);
    const std::vector<double> log_c = {0.0, 0.0};
    const std::vector<double> z_prob = {0.2, 0.6};
    Stream& coin_stream = fam.stream("race-coin");
    auto coin = [&](std::size_t i) { return coin_stream.uniform() < z_prob[i]; };
    const int n = 100000;
    std::vector<long> iters(n);
    for (int i = 0; i < n; ++i)
        iters[i] = bernoulli_race(log_c, coin, fam.stream("race-categorical")).iterations;
    // Success probability per round is sum(cZ)/sum(c) = 0.4.
    CHECK(teststat::geometric_chi_square_p(iters, 0.4) > 0.01);
}

TEST_CASE("runaway race errors out at the cap") {
    StreamFamily fam = make_default_streams(10);
    const std::vector<double> log_c = {0.0, 0.0};
    auto coin = [](std::size_t) { return false; };
    CHECK_THROWS_AS(bernoulli_race(log_c, coin, fam.stream("race-categorical"), 16),
                    RunawayError);
}

TEST_CASE("effective sample size closed cases") {
    CHECK(ess(std::vector<double>{0.25, 0.25, 0.25, 0.25}) == doctest::Approx(4.0));
    CHECK(ess(std::vector<double>{1.0, 0.0, 0.0, 0.0}) == doctest::Approx(1.0));
    CHECK(ess(std::vector<double>{0.5, 0.5, 0.0, 0.0}) == doctest::Approx(2.0));
}

}  // TEST_SUITE
