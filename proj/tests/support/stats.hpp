#ifndef VRPF_TESTS_SUPPORT_STATS_HPP
#define VRPF_TESTS_SUPPORT_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

// Small statistics toolbox for the test suites: moments, correlation,
// Kolmogorov-Smirnov distance against a reference CDF, and a chi-square
// goodness-of-fit p-value via the regularized incomplete gamma function.

namespace teststat {

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double sample_variance(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

inline double se_of_mean(const std::vector<double>& v) {
    return std::sqrt(sample_variance(v) / static_cast<double>(v.size()));
}

inline double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = mean(a), mb = mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

/// sup_x |F_empirical(x) - F(x)| over the sample points.
inline double ks_distance(std::vector<double> samples,
                          const std::function<double(double)>& cdf) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(f - static_cast<double>(i + 1) / n));
    }
    return d;
}

namespace detail {

// Regularized lower incomplete gamma P(a,x), series and continued-fraction
// branches (Numerical Recipes style).
inline double gamma_p(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_p domain");
    if (x == 0.0) return 0.0;
    const double gln = std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a, sum = 1.0 / a, del = sum;
        for (int n = 0; n < 500; ++n) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-15) break;
        }
        return sum * std::exp(-x + a * std::log(x) - gln);
    }
    double b = x + 1.0 - a, c = 1e308, d = 1.0 / b, h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return 1.0 - std::exp(-x + a * std::log(x) - gln) * h;
}

}  // namespace detail

/// Upper-tail p-value of a chi-square statistic with `dof` degrees of freedom.
inline double chi_square_p_value(double statistic, double dof) {
    return 1.0 - detail::gamma_p(0.5 * dof, 0.5 * statistic);
}

/// Chi-square goodness-of-fit p-value of iteration counts against a
/// geometric(p) law. Bins 1..max_bin with the tail pooled; bins with
/// expected count below 5 are merged into the tail.
inline double geometric_chi_square_p(const std::vector<long>& counts, double p) {
    if (counts.empty() || !(p > 0.0 && p < 1.0))
        throw std::invalid_argument("geometric_chi_square_p");
    long max_iter = 1;
    for (long c : counts) max_iter = std::max(max_iter, c);
    const double n = static_cast<double>(counts.size());

    std::vector<double> expected;
    std::vector<double> observed;
    double tail_prob = 1.0;
    long bin = 1;
    for (; bin <= max_iter; ++bin) {
        const double prob = p * std::pow(1.0 - p, static_cast<double>(bin - 1));
        if (n * (tail_prob - prob) < 5.0) break;  // remaining mass becomes the tail bin
        expected.push_back(n * prob);
        double obs = 0.0;
        for (long c : counts) obs += c == bin ? 1.0 : 0.0;
        observed.push_back(obs);
        tail_prob -= prob;
    }
    expected.push_back(n * tail_prob);
    double obs_tail = 0.0;
    for (long c : counts) obs_tail += c >= bin ? 1.0 : 0.0;
    observed.push_back(obs_tail);

    if (expected.size() < 2) throw std::invalid_argument("not enough bins for chi-square");
    double stat = 0.0;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const double d = observed[i] - expected[i];
        stat += d * d / expected[i];
    }
    return chi_square_p_value(stat, static_cast<double>(expected.size() - 1));
}

}  // namespace teststat

#endif  // VRPF_TESTS_SUPPORT_STATS_HPP
