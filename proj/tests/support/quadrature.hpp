#ifndef VRPF_TESTS_SUPPORT_QUADRATURE_HPP
#define VRPF_TESTS_SUPPORT_QUADRATURE_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "vrpf/lgssm.hpp"
#include "vrpf/proposal.hpp"

// One-dimensional quadrature oracle for the rejection-control quantities.
// Deliberately independent of the library's acceptance/weight code paths:
// densities and acceptance probabilities are evaluated from their own
// closed-form expressions here, and integrals use a dense trapezoid grid.
// Only d_z = 1 is supported.

namespace oracle {

struct GridSpec {
    std::size_t points = 20001;
    double half_width_sigmas = 8.0;
};

inline double log_gauss(double x, double mean, double var) {
    const double d = x - mean;
    return -0.5 * (std::log(2.0 * M_PI * var) + d * d / var);
}

struct Setup {
    double a = 0.0;              // scalar transition coefficient
    std::vector<double> c;       // emission column (d_x entries)
    std::vector<double> x;       // observation
    double z_prev = 0.0;
    double mu = 0.0;
    double log_var = 0.0;
    double m = 0.0;

    static Setup from(const vrpf::LgssmParams& model, const vrpf::ProposalParams& phi,
                      const vrpf::Vec& z_prev, const vrpf::Vec& x_t, double m) {
        if (model.d_z != 1) throw std::invalid_argument("quadrature oracle supports d_z=1 only");
        Setup s;
        s.a = model.A(0, 0);
        for (std::size_t r = 0; r < model.d_x; ++r) s.c.push_back(model.C(r, 0));
        s.x.assign(x_t.begin(), x_t.end());
        s.z_prev = z_prev[0];
        s.mu = phi.mu[0];
        s.log_var = phi.log_var[0];
        s.m = m;
        return s;
    }

    double q_mean() const { return a * z_prev + mu; }
    double q_var() const { return std::exp(log_var); }

    double log_q(double z) const { return log_gauss(z, q_mean(), q_var()); }

    double log_p_incr(double z) const {
        double lp = log_gauss(z, a * z_prev, 1.0);
        for (std::size_t r = 0; r < c.size(); ++r) lp += log_gauss(x[r], c[r] * z, 1.0);
        return lp;
    }

    double accept(double z) const {
        if (m == 0.0) return 1.0;
        return 1.0 / (1.0 + m * std::exp(log_q(z) - log_p_incr(z)));
    }

    // Exact posterior p(z | z_prev, x): Gaussian with precision 1 + sum c^2.
    double posterior_var() const {
        double prec = 1.0;
        for (double cr : c) prec += cr * cr;
        return 1.0 / prec;
    }
    double posterior_mean() const {
        double num = a * z_prev;
        for (std::size_t r = 0; r < c.size(); ++r) num += c[r] * x[r];
        return num * posterior_var();
    }
};

struct Grid {
    std::vector<double> z;
    double h = 0.0;

    double integrate(const std::function<double(double)>& f) const {
        double s = 0.5 * (f(z.front()) + f(z.back()));
        for (std::size_t i = 1; i + 1 < z.size(); ++i) s += f(z[i]);
        return s * h;
    }
};

inline Grid make_grid(const Setup& s, GridSpec spec = {}) {
    const double sq = std::sqrt(s.q_var());
    const double sp = std::sqrt(s.posterior_var());
    const double lo = std::min(s.q_mean() - spec.half_width_sigmas * sq,
                               s.posterior_mean() - spec.half_width_sigmas * sp);
    const double hi = std::max(s.q_mean() + spec.half_width_sigmas * sq,
                               s.posterior_mean() + spec.half_width_sigmas * sp);
    Grid g;
    g.h = (hi - lo) / static_cast<double>(spec.points - 1);
    g.z.reserve(spec.points);
    for (std::size_t i = 0; i < spec.points; ++i) g.z.push_back(lo + g.h * static_cast<double>(i));
    return g;
}

/// Z = E_q[a] = integral of q(z) a(z) dz.
inline double z_constant(const Setup& s, GridSpec spec = {}) {
    const Grid g = make_grid(s, spec);
    return g.integrate([&](double z) { return std::exp(s.log_q(z)) * s.accept(z); });
}

/// integral of the incremental joint over z, i.e. p(x_t | z_prev).
inline double integral_p_incr(const Setup& s, GridSpec spec = {}) {
    const Grid g = make_grid(s, spec);
    return g.integrate([&](double z) { return std::exp(s.log_p_incr(z)); });
}

/// KL(f || g) for two densities supplied as log-density callables, each
/// normalized on the grid first so both are proper distributions there.
inline double kl_on_grid(const Grid& g, const std::function<double(double)>& log_f,
                         const std::function<double(double)>& log_g_fn) {
    const double zf = g.integrate([&](double z) { return std::exp(log_f(z)); });
    const double zg = g.integrate([&](double z) { return std::exp(log_g_fn(z)); });
    return g.integrate([&](double z) {
        const double f = std::exp(log_f(z)) / zf;
        if (f <= 0.0) return 0.0;
        return f * (log_f(z) - std::log(zf) - log_g_fn(z) + std::log(zg));
    });
}

/// KL(r || posterior) where r is the accepted-sample density q*a/Z.
inline double kl_r_vs_posterior(const Setup& s, GridSpec spec = {}) {
    const Grid g = make_grid(s, spec);
    return kl_on_grid(
        g, [&](double z) { return s.log_q(z) + std::log(s.accept(z)); },
        [&](double z) { return s.log_p_incr(z); });
}

inline double kl_q_vs_posterior(const Setup& s, GridSpec spec = {}) {
    const Grid g = make_grid(s, spec);
    return kl_on_grid(
        g, [&](double z) { return s.log_q(z); },
        [&](double z) { return s.log_p_incr(z); });
}

/// CDF of the accepted-sample density r on the grid, linearly interpolated.
inline std::function<double(double)> r_cdf(const Setup& s, GridSpec spec = {}) {
    const Grid g = make_grid(s, spec);
    std::vector<double> density(g.z.size());
    for (std::size_t i = 0; i < g.z.size(); ++i)
        density[i] = std::exp(s.log_q(g.z[i])) * s.accept(g.z[i]);
    std::vector<double> cum(g.z.size(), 0.0);
    for (std::size_t i = 1; i < g.z.size(); ++i)
        cum[i] = cum[i - 1] + 0.5 * (density[i - 1] + density[i]) * g.h;
    const double total = cum.back();
    for (double& v : cum) v /= total;
    std::vector<double> zs = g.z;
    return [zs, cum](double z) {
        if (z <= zs.front()) return 0.0;
        if (z >= zs.back()) return 1.0;
        std::size_t lo = 0, hi = zs.size() - 1;
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            (zs[mid] <= z ? lo : hi) = mid;
        }
        const double w = (z - zs[lo]) / (zs[hi] - zs[lo]);
        return cum[lo] + w * (cum[hi] - cum[lo]);
    };
}

/// E_q[f(z)] by quadrature.
inline double expect_under_q(const Setup& s, const std::function<double(double)>& f,
                             GridSpec spec = {}) {
    const Grid g = make_grid(s, spec);
    return g.integrate([&](double z) { return std::exp(s.log_q(z)) * f(z); });
}

}  // namespace oracle

#endif  // VRPF_TESTS_SUPPORT_QUADRATURE_HPP
