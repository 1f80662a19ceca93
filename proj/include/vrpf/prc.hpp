#ifndef VRPF_PRC_HPP
#define VRPF_PRC_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vrpf/errors.hpp"
#include "vrpf/lgssm.hpp"
#include "vrpf/proposal.hpp"
#include "vrpf/rng.hpp"

// Partial rejection control: an approximate accept/reject applied to the
// newest latent only. A proposal z is accepted with probability
//
//   a(z) = (1 + M q(z)/p(z))^{-1},
//
// where p is the incremental joint density and M >= 0 trades acceptance
// rate against refinement. The accepted sample carries multiplier
// c = p/q + M, and the unnormalized weight w~ = c * mean_k a(delta_k) over
// K fresh proposal draws estimates c * Z with Z = E_q[a].

namespace vrpf {

constexpr long kDefaultTrialCap = 1'000'000;

/// Identifies the (time step, particle) a sampling loop was working on, for
/// runaway diagnostics.
struct StepContext {
    std::size_t t = 0;
    std::size_t i = 0;
};

/// Acceptance probability evaluated through the logistic of a log ratio, so
/// p and q are never exponentiated separately. M = 0 accepts everything.
inline double acceptance_probability(double log_p_incr, double log_q, double m) {
    if (m == 0.0) return 1.0;
    const double s = log_p_incr - log_q - std::log(m);
    // logistic(s), saturating cleanly at 0 and 1
    if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}

/// log c = log(p/q + M), via log-sum-exp of (log p - log q, log M).
inline double log_c_multiplier(double log_p_incr, double log_q, double m) {
    const double ratio = log_p_incr - log_q;
    if (m == 0.0) return ratio;
    return log_sum_exp(ratio, std::log(m));
}

/// w~ = exp(log_c) * mean(accept_evals). The evals come from fresh proposal
/// draws, one acceptance probability each; K is their count.
inline double estimate_weight(double log_c, std::span<const double> accept_evals) {
    if (accept_evals.empty()) throw ConfigError("estimate_weight: K must be >= 1");
    double s = 0.0;
    for (double a : accept_evals) s += a;
    return std::exp(log_c) * (s / static_cast<double>(accept_evals.size()));
}

struct AcceptedDraw {
    Vec z;
    Vec eps;
    long trials = 0;
};

/// Rejection loop: propose from `proposal_stream`, accept against a uniform
/// from `uniform_stream`. When m == 0 the first draw is accepted and no
/// uniform is consumed, which keeps this path bit-identical to plain
/// proposal sampling.
inline AcceptedDraw prc_sample(const LgssmParams& model, const ProposalParams& phi,
                               const Vec& z_prev, const Vec& x_t, double m,
                               Stream& proposal_stream, Stream& uniform_stream,
                               long trial_cap = kDefaultTrialCap, StepContext ctx = {}) {
    if (!(m >= 0.0)) throw ConfigError("M must be >= 0");
    AcceptedDraw out;
    for (long trial = 1; trial <= trial_cap; ++trial) {
        ReparamDraw d = sample_reparam(phi, z_prev, model.A, proposal_stream);
        if (m == 0.0) {
            out.z = std::move(d.z);
            out.eps = std::move(d.eps);
            out.trials = trial;
            return out;
        }
        const double log_q = proposal_logpdf(phi, d.z, z_prev, model.A);
        const double log_p = incremental_joint_logpdf(model, d.z, z_prev, x_t);
        const double a = acceptance_probability(log_p, log_q, m);
        if (uniform_stream.uniform() < a) {
            out.z = std::move(d.z);
            out.eps = std::move(d.eps);
            out.trials = trial;
            return out;
        }
    }
    throw RunawayError("rejection loop exceeded " + std::to_string(trial_cap) +
                       " trials at t=" + std::to_string(ctx.t) + " i=" + std::to_string(ctx.i) +
                       " M=" + std::to_string(m));
}

/// Everything the bound needs from one particle's accept/reject step.
struct PrcOutcome {
    Vec z;
    Vec eps;
    long trials = 0;
    double log_c = 0.0;
    double w_tilde = 0.0;
    double log_w_tilde = 0.0;
    double m = 0.0;
    std::vector<double> accept_evals;  // empty when m == 0 (draws skipped)
    std::vector<Vec> delta_eps;        // reparameterization noises of the K draws
};

/// Full PRC step: accept a sample, then estimate its weight from K fresh
/// delta draws (skipped entirely at m == 0, where w~ = c exactly).
inline PrcOutcome prc_step(const LgssmParams& model, const ProposalParams& phi, const Vec& z_prev,
                           const Vec& x_t, double m, std::size_t k_draws, Stream& proposal_stream,
                           Stream& uniform_stream, Stream& delta_stream,
                           long trial_cap = kDefaultTrialCap, StepContext ctx = {}) {
    if (k_draws < 1) throw ConfigError("K must be >= 1");
    AcceptedDraw d = prc_sample(model, phi, z_prev, x_t, m, proposal_stream, uniform_stream,
                                trial_cap, ctx);
    PrcOutcome out;
    out.z = std::move(d.z);
    out.eps = std::move(d.eps);
    out.trials = d.trials;
    out.m = m;

    const double log_q = proposal_logpdf(phi, out.z, z_prev, model.A);
    const double log_p = incremental_joint_logpdf(model, out.z, z_prev, x_t);
    out.log_c = log_c_multiplier(log_p, log_q, m);

    if (m == 0.0) {
        out.w_tilde = std::exp(out.log_c);
        out.log_w_tilde = out.log_c;
        return out;
    }

    out.accept_evals.reserve(k_draws);
    out.delta_eps.reserve(k_draws);
    double sum = 0.0;
    for (std::size_t k = 0; k < k_draws; ++k) {
        ReparamDraw delta = sample_reparam(phi, z_prev, model.A, delta_stream);
        const double lq = proposal_logpdf(phi, delta.z, z_prev, model.A);
        const double lp = incremental_joint_logpdf(model, delta.z, z_prev, x_t);
        const double a = acceptance_probability(lp, lq, m);
        sum += a;
        out.accept_evals.push_back(a);
        out.delta_eps.push_back(std::move(delta.eps));
    }
    const double mean_a = sum / static_cast<double>(k_draws);
    out.w_tilde = std::exp(out.log_c) * mean_a;
    out.log_w_tilde = out.log_c + std::log(mean_a);
    return out;
}

}  // namespace vrpf

#endif  // VRPF_PRC_HPP
