#ifndef VRPF_BOUNDS_HPP
#define VRPF_BOUNDS_HPP

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <string>
#include <vector>

#include "vrpf/errors.hpp"
#include "vrpf/lgssm.hpp"
#include "vrpf/mschedule.hpp"
#include "vrpf/prc.hpp"
#include "vrpf/proposal.hpp"
#include "vrpf/resample.hpp"
#include "vrpf/rng.hpp"

// Marginal-likelihood bound estimators sharing one SMC skeleton:
//
//   estimator   rejection (M)   resampling
//   ---------   -------------   --------------------------
//   vrpf        schedule        Bernoulli race, every step
//   fivo        off (M = 0)     race (degenerate), every step or ESS-gated
//   iwae        off             never
//   elbo        off             never, single particle
//
// The special-case identities (M = 0 gives fivo, N = 1 gives elbo) hold
// structurally: they are the same code path, so they are bit-exact, not
// merely equal in distribution.
//
// Stream-consumption order per step t, pinned for replay: for each particle
// i ascending, the rejection loop ("proposal" + "prc-uniform"), then its K
// delta draws ("delta"); after all particles, the N ancestor races
// ("race-categorical" + "race-coin"). M = 0 skips "prc-uniform", "delta"
// and "race-coin" entirely.

namespace vrpf {

enum class ResamplePolicy { EveryStep, EssThreshold, Never };

inline std::string to_string(ResamplePolicy p) {
    switch (p) {
        case ResamplePolicy::EveryStep: return "every-step";
        case ResamplePolicy::EssThreshold: return "ess-threshold";
        case ResamplePolicy::Never: return "never";
    }
    return "every-step";
}

struct EstimatorConfig {
    std::size_t n_particles = 1;
    std::size_t k_draws = 1;
    const MSchedule* schedule = nullptr;  // null means M identically 0
    ResamplePolicy policy = ResamplePolicy::EveryStep;
    double ess_fraction = 0.5;  // resample when ESS < ess_fraction * N
    long trial_cap = kDefaultTrialCap;
    long race_cap = kDefaultRaceCap;
};

/// Complete record of one step of the particle system, enough to replay the
/// bound at perturbed proposal parameters with all randomness frozen.
struct StepRecord {
    std::vector<Vec> z;                    // N particles
    std::vector<Vec> eps;                  // their reparameterization noises
    std::vector<std::size_t> prev_index;   // slot in previous step each was proposed from
    std::vector<double> m;                 // M value applied per particle
    std::vector<double> log_c;
    std::vector<double> log_w;             // log w~
    std::vector<double> w_tilde;
    std::vector<long> trials;
    std::vector<std::vector<double>> accept_evals;
    std::vector<std::vector<Vec>> delta_eps;
    std::vector<std::size_t> ancestors;    // chosen at this step; empty if not resampled
    std::vector<long> race_iters;
    bool resampled = false;
};

struct ParticleSystem {
    std::size_t n_particles = 0;
    std::vector<StepRecord> steps;

    /// State particle i was proposed from at step t (z_0 = 0 at t = 0).
    Vec parent_state(std::size_t t, std::size_t i, std::size_t d_z) const {
        if (t == 0) return Vec(d_z, 0.0);
        const StepRecord& prev = steps[t - 1];
        return prev.z[steps[t].prev_index[i]];
    }
};

struct BoundReport {
    double total = 0.0;
    std::vector<double> step_terms;  // bound increment recorded at each step
    std::vector<double> step_mean_trials;
    std::vector<double> step_mean_race_iters;  // 0 when the step did not resample
    double mean_accept_trials = 0.0;
    double acceptance_rate = 0.0;  // accepted proposals / total proposals
    double mean_race_iters = 0.0;  // over steps that resampled
    long total_trials = 0;
    long total_race_iters = 0;
    long race_draws = 0;
    double wall_seconds = 0.0;
};

struct SmcResult {
    BoundReport report;
    ParticleSystem system;
};

/// One shared propose/weight/resample pass. The bound accumulates
/// log-mean accumulated weights at every flush point (each resampling step
/// plus the final step), which reproduces each estimator's definition for
/// its policy.
inline SmcResult run_smc(const LgssmParams& model, const ProposalParams& phi, const Dataset& data,
                         const EstimatorConfig& cfg, StreamFamily& streams) {
    const std::size_t n = cfg.n_particles;
    const std::size_t T = data.length();
    if (n < 1) throw ConfigError("n_particles must be >= 1");
    if (cfg.k_draws < 1) throw ConfigError("K must be >= 1");
    if (T < 1) throw ConfigError("dataset must contain at least one observation");
    if (phi.dim() != model.d_z || phi.log_var.size() != model.d_z)
        throw ConfigError("proposal dimension does not match model");
    if (cfg.schedule) cfg.schedule->validate();

    const auto t_start = std::chrono::steady_clock::now();

    Stream& proposal_stream = streams.stream("proposal");
    Stream& prc_uniform_stream = streams.stream("prc-uniform");
    Stream& delta_stream = streams.stream("delta");
    Stream& race_categorical_stream = streams.stream("race-categorical");
    Stream& race_coin_stream = streams.stream("race-coin");

    SmcResult result;
    result.system.n_particles = n;
    result.system.steps.reserve(T);
    BoundReport& report = result.report;

    Vec log_acc(n, 0.0);  // accumulated log weights since the last flush

    for (std::size_t t = 0; t < T; ++t) {
        const Vec& x_t = data.x[t];
        StepRecord step;
        step.prev_index.resize(n);
        if (t == 0) {
            for (std::size_t i = 0; i < n; ++i) step.prev_index[i] = i;
        } else {
            const StepRecord& prev = result.system.steps[t - 1];
            for (std::size_t i = 0; i < n; ++i)
                step.prev_index[i] = prev.resampled ? prev.ancestors[i] : i;
        }

        long step_trials = 0;
        double max_log_w = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec z_prev = t == 0 ? Vec(model.d_z, 0.0)
                                      : result.system.steps[t - 1].z[step.prev_index[i]];
            const double m = cfg.schedule ? cfg.schedule->value(i, t) : 0.0;
            PrcOutcome out = prc_step(model, phi, z_prev, x_t, m, cfg.k_draws, proposal_stream,
                                      prc_uniform_stream, delta_stream, cfg.trial_cap,
                                      StepContext{t, i});
            step_trials += out.trials;
            if (out.log_w_tilde > max_log_w) max_log_w = out.log_w_tilde;
            step.z.push_back(std::move(out.z));
            step.eps.push_back(std::move(out.eps));
            step.m.push_back(m);
            step.log_c.push_back(out.log_c);
            step.log_w.push_back(out.log_w_tilde);
            step.w_tilde.push_back(out.w_tilde);
            step.trials.push_back(out.trials);
            step.accept_evals.push_back(std::move(out.accept_evals));
            step.delta_eps.push_back(std::move(out.delta_eps));
        }
        if (max_log_w == -std::numeric_limits<double>::infinity())
            throw DegenerateWeightsError("all particle weights are zero at step " +
                                         std::to_string(t));

        report.total_trials += step_trials;
        report.step_mean_trials.push_back(static_cast<double>(step_trials) /
                                          static_cast<double>(n));

        // Race categorical weights: accumulated prefix plus this step's c.
        Vec race_log_w(n);
        for (std::size_t i = 0; i < n; ++i) race_log_w[i] = log_acc[i] + step.log_c[i];
        for (std::size_t i = 0; i < n; ++i) log_acc[i] += step.log_w[i];
        {
            double m_acc = -std::numeric_limits<double>::infinity();
            for (double v : log_acc)
                if (v > m_acc) m_acc = v;
            if (m_acc == -std::numeric_limits<double>::infinity())
                throw DegenerateWeightsError("all accumulated weights are zero at step " +
                                             std::to_string(t));
        }

        const bool last = t + 1 == T;
        bool resample_now = false;
        if (!last) {
            switch (cfg.policy) {
                case ResamplePolicy::EveryStep:
                    resample_now = true;
                    break;
                case ResamplePolicy::EssThreshold: {
                    Vec w = weights_from_log(log_acc);
                    double total = 0.0;
                    for (double v : w) total += v;
                    for (double& v : w) v /= total;
                    resample_now = ess(w) < cfg.ess_fraction * static_cast<double>(n);
                    break;
                }
                case ResamplePolicy::Never:
                    resample_now = false;
                    break;
            }
        }

        const bool flush = resample_now || last;
        double term = 0.0;
        if (flush) {
            term = log_sum_exp(log_acc) - std::log(static_cast<double>(n));
            if (!std::isfinite(term))
                throw DegenerateWeightsError("non-finite bound term at step " + std::to_string(t));
            report.total += term;
        }
        report.step_terms.push_back(term);

        if (resample_now) {
            auto coin = [&](std::size_t j) {
                const double m_j = step.m[j];
                if (m_j == 0.0) return true;  // certain coin, no draws consumed
                const Vec z_prev = t == 0 ? Vec(model.d_z, 0.0)
                                          : result.system.steps[t - 1].z[step.prev_index[j]];
                const Vec kappa =
                    sample_reparam(phi, z_prev, model.A, race_coin_stream).z;
                const double lq = proposal_logpdf(phi, kappa, z_prev, model.A);
                const double lp = incremental_joint_logpdf(model, kappa, z_prev, x_t);
                const double a = acceptance_probability(lp, lq, m_j);
                return race_coin_stream.uniform() < a;
            };
            std::vector<RaceOutcome> races =
                resample_ancestors(race_log_w, coin, n, race_categorical_stream, cfg.race_cap,
                                   StepContext{t, 0});
            long iters = 0;
            for (const RaceOutcome& r : races) {
                step.ancestors.push_back(r.ancestor);
                step.race_iters.push_back(r.iterations);
                iters += r.iterations;
            }
            step.resampled = true;
            report.total_race_iters += iters;
            report.race_draws += static_cast<long>(n);
            report.step_mean_race_iters.push_back(static_cast<double>(iters) /
                                                  static_cast<double>(n));
            std::fill(log_acc.begin(), log_acc.end(), 0.0);
        } else {
            report.step_mean_race_iters.push_back(0.0);
        }

        result.system.steps.push_back(std::move(step));
    }

    const long proposals = report.total_trials;
    report.mean_accept_trials =
        static_cast<double>(proposals) / static_cast<double>(n * T);
    report.acceptance_rate =
        proposals > 0 ? static_cast<double>(n * T) / static_cast<double>(proposals) : 1.0;
    report.mean_race_iters =
        report.race_draws > 0
            ? static_cast<double>(report.total_race_iters) / static_cast<double>(report.race_draws)
            : 0.0;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

/// The rejection particle filter bound: rejection control per the schedule,
/// race resampling at every step but the last.
inline SmcResult vrpf_estimate(const LgssmParams& model, const ProposalParams& phi,
                               const Dataset& data, std::size_t n_particles, std::size_t k_draws,
                               const MSchedule& schedule, StreamFamily& streams,
                               long trial_cap = kDefaultTrialCap,
                               long race_cap = kDefaultRaceCap) {
    EstimatorConfig cfg;
    cfg.n_particles = n_particles;
    cfg.k_draws = k_draws;
    cfg.schedule = &schedule;
    cfg.policy = ResamplePolicy::EveryStep;
    cfg.trial_cap = trial_cap;
    cfg.race_cap = race_cap;
    return run_smc(model, phi, data, cfg, streams);
}

/// SMC bound without rejection control. Policy: resample every step, or
/// only when ESS drops below half the particle count.
inline SmcResult fivo_estimate(const LgssmParams& model, const ProposalParams& phi,
                               const Dataset& data, std::size_t n_particles,
                               ResamplePolicy policy, StreamFamily& streams,
                               double ess_fraction = 0.5) {
    EstimatorConfig cfg;
    cfg.n_particles = n_particles;
    cfg.k_draws = 1;
    cfg.schedule = nullptr;
    cfg.policy = policy;
    cfg.ess_fraction = ess_fraction;
    return run_smc(model, phi, data, cfg, streams);
}

/// Multi-sample bound without resampling.
inline SmcResult iwae_estimate(const LgssmParams& model, const ProposalParams& phi,
                               const Dataset& data, std::size_t n_particles,
                               StreamFamily& streams) {
    EstimatorConfig cfg;
    cfg.n_particles = n_particles;
    cfg.k_draws = 1;
    cfg.schedule = nullptr;
    cfg.policy = ResamplePolicy::Never;
    return run_smc(model, phi, data, cfg, streams);
}

/// Single-sample bound.
inline SmcResult elbo_estimate(const LgssmParams& model, const ProposalParams& phi,
                               const Dataset& data, StreamFamily& streams) {
    return iwae_estimate(model, phi, data, 1, streams);
}

}  // namespace vrpf

#endif  // VRPF_BOUNDS_HPP
