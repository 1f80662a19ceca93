#ifndef VRPF_TRAINING_HPP
#define VRPF_TRAINING_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "vrpf/bounds.hpp"
#include "vrpf/errors.hpp"
#include "vrpf/lgssm.hpp"
#include "vrpf/mschedule.hpp"
#include "vrpf/proposal.hpp"
#include "vrpf/rng.hpp"

// Bound optimization. The gradient is the pathwise component only: accepted
// particles and ancestors are constants, and the K delta draws are
// reparameterized through their stored noises. Everything is hand-derived
// (Gaussian log-density and logistic derivatives), certified against a
// central finite-difference oracle over the frozen-randomness bound.

namespace vrpf {

struct GradEstimate {
    Vec d_mu;
    Vec d_log_var;

    double norm() const {
        double s = 0.0;
        for (double v : d_mu) s += v * v;
        for (double v : d_log_var) s += v * v;
        return std::sqrt(s);
    }

    bool all_finite() const {
        return vrpf::all_finite(d_mu) && vrpf::all_finite(d_log_var);
    }
};

/// Nearest-rank quantile: the ceil(gamma*J)-th order statistic (ascending);
/// gamma = 0 picks the minimum.
inline double nearest_rank_quantile(Vec values, double gamma) {
    if (values.empty()) throw ConfigError("quantile of empty sample");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0,1]");
    std::sort(values.begin(), values.end());
    const std::size_t j = values.size();
    std::size_t rank = gamma <= 0.0
                           ? 1
                           : static_cast<std::size_t>(
                                 std::ceil(gamma * static_cast<double>(j)));
    if (rank < 1) rank = 1;
    if (rank > j) rank = j;
    return values[rank - 1];
}

/// log M for one (particle, time) cell: draw J proposals from the ancestor
/// state, evaluate F = log(q/p) at each, and negate the gamma-quantile.
inline double learn_log_m_cell(const LgssmParams& model, const ProposalParams& phi,
                               const Vec& z_prev, const Vec& x_t, double gamma,
                               std::size_t j_draws, Stream& stream) {
    if (j_draws < 1) throw ConfigError("J must be >= 1");
    Vec f_values;
    f_values.reserve(j_draws);
    for (std::size_t j = 0; j < j_draws; ++j) {
        const Vec z = sample_reparam(phi, z_prev, model.A, stream).z;
        f_values.push_back(f_statistic(phi, model, z, z_prev, x_t));
    }
    return -nearest_rank_quantile(std::move(f_values), gamma);
}

/// Per-particle M(i,t) learned at the current proposal, using the last run's
/// ancestor states. Cells are visited (t ascending, i ascending) on the one
/// supplied stream.
inline MSchedule learn_m_per_particle(const LgssmParams& model, const ProposalParams& phi,
                                      const ParticleSystem& system, const Dataset& data,
                                      double gamma, std::size_t j_draws, Stream& stream) {
    const std::size_t n = system.n_particles;
    const std::size_t T = system.steps.size();
    if (T != data.length()) throw ConfigError("particle system does not match dataset length");
    Mat values(n, T);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            Vec z_prev(model.d_z, 0.0);
            if (t > 0) {
                const StepRecord& prev = system.steps[t - 1];
                z_prev = prev.z[prev.resampled ? prev.ancestors[i] : i];
            }
            const double log_m =
                learn_log_m_cell(model, phi, z_prev, data.x[t], gamma, j_draws, stream);
            values(i, t) = std::exp(log_m);
        }
    }
    MSchedule out = MSchedule::per_particle_values(std::move(values));
    out.gamma = gamma;
    out.j_draws = j_draws;
    return out;
}

/// Collapse a per-particle schedule to one M per time step by taking the
/// minimum over particles (equivalently the min of the log values), which
/// can only raise acceptance rates.
inline MSchedule to_shared(const MSchedule& per_particle) {
    if (per_particle.mode != MMode::PerParticle)
        throw ConfigError("to_shared expects a per-particle schedule");
    const Mat& v = per_particle.per_particle;
    Vec shared(v.cols());
    for (std::size_t t = 0; t < v.cols(); ++t) {
        double m = v(0, t);
        for (std::size_t i = 1; i < v.rows(); ++i) m = std::min(m, v(i, t));
        shared[t] = m;
    }
    MSchedule out = MSchedule::shared(std::move(shared));
    out.gamma = per_particle.gamma;
    out.j_draws = per_particle.j_draws;
    out.f_update = per_particle.f_update;
    return out;
}

namespace detail {

// Replay semantics: the bound as a function of phi with all randomness
// frozen. Accepted particles rebuild through their stored noises,
// z_t = A z_{t-1} + mu + sigma*eps, recursively along the resampled lineage;
// delta draws rebuild the same way; accept/reject outcomes and ancestor
// indices stay fixed. Differentiating this map (the terms the dropped
// score-function components do not cover) is the biased pathwise gradient
// the optimizer uses.

/// Reconstructed particle states for one step at the current phi.
inline std::vector<Vec> rebuild_step(const LgssmParams& model, const ProposalParams& phi,
                                     const StepRecord& step, const std::vector<Vec>& prev_z,
                                     std::vector<Vec>& z_parents) {
    const std::size_t n = step.eps.size();
    std::vector<Vec> z(n);
    z_parents.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        z_parents[i] =
            prev_z.empty() ? Vec(model.d_z, 0.0) : prev_z[step.prev_index[i]];
        z[i] = reparam_transform(phi, z_parents[i], model.A, step.eps[i]);
    }
    return z;
}

struct ParticleEval {
    double log_q = 0.0;
    double log_p = 0.0;
    double log_c = 0.0;
    double log_w = 0.0;
    double mean_a = 1.0;
    std::vector<double> a;  // per delta draw, empty when m == 0
};

inline ParticleEval eval_particle(const LgssmParams& model, const ProposalParams& phi,
                                  const Vec& z_prev, const Vec& x_t, const Vec& z, double m,
                                  const std::vector<Vec>& delta_eps) {
    ParticleEval e;
    e.log_q = proposal_logpdf(phi, z, z_prev, model.A);
    e.log_p = incremental_joint_logpdf(model, z, z_prev, x_t);
    e.log_c = log_c_multiplier(e.log_p, e.log_q, m);
    if (m == 0.0) {
        e.log_w = e.log_c;
        return e;
    }
    double sum = 0.0;
    e.a.reserve(delta_eps.size());
    for (const Vec& eps : delta_eps) {
        const Vec delta = reparam_transform(phi, z_prev, model.A, eps);
        const double lq = proposal_logpdf(phi, delta, z_prev, model.A);
        const double lp = incremental_joint_logpdf(model, delta, z_prev, x_t);
        const double a = acceptance_probability(lp, lq, m);
        e.a.push_back(a);
        sum += a;
    }
    e.mean_a = sum / static_cast<double>(delta_eps.size());
    e.log_w = e.log_c + std::log(e.mean_a);
    return e;
}

}  // namespace detail

/// The bound as a deterministic function of phi, with every random quantity
/// frozen in the recorded system. At the phi that generated the system this
/// reproduces its bound bit-exactly; derivatives of this map define the
/// pathwise gradient.
inline double replay_bound(const LgssmParams& model, const ProposalParams& phi,
                           const Dataset& data, const ParticleSystem& system) {
    const std::size_t n = system.n_particles;
    double total = 0.0;
    std::vector<Vec> prev_z;
    for (std::size_t t = 0; t < system.steps.size(); ++t) {
        const StepRecord& step = system.steps[t];
        std::vector<Vec> parents;
        std::vector<Vec> z = detail::rebuild_step(model, phi, step, prev_z, parents);
        Vec log_w(n);
        for (std::size_t i = 0; i < n; ++i)
            log_w[i] = detail::eval_particle(model, phi, parents[i], data.x[t], z[i], step.m[i],
                                             step.delta_eps[i])
                           .log_w;
        const double term = log_sum_exp(log_w) - std::log(static_cast<double>(n));
        if (!std::isfinite(term))
            throw DegenerateWeightsError("replayed bound term is non-finite at step " +
                                         std::to_string(t));
        total += term;
        prev_z = std::move(z);
    }
    return total;
}

/// Analytic gradient of replay_bound with respect to (mu, log sigma^2).
/// Particle locations carry d x 2d Jacobians that chain through the
/// resampled lineage: J_t = A J_{t-1}^{parent} + D(eps), where D holds the
/// direct derivatives dz/dmu = I and dz/dlog(sigma^2) = diag(sigma*eps)/2.
inline GradEstimate gradient_from_system(const LgssmParams& model, const ProposalParams& phi,
                                         const Dataset& data, const ParticleSystem& system) {
    const std::size_t n = system.n_particles;
    const std::size_t d = model.d_z;
    const std::size_t p2 = 2 * d;
    GradEstimate grad{Vec(d, 0.0), Vec(d, 0.0)};
    const Vec sigma = phi.sigma();

    auto direct_jacobian = [&](const Vec& eps) {
        Mat dj(d, p2);
        for (std::size_t r = 0; r < d; ++r) {
            dj(r, r) = 1.0;
            dj(r, d + r) = 0.5 * sigma[r] * eps[r];
        }
        return dj;
    };
    auto chained_jacobian = [&](const Mat* jac_prev, const Vec& eps) {
        Mat j = direct_jacobian(eps);
        if (jac_prev)
            for (std::size_t r = 0; r < d; ++r)
                for (std::size_t c = 0; c < p2; ++c) {
                    double s = 0.0;
                    for (std::size_t k = 0; k < d; ++k) s += model.A(r, k) * (*jac_prev)(k, c);
                    j(r, c) += s;
                }
        return j;
    };
    // row_vec^T * jac accumulated into out.
    auto add_vjp = [&](Vec& out, const Vec& row, const Mat& jac, double scale) {
        for (std::size_t c = 0; c < p2; ++c) {
            double s = 0.0;
            for (std::size_t r = 0; r < d; ++r) s += row[r] * jac(r, c);
            out[c] += scale * s;
        }
    };

    std::vector<Vec> prev_z;
    std::vector<Mat> prev_jac;
    for (std::size_t t = 0; t < system.steps.size(); ++t) {
        const StepRecord& step = system.steps[t];
        const Vec& x_t = data.x[t];

        std::vector<Vec> parents(n);
        std::vector<const Mat*> parent_jac(n, nullptr);
        std::vector<Vec> z(n);
        std::vector<Mat> jac(n);
        std::vector<detail::ParticleEval> evals(n);
        double lse_w = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            parents[i] = prev_z.empty() ? Vec(d, 0.0) : prev_z[step.prev_index[i]];
            if (!prev_jac.empty()) parent_jac[i] = &prev_jac[step.prev_index[i]];
            z[i] = reparam_transform(phi, parents[i], model.A, step.eps[i]);
            jac[i] = chained_jacobian(parent_jac[i], step.eps[i]);
            evals[i] = detail::eval_particle(model, phi, parents[i], x_t, z[i], step.m[i],
                                             step.delta_eps[i]);
            if (evals[i].log_w > lse_w) lse_w = evals[i].log_w;
        }
        if (lse_w == -std::numeric_limits<double>::infinity())
            throw DegenerateWeightsError("gradient: all weights zero at step " +
                                         std::to_string(t));
        double denom = 0.0;
        for (std::size_t i = 0; i < n; ++i) denom += std::exp(evals[i].log_w - lse_w);

        for (std::size_t i = 0; i < n; ++i) {
            const detail::ParticleEval& e = evals[i];
            const double weight = std::exp(e.log_w - lse_w) / denom;  // normalized w~
            if (weight == 0.0) continue;

            // d log c = s * (d log p - d log q), with s the density share
            // p/(q c); d log q at a rebuilt draw is (0, -1/2) per coordinate.
            Vec dlogw(p2, 0.0);
            const double s_ratio = std::exp(e.log_p - e.log_q - e.log_c);
            const Vec gz = incremental_joint_grad_z(model, z[i], parents[i], x_t);
            add_vjp(dlogw, gz, jac[i], s_ratio);
            if (parent_jac[i]) {
                const Vec gzp = incremental_joint_grad_zprev(model, z[i], parents[i]);
                add_vjp(dlogw, gzp, *parent_jac[i], s_ratio);
            }
            for (std::size_t j = 0; j < d; ++j) dlogw[d + j] += s_ratio * 0.5;

            if (step.m[i] > 0.0 && e.mean_a > 0.0) {
                // d log(mean a) = sum_k a(1-a) du_k / (K mean_a).
                const double k_draws = static_cast<double>(step.delta_eps[i].size());
                const double coin_scale = 1.0 / (k_draws * e.mean_a);
                for (std::size_t k = 0; k < step.delta_eps[i].size(); ++k) {
                    const double fac = e.a[k] * (1.0 - e.a[k]);
                    if (fac == 0.0) continue;
                    const Vec& eps = step.delta_eps[i][k];
                    const Vec delta = reparam_transform(phi, parents[i], model.A, eps);
                    const Mat jac_delta = chained_jacobian(parent_jac[i], eps);
                    const Vec gd = incremental_joint_grad_z(model, delta, parents[i], x_t);
                    add_vjp(dlogw, gd, jac_delta, coin_scale * fac);
                    if (parent_jac[i]) {
                        const Vec gdp = incremental_joint_grad_zprev(model, delta, parents[i]);
                        add_vjp(dlogw, gdp, *parent_jac[i], coin_scale * fac);
                    }
                    for (std::size_t j = 0; j < d; ++j)
                        dlogw[d + j] += coin_scale * fac * 0.5;
                }
            }

            for (std::size_t j = 0; j < d; ++j) {
                grad.d_mu[j] += weight * dlogw[j];
                grad.d_log_var[j] += weight * dlogw[d + j];
            }
        }
        prev_z = std::move(z);
        prev_jac = std::move(jac);
    }
    return grad;
}

struct GradResult {
    GradEstimate grad;
    BoundReport report;
    ParticleSystem system;
};

/// One stochastic gradient: draw a bound evaluation, then differentiate it
/// with the randomness held fixed.
inline GradResult pathwise_gradient(const LgssmParams& model, const ProposalParams& phi,
                                    const Dataset& data, std::size_t n_particles,
                                    std::size_t k_draws, const MSchedule& schedule,
                                    StreamFamily& streams, long trial_cap = kDefaultTrialCap,
                                    long race_cap = kDefaultRaceCap) {
    SmcResult run =
        vrpf_estimate(model, phi, data, n_particles, k_draws, schedule, streams, trial_cap,
                      race_cap);
    GradResult out;
    out.grad = gradient_from_system(model, phi, data, run.system);
    out.report = std::move(run.report);
    out.system = std::move(run.system);
    return out;
}

/// Central finite differences of a deterministic bound evaluator; the test
/// oracle for the analytic gradient. The evaluator is probed twice at the
/// base point first — any disagreement means its randomness is not frozen.
inline GradEstimate finite_difference_gradient(
    const std::function<double(const ProposalParams&)>& evaluator, const ProposalParams& phi,
    double h) {
    if (!(h > 0.0)) throw ConfigError("finite difference step must be > 0");
    const double f0 = evaluator(phi);
    const double f1 = evaluator(phi);
    if (f0 != f1)
        throw OracleIntegrityError("evaluator returned different values at identical parameters");

    const std::size_t d = phi.dim();
    GradEstimate g{Vec(d, 0.0), Vec(d, 0.0)};
    for (std::size_t j = 0; j < d; ++j) {
        ProposalParams lo = phi, hi = phi;
        lo.mu[j] -= h;
        hi.mu[j] += h;
        g.d_mu[j] = (evaluator(hi) - evaluator(lo)) / (2.0 * h);
    }
    for (std::size_t j = 0; j < d; ++j) {
        ProposalParams lo = phi, hi = phi;
        lo.log_var[j] -= h;
        hi.log_var[j] += h;
        g.d_log_var[j] = (evaluator(hi) - evaluator(lo)) / (2.0 * h);
    }
    return g;
}

enum class OptimizerKind { Sgd, Adam };

inline std::string to_string(OptimizerKind k) {
    return k == OptimizerKind::Sgd ? "sgd" : "adam";
}

struct TrainConfig {
    std::size_t n_particles = 4;
    std::size_t k_draws = 3;
    double gamma = 0.4;
    std::size_t j_draws = 64;
    std::size_t f_update = 10;
    bool refresh_m = true;  // false keeps M at zero: plain SMC-bound training
    bool shared_m = false;  // collapse learned M to one value per time step
    OptimizerKind optimizer = OptimizerKind::Sgd;
    double lr = 1e-2;
    std::size_t epochs = 100;
    long trial_cap = kDefaultTrialCap;
    long race_cap = kDefaultRaceCap;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double bound = 0.0;
    double grad_norm = 0.0;
    double acceptance_rate = 1.0;
    bool m_refreshed = false;
    double lr = 0.0;
};

struct TrainTrace {
    std::vector<EpochRecord> epochs;
    std::string abort_reason;  // empty on clean completion
};

struct TrainResult {
    ProposalParams phi;
    TrainTrace trace;
    MSchedule schedule;
};

using EpochCallback = std::function<void(const EpochRecord&, const ProposalParams&)>;

/// Stochastic gradient ascent on the bound. M starts at zero and, when
/// refreshing is enabled, is relearned from the latest particle system every
/// f_update epochs at the current proposal. Epoch randomness comes from
/// per-epoch derived stream families, so a run is a pure function of
/// (inputs, seed).
inline TrainResult optimize(const LgssmParams& model, const Dataset& data,
                            const ProposalParams& phi0, const TrainConfig& cfg,
                            std::uint64_t seed, const EpochCallback& on_epoch = {}) {
    TrainResult result;
    result.phi = phi0;
    result.schedule = MSchedule::zero();
    result.schedule.gamma = cfg.gamma;
    result.schedule.j_draws = cfg.j_draws;
    result.schedule.f_update = cfg.f_update;

    const std::size_t d = phi0.dim();
    Vec adam_m(2 * d, 0.0), adam_v(2 * d, 0.0);
    constexpr double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;

    for (std::size_t ep = 1; ep <= cfg.epochs; ++ep) {
        StreamFamily family = make_default_streams(derive_seed(seed, ep));
        GradResult g;
        try {
            g = pathwise_gradient(model, result.phi, data, cfg.n_particles, cfg.k_draws,
                                  result.schedule, family, cfg.trial_cap, cfg.race_cap);
        } catch (const RunawayError& e) {
            result.trace.abort_reason = "epoch " + std::to_string(ep) + ": " + e.what();
            break;
        } catch (const DegenerateWeightsError& e) {
            result.trace.abort_reason = "epoch " + std::to_string(ep) + ": " + e.what();
            break;
        } catch (const NumericError& e) {
            result.trace.abort_reason = "epoch " + std::to_string(ep) + ": " + e.what();
            break;
        }
        if (!g.grad.all_finite()) {
            result.trace.abort_reason = "non-finite gradient at epoch " + std::to_string(ep);
            break;
        }

        if (cfg.optimizer == OptimizerKind::Sgd) {
            for (std::size_t j = 0; j < d; ++j) {
                result.phi.mu[j] += cfg.lr * g.grad.d_mu[j];
                result.phi.log_var[j] += cfg.lr * g.grad.d_log_var[j];
            }
        } else {
            const double bc1 = 1.0 - std::pow(b1, static_cast<double>(ep));
            const double bc2 = 1.0 - std::pow(b2, static_cast<double>(ep));
            for (std::size_t j = 0; j < 2 * d; ++j) {
                const double gj = j < d ? g.grad.d_mu[j] : g.grad.d_log_var[j - d];
                adam_m[j] = b1 * adam_m[j] + (1.0 - b1) * gj;
                adam_v[j] = b2 * adam_v[j] + (1.0 - b2) * gj * gj;
                const double step = cfg.lr * (adam_m[j] / bc1) /
                                    (std::sqrt(adam_v[j] / bc2) + adam_eps);
                if (j < d)
                    result.phi.mu[j] += step;
                else
                    result.phi.log_var[j - d] += step;
            }
        }

        bool refreshed = false;
        if (cfg.refresh_m && ep % cfg.f_update == 0) {
            Stream quantile_stream = derive_stream(seed, "m-quantile", ep, 0);
            MSchedule learned = learn_m_per_particle(model, result.phi, g.system, data, cfg.gamma,
                                                     cfg.j_draws, quantile_stream);
            result.schedule = cfg.shared_m ? to_shared(learned) : std::move(learned);
            result.schedule.f_update = cfg.f_update;
            refreshed = true;
        }

        result.trace.epochs.push_back(EpochRecord{ep, g.report.total, g.grad.norm(),
                                                  g.report.acceptance_rate, refreshed, cfg.lr});
        if (on_epoch) on_epoch(result.trace.epochs.back(), result.phi);
    }
    return result;
}

/// One-shot M learning for estimate-only runs: a warmup pass with M = 0
/// supplies the ancestor states the quantile draws condition on.
inline MSchedule learn_schedule_oneshot(const LgssmParams& model, const ProposalParams& phi,
                                        const Dataset& data, std::size_t n_particles,
                                        double gamma, std::size_t j_draws, bool shared,
                                        std::uint64_t seed) {
    StreamFamily family = make_default_streams(derive_seed(seed, 0x77A8));
    SmcResult warmup =
        vrpf_estimate(model, phi, data, n_particles, 1, MSchedule::zero(), family);
    Stream quantile_stream = derive_stream(seed, "m-quantile", 0, 0);
    MSchedule learned =
        learn_m_per_particle(model, phi, warmup.system, data, gamma, j_draws, quantile_stream);
    return shared ? to_shared(learned) : learned;
}

}  // namespace vrpf

#endif  // VRPF_TRAINING_HPP
