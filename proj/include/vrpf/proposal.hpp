#ifndef VRPF_PROPOSAL_HPP
#define VRPF_PROPOSAL_HPP

#include <cstddef>

#include "vrpf/lgssm.hpp"
#include "vrpf/linalg.hpp"
#include "vrpf/rng.hpp"

// Gaussian variational proposal q_phi(z_t | z_{t-1}) = N(A z_{t-1} + mu,
// diag(sigma^2)). Parameters (mu, log sigma^2) are shared across time steps.

namespace vrpf {

struct ProposalParams {
    Vec mu;
    Vec log_var;

    std::size_t dim() const { return mu.size(); }

    Vec sigma() const {
        Vec s(log_var.size());
        for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::exp(0.5 * log_var[i]);
        return s;
    }
};

/// mu = 0, log sigma^2 = 0: the proposal that coincides with the transition
/// prior.
inline ProposalParams prior_proposal(std::size_t d_z) {
    return ProposalParams{Vec(d_z, 0.0), Vec(d_z, 0.0)};
}

inline Vec proposal_mean(const ProposalParams& phi, const Vec& z_prev, const Mat& a) {
    return vec_add(matvec(a, z_prev), phi.mu);
}

/// Deterministic reparameterization map z = A z_prev + mu + sigma * eps.
inline Vec reparam_transform(const ProposalParams& phi, const Vec& z_prev, const Mat& a,
                             const Vec& eps) {
    Vec z = proposal_mean(phi, z_prev, a);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += std::exp(0.5 * phi.log_var[i]) * eps[i];
    return z;
}

struct ReparamDraw {
    Vec z;
    Vec eps;  // kept so gradients can replay the draw at perturbed phi
};

inline ReparamDraw sample_reparam(const ProposalParams& phi, const Vec& z_prev, const Mat& a,
                                  Stream& stream) {
    ReparamDraw d;
    d.eps = stream.normal_vec(phi.dim());
    d.z = reparam_transform(phi, z_prev, a, d.eps);
    return d;
}

inline double proposal_logpdf(const ProposalParams& phi, const Vec& z, const Vec& z_prev,
                              const Mat& a) {
    const Vec mean = proposal_mean(phi, z_prev, a);
    double lp = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double d = z[i] - mean[i];
        lp += -0.5 * (kLog2Pi + phi.log_var[i] + d * d / std::exp(phi.log_var[i]));
    }
    return lp;
}

/// F(z) = log q_phi(z | z_prev) - log p_theta(x_t, z | z_prev): the statistic
/// whose gamma-quantile (sign flipped) sets the rejection hyperparameter M.
inline double f_statistic(const ProposalParams& phi, const LgssmParams& model, const Vec& z,
                          const Vec& z_prev, const Vec& x_t) {
    return proposal_logpdf(phi, z, z_prev, model.A) -
           incremental_joint_logpdf(model, z, z_prev, x_t);
}

}  // namespace vrpf

#endif  // VRPF_PROPOSAL_HPP
