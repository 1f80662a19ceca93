#ifndef VRPF_LGSSM_HPP
#define VRPF_LGSSM_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "vrpf/errors.hpp"
#include "vrpf/linalg.hpp"
#include "vrpf/rng.hpp"

// Linear Gaussian state-space model
//
//   z_t = A z_{t-1} + e_z,   x_t = C z_t + e_x,   e_z, e_x ~ N(0, I),  z_0 = 0.
//
// Noise covariances are pinned to identity and z_0 to zero; only A and C
// vary. The exact Kalman-filter log marginal likelihood serves as ground
// truth for every bound estimator in this library.

namespace vrpf {

struct LgssmParams {
    std::size_t d_z = 0;
    std::size_t d_x = 0;
    Mat A;  // d_z x d_z transition
    Mat C;  // d_x x d_z emission
};

inline LgssmParams make_lgssm(Mat a, Mat c) {
    LgssmParams p;
    p.d_z = a.rows();
    p.d_x = c.rows();
    if (a.cols() != p.d_z) throw ConfigError("transition matrix must be square");
    if (c.cols() != p.d_z) throw ConfigError("emission matrix has wrong column count");
    if (!a.all_finite() || !c.all_finite()) throw ConfigError("model matrices must be finite");
    p.A = std::move(a);
    p.C = std::move(c);
    return p;
}

struct Dataset {
    std::vector<Vec> x;  // T observations, each d_x
    std::vector<Vec> z;  // simulation provenance; empty when loaded from file
    std::size_t length() const { return x.size(); }
};

/// (A)_{ij} = alpha^{|i-j|+1}; symmetric banded decay away from the diagonal.
inline Mat build_transition_matrix(double alpha, std::size_t d_z) {
    if (d_z < 1) throw ConfigError("d_z must be >= 1");
    Mat a(d_z, d_z);
    for (std::size_t i = 0; i < d_z; ++i)
        for (std::size_t j = 0; j < d_z; ++j) {
            const std::size_t k = (i > j ? i - j : j - i) + 1;
            double v = 1.0;
            for (std::size_t p = 0; p < k; ++p) v *= alpha;
            a(i, j) = v;
        }
    return a;
}

enum class EmissionKind { Sparse, Dense };

inline EmissionKind emission_kind_from_string(const std::string& s) {
    if (s == "sparse") return EmissionKind::Sparse;
    if (s == "dense") return EmissionKind::Dense;
    throw ConfigError("emission kind must be 'sparse' or 'dense', got '" + s + "'");
}

inline std::string to_string(EmissionKind k) {
    return k == EmissionKind::Sparse ? "sparse" : "dense";
}

/// Sparse: measure the first d_x latent components, C = [I | 0].
/// Dense: i.i.d. standard normal entries, drawn row-major from the stream.
inline Mat build_emission_matrix(EmissionKind kind, std::size_t d_x, std::size_t d_z,
                                 Stream& stream) {
    if (kind == EmissionKind::Sparse) {
        if (d_x > d_z)
            throw ConfigError("sparse emission requires d_x <= d_z");
        Mat c(d_x, d_z);
        for (std::size_t i = 0; i < d_x; ++i) c(i, i) = 1.0;
        return c;
    }
    Mat c(d_x, d_z);
    for (std::size_t i = 0; i < d_x; ++i)
        for (std::size_t j = 0; j < d_z; ++j) c(i, j) = stream.normal();
    return c;
}

/// Deterministic core of the generative recursion, for caller-supplied noise.
inline Dataset simulate_given_noise(const LgssmParams& p, const std::vector<Vec>& e_z,
                                    const std::vector<Vec>& e_x) {
    if (e_z.size() != e_x.size()) throw ConfigError("noise sequences must have equal length");
    Dataset d;
    Vec z_prev(p.d_z, 0.0);
    for (std::size_t t = 0; t < e_z.size(); ++t) {
        Vec z = vec_add(matvec(p.A, z_prev), e_z[t]);
        Vec x = vec_add(matvec(p.C, z), e_x[t]);
        d.z.push_back(z);
        d.x.push_back(std::move(x));
        z_prev = std::move(z);
    }
    return d;
}

inline Dataset simulate(const LgssmParams& p, std::size_t T, Stream& stream) {
    if (T < 1) throw ConfigError("T must be >= 1");
    std::vector<Vec> e_z(T), e_x(T);
    for (std::size_t t = 0; t < T; ++t) {
        e_z[t] = stream.normal_vec(p.d_z);
        e_x[t] = stream.normal_vec(p.d_x);
    }
    return simulate_given_noise(p, e_z, e_x);
}

/// log p(x_t, z_t | z_{t-1}) = log N(z_t; A z_{t-1}, I) + log N(x_t; C z_t, I).
inline double incremental_joint_logpdf(const LgssmParams& p, const Vec& z_t, const Vec& z_prev,
                                       const Vec& x_t) {
    if (!all_finite(z_t) || !all_finite(z_prev) || !all_finite(x_t))
        throw NumericError("incremental_joint_logpdf: non-finite input");
    const double trans = log_normal_identity(z_t, matvec(p.A, z_prev));
    const double emit = log_normal_identity(x_t, matvec(p.C, z_t));
    return trans + emit;
}

/// Gradient of the incremental joint log density with respect to z_t:
/// -(z_t - A z_{t-1}) + C^T (x_t - C z_t). Used by the pathwise gradient.
inline Vec incremental_joint_grad_z(const LgssmParams& p, const Vec& z_t, const Vec& z_prev,
                                    const Vec& x_t) {
    Vec g = vec_sub(matvec(p.A, z_prev), z_t);
    const Vec resid = vec_sub(x_t, matvec(p.C, z_t));
    for (std::size_t i = 0; i < p.d_z; ++i) {
        double s = 0.0;
        for (std::size_t r = 0; r < p.d_x; ++r) s += p.C(r, i) * resid[r];
        g[i] += s;
    }
    return g;
}

/// Gradient with respect to the conditioning state: A^T (z_t - A z_{t-1}).
inline Vec incremental_joint_grad_zprev(const LgssmParams& p, const Vec& z_t, const Vec& z_prev) {
    const Vec innov = vec_sub(z_t, matvec(p.A, z_prev));
    Vec g(p.d_z, 0.0);
    for (std::size_t i = 0; i < p.d_z; ++i) {
        double s = 0.0;
        for (std::size_t r = 0; r < p.d_z; ++r) s += p.A(r, i) * innov[r];
        g[i] = s;
    }
    return g;
}

/// Per-step predictive log densities log p(x_t | x_{1:t-1}) from the exact
/// Kalman recursion. Covariance updates use the Joseph form.
inline std::vector<double> kalman_predictive_terms(const LgssmParams& p,
                                                   const std::vector<Vec>& xs) {
    if (xs.empty()) throw ConfigError("kalman needs at least one observation");
    const std::size_t n = p.d_z;
    Vec m(n, 0.0);       // filtered mean, starts at z_0 = 0
    Mat cov(n, n, 0.0);  // filtered covariance, z_0 deterministic
    const Mat at = transpose(p.A);
    const Mat ct = transpose(p.C);
    std::vector<double> terms;
    terms.reserve(xs.size());
    for (const Vec& x : xs) {
        if (x.size() != p.d_x) throw ConfigError("observation dimension mismatch");
        // Predict.
        const Vec m_pred = matvec(p.A, m);
        Mat p_pred = add(matmul(matmul(p.A, cov), at), Mat::identity(n));
        // Innovation covariance S = C P C^T + I, factored once.
        Mat s = add(matmul(matmul(p.C, p_pred), ct), Mat::identity(p.d_x));
        const Mat l = cholesky(s);
        terms.push_back(log_normal_chol(x, matvec(p.C, m_pred), l));
        // Gain K = P C^T S^{-1}, column by column through the factor.
        const Mat pct = matmul(p_pred, ct);
        Mat gain(n, p.d_x);
        for (std::size_t j = 0; j < n; ++j) {
            Vec row(p.d_x);
            for (std::size_t r = 0; r < p.d_x; ++r) row[r] = pct(j, r);
            const Vec solved = back_substitute(l, forward_substitute(l, row));
            for (std::size_t r = 0; r < p.d_x; ++r) gain(j, r) = solved[r];
        }
        const Vec innov = vec_sub(x, matvec(p.C, m_pred));
        m = vec_add(m_pred, matvec(gain, innov));
        // Joseph form: P = (I-KC) P (I-KC)^T + K K^T  (emission noise = I).
        const Mat ikc = sub(Mat::identity(n), matmul(gain, p.C));
        cov = add(matmul(matmul(ikc, p_pred), transpose(ikc)), matmul(gain, transpose(gain)));
    }
    return terms;
}

/// Exact log marginal likelihood log p(x_{1:T}).
inline double kalman_logmarginal(const LgssmParams& p, const std::vector<Vec>& xs) {
    double total = 0.0;
    for (double term : kalman_predictive_terms(p, xs)) total += term;
    return total;
}

}  // namespace vrpf

#endif  // VRPF_LGSSM_HPP
