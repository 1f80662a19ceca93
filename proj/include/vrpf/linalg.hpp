#ifndef VRPF_LINALG_HPP
#define VRPF_LINALG_HPP

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <vector>

#include "vrpf/errors.hpp"

// Small dense linear algebra, just enough for low-dimensional state-space
// models: mat-vec/mat-mat products, Cholesky solves, and Gaussian log
// densities. Everything is double precision and row-major.

namespace vrpf {

using Vec = std::vector<double>;

class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Mat(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw ConfigError("ragged matrix initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    const std::vector<double>& data() const { return data_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    friend bool operator==(const Mat& a, const Mat& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline Vec matvec(const Mat& a, const Vec& v) {
    if (a.cols() != v.size()) throw ConfigError("matvec: shape mismatch");
    Vec out(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * v[j];
        out[i] = s;
    }
    return out;
}

inline Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols() != b.rows()) throw ConfigError("matmul: shape mismatch");
    Mat out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
        }
    return out;
}

inline Mat transpose(const Mat& a) {
    Mat out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

inline Mat add(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ConfigError("add: shape mismatch");
    Mat out = a;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) += b(i, j);
    return out;
}

inline Mat sub(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ConfigError("sub: shape mismatch");
    Mat out = a;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) -= b(i, j);
    return out;
}

inline Vec vec_add(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw ConfigError("vec_add: size mismatch");
    Vec out = a;
    for (std::size_t i = 0; i < b.size(); ++i) out[i] += b[i];
    return out;
}

inline Vec vec_sub(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw ConfigError("vec_sub: size mismatch");
    Vec out = a;
    for (std::size_t i = 0; i < b.size(); ++i) out[i] -= b[i];
    return out;
}

inline double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw ConfigError("dot: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
/// Throws NumericError when a pivot is not strictly positive.
inline Mat cholesky(const Mat& s) {
    if (s.rows() != s.cols()) throw ConfigError("cholesky: matrix not square");
    const std::size_t n = s.rows();
    Mat l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = s(i, j);
            for (std::size_t k = 0; k < j; ++k) sum -= l(i, k) * l(j, k);
            if (i == j) {
                if (!(sum > 0.0)) throw NumericError("cholesky: matrix not positive definite");
                l(i, i) = std::sqrt(sum);
            } else {
                l(i, j) = sum / l(j, j);
            }
        }
    }
    return l;
}

/// Solves L y = b for lower-triangular L.
inline Vec forward_substitute(const Mat& l, const Vec& b) {
    const std::size_t n = l.rows();
    Vec y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
        y[i] = s / l(i, i);
    }
    return y;
}

/// Solves L^T x = y for lower-triangular L.
inline Vec back_substitute(const Mat& l, const Vec& y) {
    const std::size_t n = l.rows();
    Vec x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = y[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
        x[i] = s / l(i, i);
    }
    return x;
}

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

/// log N(x; mean, I) — isotropic unit-covariance Gaussian.
inline double log_normal_identity(const Vec& x, const Vec& mean) {
    if (x.size() != mean.size()) throw ConfigError("log_normal_identity: size mismatch");
    double q = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - mean[i];
        q += d * d;
    }
    return -0.5 * (static_cast<double>(x.size()) * kLog2Pi + q);
}

/// log N(x; mean, S) with S given by its Cholesky factor L (S = L L^T).
inline double log_normal_chol(const Vec& x, const Vec& mean, const Mat& l) {
    const std::size_t n = x.size();
    Vec y = forward_substitute(l, vec_sub(x, mean));
    double logdet = 0.0;
    for (std::size_t i = 0; i < n; ++i) logdet += std::log(l(i, i));
    return -0.5 * (static_cast<double>(n) * kLog2Pi + dot(y, y)) - logdet;
}

/// Numerically stable log(exp(a) + exp(b)).
inline double log_sum_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double m = a > b ? a : b;
    return m + std::log1p(std::exp(-(std::abs(a - b))));
}

inline double log_sum_exp(const Vec& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v)
        if (x > m) m = x;
    if (m == -std::numeric_limits<double>::infinity()) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

}  // namespace vrpf

#endif  // VRPF_LINALG_HPP
