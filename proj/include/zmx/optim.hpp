#pragma once

// Small dense optimization toolkit: BFGS with backtracking line search,
// central finite-difference derivatives, and Cholesky-based SPD inversion.
// Everything here works on plain std::vector matrices; the problems in this
// library have at most a handful of parameters.

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

namespace zmx {

using Vector = std::vector<double>;
using Matrix = std::vector<std::vector<double>>;

/// Objective with optional analytic gradient: fill *grad when non-null.
using ObjectiveFn = std::function<double(const Vector&, Vector* grad)>;

struct BfgsOptions {
    double grad_tol = 1e-8;  // infinity norm of the gradient
    double f_tol = 1e-10;    // absolute objective change
    int max_iters = 2000;
};

struct BfgsResult {
    Vector x;
    double f = 0.0;
    Vector gradient;
    bool converged = false;
    int iterations = 0;
};

inline double inf_norm(const Vector& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double dot(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Minimizes f. The inverse-Hessian approximation starts at the identity and
/// is updated with the BFGS formula whenever the curvature condition holds.
inline BfgsResult bfgs_minimize(const ObjectiveFn& f, Vector x0, const BfgsOptions& opts = {}) {
    const std::size_t d = x0.size();
    BfgsResult res;
    res.x = std::move(x0);
    res.gradient.assign(d, 0.0);
    res.f = f(res.x, &res.gradient);

    Matrix H(d, Vector(d, 0.0));
    for (std::size_t i = 0; i < d; ++i) H[i][i] = 1.0;

    for (int it = 0; it < opts.max_iters; ++it) {
        res.iterations = it;
        if (inf_norm(res.gradient) <= opts.grad_tol) {
            res.converged = true;
            return res;
        }

        Vector dir(d, 0.0);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) dir[i] -= H[i][j] * res.gradient[j];

        double slope = dot(dir, res.gradient);
        if (!(slope < 0.0)) {
            // reset to steepest descent if the approximation went bad
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t j = 0; j < d; ++j) H[i][j] = 0.0;
                H[i][i] = 1.0;
                dir[i] = -res.gradient[i];
            }
            slope = dot(dir, res.gradient);
            if (!(slope < 0.0)) return res;  // gradient is zero or NaN
        }

        // backtracking Armijo search from the Newton step
        double step = 1.0;
        Vector x_new(d), g_new(d);
        double f_new = res.f;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t i = 0; i < d; ++i) x_new[i] = res.x[i] + step * dir[i];
            f_new = f(x_new, &g_new);
            if (std::isfinite(f_new) && f_new <= res.f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            res.converged = inf_norm(res.gradient) <= opts.grad_tol;
            return res;
        }

        Vector s(d), yv(d);
        for (std::size_t i = 0; i < d; ++i) {
            s[i] = x_new[i] - res.x[i];
            yv[i] = g_new[i] - res.gradient[i];
        }
        const double f_old = res.f;
        res.x = x_new;
        res.f = f_new;
        res.gradient = g_new;

        const double sy = dot(s, yv);
        if (sy > 1e-12 * inf_norm(s) * inf_norm(yv)) {
            // H <- (I - s y^T / sy) H (I - y s^T / sy) + s s^T / sy
            Vector Hy(d, 0.0);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) Hy[i] += H[i][j] * yv[j];
            const double yHy = dot(yv, Hy);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j)
                    H[i][j] += (sy + yHy) * s[i] * s[j] / (sy * sy) -
                               (Hy[i] * s[j] + s[i] * Hy[j]) / sy;
        }

        if (std::abs(f_old - f_new) < opts.f_tol && inf_norm(res.gradient) <= opts.grad_tol) {
            res.converged = true;
            return res;
        }
    }
    res.converged = inf_norm(res.gradient) <= opts.grad_tol;
    return res;
}

/// Central finite-difference gradient with per-coordinate steps h*(1+|x_k|).
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                          double h_scale = 1e-6) {
    Vector g(x.size());
    Vector xp = x, xm = x;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double h = h_scale * (1.0 + std::abs(x[k]));
        xp[k] = x[k] + h;
        xm[k] = x[k] - h;
        g[k] = (f(xp) - f(xm)) / (2.0 * h);
        xp[k] = x[k];
        xm[k] = x[k];
    }
    return g;
}

/// Central finite-difference Hessian, steps h*(1+|x_k|) per coordinate.
inline Matrix fd_hessian(const std::function<double(const Vector&)>& f, const Vector& x,
                         double h_scale = 1e-5) {
    const std::size_t d = x.size();
    Vector h(d);
    for (std::size_t k = 0; k < d; ++k) h[k] = h_scale * (1.0 + std::abs(x[k]));

    Matrix H(d, Vector(d, 0.0));
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = a; b < d; ++b) {
            Vector xpp = x, xpm = x, xmp = x, xmm = x;
            xpp[a] += h[a];
            xpp[b] += h[b];
            xpm[a] += h[a];
            xpm[b] -= h[b];
            xmp[a] -= h[a];
            xmp[b] += h[b];
            xmm[a] -= h[a];
            xmm[b] -= h[b];
            H[a][b] = H[b][a] = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * h[a] * h[b]);
        }
    }
    return H;
}

/// Cholesky factor of a symmetric positive-definite matrix; nullopt if the
/// matrix is not (numerically) positive definite. Pivots must clear a small
/// fraction of the corresponding diagonal entry, so exact linear dependence
/// is rejected instead of slipping through as round-off.
inline std::optional<Matrix> cholesky(const Matrix& A, double pivot_rel_tol = 1e-12) {
    const std::size_t d = A.size();
    Matrix L(d, Vector(d, 0.0));
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = A[i][j];
            for (std::size_t k = 0; k < j; ++k) s -= L[i][k] * L[j][k];
            if (i == j) {
                if (!(s > pivot_rel_tol * std::abs(A[i][i]))) return std::nullopt;
                L[i][i] = std::sqrt(s);
            } else {
                L[i][j] = s / L[j][j];
            }
        }
    }
    return L;
}

/// Inverse of an SPD matrix through its Cholesky factor.
inline std::optional<Matrix> invert_spd(const Matrix& A) {
    auto Lopt = cholesky(A);
    if (!Lopt) return std::nullopt;
    const Matrix& L = *Lopt;
    const std::size_t d = A.size();

    // forward/back substitution per unit vector
    Matrix inv(d, Vector(d, 0.0));
    for (std::size_t col = 0; col < d; ++col) {
        Vector y(d, 0.0);
        for (std::size_t i = 0; i < d; ++i) {
            double s = (i == col) ? 1.0 : 0.0;
            for (std::size_t k = 0; k < i; ++k) s -= L[i][k] * y[k];
            y[i] = s / L[i][i];
        }
        for (std::size_t i = d; i-- > 0;) {
            double s = y[i];
            for (std::size_t k = i + 1; k < d; ++k) s -= L[k][i] * inv[k][col];
            inv[i][col] = s / L[i][i];
        }
    }
    // symmetrize against round-off
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < i; ++j) inv[i][j] = inv[j][i] = 0.5 * (inv[i][j] + inv[j][i]);
    return inv;
}

}  // namespace zmx
