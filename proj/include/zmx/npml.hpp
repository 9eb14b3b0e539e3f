#pragma once

// Nonparametric maximum likelihood estimation of the random-effects
// distribution: a discrete mixing distribution (atoms + masses) fitted by EM.
//
// The fit runs in two phases. Phase A seeks the unrestricted NPML optimum:
// EM over a support seeded with the unique per-unit MLEs plus the pooled MLE,
// alternating with merge/prune passes, and (for scalar families) expanding
// the support wherever the mixture's directional derivative
//
//     D(u) = sum_i p(y_i|u) / sum_j theta_j p(y_i|u_j)  -  n
//
// stays positive, until sup_u D(u) <= grad_tol. That certificate bounds how
// far the fit can sit below the true NPML log-likelihood. Phase B then drops
// support points one at a time (closest pair merged, EM re-run) for as long
// as the boundary likelihood-ratio test does not favor the richer fit, so
// the reported atom count carries only the support the data insist on.
// select_alpha = 1 disables the drops and returns the phase-A optimum.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "zmx/likelihood.hpp"
#include "zmx/zmatrix.hpp"

namespace zmx {

struct EmConfig {
    double merge_tol = 1e-4;     // max-abs distance below which atoms merge
    double prune_tol = 1e-8;     // masses at or below this are dropped
    double rel_tol = 1e-10;      // relative loglik change per iteration
    int stable_iters = 10;       // consecutive small changes required
    long max_iters = 100000;     // per EM run
    double select_alpha = 0.05;  // LR level guarding backward drops; 1 = keep NPML
    std::size_t max_atoms = 0;   // 0 = unrestricted; otherwise forced drops to this count
    double grad_tol = 1e-6;      // support-expansion certificate (binomial only)
    int grad_grid = 4097;        // grid resolution for the certificate search

    // When set, every EM run appends its log-likelihood sequence here.
    std::vector<std::vector<double>>* trace = nullptr;
};

struct MixtureFit {
    std::vector<ParamVector> atoms;
    std::vector<double> masses;
    double loglik = 0.0;  // kernel convention, matching log_kernel
    long iterations = 0;
    bool converged = true;
};

struct LrTestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::string df_convention;
};

/// Survival functions of chi-square with 1 and 2 degrees of freedom.
inline double chisq1_sf(double x) { return x <= 0.0 ? 1.0 : std::erfc(std::sqrt(x / 2.0)); }
inline double chisq2_sf(double x) { return x <= 0.0 ? 1.0 : std::exp(-x / 2.0); }

/// Boundary-mixture p-value for adding one support point: the added atom
/// contributes a location plus a mass constrained to [0,1], so the reference
/// distribution is an equal mixture of chi-square(1) and chi-square(2).
inline double self_liang_p(double statistic) {
    if (statistic <= 0.0) return 1.0;
    return 0.5 * chisq1_sf(statistic) + 0.5 * chisq2_sf(statistic);
}

inline constexpr const char* self_liang_convention =
    "0.5*chisq(1) + 0.5*chisq(2) boundary mixture";

namespace detail {

inline std::vector<std::vector<double>> kernel_matrix(const std::vector<UnitObservations>& units,
                                                      const std::vector<ParamVector>& atoms,
                                                      const Family& family) {
    std::vector<std::vector<double>> L(units.size(), std::vector<double>(atoms.size()));
    for (std::size_t i = 0; i < units.size(); ++i)
        for (std::size_t j = 0; j < atoms.size(); ++j)
            L[i][j] = log_kernel(units[i], atoms[j], family);
    return L;
}

/// Marginal kernel log-likelihood sum_i log sum_j theta_j exp(L[i][j]).
inline double mixture_loglik(const std::vector<std::vector<double>>& L,
                             const std::vector<double>& masses) {
    double ll = 0.0;
    for (const auto& row : L) {
        double m = neg_inf;
        for (std::size_t j = 0; j < masses.size(); ++j)
            if (masses[j] > 0.0) m = std::max(m, row[j] + std::log(masses[j]));
        double s = 0.0;
        for (std::size_t j = 0; j < masses.size(); ++j)
            if (masses[j] > 0.0) s += std::exp(row[j] + std::log(masses[j]) - m);
        ll += m + std::log(s);
    }
    return ll;
}

struct WeightedStats {
    // Per-atom accumulated sufficient statistics for the M-step.
    std::vector<double> mass_sum;                 // sum_i w[i][j]
    std::vector<double> y_sum, n_sum;             // binomial
    std::vector<std::vector<double>> count_sum;   // multinomial
    std::vector<double> total_sum;
};

struct EmRunResult {
    double loglik = neg_inf;
    long iterations = 0;
    bool converged = false;
};

/// One EM pass to convergence: E-step responsibilities w[i][j] proportional
/// to theta_j exp(L[i][j]), M-step masses = column means and atoms = the
/// responsibility-weighted MLEs. The marginal log-likelihood never decreases.
inline EmRunResult run_em(const std::vector<UnitObservations>& units, const Family& family,
                          std::vector<ParamVector>& atoms, std::vector<double>& masses,
                          const EmConfig& cfg) {
    const std::size_t n = units.size();
    const std::size_t dim = family.dim();

    EmRunResult res;
    std::vector<double> history;
    double prev = neg_inf;
    int streak = 0;

    auto L = kernel_matrix(units, atoms, family);
    std::vector<double> w(atoms.size());

    for (long it = 0; it < cfg.max_iters; ++it) {
        const std::size_t k = atoms.size();
        WeightedStats st;
        st.mass_sum.assign(k, 0.0);
        if (family.is_binomial()) {
            st.y_sum.assign(k, 0.0);
            st.n_sum.assign(k, 0.0);
        } else {
            st.count_sum.assign(k, std::vector<double>(dim, 0.0));
            st.total_sum.assign(k, 0.0);
        }

        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double m = neg_inf;
            for (std::size_t j = 0; j < k; ++j) {
                w[j] = L[i][j] + std::log(masses[j]);
                m = std::max(m, w[j]);
            }
            double s = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                w[j] = std::exp(w[j] - m);
                s += w[j];
            }
            ll += m + std::log(s);
            for (std::size_t j = 0; j < k; ++j) {
                const double wij = w[j] / s;
                st.mass_sum[j] += wij;
                if (family.is_binomial()) {
                    const auto& r = std::get<BinomialResponse>(units[i].response);
                    st.y_sum[j] += wij * static_cast<double>(r.successes);
                    st.n_sum[j] += wij * static_cast<double>(r.trials);
                } else {
                    const auto& r = std::get<MultinomialResponse>(units[i].response);
                    for (std::size_t c = 0; c < dim; ++c)
                        st.count_sum[j][c] += wij * static_cast<double>(r.counts[c]);
                    st.total_sum[j] += wij * static_cast<double>(r.total());
                }
            }
        }
        history.push_back(ll);
        res.loglik = ll;
        ++res.iterations;

        if (prev > neg_inf && std::abs(ll - prev) < cfg.rel_tol * std::abs(prev)) {
            if (++streak >= cfg.stable_iters) {
                res.converged = true;
                break;
            }
        } else {
            streak = 0;
        }
        prev = ll;

        for (std::size_t j = 0; j < k; ++j) {
            masses[j] = st.mass_sum[j] / static_cast<double>(n);
            if (family.is_binomial()) {
                if (st.n_sum[j] > 0.0) atoms[j][0] = st.y_sum[j] / st.n_sum[j];
            } else if (st.total_sum[j] > 0.0) {
                for (std::size_t c = 0; c < dim; ++c)
                    atoms[j][c] = st.count_sum[j][c] / st.total_sum[j];
            }
        }
        L = kernel_matrix(units, atoms, family);
    }

    if (cfg.trace != nullptr) cfg.trace->push_back(std::move(history));
    return res;
}

inline double atom_distance(const ParamVector& a, const ParamVector& b) {
    double d = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) d = std::max(d, std::abs(a[c] - b[c]));
    return d;
}

inline ParamVector merged_atom(const ParamVector& a, double wa, const ParamVector& b, double wb) {
    ParamVector out(a.size());
    for (std::size_t c = 0; c < a.size(); ++c) out[c] = (a[c] * wa + b[c] * wb) / (wa + wb);
    return out;
}

/// Collapses atom pairs closer than merge_tol (mass-weighted locations) and
/// prunes negligible masses. Returns true when the support changed.
inline bool merge_prune(std::vector<ParamVector>& atoms, std::vector<double>& masses,
                        const EmConfig& cfg) {
    bool changed = false;
    for (;;) {
        std::size_t best_a = 0, best_b = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a + 1 < atoms.size(); ++a)
            for (std::size_t b = a + 1; b < atoms.size(); ++b) {
                const double d = atom_distance(atoms[a], atoms[b]);
                if (d < best_d) {
                    best_d = d;
                    best_a = a;
                    best_b = b;
                }
            }
        if (atoms.size() < 2 || best_d > cfg.merge_tol) break;
        atoms[best_a] = merged_atom(atoms[best_a], masses[best_a], atoms[best_b], masses[best_b]);
        masses[best_a] += masses[best_b];
        atoms.erase(atoms.begin() + static_cast<std::ptrdiff_t>(best_b));
        masses.erase(masses.begin() + static_cast<std::ptrdiff_t>(best_b));
        changed = true;
    }

    for (std::size_t j = atoms.size(); j-- > 0;) {
        if (masses[j] <= cfg.prune_tol && atoms.size() > 1) {
            atoms.erase(atoms.begin() + static_cast<std::ptrdiff_t>(j));
            masses.erase(masses.begin() + static_cast<std::ptrdiff_t>(j));
            changed = true;
        }
    }
    const double kept = std::accumulate(masses.begin(), masses.end(), 0.0);
    for (double& m : masses) m /= kept;
    return changed;
}

inline void sort_support(std::vector<ParamVector>& atoms, std::vector<double>& masses) {
    std::vector<std::size_t> idx(atoms.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return atoms[a] < atoms[b]; });
    std::vector<ParamVector> a2(atoms.size());
    std::vector<double> m2(atoms.size());
    for (std::size_t p = 0; p < idx.size(); ++p) {
        a2[p] = atoms[idx[p]];
        m2[p] = masses[idx[p]];
    }
    atoms = std::move(a2);
    masses = std::move(m2);
}

/// Directional-derivative search for scalar (binomial) mixtures: the grid
/// value maximizing D(u), refined by a parabolic step through the best grid
/// point and its neighbors.
struct GradientProbe {
    double max_derivative = neg_inf;
    double argmax = 0.0;
};

inline GradientProbe probe_support_gap(const std::vector<UnitObservations>& units,
                                       const Family& family,
                                       const std::vector<ParamVector>& atoms,
                                       const std::vector<double>& masses, const EmConfig& cfg) {
    const std::size_t n = units.size();
    auto L = kernel_matrix(units, atoms, family);
    std::vector<double> log_denom(n);
    for (std::size_t i = 0; i < n; ++i) {
        double m = neg_inf;
        for (std::size_t j = 0; j < atoms.size(); ++j)
            m = std::max(m, L[i][j] + std::log(masses[j]));
        double s = 0.0;
        for (std::size_t j = 0; j < atoms.size(); ++j)
            s += std::exp(L[i][j] + std::log(masses[j]) - m);
        log_denom[i] = m + std::log(s);
    }

    double lo = 1.0, hi = 0.0;
    for (const auto& unit : units) {
        const auto& r = std::get<BinomialResponse>(unit.response);
        const double u = static_cast<double>(r.successes) / static_cast<double>(r.trials);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }

    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(cfg.grad_grid) + atoms.size());
    for (int g = 0; g < cfg.grad_grid; ++g)
        grid.push_back(lo + (hi - lo) * static_cast<double>(g) /
                                static_cast<double>(cfg.grad_grid - 1));
    for (const auto& a : atoms) grid.push_back(a[0]);
    std::sort(grid.begin(), grid.end());

    auto derivative_at = [&](double u) {
        ParamVector p{u};
        double d = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            d += std::exp(log_kernel(units[i], p, family) - log_denom[i]);
        return d - static_cast<double>(n);
    };

    GradientProbe probe;
    std::size_t best = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const double d = derivative_at(grid[g]);
        if (d > probe.max_derivative) {
            probe.max_derivative = d;
            probe.argmax = grid[g];
            best = g;
        }
    }
    if (best > 0 && best + 1 < grid.size()) {
        // parabolic refinement through the best grid point and its neighbors
        const double x0 = grid[best - 1], x1 = grid[best], x2 = grid[best + 1];
        const double f0 = derivative_at(x0), f1 = probe.max_derivative, f2 = derivative_at(x2);
        const double denom = (x1 - x0) * (f1 - f2) - (x1 - x2) * (f1 - f0);
        if (std::abs(denom) > 0.0) {
            const double num =
                (x1 - x0) * (x1 - x0) * (f1 - f2) - (x1 - x2) * (x1 - x2) * (f1 - f0);
            const double xr = x1 - 0.5 * num / denom;
            if (xr > lo && xr < hi) {
                const double fr = derivative_at(xr);
                if (fr > probe.max_derivative) {
                    probe.max_derivative = fr;
                    probe.argmax = xr;
                }
            }
        }
    }
    return probe;
}

}  // namespace detail

/// Degenerate one-atom fit: the pooled MLE carrying all mass.
inline MixtureFit degenerate_fit(const std::vector<UnitObservations>& units, const Family& family) {
    if (units.empty()) throw std::invalid_argument("degenerate_fit: empty cohort");
    MixtureFit fit;
    fit.atoms = {pooled_mle(units, family)};
    fit.masses = {1.0};
    fit.loglik = 0.0;
    for (const auto& unit : units) fit.loglik += log_kernel(unit, fit.atoms[0], family);
    fit.iterations = 0;
    fit.converged = true;
    return fit;
}

inline MixtureFit em_fit(const std::vector<UnitObservations>& units, const Family& family,
                         const EmConfig& cfg = {}) {
    if (units.size() < 2) throw std::invalid_argument("em_fit: need at least 2 units");

    // Support seed: unique per-unit MLEs plus the pooled MLE, equal masses.
    std::vector<ParamVector> atoms;
    for (const auto& unit : units) {
        ParamVector u = mle(unit, family);
        bool dup = false;
        for (const auto& a : atoms) dup = dup || detail::atom_distance(a, u) == 0.0;
        if (!dup) atoms.push_back(std::move(u));
    }
    {
        ParamVector pooled = pooled_mle(units, family);
        bool dup = false;
        for (const auto& a : atoms) dup = dup || detail::atom_distance(a, pooled) == 0.0;
        if (!dup) atoms.push_back(std::move(pooled));
    }
    std::vector<double> masses(atoms.size(), 1.0 / static_cast<double>(atoms.size()));
    detail::sort_support(atoms, masses);

    MixtureFit fit;
    long total_iters = 0;
    bool last_converged = true;

    auto converge = [&](std::vector<ParamVector>& a, std::vector<double>& m) {
        double ll = neg_inf;
        last_converged = true;
        for (;;) {
            auto run = detail::run_em(units, family, a, m, cfg);
            total_iters += run.iterations;
            ll = run.loglik;
            last_converged = last_converged && run.converged;
            if (!detail::merge_prune(a, m, cfg)) break;
        }
        return ll;
    };

    double loglik = converge(atoms, masses);
    bool accepted_converged = last_converged;

    // Support expansion with the directional-derivative certificate.
    if (family.is_binomial()) {
        for (int round = 0; round < 64; ++round) {
            auto probe = detail::probe_support_gap(units, family, atoms, masses, cfg);
            if (probe.max_derivative <= cfg.grad_tol) break;
            for (double& m : masses) m *= 1.0 - 1e-3;
            atoms.push_back(ParamVector{probe.argmax});
            masses.push_back(1e-3);
            detail::sort_support(atoms, masses);
            loglik = converge(atoms, masses);
            accepted_converged = last_converged;
        }
    }

    // Backward drops: merge the closest pair, refit, keep the reduction when
    // the richer model is not significantly better (or when forced by a cap).
    while (atoms.size() > 1) {
        std::size_t best_a = 0, best_b = 1;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a + 1 < atoms.size(); ++a)
            for (std::size_t b = a + 1; b < atoms.size(); ++b) {
                const double d = detail::atom_distance(atoms[a], atoms[b]);
                if (d < best_d) {
                    best_d = d;
                    best_a = a;
                    best_b = b;
                }
            }
        std::vector<ParamVector> reduced_atoms = atoms;
        std::vector<double> reduced_masses = masses;
        reduced_atoms[best_a] =
            detail::merged_atom(atoms[best_a], masses[best_a], atoms[best_b], masses[best_b]);
        reduced_masses[best_a] += masses[best_b];
        reduced_atoms.erase(reduced_atoms.begin() + static_cast<std::ptrdiff_t>(best_b));
        reduced_masses.erase(reduced_masses.begin() + static_cast<std::ptrdiff_t>(best_b));

        const double reduced_ll = converge(reduced_atoms, reduced_masses);
        const double statistic = 2.0 * (loglik - reduced_ll);
        const bool forced = cfg.max_atoms > 0 && atoms.size() > cfg.max_atoms;
        if (forced || statistic <= 1e-9 || self_liang_p(statistic) >= cfg.select_alpha) {
            atoms = std::move(reduced_atoms);
            masses = std::move(reduced_masses);
            loglik = reduced_ll;
            accepted_converged = last_converged;
        } else {
            break;  // a rejected probe does not affect the returned fit
        }
    }

    detail::sort_support(atoms, masses);
    fit.atoms = std::move(atoms);
    fit.masses = std::move(masses);
    fit.loglik = loglik;
    fit.iterations = total_iters;
    fit.converged = accepted_converged;
    return fit;
}

/// 2 * (alternative - null) log-likelihood ratio with the boundary-mixture
/// reference distribution.
inline LrTestResult lr_test(const MixtureFit& alt, const MixtureFit& null_fit) {
    if (alt.loglik < null_fit.loglik - 1e-9)
        throw std::invalid_argument("lr_test: alternative fit is worse than the null");
    LrTestResult r;
    r.statistic = 2.0 * (alt.loglik - null_fit.loglik);
    r.p_value = self_liang_p(r.statistic);
    r.df_convention = self_liang_convention;
    return r;
}

/// Row-stochastic responsibilities w[i][j] proportional to theta_j p(y_i|u_j).
inline std::vector<std::vector<double>> posterior_memberships(
    const MixtureFit& fit, const std::vector<UnitObservations>& units, const Family& family) {
    auto L = detail::kernel_matrix(units, fit.atoms, family);
    std::vector<std::vector<double>> w(units.size());
    for (std::size_t i = 0; i < units.size(); ++i) {
        std::vector<double> row(fit.atoms.size());
        for (std::size_t j = 0; j < fit.atoms.size(); ++j)
            row[j] = L[i][j] + std::log(fit.masses[j]);
        w[i] = normalize_log_row(row);
    }
    return w;
}

}  // namespace zmx
