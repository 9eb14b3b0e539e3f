#pragma once

// Random-intercept logistic regression for grouped binomial data, estimated
// by maximum likelihood with the intercept integrated out by Gauss-Hermite
// quadrature. Group g contributes
//
//     log sum_q omega_q * BinKernel(y_g, n_g, logistic(x_g b + sqrt(2) s xi_q))
//
// with s = exp(ln_sigma2 / 2). Log-likelihoods use the binomial kernel, the
// same convention as the rest of the library.
//
// The variance surface is flat near sigma2 = 0, so the optimizer runs from
// several sigma2 starts and the profile boundary (the plain fixed-effects
// fit) competes as a candidate; when it wins, the variance has collapsed and
// the fit is flagged.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "zmx/likelihood.hpp"
#include "zmx/optim.hpp"
#include "zmx/quadrature.hpp"

namespace zmx {

struct LogitGroup {
    std::string id;
    double successes = 0.0;
    double trials = 0.0;
    std::vector<double> x;  // covariate row; first entry is the constant 1
};

struct LogitDesign {
    std::vector<LogitGroup> groups;
    std::vector<std::string> names;  // covariate names, aligned with x
};

struct MixedLogitFit {
    std::vector<double> beta;
    double ln_sigma2 = 0.0;
    Matrix cov;  // (r+1) x (r+1) Wald covariance; last index is ln_sigma2
    double loglik = 0.0;
    int quad_nodes = 0;
    bool boundary_flag = false;
    bool converged = false;
    std::vector<std::string> names;
};

struct OddsRatio {
    std::string name;
    double odds_ratio = 1.0;
    double lo95 = 1.0;
    double hi95 = 1.0;
};

/// ln_sigma2 reported when the variance collapses to the boundary.
inline constexpr double collapsed_ln_sigma2 = -30.0;

inline double log_sigmoid(double v) {
    return v >= 0.0 ? -std::log1p(std::exp(-v)) : v - std::log1p(std::exp(v));
}

inline double sigmoid(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

inline void validate_design(const LogitDesign& design) {
    if (design.groups.empty()) throw std::invalid_argument("logit design has no groups");
    const std::size_t r = design.names.size();
    if (r < 1) throw std::invalid_argument("logit design has no covariates");
    Matrix gram(r, Vector(r, 0.0));
    for (const auto& g : design.groups) {
        if (g.x.size() != r)
            throw std::invalid_argument("group " + g.id + ": covariate row length mismatch");
        if (g.trials < 1.0)
            throw std::invalid_argument("group " + g.id + ": trials must be >= 1");
        if (g.successes < 0.0 || g.successes > g.trials)
            throw std::invalid_argument("group " + g.id + ": successes outside [0, trials]");
        if (g.x[0] != 1.0)
            throw std::invalid_argument("group " + g.id + ": first covariate must be the constant 1");
        for (double v : g.x)
            if (!std::isfinite(v))
                throw std::invalid_argument("group " + g.id + ": non-finite covariate");
        for (std::size_t a = 0; a < r; ++a)
            for (std::size_t b = 0; b < r; ++b) gram[a][b] += g.x[a] * g.x[b];
    }
    if (!cholesky(gram))
        throw std::invalid_argument("logit design is rank deficient");
}

/// Plain binomial-logistic kernel log-likelihood; fills *grad with d/d beta.
inline double fixed_loglik(const LogitDesign& design, const Vector& beta, Vector* grad = nullptr) {
    if (grad != nullptr) grad->assign(beta.size(), 0.0);
    double ll = 0.0;
    for (const auto& g : design.groups) {
        double eta = 0.0;
        for (std::size_t k = 0; k < beta.size(); ++k) eta += g.x[k] * beta[k];
        ll += g.successes * log_sigmoid(eta) + (g.trials - g.successes) * log_sigmoid(-eta);
        if (grad != nullptr) {
            const double resid = g.successes - g.trials * sigmoid(eta);
            for (std::size_t k = 0; k < beta.size(); ++k) (*grad)[k] += resid * g.x[k];
        }
    }
    return ll;
}

/// Marginal kernel log-likelihood under the random intercept. When grad is
/// non-null it receives d/d(beta, ln_sigma2), length r+1.
inline double gh_loglik(const LogitDesign& design, const Vector& beta, double ln_sigma2,
                        int nodes, Vector* grad = nullptr) {
    if (nodes < 4) throw std::invalid_argument("gh_loglik: need at least 4 quadrature nodes");
    const double sigma = std::exp(0.5 * ln_sigma2);
    if (!std::isfinite(sigma)) throw std::runtime_error("gh_loglik: sigma overflow");
    const GaussHermite gh = gauss_hermite(nodes);
    const std::size_t r = beta.size();

    if (grad != nullptr) grad->assign(r + 1, 0.0);
    std::vector<double> lw(static_cast<std::size_t>(nodes));
    double ll = 0.0;
    for (const auto& group : design.groups) {
        double eta = 0.0;
        for (std::size_t k = 0; k < r; ++k) eta += group.x[k] * beta[k];

        double m = neg_inf;
        for (int q = 0; q < nodes; ++q) {
            const double v = eta + std::sqrt(2.0) * sigma * gh.nodes[static_cast<std::size_t>(q)];
            const double k = group.successes * log_sigmoid(v) +
                             (group.trials - group.successes) * log_sigmoid(-v);
            lw[static_cast<std::size_t>(q)] = std::log(gh.weights[static_cast<std::size_t>(q)]) + k;
            m = std::max(m, lw[static_cast<std::size_t>(q)]);
        }
        double s = 0.0;
        for (int q = 0; q < nodes; ++q) s += std::exp(lw[static_cast<std::size_t>(q)] - m);
        const double group_ll = m + std::log(s);
        if (!std::isfinite(group_ll))
            throw std::runtime_error("gh_loglik: non-finite group contribution");
        ll += group_ll;

        if (grad != nullptr) {
            double d_eta = 0.0, d_ls2 = 0.0;
            for (int q = 0; q < nodes; ++q) {
                const double wq = std::exp(lw[static_cast<std::size_t>(q)] - m) / s;
                const double xi = gh.nodes[static_cast<std::size_t>(q)];
                const double v = eta + std::sqrt(2.0) * sigma * xi;
                const double resid = group.successes - group.trials * sigmoid(v);
                d_eta += wq * resid;
                d_ls2 += wq * resid * 0.5 * std::sqrt(2.0) * sigma * xi;
            }
            for (std::size_t k = 0; k < r; ++k) (*grad)[k] += d_eta * group.x[k];
            (*grad)[r] += d_ls2;
        }
    }
    return ll;
}

namespace detail {

inline Vector fit_fixed_beta(const LogitDesign& design, bool* converged) {
    ObjectiveFn obj = [&](const Vector& b, Vector* g) {
        const double ll = fixed_loglik(design, b, g);
        if (g != nullptr)
            for (double& v : *g) v = -v;
        return -ll;
    };
    auto res = bfgs_minimize(obj, Vector(design.names.size(), 0.0));
    if (converged != nullptr) *converged = res.converged;
    return res.x;
}

/// Wald covariance from the finite-difference observed information. Falls
/// back to the beta block (variance row/column zeroed) when the full matrix
/// is not positive definite, which happens along flat variance directions.
inline Matrix wald_covariance(const std::function<double(const Vector&)>& negloglik,
                              const Vector& theta) {
    const std::size_t d = theta.size();
    const Matrix H = fd_hessian(negloglik, theta);
    if (auto inv = invert_spd(H)) return *inv;

    Matrix Hb(d - 1, Vector(d - 1));
    for (std::size_t a = 0; a + 1 < d; ++a)
        for (std::size_t b = 0; b + 1 < d; ++b) Hb[a][b] = H[a][b];
    Matrix cov(d, Vector(d, 0.0));
    if (auto inv = invert_spd(Hb)) {
        for (std::size_t a = 0; a + 1 < d; ++a)
            for (std::size_t b = 0; b + 1 < d; ++b) cov[a][b] = (*inv)[a][b];
        if (H[d - 1][d - 1] > 0.0) cov[d - 1][d - 1] = 1.0 / H[d - 1][d - 1];
        return cov;
    }
    throw std::runtime_error("observed information is not positive definite");
}

}  // namespace detail

/// Fixed-effects-only fit: the variance pinned to zero, no quadrature.
inline MixedLogitFit fixed_logit_fit(const LogitDesign& design) {
    validate_design(design);
    const std::size_t r = design.names.size();

    MixedLogitFit fit;
    fit.names = design.names;
    fit.quad_nodes = 0;
    fit.ln_sigma2 = collapsed_ln_sigma2;
    fit.boundary_flag = true;
    fit.beta = detail::fit_fixed_beta(design, &fit.converged);
    fit.loglik = fixed_loglik(design, fit.beta);

    auto neg = [&](const Vector& b) { return -fixed_loglik(design, b); };
    const Matrix Hb = fd_hessian(neg, fit.beta);
    auto inv = invert_spd(Hb);
    if (!inv) throw std::runtime_error("observed information is not positive definite");
    fit.cov.assign(r + 1, Vector(r + 1, 0.0));
    for (std::size_t a = 0; a < r; ++a)
        for (std::size_t b = 0; b < r; ++b) fit.cov[a][b] = (*inv)[a][b];
    return fit;
}

/// Full maximum-likelihood fit over (beta, ln_sigma2).
inline MixedLogitFit fit(const LogitDesign& design, int nodes = 16) {
    validate_design(design);
    const std::size_t r = design.names.size();

    bool fixed_ok = false;
    const Vector beta_fixed = detail::fit_fixed_beta(design, &fixed_ok);
    const double ll_fixed = fixed_loglik(design, beta_fixed);

    ObjectiveFn obj = [&](const Vector& t, Vector* g) {
        Vector beta(t.begin(), t.end() - 1);
        const double ll = gh_loglik(design, beta, t.back(), nodes, g);
        if (g != nullptr)
            for (double& v : *g) v = -v;
        return -ll;
    };

    // Starts are redundant probes of one surface: a run that stalled in the
    // line search only outranks a converged one when it is better by more
    // than objective round-off.
    BfgsResult best;
    bool have_best = false;
    auto better = [](const BfgsResult& a, const BfgsResult& b) {
        if (a.converged != b.converged) {
            const double margin = 1e-8 * (1.0 + std::abs(b.f));
            return a.converged ? a.f <= b.f + margin : a.f < b.f - margin;
        }
        return a.f < b.f;
    };
    for (double sigma2_start : {0.01, 0.25, 1.0}) {
        Vector t0 = beta_fixed;
        t0.push_back(std::log(sigma2_start));
        auto res = bfgs_minimize(obj, std::move(t0));
        if (!have_best || better(res, best)) {
            best = std::move(res);
            have_best = true;
        }
    }

    MixedLogitFit fit_out;
    fit_out.names = design.names;
    fit_out.quad_nodes = nodes;

    if (ll_fixed >= -best.f - 1e-9) {
        // the boundary profile wins: the random intercept adds nothing
        fit_out.beta = beta_fixed;
        fit_out.ln_sigma2 = collapsed_ln_sigma2;
        fit_out.loglik = ll_fixed;
        fit_out.boundary_flag = true;
        fit_out.converged = fixed_ok;
        auto neg = [&](const Vector& b) { return -fixed_loglik(design, b); };
        const Matrix Hb = fd_hessian(neg, fit_out.beta);
        auto inv = invert_spd(Hb);
        if (!inv) throw std::runtime_error("observed information is not positive definite");
        fit_out.cov.assign(r + 1, Vector(r + 1, 0.0));
        for (std::size_t a = 0; a < r; ++a)
            for (std::size_t b = 0; b < r; ++b) fit_out.cov[a][b] = (*inv)[a][b];
        return fit_out;
    }

    if (!best.converged) throw std::runtime_error("mixed logit fit did not converge");
    fit_out.beta.assign(best.x.begin(), best.x.end() - 1);
    fit_out.ln_sigma2 = best.x.back();
    fit_out.loglik = -best.f;
    fit_out.boundary_flag = std::exp(fit_out.ln_sigma2) < 1e-8;
    fit_out.converged = true;
    auto neg = [&](const Vector& t) { return obj(t, nullptr); };
    fit_out.cov = detail::wald_covariance(neg, best.x);
    return fit_out;
}

/// Reader-experience encodings for the recall-error comparison.
enum class ExperienceEncoding { gt6, years, log_years };

inline ExperienceEncoding experience_encoding_from_string(const std::string& s) {
    if (s == "gt6") return ExperienceEncoding::gt6;
    if (s == "years") return ExperienceEncoding::years;
    if (s == "log") return ExperienceEncoding::log_years;
    throw std::invalid_argument("unknown experience encoding '" + s + "'");
}

/// Builds the (constant, center-2 indicator, experience) design from a
/// binomial cohort carrying "center" and "experience" covariates. The gt6
/// encoding prefers a recorded "experience_gt6" indicator when present,
/// since rounded whole-year values can misclassify readers near the cutoff.
inline LogitDesign make_experience_design(const std::vector<UnitObservations>& units,
                                          ExperienceEncoding encoding) {
    LogitDesign design;
    design.names = {"const", "center2", ""};
    switch (encoding) {
        case ExperienceEncoding::gt6: design.names[2] = "experience_gt6"; break;
        case ExperienceEncoding::years: design.names[2] = "experience_years"; break;
        case ExperienceEncoding::log_years: design.names[2] = "log_experience"; break;
    }
    for (const auto& unit : units) {
        const auto* r = std::get_if<BinomialResponse>(&unit.response);
        if (r == nullptr)
            throw std::invalid_argument("unit " + unit.unit_id + ": logit design needs binomial data");
        LogitGroup g;
        g.id = unit.unit_id;
        g.successes = static_cast<double>(r->successes);
        g.trials = static_cast<double>(r->trials);
        const double experience = unit.covariate("experience");
        double x_exp = 0.0;
        switch (encoding) {
            case ExperienceEncoding::gt6:
                x_exp = unit.has_covariate("experience_gt6") ? unit.covariate("experience_gt6")
                                                             : (experience > 6.0 ? 1.0 : 0.0);
                break;
            case ExperienceEncoding::years:
                x_exp = experience;
                break;
            case ExperienceEncoding::log_years:
                if (!(experience > 0.0))
                    throw std::invalid_argument("unit " + unit.unit_id +
                                                ": log encoding needs positive experience");
                x_exp = std::log(experience);
                break;
        }
        g.x = {1.0, unit.covariate("center") == 2.0 ? 1.0 : 0.0, x_exp};
        design.groups.push_back(std::move(g));
    }
    return design;
}

/// Odds ratios with Wald 95% intervals; the constant is excluded.
inline std::vector<OddsRatio> odds_ratios(const MixedLogitFit& fit) {
    std::vector<OddsRatio> out;
    for (std::size_t j = 1; j < fit.beta.size(); ++j) {
        const double se = std::sqrt(std::max(0.0, fit.cov[j][j]));
        OddsRatio o;
        o.name = j < fit.names.size() ? fit.names[j] : "x" + std::to_string(j);
        o.odds_ratio = std::exp(fit.beta[j]);
        o.lo95 = std::exp(fit.beta[j] - 1.96 * se);
        o.hi95 = std::exp(fit.beta[j] + 1.96 * se);
        out.push_back(std::move(o));
    }
    return out;
}

}  // namespace zmx
