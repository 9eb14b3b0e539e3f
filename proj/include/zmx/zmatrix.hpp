#pragma once

// The z-matrix: a row-stochastic similarity diagnostic for cohorts of
// independently fitted units. Entry (i,j) is the normalized likelihood of
// unit i's data under unit j's fitted parameters,
//
//     z[i][j] = p(y_i | u_j) / sum_k p(y_i | u_k),
//
// computed in log space with a per-row maximum subtracted so that cohorts
// with thousands of trials per unit do not underflow. Under MLEs the row
// maximum is the diagonal, every row sums to one, and z[i][j] <= z[i][i].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "zmx/likelihood.hpp"

namespace zmx {

struct ZMatrix {
    std::vector<std::string> order;                    // unit ids, row/column order
    std::vector<ParamVector> estimates;                // per-unit fitted parameters
    std::vector<std::map<std::string, double>> covariates;  // per-unit covariate snapshot
    std::vector<std::vector<double>> entries;          // n x n, rows sum to 1

    std::size_t n() const { return order.size(); }
};

struct ZDiagnostics {
    std::vector<double> diag;     // z[i][i], concentration of each estimate
    std::vector<double> colsum;   // z[+][j]
    double trace_over_n = 0.0;
    std::vector<double> excess;   // colsum[j] - diag[j]
    std::vector<double> ratio;    // diag[j] / colsum[j]
};

/// Normalizes one row of log kernels into probabilities, subtracting the row
/// maximum first. Summation runs in ascending column order so results do not
/// depend on evaluation schedule. Invariant to adding a constant to the row.
inline std::vector<double> normalize_log_row(const std::vector<double>& log_kernels) {
    double m = neg_inf;
    for (double v : log_kernels) m = std::max(m, v);
    if (m == neg_inf)
        throw std::invalid_argument("normalize_log_row: all kernels are -inf");
    std::vector<double> row(log_kernels.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < log_kernels.size(); ++j) {
        row[j] = std::exp(log_kernels[j] - m);
        sum += row[j];
    }
    for (double& v : row) v /= sum;
    return row;
}

inline ZMatrix compute_z(const std::vector<UnitObservations>& units, const Family& family) {
    const std::size_t n = units.size();
    if (n < 2) throw std::invalid_argument("compute_z: need at least 2 units");

    ZMatrix z;
    z.order.reserve(n);
    z.estimates.reserve(n);
    z.covariates.reserve(n);
    for (const auto& unit : units) {
        z.order.push_back(unit.unit_id);
        z.estimates.push_back(mle(unit, family));
        z.covariates.push_back(unit.covariates);
    }

    z.entries.resize(n);
    std::vector<double> kernels(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            kernels[j] = log_kernel(units[i], z.estimates[j], family);
        // p(y_i | u_i) > 0 always under 0*log(0) = 0, so the row max is finite
        // and a degenerate row (all off-diagonal -inf) yields z[i][i] = 1.
        z.entries[i] = normalize_log_row(kernels);
    }
    return z;
}

inline ZDiagnostics diagnostics(const ZMatrix& z) {
    const std::size_t n = z.n();
    ZDiagnostics d;
    d.diag.resize(n);
    d.colsum.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) d.colsum[j] += z.entries[i][j];
        d.diag[j] = z.entries[j][j];
    }
    d.trace_over_n =
        std::accumulate(d.diag.begin(), d.diag.end(), 0.0) / static_cast<double>(n);
    d.excess.resize(n);
    d.ratio.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        d.excess[j] = d.colsum[j] - d.diag[j];
        d.ratio[j] = d.diag[j] / d.colsum[j];
    }
    return d;
}

/// Shrinkage predictions: for each unit i, the z-weighted average of every
/// unit's estimate. A convex combination, so predictions stay in the hull of
/// the fitted estimates; rows with concentration near 1 barely move.
inline std::vector<ParamVector> shrink_estimates(const ZMatrix& z) {
    const std::size_t n = z.n();
    const std::size_t m = z.estimates.empty() ? 0 : z.estimates[0].size();
    std::vector<ParamVector> out(n, ParamVector(m, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t c = 0; c < m; ++c)
                out[i][c] += z.entries[i][j] * z.estimates[j][c];
    return out;
}

/// Expected covariate value given unit i's fitted parameters.
///
/// Default weights are w[i][k] = z[k][i] / colsum[i]: the probability that
/// the data behind column i came from unit k, which sums to one over k. The
/// literal form sum_k x_k * z[i][k] / colsum[k] is also available; its
/// weights are not normalized, so the default is preferred.
inline std::vector<double> smooth_covariates(const ZMatrix& z, const std::vector<double>& x,
                                             bool literal = false) {
    const std::size_t n = z.n();
    if (x.size() != n) throw std::invalid_argument("smooth_covariates: length mismatch");
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument("smooth_covariates: non-finite covariate");

    std::vector<double> colsum(n, 0.0);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) colsum[j] += z.entries[i][j];

    std::vector<double> out(n, 0.0);
    if (literal) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k)
                out[i] += x[k] * z.entries[i][k] / colsum[k];
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < n; ++k) out[i] += x[k] * z.entries[k][i];
            out[i] /= colsum[i];
        }
    }
    return out;
}

struct DensityWeights {
    std::vector<double> density;  // colsum[j] / n
    std::vector<double> cdf;      // running sum; last entry 1
};

/// Column-sum weights as a density estimate over the fitted estimates, plus
/// the matching distribution function. Callers order the matrix by the
/// estimate of interest first.
inline DensityWeights density_weights(const ZMatrix& z) {
    const std::size_t n = z.n();
    DensityWeights w;
    w.density.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) w.density[j] += z.entries[i][j];
    w.cdf.resize(n);
    double run = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        w.density[j] /= static_cast<double>(n);
        run += w.density[j];
        w.cdf[j] = run;
    }
    return w;
}

struct OrderSpec {
    enum class Kind { estimate_asc, estimate_desc, covariate_then_estimate, explicit_ids };

    Kind kind = Kind::estimate_asc;
    std::size_t component = 0;           // which estimate component to sort on
    std::string covariate;               // covariate name for grouped ordering
    std::vector<double> covariate_order; // explicit group order, e.g. 3,1,2
    bool within_desc = false;            // estimate direction inside groups
    std::vector<std::string> ids;        // explicit permutation by unit id

    static OrderSpec by_estimate(bool ascending = true, std::size_t component = 0) {
        OrderSpec s;
        s.kind = ascending ? Kind::estimate_asc : Kind::estimate_desc;
        s.component = component;
        return s;
    }
    static OrderSpec by_covariate(std::string name, std::vector<double> value_order,
                                  bool within_desc = false, std::size_t component = 0) {
        OrderSpec s;
        s.kind = Kind::covariate_then_estimate;
        s.covariate = std::move(name);
        s.covariate_order = std::move(value_order);
        s.within_desc = within_desc;
        s.component = component;
        return s;
    }
    static OrderSpec by_ids(std::vector<std::string> ids) {
        OrderSpec s;
        s.kind = Kind::explicit_ids;
        s.ids = std::move(ids);
        return s;
    }
};

/// Resolves an ordering spec into a permutation: output position p holds
/// original index perm[p]. Stable with respect to the input order on ties.
inline std::vector<std::size_t> make_permutation(const ZMatrix& z, const OrderSpec& spec) {
    const std::size_t n = z.n();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);

    auto estimate_of = [&](std::size_t i) {
        if (spec.component >= z.estimates[i].size())
            throw std::invalid_argument("ordering component index out of range");
        return z.estimates[i][spec.component];
    };

    switch (spec.kind) {
        case OrderSpec::Kind::estimate_asc:
            std::stable_sort(perm.begin(), perm.end(),
                             [&](std::size_t a, std::size_t b) { return estimate_of(a) < estimate_of(b); });
            break;
        case OrderSpec::Kind::estimate_desc:
            std::stable_sort(perm.begin(), perm.end(),
                             [&](std::size_t a, std::size_t b) { return estimate_of(a) > estimate_of(b); });
            break;
        case OrderSpec::Kind::covariate_then_estimate: {
            auto group_rank = [&](std::size_t i) {
                auto it = z.covariates[i].find(spec.covariate);
                if (it == z.covariates[i].end())
                    throw std::invalid_argument("unit " + z.order[i] + ": no covariate named '" +
                                                spec.covariate + "'");
                const double v = it->second;
                for (std::size_t g = 0; g < spec.covariate_order.size(); ++g)
                    if (spec.covariate_order[g] == v) return std::pair<std::size_t, double>{g, v};
                // values absent from the explicit list follow it, ordered by value
                return std::pair<std::size_t, double>{spec.covariate_order.size(), v};
            };
            std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
                const auto ra = group_rank(a), rb = group_rank(b);
                if (ra != rb) return ra < rb;
                const double ea = estimate_of(a), eb = estimate_of(b);
                return spec.within_desc ? ea > eb : ea < eb;
            });
            break;
        }
        case OrderSpec::Kind::explicit_ids: {
            if (spec.ids.size() != n)
                throw std::invalid_argument("explicit order must list every unit id exactly once");
            std::map<std::string, std::size_t> index;
            for (std::size_t i = 0; i < n; ++i) index[z.order[i]] = i;
            std::vector<bool> seen(n, false);
            for (std::size_t p = 0; p < n; ++p) {
                auto it = index.find(spec.ids[p]);
                if (it == index.end() || seen[it->second])
                    throw std::invalid_argument("explicit order is not a permutation of the unit ids");
                seen[it->second] = true;
                perm[p] = it->second;
            }
            break;
        }
    }
    return perm;
}

/// Permutes rows, columns, ids, estimates and covariates consistently.
inline ZMatrix apply_permutation(const ZMatrix& z, const std::vector<std::size_t>& perm) {
    const std::size_t n = z.n();
    if (perm.size() != n) throw std::invalid_argument("permutation has wrong length");
    ZMatrix out;
    out.order.resize(n);
    out.estimates.resize(n);
    out.covariates.resize(n);
    out.entries.assign(n, std::vector<double>(n));
    for (std::size_t p = 0; p < n; ++p) {
        out.order[p] = z.order[perm[p]];
        out.estimates[p] = z.estimates[perm[p]];
        out.covariates[p] = z.covariates[perm[p]];
        for (std::size_t q = 0; q < n; ++q) out.entries[p][q] = z.entries[perm[p]][perm[q]];
    }
    return out;
}

inline ZMatrix reorder(const ZMatrix& z, const OrderSpec& spec) {
    return apply_permutation(z, make_permutation(z, spec));
}

}  // namespace zmx
