#pragma once

// Likelihood families for repeated-measures cohorts.
//
// Each unit carries its response as sufficient statistics (counts), not raw
// sequences: for the families supported here only the counts enter the
// likelihood. Log-kernels drop data-only combinatorial constants and use the
// convention 0*log(0) = 0, so boundary estimates (e.g. a unit with zero
// successes) are ordinary values, never NaN.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace zmx {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

/// Parameter vector of one unit: length 1 in [0,1] for binomial,
/// a length-K point on the probability simplex for multinomial.
using ParamVector = std::vector<double>;

struct BinomialResponse {
    std::int64_t successes = 0;
    std::int64_t trials = 0;
};

struct MultinomialResponse {
    std::vector<std::int64_t> counts;

    std::int64_t total() const {
        return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
    }
};

struct UnitObservations {
    std::string unit_id;
    std::variant<BinomialResponse, MultinomialResponse> response;
    std::map<std::string, double> covariates;

    bool has_covariate(const std::string& name) const {
        return covariates.find(name) != covariates.end();
    }
    double covariate(const std::string& name) const {
        auto it = covariates.find(name);
        if (it == covariates.end())
            throw std::invalid_argument("unit " + unit_id + ": no covariate named '" + name + "'");
        return it->second;
    }
};

struct Family {
    enum class Kind { binomial, multinomial };

    Kind kind = Kind::binomial;
    std::vector<std::string> categories;  // multinomial category labels, size K >= 2

    static Family binomial() { return Family{}; }

    static Family multinomial(std::vector<std::string> labels) {
        if (labels.size() < 2)
            throw std::invalid_argument("multinomial family needs at least 2 categories");
        Family f;
        f.kind = Kind::multinomial;
        f.categories = std::move(labels);
        return f;
    }

    bool is_binomial() const { return kind == Kind::binomial; }

    /// Dimension of a unit's parameter vector under this family.
    std::size_t dim() const { return is_binomial() ? 1 : categories.size(); }
};

/// x*log(y) with the 0*log(0) = 0 convention; -inf when x > 0 and y <= 0.
inline double xlogy(double x, double y) {
    if (x == 0.0) return 0.0;
    if (y <= 0.0) return neg_inf;
    return x * std::log(y);
}

/// Throws std::invalid_argument if the unit does not satisfy the family's
/// invariants (count ranges, category arity).
inline void validate_unit(const UnitObservations& unit, const Family& family) {
    if (family.is_binomial()) {
        const auto* r = std::get_if<BinomialResponse>(&unit.response);
        if (r == nullptr)
            throw std::invalid_argument("unit " + unit.unit_id + ": response is not binomial");
        if (r->trials < 1)
            throw std::invalid_argument("unit " + unit.unit_id + ": trials must be >= 1");
        if (r->successes < 0 || r->successes > r->trials)
            throw std::invalid_argument("unit " + unit.unit_id + ": successes outside [0, trials]");
    } else {
        const auto* r = std::get_if<MultinomialResponse>(&unit.response);
        if (r == nullptr)
            throw std::invalid_argument("unit " + unit.unit_id + ": response is not multinomial");
        if (r->counts.size() != family.categories.size())
            throw std::invalid_argument("unit " + unit.unit_id + ": expected " +
                                        std::to_string(family.categories.size()) + " category counts");
        for (auto c : r->counts)
            if (c < 0)
                throw std::invalid_argument("unit " + unit.unit_id + ": negative category count");
        if (r->total() < 1)
            throw std::invalid_argument("unit " + unit.unit_id + ": total count must be >= 1");
    }
}

/// Throws if params is not a valid parameter vector for the family.
inline void validate_params(const ParamVector& params, const Family& family) {
    if (params.size() != family.dim())
        throw std::invalid_argument("parameter vector has wrong dimension");
    if (family.is_binomial()) {
        if (!(params[0] >= 0.0 && params[0] <= 1.0))
            throw std::invalid_argument("binomial parameter outside [0,1]");
    } else {
        double sum = 0.0;
        for (double p : params) {
            if (!(p >= 0.0)) throw std::invalid_argument("multinomial parameter entry < 0");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("multinomial parameter does not sum to 1");
    }
}

/// Closed-form maximum-likelihood estimate: observed proportions.
inline ParamVector mle(const UnitObservations& unit, const Family& family) {
    validate_unit(unit, family);
    if (family.is_binomial()) {
        const auto& r = std::get<BinomialResponse>(unit.response);
        return {static_cast<double>(r.successes) / static_cast<double>(r.trials)};
    }
    const auto& r = std::get<MultinomialResponse>(unit.response);
    const double total = static_cast<double>(r.total());
    ParamVector u(r.counts.size());
    for (std::size_t c = 0; c < r.counts.size(); ++c)
        u[c] = static_cast<double>(r.counts[c]) / total;
    return u;
}

/// Log-likelihood kernel of the unit's data at the given parameters.
/// Binomial: y*log(u) + (n-y)*log(1-u). Multinomial: sum_c n_c*log(u_c).
/// Returns -inf when a positive count meets a zero probability.
inline double log_kernel(const UnitObservations& unit, const ParamVector& params,
                         const Family& family) {
    validate_params(params, family);
    if (family.is_binomial()) {
        const auto& r = std::get<BinomialResponse>(unit.response);
        const double y = static_cast<double>(r.successes);
        const double n = static_cast<double>(r.trials);
        return xlogy(y, params[0]) + xlogy(n - y, 1.0 - params[0]);
    }
    const auto& r = std::get<MultinomialResponse>(unit.response);
    double ll = 0.0;
    for (std::size_t c = 0; c < r.counts.size(); ++c)
        ll += xlogy(static_cast<double>(r.counts[c]), params[c]);
    return ll;
}

/// MLE on the concatenated sufficient statistics of the whole cohort.
inline ParamVector pooled_mle(const std::vector<UnitObservations>& units, const Family& family) {
    if (units.empty()) throw std::invalid_argument("pooled_mle: empty cohort");
    if (family.is_binomial()) {
        std::int64_t y = 0, n = 0;
        for (const auto& unit : units) {
            validate_unit(unit, family);
            const auto& r = std::get<BinomialResponse>(unit.response);
            y += r.successes;
            n += r.trials;
        }
        return {static_cast<double>(y) / static_cast<double>(n)};
    }
    std::vector<std::int64_t> counts(family.dim(), 0);
    std::int64_t total = 0;
    for (const auto& unit : units) {
        validate_unit(unit, family);
        const auto& r = std::get<MultinomialResponse>(unit.response);
        for (std::size_t c = 0; c < counts.size(); ++c) counts[c] += r.counts[c];
        total += r.total();
    }
    ParamVector u(counts.size());
    for (std::size_t c = 0; c < counts.size(); ++c)
        u[c] = static_cast<double>(counts[c]) / static_cast<double>(total);
    return u;
}

/// Convenience constructors.
inline UnitObservations binomial_unit(std::string id, std::int64_t successes, std::int64_t trials,
                                      std::map<std::string, double> covariates = {}) {
    return UnitObservations{std::move(id), BinomialResponse{successes, trials}, std::move(covariates)};
}

inline UnitObservations multinomial_unit(std::string id, std::vector<std::int64_t> counts,
                                         std::map<std::string, double> covariates = {}) {
    return UnitObservations{std::move(id), MultinomialResponse{std::move(counts)}, std::move(covariates)};
}

}  // namespace zmx
