#pragma once

// Shared test helpers: deterministic random cohorts and designs.

#include <string>
#include <vector>

#include "zmx/likelihood.hpp"
#include "zmx/rng.hpp"

namespace testsupport {

inline std::vector<zmx::UnitObservations> random_binomial_cohort(zmx::SplitMix64& g,
                                                                 std::size_t max_units = 8,
                                                                 std::int64_t max_trials = 30) {
    const std::size_t n = 2 + g.next() % (max_units - 1);
    std::vector<zmx::UnitObservations> units;
    for (std::size_t i = 0; i < n; ++i) {
        const std::int64_t trials = 1 + static_cast<std::int64_t>(g.next() % max_trials);
        const double p = g.next_double();
        units.push_back(zmx::binomial_unit("u" + std::to_string(i),
                                           zmx::sample_binomial(g, trials, p), trials,
                                           {{"x", g.next_double() * 10.0}}));
    }
    return units;
}

struct MultinomialCohort {
    std::vector<zmx::UnitObservations> units;
    zmx::Family family;
};

inline MultinomialCohort random_multinomial_cohort(zmx::SplitMix64& g, std::size_t max_units = 8,
                                                   std::int64_t max_total = 30) {
    const std::size_t k = 2 + g.next() % 3;
    std::vector<std::string> labels;
    for (std::size_t c = 0; c < k; ++c) labels.push_back("cat" + std::to_string(c));

    MultinomialCohort cohort;
    cohort.family = zmx::Family::multinomial(labels);
    const std::size_t n = 2 + g.next() % (max_units - 1);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> probs(k);
        double sum = 0.0;
        for (auto& p : probs) {
            p = 0.05 + g.next_double();
            sum += p;
        }
        for (auto& p : probs) p /= sum;
        const std::int64_t total = 1 + static_cast<std::int64_t>(g.next() % max_total);
        cohort.units.push_back(
            zmx::multinomial_unit("u" + std::to_string(i), zmx::sample_multinomial(g, total, probs),
                                  {{"x", g.next_double() * 10.0}}));
    }
    return cohort;
}

}  // namespace testsupport
