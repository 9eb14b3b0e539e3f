#pragma once

// Graphical null-model testing. Under the null every unit shares the pooled
// estimate, so replicate cohorts are drawn at the pooled parameters with the
// observed per-unit sample sizes, and their z-matrices are laid out beside
// the observed one. A viewer who can still single out the real matrix has
// evidence against the null. The observed panel's position is derived from
// the seed and disclosed only in a sidecar answer record.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "zmx/likelihood.hpp"
#include "zmx/rng.hpp"
#include "zmx/zmatrix.hpp"

namespace zmx {

struct SimConfig {
    std::uint64_t seed = 0;
    int replicates = 3;
    enum class OrderRule { descending_by_estimate, fixed } order_rule =
        OrderRule::descending_by_estimate;
};

/// Replicate z-matrices under the pooled-estimate null. Replicate r draws
/// from substream (seed, r), so the list does not depend on evaluation order.
inline std::vector<ZMatrix> simulate_null(const std::vector<UnitObservations>& units,
                                          const Family& family, const SimConfig& config) {
    if (config.replicates < 1) throw std::invalid_argument("simulate_null: replicates must be >= 1");
    if (units.size() < 2) throw std::invalid_argument("simulate_null: need at least 2 units");

    const ParamVector pooled = pooled_mle(units, family);
    std::vector<ZMatrix> sims;
    sims.reserve(static_cast<std::size_t>(config.replicates));

    for (int rep = 0; rep < config.replicates; ++rep) {
        SplitMix64 g = SplitMix64::substream(config.seed, static_cast<std::uint64_t>(rep));
        std::vector<UnitObservations> sim_units;
        sim_units.reserve(units.size());
        for (const auto& unit : units) {
            UnitObservations s = unit;
            if (family.is_binomial()) {
                const auto& r = std::get<BinomialResponse>(unit.response);
                s.response = BinomialResponse{sample_binomial(g, r.trials, pooled[0]), r.trials};
            } else {
                const auto& r = std::get<MultinomialResponse>(unit.response);
                s.response = MultinomialResponse{sample_multinomial(g, r.total(), pooled)};
            }
            sim_units.push_back(std::move(s));
        }
        ZMatrix z = compute_z(sim_units, family);
        if (config.order_rule == SimConfig::OrderRule::descending_by_estimate)
            z = reorder(z, OrderSpec::by_estimate(/*ascending=*/false));
        sims.push_back(std::move(z));
    }
    return sims;
}

struct LineupLayout {
    int rows = 0;
    int cols = 0;
    // panels[p] indexes the combined list {observed, sims[0], sims[1], ...}
    std::vector<int> panels;
    int observed_panel = 0;  // position of the observed matrix in the grid
};

/// Grid layout placing the observed matrix among the simulated ones. The
/// observed position is a deterministic function of the seed unless pinned
/// to the first panel.
inline LineupLayout lineup_panels(int n_sims, std::uint64_t seed, bool observed_first = false) {
    if (n_sims < 1) throw std::invalid_argument("lineup_panels: need at least one simulation");
    const int total = n_sims + 1;

    LineupLayout layout;
    layout.cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(total))));
    layout.rows = (total + layout.cols - 1) / layout.cols;
    layout.observed_panel =
        observed_first
            ? 0
            : static_cast<int>(SplitMix64::mix(seed ^ 0xA0B1C2D3E4F50617ULL) %
                               static_cast<std::uint64_t>(total));

    layout.panels.assign(static_cast<std::size_t>(total), 0);
    int sim = 1;
    for (int p = 0; p < total; ++p)
        layout.panels[static_cast<std::size_t>(p)] = (p == layout.observed_panel) ? 0 : sim++;
    return layout;
}

/// trace(z)/n for each simulated matrix; handy for tail tests against the
/// observed concentration.
inline std::vector<double> trace_over_n(const std::vector<ZMatrix>& sims) {
    std::vector<double> out;
    out.reserve(sims.size());
    for (const auto& z : sims) {
        double tr = 0.0;
        for (std::size_t i = 0; i < z.n(); ++i) tr += z.entries[i][i];
        out.push_back(tr / static_cast<double>(z.n()));
    }
    return out;
}

}  // namespace zmx
