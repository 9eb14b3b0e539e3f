#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "support.hpp"
#include "zmx/npml.hpp"

using namespace zmx;
using Catch::Approx;

namespace {

// Exhaustive k <= 2 mixture search for tiny binomial cohorts: coarse scan of
// both atom locations and the mass split, then a fine pass around the best
// coarse cell. Works in linear space, which small counts permit.
double grid_search_two_atom_loglik(const std::vector<UnitObservations>& units) {
    const Family fam = Family::binomial();
    auto kernels_at = [&](double u) {
        std::vector<double> f(units.size());
        for (std::size_t i = 0; i < units.size(); ++i)
            f[i] = std::exp(log_kernel(units[i], {u}, fam));
        return f;
    };

    auto scan = [&](double lo_a, double hi_a, double lo_b, double hi_b, double step,
                    double mass_step, double* best_a, double* best_b) {
        std::vector<double> grid_a, grid_b;
        for (double u = lo_a; u <= hi_a + 1e-12; u += step) grid_a.push_back(std::min(1.0, std::max(0.0, u)));
        for (double u = lo_b; u <= hi_b + 1e-12; u += step) grid_b.push_back(std::min(1.0, std::max(0.0, u)));
        std::vector<std::vector<double>> fa, fb;
        for (double u : grid_a) fa.push_back(kernels_at(u));
        for (double u : grid_b) fb.push_back(kernels_at(u));

        double best = -1e300;
        for (std::size_t a = 0; a < grid_a.size(); ++a)
            for (std::size_t b = 0; b < grid_b.size(); ++b)
                for (double t = mass_step; t < 1.0; t += mass_step) {
                    double ll = 0.0;
                    for (std::size_t i = 0; i < units.size(); ++i) {
                        const double mix = t * fa[a][i] + (1.0 - t) * fb[b][i];
                        ll += mix > 0.0 ? std::log(mix) : -1e300;
                    }
                    if (ll > best) {
                        best = ll;
                        if (best_a) *best_a = grid_a[a];
                        if (best_b) *best_b = grid_b[b];
                    }
                }
        return best;
    };

    // one-atom baseline at full resolution
    double best1 = -1e300;
    for (double u = 0.0; u <= 1.0 + 1e-12; u += 1e-3) {
        double ll = 0.0;
        for (const auto& unit : units) ll += log_kernel(unit, {std::min(1.0, u)}, fam);
        best1 = std::max(best1, ll);
    }

    double ca = 0.0, cb = 0.0;
    scan(0.0, 1.0, 0.0, 1.0, 5e-3, 0.05, &ca, &cb);
    const double best2 = scan(std::max(0.0, ca - 0.01), std::min(1.0, ca + 0.01),
                              std::max(0.0, cb - 0.01), std::min(1.0, cb + 0.01), 1e-3, 1e-3,
                              nullptr, nullptr);
    return std::max(best1, best2);
}

}  // namespace

TEST_CASE("identical units collapse to a single atom") {
    std::vector<UnitObservations> units;
    for (int i = 0; i < 4; ++i) units.push_back(binomial_unit("u" + std::to_string(i), 3, 12));
    const auto fit = em_fit(units, Family::binomial());
    REQUIRE(fit.atoms.size() == 1);
    CHECK(fit.atoms[0][0] == Approx(0.25).margin(1e-9));
    CHECK(fit.masses[0] == Approx(1.0).margin(1e-12));
    CHECK(fit.converged);
}

TEST_CASE("degenerate fit is the pooled estimate with full mass") {
    const Family fam = Family::binomial();
    const auto single = degenerate_fit({binomial_unit("a", 3, 7)}, fam);
    CHECK(single.atoms[0][0] == Approx(3.0 / 7.0).epsilon(1e-15));
    CHECK(single.masses[0] == 1.0);
    CHECK(single.loglik == Approx(log_kernel(binomial_unit("a", 3, 7), {3.0 / 7.0}, fam)));
    CHECK_THROWS_AS(degenerate_fit({}, fam), std::invalid_argument);
}

TEST_CASE("two well-separated units are recovered exactly") {
    const std::vector<UnitObservations> units = {binomial_unit("a", 20000, 100000),
                                                 binomial_unit("b", 80000, 100000)};
    const auto fit = em_fit(units, Family::binomial());
    REQUIRE(fit.atoms.size() == 2);
    CHECK(fit.atoms[0][0] == Approx(0.2).margin(1e-3));
    CHECK(fit.atoms[1][0] == Approx(0.8).margin(1e-3));
    CHECK(fit.masses[0] == Approx(0.5).margin(1e-3));
    CHECK(fit.masses[1] == Approx(0.5).margin(1e-3));
}

TEST_CASE("lr test statistics and the boundary mixture") {
    MixtureFit alt, null_fit;
    alt.loglik = -100.0;
    null_fit.loglik = -100.0;
    const auto equal = lr_test(alt, null_fit);
    CHECK(equal.statistic == 0.0);
    CHECK(equal.p_value == 1.0);
    CHECK(equal.df_convention == self_liang_convention);

    alt.loglik = -1170.151;
    null_fit.loglik = -1184.125;
    const auto strong = lr_test(alt, null_fit);
    CHECK(strong.statistic == Approx(27.948).margin(1e-9));
    CHECK(strong.p_value == Approx(4.8902583549e-07).epsilon(1e-9));
    CHECK(strong.p_value < 0.001);

    CHECK(self_liang_p(61.822) == Approx(2.0694277843e-14).epsilon(1e-9));

    null_fit.loglik = -90.0;
    CHECK_THROWS_AS(lr_test(alt, null_fit), std::invalid_argument);
}

TEST_CASE("em log-likelihood is monotone and dominates the degenerate fit") {
    SplitMix64 g(31);
    for (int rep = 0; rep < 40; ++rep) {
        const bool multinomial = rep % 3 == 2;
        std::vector<UnitObservations> units;
        Family family = Family::binomial();
        if (multinomial) {
            auto cohort = testsupport::random_multinomial_cohort(g, 6, 20);
            units = std::move(cohort.units);
            family = cohort.family;
        } else {
            units = testsupport::random_binomial_cohort(g, 6, 20);
        }

        std::vector<std::vector<double>> trace;
        EmConfig cfg;
        cfg.max_iters = 20000;
        cfg.trace = &trace;
        const auto fit = em_fit(units, family, cfg);
        const auto null_fit = degenerate_fit(units, family);

        CHECK(fit.loglik >= null_fit.loglik - 1e-9);
        REQUIRE_FALSE(trace.empty());
        for (const auto& run : trace)
            for (std::size_t t = 1; t < run.size(); ++t) CHECK(run[t] >= run[t - 1] - 1e-9);

        double mass = 0.0;
        for (double m : fit.masses) {
            CHECK(m > 0.0);
            mass += m;
        }
        CHECK(std::abs(mass - 1.0) <= 1e-10);
        for (std::size_t a = 0; a + 1 < fit.atoms.size(); ++a)
            CHECK(detail::atom_distance(fit.atoms[a], fit.atoms[a + 1]) > cfg.merge_tol);
    }
}

TEST_CASE("unrestricted fit matches an exhaustive two-atom search on tiny cohorts") {
    SplitMix64 g(555);
    EmConfig cfg;
    cfg.select_alpha = 1.0;  // keep the full maximum-likelihood support
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<UnitObservations> units;
        for (int i = 0; i < 3; ++i) {
            const std::int64_t n = 1 + static_cast<std::int64_t>(g.next() % 5);
            units.push_back(binomial_unit("u" + std::to_string(i),
                                          static_cast<std::int64_t>(g.next() % (n + 1)), n));
        }
        const auto fit = em_fit(units, Family::binomial(), cfg);
        const double oracle = grid_search_two_atom_loglik(units);
        CHECK(fit.loglik >= oracle - 1e-4);
    }
}

TEST_CASE("posterior memberships are row-stochastic") {
    SplitMix64 g(77);
    const auto units = testsupport::random_binomial_cohort(g, 7, 25);
    const auto fit = em_fit(units, Family::binomial());
    const auto w = posterior_memberships(fit, units, Family::binomial());
    REQUIRE(w.size() == units.size());
    for (const auto& row : w) {
        REQUIRE(row.size() == fit.atoms.size());
        double sum = 0.0;
        for (double v : row) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(sum == Approx(1.0).margin(1e-12));
    }

    const auto null_fit = degenerate_fit(units, Family::binomial());
    for (const auto& row : posterior_memberships(null_fit, units, Family::binomial())) {
        REQUIRE(row.size() == 1);
        CHECK(row[0] == 1.0);
    }
}

TEST_CASE("forced support caps apply") {
    SplitMix64 g(404);
    const auto units = testsupport::random_binomial_cohort(g, 8, 40);
    EmConfig cfg;
    cfg.select_alpha = 1.0;
    cfg.max_atoms = 1;
    const auto fit = em_fit(units, Family::binomial(), cfg);
    CHECK(fit.atoms.size() == 1);
}

TEST_CASE("em_fit requires at least two units") {
    CHECK_THROWS_AS(em_fit({binomial_unit("a", 1, 2)}, Family::binomial()),
                    std::invalid_argument);
}
