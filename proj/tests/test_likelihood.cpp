#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "support.hpp"
#include "zmx/likelihood.hpp"

using namespace zmx;
using Catch::Approx;

TEST_CASE("binomial mle is the observed proportion") {
    const Family fam = Family::binomial();
    CHECK(mle(binomial_unit("a", 8, 92), fam)[0] == 8.0 / 92.0);
    CHECK(mle(binomial_unit("a", 8, 92), fam)[0] == Approx(0.087).margin(5e-4));
    CHECK(mle(binomial_unit("b", 0, 10), fam)[0] == 0.0);
    CHECK(mle(binomial_unit("c", 10, 10), fam)[0] == 1.0);
}

TEST_CASE("multinomial mle is the vector of proportions") {
    const Family fam = Family::multinomial({"a", "b", "c"});
    const auto u = mle(multinomial_unit("m", {2, 3, 5}), fam);
    CHECK(u[0] == Approx(0.2));
    CHECK(u[1] == Approx(0.3));
    CHECK(u[2] == Approx(0.5));
}

TEST_CASE("log kernel values and boundary conventions") {
    const Family fam = Family::binomial();
    const auto unit = binomial_unit("u", 1, 2);
    CHECK(log_kernel(unit, {0.5}, fam) == Approx(std::log(0.25)).epsilon(1e-12));
    CHECK(log_kernel(binomial_unit("v", 2, 2), {1.0}, fam) == 0.0);
    CHECK(log_kernel(unit, {1.0}, fam) == neg_inf);
    CHECK(log_kernel(binomial_unit("w", 0, 5), {0.0}, fam) == 0.0);

    const Family mfam = Family::multinomial({"a", "b"});
    CHECK(log_kernel(multinomial_unit("m", {1, 0}), {0.0, 1.0}, mfam) == neg_inf);
    CHECK(log_kernel(multinomial_unit("m", {0, 2}), {0.0, 1.0}, mfam) == 0.0);
}

TEST_CASE("pooled mle concatenates sufficient statistics") {
    const Family fam = Family::binomial();
    const std::vector<UnitObservations> two = {binomial_unit("a", 3, 10), binomial_unit("b", 3, 10)};
    CHECK(pooled_mle(two, fam)[0] == Approx(0.3));

    const std::vector<UnitObservations> more = {binomial_unit("a", 199 - 50, 28204 - 1000),
                                                binomial_unit("b", 50, 1000)};
    CHECK(pooled_mle(more, fam)[0] == Approx(199.0 / 28204.0).epsilon(1e-14));

    CHECK_THROWS_AS(pooled_mle({}, fam), std::invalid_argument);
}

TEST_CASE("family and response validation") {
    const Family fam = Family::binomial();
    CHECK_THROWS_AS(mle(multinomial_unit("m", {1, 2}), fam), std::invalid_argument);
    CHECK_THROWS_AS(mle(binomial_unit("b", 5, 4), fam), std::invalid_argument);
    CHECK_THROWS_AS(mle(binomial_unit("b", 0, 0), fam), std::invalid_argument);
    CHECK_THROWS_AS(validate_params({1.5}, fam), std::invalid_argument);
    CHECK_THROWS_AS(Family::multinomial({"only"}), std::invalid_argument);
    const Family mfam = Family::multinomial({"a", "b", "c"});
    CHECK_THROWS_AS(mle(multinomial_unit("m", {1, 2}), mfam), std::invalid_argument);
    CHECK_THROWS_AS(mle(multinomial_unit("m", {0, 0, 0}), mfam), std::invalid_argument);
    CHECK_THROWS_AS(validate_params({0.5, 0.2, 0.2}, mfam), std::invalid_argument);
}

TEST_CASE("mle maximizes the log kernel over random parameter values") {
    SplitMix64 g(2024);
    const Family fam = Family::binomial();
    for (int rep = 0; rep < 20; ++rep) {
        const std::int64_t n = 1 + static_cast<std::int64_t>(g.next() % 40);
        const std::int64_t y = static_cast<std::int64_t>(g.next() % (n + 1));
        const auto unit = binomial_unit("u", y, n);
        const double best = log_kernel(unit, mle(unit, fam), fam);
        for (int t = 0; t < 1000; ++t)
            CHECK(best >= log_kernel(unit, {g.next_double()}, fam));
    }

    const Family mfam = Family::multinomial({"a", "b", "c"});
    for (int rep = 0; rep < 5; ++rep) {
        std::vector<std::int64_t> counts = {static_cast<std::int64_t>(g.next() % 10),
                                            static_cast<std::int64_t>(g.next() % 10),
                                            1 + static_cast<std::int64_t>(g.next() % 10)};
        const auto unit = multinomial_unit("m", counts);
        const auto u = mle(unit, mfam);
        double sum = 0.0;
        for (double v : u) sum += v;
        CHECK(std::abs(sum - 1.0) <= 1e-12);
        const double best = log_kernel(unit, u, mfam);
        for (int t = 0; t < 1000; ++t) {
            double a = g.next_double(), b = g.next_double(), c = g.next_double();
            const double s = a + b + c;
            CHECK(best >= log_kernel(unit, {a / s, b / s, c / s}, mfam) - 1e-12);
        }
    }
}
