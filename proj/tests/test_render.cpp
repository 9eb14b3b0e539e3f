#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "zmx/render.hpp"

using namespace zmx;
using Catch::Approx;

TEST_CASE("half-even rounding") {
    CHECK(round_half_even(0.5) == 0);
    CHECK(round_half_even(1.5) == 2);
    CHECK(round_half_even(2.5) == 2);
    CHECK(round_half_even(2.51) == 3);
    CHECK(round_half_even(191.7) == 192);
    CHECK(round_half_even(-0.5) == 0);
    CHECK(round_half_even(-1.5) == -2);
}

TEST_CASE("scaled cells: rounding, suppression, separators") {
    TableOptions opts;  // scale 1000, suppress below 1, pre-rounding
    CHECK(scaled_cell(0.192, opts) == 192);
    CHECK_FALSE(scaled_cell(0.0004, opts).has_value());
    CHECK(scaled_cell(1.0, opts) == 1000);
    CHECK(thousands(1000) == "1,000");
    CHECK(thousands(999) == "999");
    CHECK(thousands(1234567) == "1,234,567");

    // 0.55 scaled: suppressed under the literal rule, shown as 1 after rounding
    CHECK_FALSE(scaled_cell(0.00055, opts).has_value());
    opts.post_round_suppress = true;
    CHECK(scaled_cell(0.00055, opts) == 1);
    CHECK_FALSE(scaled_cell(0.00045, opts).has_value());
}

TEST_CASE("table text golden rendering") {
    // boundary units make z exactly the identity
    const auto z = compute_z({binomial_unit("a", 0, 5, {{"center", 1.0}}),
                              binomial_unit("b", 5, 5, {{"center", 2.0}})},
                             Family::binomial());
    TableOptions opts;
    opts.label_covariate = "center";
    const std::string expected =
        "center      1      2\n"
        "     1  1,000\n"
        "     2         1,000\n";
    CHECK(table_text(z, opts) == expected);

    SECTION("rendering is deterministic") { CHECK(table_text(z, opts) == table_text(z, opts)); }

    SECTION("unlabeled table has exactly n lines") {
        TableOptions plain;
        const std::string text = table_text(z, plain);
        CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    }

    SECTION("missing label covariate is an error") {
        TableOptions bad;
        bad.label_covariate = "nope";
        CHECK_THROWS_AS(table_text(z, bad), std::invalid_argument);
    }
}

TEST_CASE("transpose flips the displayed orientation") {
    const auto z = compute_z({binomial_unit("a", 1, 2), binomial_unit("b", 2, 2)},
                             Family::binomial());
    // z = ((1, 0), (0.2, 0.8))
    TableOptions opts;
    opts.transpose = true;
    auto cells = scaled_cells(z, opts);
    CHECK(cells[0][0] == 1000);
    CHECK(cells[0][1] == 200);   // z[1][0]
    CHECK_FALSE(cells[1][0].has_value());
    CHECK(cells[1][1] == 800);

    opts.transpose = false;
    cells = scaled_cells(z, opts);
    CHECK(cells[1][0] == 200);
    CHECK(cells[0][1] == std::nullopt);
}

TEST_CASE("matrix csv preserves full precision") {
    const auto z = compute_z({binomial_unit("a", 1, 3), binomial_unit("b", 2, 3)},
                             Family::binomial());
    const std::string csv = matrix_csv(z);
    std::istringstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "unit_id,a,b");
    std::string row;
    std::getline(in, row);
    const auto comma1 = row.find(',');
    const auto comma2 = row.find(',', comma1 + 1);
    const double v0 = std::stod(row.substr(comma1 + 1, comma2 - comma1 - 1));
    const double v1 = std::stod(row.substr(comma2 + 1));
    CHECK(v0 == z.entries[0][0]);
    CHECK(v1 == z.entries[0][1]);
}

TEST_CASE("symbols plot draws area-proportional squares") {
    const auto z = compute_z({binomial_unit("a", 0, 5), binomial_unit("b", 5, 5)},
                             Family::binomial());
    const std::string svg = symbols_svg(z);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("viewBox") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
    // identity matrix: one background, two full-size cells, one border
    CHECK(std::count(svg.begin(), svg.end(), '<') ==
          std::count(svg.begin(), svg.end(), '>'));
    const std::string uniform_svg = symbols_svg(
        compute_z({binomial_unit("a", 3, 10), binomial_unit("b", 3, 10)}, Family::binomial()));
    // all four rectangles share one size: half the area, side = cell/sqrt(2)
    CHECK(uniform_svg.find("12.73") != std::string::npos);
    CHECK(symbols_svg(z) == svg);
}

TEST_CASE("cdf and density chart validates its inputs") {
    const std::vector<double> density = {0.5, 0.5};
    const std::vector<double> cdf = {0.5, 1.0};
    const std::vector<double> estimates = {0.01, 0.1};
    const std::string svg = cdf_density_svg(density, cdf, estimates, true);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("log10") != std::string::npos);

    CHECK_THROWS_AS(cdf_density_svg({1.0}, {1.0}, {0.5}, false), std::invalid_argument);
    CHECK_THROWS_AS(cdf_density_svg(density, cdf, {0.0, 0.1}, true), std::invalid_argument);
    CHECK(cdf_density_svg(density, cdf, {0.0, 0.1}, false).rfind("<svg", 0) == 0);
}

TEST_CASE("scatter plot uses labels as glyphs") {
    const std::string svg =
        scatter_svg({0.1, 0.2, 0.3}, {4.0, 6.0, 5.0}, {"1", "2", "3"}, false, "estimate",
                    "experience");
    CHECK(svg.find(">1</text>") != std::string::npos);
    CHECK(svg.find(">2</text>") != std::string::npos);
    CHECK(svg.find("experience") != std::string::npos);

    const std::string empty = scatter_svg({}, {}, {}, false);
    CHECK(empty.rfind("<svg", 0) == 0);
    CHECK(empty.find("</svg>") != std::string::npos);

    const std::string flat = scatter_svg({1.0, 2.0}, {3.0, 3.0}, {"a", "b"}, false);
    CHECK(flat.find(">a</text>") != std::string::npos);

    CHECK_THROWS_AS(scatter_svg({1.0}, {1.0, 2.0}, {"a"}, false), std::invalid_argument);
    CHECK_THROWS_AS(scatter_svg({-1.0}, {1.0}, {"a"}, true), std::invalid_argument);
}

TEST_CASE("lineup svg tiles every panel once") {
    const auto observed = compute_z({binomial_unit("a", 2, 9), binomial_unit("b", 5, 9)},
                                    Family::binomial());
    const std::vector<ZMatrix> sims = {observed, observed, observed};
    const auto layout = lineup_panels(3, 11);
    const std::string svg = lineup_svg(observed, sims, layout);
    CHECK(svg.find(">1</text>") != std::string::npos);
    CHECK(svg.find(">4</text>") != std::string::npos);
    CHECK(lineup_svg(observed, sims, layout) == svg);
}
