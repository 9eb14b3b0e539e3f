#pragma once

// Gauss-Hermite nodes and weights, normalized against the standard normal:
// integral f(v) dN(0,1)(v) ~= sum_q omega_q f(sqrt(2) xi_q), sum omega_q = 1.
//
// Roots are found by Newton iteration on the orthonormal Hermite recurrence,
// which stays bounded for the orders used here (up to a few hundred).

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace zmx {

struct GaussHermite {
    std::vector<double> nodes;    // xi_q, ascending
    std::vector<double> weights;  // omega_q = w_q / sqrt(pi), sums to 1
};

inline GaussHermite gauss_hermite(int n) {
    if (n < 1) throw std::invalid_argument("gauss_hermite: order must be >= 1");

    GaussHermite gh;
    gh.nodes.assign(static_cast<std::size_t>(n), 0.0);
    gh.weights.assign(static_cast<std::size_t>(n), 0.0);

    constexpr double pi_quarter = 0.7511255444649425;  // pi^(-1/4)
    const int half = (n + 1) / 2;
    double x = 0.0;

    for (int i = 0; i < half; ++i) {
        // standard initial guesses for the i-th largest root
        if (i == 0) {
            x = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
        } else if (i == 1) {
            x -= 1.14 * std::pow(static_cast<double>(n), 0.426) / x;
        } else if (i == 2) {
            x = 1.86 * x - 0.86 * gh.nodes[static_cast<std::size_t>(n - 1)];
        } else if (i == 3) {
            x = 1.91 * x - 0.91 * gh.nodes[static_cast<std::size_t>(n - 2)];
        } else {
            x = 2.0 * x - gh.nodes[static_cast<std::size_t>(n - i + 1)];
        }

        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p1 = pi_quarter;
            double p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = x * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) <= 1e-15 * (1.0 + std::abs(x))) break;
        }

        gh.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
        gh.nodes[static_cast<std::size_t>(i)] = -x;
        // raw weight 2/pp^2; dividing by sqrt(pi) normalizes the total to 1
        const double w = 2.0 / (pp * pp) / std::sqrt(M_PI);
        gh.weights[static_cast<std::size_t>(n - 1 - i)] = w;
        gh.weights[static_cast<std::size_t>(i)] = w;
    }
    if (n % 2 == 1) gh.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
    return gh;
}

}  // namespace zmx
