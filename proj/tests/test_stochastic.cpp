#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "bsdei/parallel.hpp"
#include "bsdei/stochastic.hpp"
#include "doctest.h"

using namespace bsdei;

TEST_CASE("time grid is uniform and validated") {
    const TimeGrid grid(2.0, 4);
    CHECK(grid.horizon() == 2.0);
    CHECK(grid.steps() == 4);
    CHECK(grid.nodes() == 5);
    CHECK(grid.dt() == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(grid.node(0) == 0.0);
    CHECK(grid.node(4) == 2.0);
    CHECK(grid.node(3) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK_THROWS_AS(TimeGrid(0.0, 4), std::invalid_argument);
    CHECK_THROWS_AS(TimeGrid(1.0, 0), std::invalid_argument);
}

TEST_CASE("paths start at zero and telescope through their increments") {
    const BrownianEnsemble ensemble(TimeGrid(1.0, 16), 32, 2, 9001);
    for (std::size_t m = 0; m < ensemble.paths(); ++m) {
        for (std::size_t c = 0; c < 2; ++c) CHECK(ensemble.value(m, 0)[c] == 0.0);
        for (std::size_t j = 0; j < 16; ++j)
            for (std::size_t c = 0; c < 2; ++c) {
                const double stepped = ensemble.value(m, j)[c] + ensemble.increment(m, j)[c];
                CHECK(ensemble.value(m, j + 1)[c] == doctest::Approx(stepped).epsilon(1e-15));
            }
    }
}

TEST_CASE("path m is the same no matter how many paths ride along") {
    const BrownianEnsemble small(TimeGrid(1.0, 8), 4, 1, 321);
    const BrownianEnsemble large(TimeGrid(1.0, 8), 64, 1, 321);
    for (std::size_t m = 0; m < 4; ++m)
        for (std::size_t j = 0; j <= 8; ++j)
            CHECK(small.value(m, j)[0] == large.value(m, j)[0]);  // bitwise

    const BrownianEnsemble other(TimeGrid(1.0, 8), 4, 1, 322);
    CHECK(small.value(0, 8)[0] != other.value(0, 8)[0]);
}

TEST_CASE("path generation is identical under any thread cap") {
    set_max_threads(1);
    const BrownianEnsemble serial(TimeGrid(1.0, 8), 128, 2, 5);
    set_max_threads(7);
    const BrownianEnsemble threaded(TimeGrid(1.0, 8), 128, 2, 5);
    set_max_threads(0);
    for (std::size_t m = 0; m < 128; ++m)
        for (std::size_t j = 0; j <= 8; ++j)
            for (std::size_t c = 0; c < 2; ++c)
                CHECK(serial.value(m, j)[c] == threaded.value(m, j)[c]);
}

TEST_CASE("increments have the statistics of Brownian steps") {
    const std::size_t paths = 4000, steps = 4;
    const double dt = 0.25;
    const BrownianEnsemble ensemble(TimeGrid(1.0, steps), paths, 1, 2718);
    double mean = 0.0, var = 0.0;
    const double n = static_cast<double>(paths * steps);
    for (std::size_t m = 0; m < paths; ++m)
        for (std::size_t j = 0; j < steps; ++j) mean += ensemble.increment(m, j)[0];
    mean /= n;
    for (std::size_t m = 0; m < paths; ++m)
        for (std::size_t j = 0; j < steps; ++j) {
            const double d = ensemble.increment(m, j)[0] - mean;
            var += d * d;
        }
    var /= n - 1.0;
    // Standard error of the mean is sqrt(dt/n) ~ 4e-3; allow five sigma.
    CHECK(std::abs(mean) <= 5.0 * std::sqrt(dt / n));
    CHECK(var == doctest::Approx(dt).epsilon(0.05));
}

TEST_CASE("terminal families evaluate their defining formulas") {
    const BrownianEnsemble ensemble(TimeGrid(1.0, 4), 8, 1, 11);
    const Point u{0.3};
    Point out(1);

    eval_terminal(TerminalField::identity(), u, ensemble, 3, out);
    CHECK(out[0] == 0.3);

    eval_terminal(TerminalField::affine_terminal(0.5), u, ensemble, 3, out);
    CHECK(out[0] == doctest::Approx(0.3 + 0.5 * ensemble.value(3, 4)[0]).epsilon(1e-15));

    // 1 - 2u + 3u^2 at u = 0.3.
    eval_terminal(TerminalField::deterministic_map({1.0, -2.0, 3.0}), u, ensemble, 0, out);
    CHECK(out[0] == doctest::Approx(1.0 - 0.6 + 0.27).epsilon(1e-15));
}

TEST_CASE("terminal metadata matches the family") {
    CHECK(TerminalField::identity().deterministic());
    CHECK_FALSE(TerminalField::affine_terminal(1.0).deterministic());
    CHECK(TerminalField::deterministic_map({0.0, 0.0, 1.0}).deterministic());

    CHECK(TerminalField::identity().l2 == 1.0);
    CHECK(TerminalField::affine_terminal(0.25).l2 == 1.0);
    // Unit-box mean-square slope of sum_r c_r u^r: (sum_r r |c_r|)^2.
    CHECK(TerminalField::deterministic_map({0.0, 0.0, 1.0}).l2 == doctest::Approx(4.0));
    CHECK(TerminalField::deterministic_map({5.0, 2.0, 1.0}).l2 == doctest::Approx(16.0));
}

TEST_CASE("terminal family names resolve and unknown names are rejected") {
    CHECK(TerminalField::from_name("identity").family == TerminalField::Family::Identity);
    CHECK(TerminalField::from_name("affine-terminal").family ==
          TerminalField::Family::AffineTerminal);
    CHECK(TerminalField::from_name("deterministic-map").family ==
          TerminalField::Family::DeterministicMap);
    CHECK_THROWS_AS(TerminalField::from_name("quadratic"), std::invalid_argument);
}
