#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "bsdei/driver.hpp"
#include "bsdei/rng.hpp"
#include "doctest.h"

using namespace bsdei;

TEST_CASE("kernels evaluate their defining formulas") {
    const Point y{0.5, -1.0}, v{2.0, 0.25};
    Point out(2);

    eval_h(DriverSpec::zero(), y, v, out);
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 0.0);

    eval_h(DriverSpec::linear(2.0, -1.0), y, v, out);
    CHECK(out[0] == doctest::Approx(2.0 * 0.5 - 2.0).epsilon(1e-15));
    CHECK(out[1] == doctest::Approx(-2.0 - 0.25).epsilon(1e-15));

    eval_h(DriverSpec::attraction(0.5), y, v, out);
    CHECK(out[0] == doctest::Approx(0.5 * (2.0 - 0.5)).epsilon(1e-15));
    CHECK(out[1] == doctest::Approx(0.5 * (0.25 + 1.0)).epsilon(1e-15));

    eval_h(DriverSpec::bounded_smooth(3.0), y, v, out);
    CHECK(out[0] == doctest::Approx(3.0 * std::tanh(0.5) * std::tanh(2.0)).epsilon(1e-15));
    CHECK(out[1] == doctest::Approx(3.0 * std::tanh(-1.0) * std::tanh(0.25)).epsilon(1e-15));
}

TEST_CASE("the driver is the weighted kernel average") {
    const DiscreteMeasure mu({{1.0}, {-2.0}}, {0.75, 0.25});
    const Point y{0.5};
    Point out(1);

    eval_driver(DriverSpec::attraction(2.0), y, mu, out);
    // 0.75 * 2 (1 - 0.5) + 0.25 * 2 (-2 - 0.5)
    CHECK(out[0] == doctest::Approx(0.75 * 1.0 + 0.25 * (-5.0)).epsilon(1e-14));

    eval_driver(DriverSpec::zero(), y, mu, out);
    CHECK(out[0] == 0.0);
}

TEST_CASE("heavy drift equals the per-particle driver against the empirical measure") {
    Xoshiro256pp rng(31);
    for (const DriverSpec& spec : {DriverSpec::linear(1.5, -0.5), DriverSpec::attraction(0.8),
                                   DriverSpec::bounded_smooth(1.1), DriverSpec::zero()}) {
        const std::size_t n = 5, dim = 2;
        std::vector<double> positions(n * dim);
        for (double& x : positions) x = 2.0 * rng.uniform01() - 1.0;
        std::vector<double> weights{0.1, 0.2, 0.3, 0.15, 0.25};

        std::vector<double> drift(n * dim);
        heavy_drift(spec, positions, weights, dim, drift);

        std::vector<Point> atoms(n, Point(dim));
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t c = 0; c < dim; ++c) atoms[k][c] = positions[k * dim + c];
        const DiscreteMeasure mu(atoms, weights);

        Point expected(dim);
        for (std::size_t k = 0; k < n; ++k) {
            eval_driver(spec, atoms[k], mu, expected);
            for (std::size_t c = 0; c < dim; ++c)
                CHECK(drift[k * dim + c] == doctest::Approx(expected[c]).epsilon(1e-13));
        }
    }
}

TEST_CASE("default Lipschitz declarations are the sharp family constants") {
    CHECK(DriverSpec::zero().lipschitz == 0.0);
    CHECK(DriverSpec::linear(2.0, -3.0).lipschitz == 3.0);
    CHECK(DriverSpec::linear(-0.25, 0.1).lipschitz == 0.25);
    CHECK(DriverSpec::attraction(0.5).lipschitz == 0.5);
    CHECK(DriverSpec::attraction(-2.0).lipschitz == 2.0);
    CHECK(DriverSpec::bounded_smooth(1.2).lipschitz == 1.2);
}

TEST_CASE("family names resolve and unknown names are rejected") {
    CHECK(DriverSpec::from_name("zero").family == DriverSpec::Family::Zero);
    CHECK(DriverSpec::from_name("linear").family == DriverSpec::Family::Linear);
    CHECK(DriverSpec::from_name("attraction").family == DriverSpec::Family::Attraction);
    CHECK(DriverSpec::from_name("bounded-smooth").family == DriverSpec::Family::BoundedSmooth);
    CHECK_THROWS_AS(DriverSpec::from_name("gravity"), std::invalid_argument);
}

TEST_CASE("shape mismatches are rejected") {
    const Point y{0.0}, v2{0.0, 0.0};
    Point out(1);
    CHECK_THROWS_AS(eval_h(DriverSpec::zero(), y, v2, out), std::invalid_argument);

    std::vector<double> positions(4);   // two particles in d = 2
    std::vector<double> weights{0.5, 0.5};
    std::vector<double> wrong_out(3);
    CHECK_THROWS_AS(heavy_drift(DriverSpec::zero(), positions, weights, 2, wrong_out),
                    std::invalid_argument);
    std::vector<double> bad_positions(3);  // not a multiple of dim * particles
    std::vector<double> good_out(4);
    CHECK_THROWS_AS(heavy_drift(DriverSpec::zero(), bad_positions, weights, 2, good_out),
                    std::invalid_argument);
}
