#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "specctl/core.hpp"
#include "specctl/errors.hpp"

using namespace specctl;

TEST_CASE("ActionSpace validation") {
    CHECK_THROWS_AS(ActionSpace({}, {}), ContractViolation);
    CHECK_THROWS_AS(ActionSpace({0.0}, {0.0, 1.0}), ContractViolation);
    CHECK_THROWS_AS(ActionSpace({1.0}, {1.0}), ContractViolation);
    CHECK_THROWS_AS(ActionSpace({2.0}, {1.0}), ContractViolation);
    const ActionSpace s({-0.25, -0.25, 0.0}, {0.25, 0.25, 1.0});
    CHECK(s.dim() == 3);
    CHECK(s.total_range() == 2.0);
}

TEST_CASE("Action construction clamps into the space") {
    const ActionSpace s({-1.0, 0.0}, {1.0, 2.0});
    const Action a(s, std::vector{5.0, -3.0});
    CHECK(a[0] == 1.0);
    CHECK(a[1] == 0.0);
    CHECK(s.contains(a.values()));
    const Action inside(s, std::vector{0.5, 1.5});
    CHECK(inside[0] == 0.5);
    CHECK(inside[1] == 1.5);
    const Action nan_in(s, std::vector{std::numeric_limits<double>::quiet_NaN(), 1.0});
    CHECK(s.contains(nan_in.values()));
    CHECK_THROWS_AS(Action(s, std::vector{0.0}), ContractViolation);
}

TEST_CASE("l1_distance") {
    const ActionSpace s({-1.0, -1.0, -1.0}, {1.0, 1.0, 1.0});
    const Action a(s, std::vector{0.5, -0.25, 1.0});
    const Action b(s, std::vector{-0.5, 0.25, 0.0});
    CHECK(l1_distance(a, a) == 0.0);
    CHECK(l1_distance(a, b) == 2.5);
    CHECK(l1_distance(a, b) == l1_distance(b, a));
    const ActionSpace s2({0.0}, {1.0});
    CHECK_THROWS_AS(l1_distance(a, Action(s2, std::vector{0.5})), ContractViolation);
}

TEST_CASE("normalize_discrepancy") {
    const ActionSpace s({-0.25, -0.25, -0.25}, {0.25, 0.25, 0.25});  // total range 1.5
    CHECK(normalize_discrepancy(0.0, s).value() == 0.0);
    CHECK(normalize_discrepancy(0.75, s).value() == doctest::Approx(0.5));
    CHECK(normalize_discrepancy(1.5, s).value() == 1.0);
    CHECK(normalize_discrepancy(40.0, s).value() == 1.0);
    CHECK_THROWS_AS(normalize_discrepancy(-1e-12, s), ContractViolation);
    CHECK_THROWS_AS(normalize_discrepancy(std::nan(""), s), ContractViolation);
    CHECK_THROWS_AS(DeviationScore(1.5), ContractViolation);
    CHECK_THROWS_AS(DeviationScore(-0.1), ContractViolation);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int i = 0; i < 1000; ++i) {
        const double r = u(rng);
        const double v = normalize_discrepancy(r, s).value();
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(v == std::min(1.0, r / 1.5));
    }
}
