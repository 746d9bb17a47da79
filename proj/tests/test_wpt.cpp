#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "mgor/errors.hpp"
#include "mgor/wpt.hpp"
#include "support.hpp"

using namespace mgor;
using namespace mgor::wpt;

namespace {

constexpr double in = kMetersPerInch;

SpiralCoil coil(double r_in, double w_in, int n, Sides s = Sides::Single) {
    return SpiralCoil{r_in * in, w_in * in, n, s};
}

const std::vector<std::pair<double, double>> kPoints{{0.0, 58.0}, {10.0, 44.2}, {20.0, 25.2}};

} // namespace

TEST_CASE("wheeler forward values") {
    const double single = wheeler_inductance(coil(0.5, 0.1, 4));
    CHECK(single * 1e6 == doctest::Approx(4.0 / 5.1).epsilon(1e-12));
    CHECK(single * 1e6 == doctest::Approx(0.784).epsilon(1e-3));
    const double dbl = wheeler_inductance(coil(0.5, 0.1, 4, Sides::Double));
    CHECK(dbl == 2.0 * single);
    CHECK(dbl * 1e6 == doctest::Approx(1.569).epsilon(1e-3));
    CHECK(wheeler_inductance(coil(0.5, 0.1, 8)) == doctest::Approx(4.0 * single).epsilon(1e-14));
    CHECK_THROWS_AS(wheeler_inductance(coil(0.5, 0.1, 0)), ValidationError);
    CHECK_THROWS_AS(wheeler_inductance(coil(-0.5, 0.1, 4)), ValidationError);
    CHECK_THROWS_AS(wheeler_inductance(coil(0.5, 0.0, 4)), ValidationError);
}

TEST_CASE("double sided is exactly twice single sided") {
    testing::Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        SpiralCoil c = coil(rng.uniform(0.05, 2.0), rng.uniform(0.01, 1.0), 1 + static_cast<int>(rng.uniform(0, 30)));
        const double s = wheeler_inductance(c);
        c.sides = Sides::Double;
        REQUIRE(wheeler_inductance(c) == 2.0 * s);
    }
}

TEST_CASE("inverse design from the 0.857 uH estimate") {
    const auto d = inverse_design_coil(0.857e-6, FreeVariable::WindingWidth, coil(0.5, 1.0, 4));
    CHECK(d.coil.winding_width / in == doctest::Approx((4.0 / 0.857 - 4.0) / 11.0).epsilon(1e-9));
    CHECK(d.coil.winding_width / in == doctest::Approx(0.0606).epsilon(2e-3));
    CHECK(std::abs(d.residual) < 1e-12);
    SpiralCoil both = d.coil;
    both.sides = Sides::Double;
    CHECK(wheeler_inductance(both) * 1e6 == doctest::Approx(1.714).epsilon(1e-12));

    // designing the double coil directly lands on the same geometry
    const auto dd = inverse_design_coil(1.714e-6, FreeVariable::WindingWidth, coil(0.5, 1.0, 4, Sides::Double));
    CHECK(dd.coil.winding_width == doctest::Approx(d.coil.winding_width).epsilon(1e-12));
}

TEST_CASE("inverse design round trip over random coils") {
    testing::Rng rng(5);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const SpiralCoil c = coil(rng.uniform(0.05, 2.0), rng.uniform(0.01, 1.0),
                                  1 + static_cast<int>(rng.uniform(0, 30)),
                                  rng.uniform(0, 1) < 0.5 ? Sides::Single : Sides::Double);
        const double l = wheeler_inductance(c);
        SpiralCoil fixed = c;

        fixed.winding_width = 1.0;
        const auto w = inverse_design_coil(l, FreeVariable::WindingWidth, fixed);
        worst = std::max(worst, testing::rel(w.coil.winding_width, c.winding_width));

        fixed = c;
        fixed.mean_radius = 1.0;
        const auto r = inverse_design_coil(l, FreeVariable::MeanRadius, fixed);
        worst = std::max(worst, testing::rel(r.coil.mean_radius, c.mean_radius));

        fixed = c;
        fixed.turns_per_side = 1;
        const auto n = inverse_design_coil(l, FreeVariable::Turns, fixed);
        worst = std::max(worst, testing::rel(n.exact_turns, c.turns_per_side));
        CHECK(n.coil.turns_per_side == c.turns_per_side);
        CHECK(std::abs(n.residual) < 1e-9);
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("inverse design rounding and failure") {
    const auto n = inverse_design_coil(1.0e-6, FreeVariable::Turns, coil(0.5, 0.1, 1));
    CHECK(n.exact_turns == doctest::Approx(std::sqrt(5.1) / 0.5).epsilon(1e-12));
    CHECK(n.coil.turns_per_side == 5);
    CHECK(n.residual == doctest::Approx((25.0 / 5.1 * 0.25 - 1.0)).epsilon(1e-9));
    // width -> 0 limit is r n² / 8 = 1 µH for r = 0.5 in, n = 4
    CHECK_THROWS_AS(inverse_design_coil(1.5e-6, FreeVariable::WindingWidth, coil(0.5, 0.1, 4)), ValidationError);
    CHECK_THROWS_AS(inverse_design_coil(0.0, FreeVariable::MeanRadius, coil(0.5, 0.1, 4)), ValidationError);
}

TEST_CASE("resonance and the 1 uF choice") {
    const double f = resonant_frequency(1.714e-6, 1e-6);
    CHECK(f == doctest::Approx(121.6e3).epsilon(1e-3));
    const double c = required_capacitance(1.714e-6, 145e3);
    CHECK(c == doctest::Approx(0.703e-6).epsilon(1e-3));
    // 1 µF does not tune this coil to 145 kHz; the mismatch is about 16 %
    CHECK(std::abs(f - 145e3) / 145e3 > 0.15);
    CHECK(std::abs(c - 1e-6) / 1e-6 > 0.25);

    CHECK(resonant_frequency(1.0 / (4.0 * std::numbers::pi * std::numbers::pi), 1.0) ==
          doctest::Approx(1.0).epsilon(1e-15));
    CHECK(resonant_frequency(1.0 / (std::numbers::pi * std::numbers::pi), 1.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(resonant_frequency(4 * 1.714e-6, 1e-6) == doctest::Approx(f / 2).epsilon(1e-14));
    CHECK(required_capacitance(1.714e-6, 290e3) == doctest::Approx(c / 4).epsilon(1e-14));
    CHECK_THROWS_AS(resonant_frequency(0.0, 1e-6), ValidationError);
    CHECK_THROWS_AS(required_capacitance(1e-6, -1.0), ValidationError);
}

TEST_CASE("resonance round trip") {
    testing::Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double l = std::pow(10.0, rng.uniform(-9, -3));
        const double f = std::pow(10.0, rng.uniform(2, 8));
        REQUIRE(testing::rel(resonant_frequency(l, required_capacitance(l, f)), f) <= 1e-12);
    }
}

TEST_CASE("faraday peak voltage") {
    CHECK(faraday_peak_voltage(10, 1e-6, 145e3) == doctest::Approx(2 * std::numbers::pi * 145e3 * 1e-5).epsilon(1e-14));
    CHECK(faraday_peak_voltage(10, 1e-6, 145e3) == doctest::Approx(9.11).epsilon(1e-3));
    CHECK(faraday_peak_voltage(10, 0.0, 145e3) == 0.0);
    testing::Rng rng(9);
    for (int i = 0; i < 100; ++i) {
        const double n = rng.uniform(1, 100), phi = rng.uniform(1e-8, 1e-4), f = rng.uniform(1e3, 1e6);
        const double v = faraday_peak_voltage(n, phi, f);
        REQUIRE(faraday_peak_voltage(2 * n, phi, f) == doctest::Approx(2 * v).epsilon(1e-14));
        REQUIRE(faraday_peak_voltage(n, phi, 3 * f) == doctest::Approx(3 * v).epsilon(1e-14));
    }
    CHECK_THROWS_AS(faraday_peak_voltage(0, 1e-6, 1e3), ValidationError);
    CHECK_THROWS_AS(faraday_peak_voltage(1, -1e-6, 1e3), ValidationError);
}

TEST_CASE("coupling fit through the measured points") {
    const CouplingModel m = fit_coupling(kPoints);
    CHECK(m.a == doctest::Approx(-0.026).epsilon(1e-9));
    CHECK(m.b == doctest::Approx(-1.12).epsilon(1e-9));
    CHECK(m.c == doctest::Approx(58.0).epsilon(1e-12));
    for (const auto& [d, v] : kPoints) CHECK(std::abs(m.voltage(d) - v) <= 1e-9);
    for (int i = 1; i <= 2000; ++i) REQUIRE(m.voltage(i * 0.01) < m.voltage((i - 1) * 0.01));
    CHECK(m.voltage(12.0) == doctest::Approx(40.816).epsilon(1e-9));
    CHECK(m.range_min == 0.0);
    CHECK(m.range_max == 20.0);
}

TEST_CASE("coupling least squares and rejection") {
    // exact quadratic data with extra points is recovered
    std::vector<std::pair<double, double>> pts;
    for (double d = 0; d <= 20; d += 2.5) pts.emplace_back(d, -0.026 * d * d - 1.12 * d + 58.0);
    const CouplingModel m = fit_coupling(pts);
    CHECK(m.a == doctest::Approx(-0.026).epsilon(1e-9));
    CHECK(m.b == doctest::Approx(-1.12).epsilon(1e-9));

    try {
        fit_coupling({{0, 20}, {10, 40}, {20, 25}});
        FAIL("expected ModelRejected");
    } catch (const ModelRejected& e) {
        CHECK(e.lo() >= 0.0);
        CHECK(e.hi() <= 20.0);
        CHECK(e.lo() < e.hi());
    }
    CHECK_THROWS_AS(fit_coupling({{0, 10}, {10, 5}, {20, -1}}), ModelRejected);
    CHECK_THROWS_AS(fit_coupling({{0, 58}, {10, 44}}), ValidationError);
    CHECK_THROWS_AS(fit_coupling({{0, 58}, {10, 44}, {10, 40}}), ValidationError);
}

TEST_CASE("LED budget") {
    const CouplingModel m = fit_coupling(kPoints);
    const LedLoad load{15, 0.08, 0.0};
    const auto at0 = led_budget(m, 0.0, load, 1.2);
    CHECK(at0.lit == 15);
    CHECK(at0.brightness == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(led_budget(m, 0.0, load, 2.0).brightness == 1.0);

    const auto at10 = led_budget(m, 10.0, load, 1.2);
    CHECK(at10.brightness == doctest::Approx((44.2 / 58) * (44.2 / 58)).epsilon(1e-9));
    CHECK(at10.brightness == doctest::Approx(0.581).epsilon(1e-3));
    CHECK(at10.lit == static_cast<int>(std::floor(at10.power / 0.08 + 1e-12)));

    CHECK(led_budget(m, 0.0, LedLoad{15, 1e300, 0.0}, 1.2).lit == 0);
    CHECK_THROWS_AS(led_budget(m, 25.0, load, 1.2), ValidationError);
    CHECK_THROWS_AS(led_budget(m, -1.0, load, 1.2), ValidationError);
    CHECK_THROWS_AS(led_budget(m, 1.0, LedLoad{0, 0.08, 0.0}, 1.2), ValidationError);

    // brightness never rises with distance
    double previous = 2.0;
    for (double d = 0; d <= 20; d += 0.5) {
        const double b = led_budget(m, d, load, 1.2).brightness;
        REQUIRE(b <= previous);
        previous = b;
    }
    const auto thr = led_budget(m, 12.0, LedLoad{15, 0.08, 40.0}, 1.2);
    CHECK(thr.above_full_voltage);
    CHECK_FALSE(led_budget(m, 13.0, LedLoad{15, 0.08, 40.0}, 1.2).above_full_voltage);
}
