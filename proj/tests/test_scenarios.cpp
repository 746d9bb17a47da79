#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mgor/errors.hpp"
#include "mgor/io.hpp"
#include "mgor/scenarios.hpp"
#include "support.hpp"

#ifndef MGOR_DATA_DIR
#error "MGOR_DATA_DIR must point at data/"
#endif

using namespace mgor;

namespace {

const ChainModel& model() {
    static const ChainModel m = calibrated_model();
    return m;
}

const Config& gamma_ref() {
    static const Config q = locked_gamma(model());
    return q;
}

} // namespace

TEST_CASE("folded start unfolds to Beta") {
    const ChainModel& m = model();
    CHECK(classify(m, folded_start(m)) == StateLabel::Alpha);
    const auto u = unfold_scenario(m, folded_start(m));
    CHECK(u.final_label == StateLabel::Beta);
    CHECK(u.settled);
    CHECK(u.times.size() == u.trajectory.size());
}

TEST_CASE("Beta and Gamma starts stay put") {
    const ChainModel& m = model();
    const auto b = unfold_scenario(m, Config::flat(m));
    CHECK(b.final_label == StateLabel::Beta);
    double worst = 0.0;
    for (double a : b.trajectory.back().hinge_angles) worst = std::max(worst, std::abs(a));
    CHECK(worst < 0.05);
    const auto g = unfold_scenario(m, gamma_ref());
    CHECK(g.final_label == StateLabel::Gamma);
    CHECK(end_gap(m, g.trajectory.back()) == doctest::Approx(end_gap(m, gamma_ref())).epsilon(1e-3));
}

TEST_CASE("calibration to a 5 mm self-assembly gap") {
    const ChainModel start = with_cell_stiffness(model(), kUncalibratedStiffness);
    const auto r = calibrate_stiffness(start, 5e-3);
    CHECK(r.converged);
    CHECK(r.achieved_gap >= 4.5e-3);
    CHECK(r.achieved_gap <= 5.5e-3);
    CHECK(r.hinge_stiffness == doctest::Approx(kCalibratedStiffness).epsilon(1e-12));
    CHECK(cell_stiffness(calibrated_model()) == doctest::Approx(r.hinge_stiffness).epsilon(1e-12));

    // fixed point
    const auto again = calibrate_stiffness(model(), 5e-3);
    CHECK(again.iterations <= 1);
    CHECK(std::abs(again.hinge_stiffness / r.hinge_stiffness - 1.0) <= 0.01);

    const auto self = self_assembly_gap(model(), kCalibratedStiffness);
    CHECK(self.gap == doctest::Approx(r.achieved_gap).epsilon(1e-12));

    CHECK_THROWS_AS(calibrate_stiffness(model(), 0.2e-3), ValidationError);
    CHECK_THROWS_AS(calibrate_stiffness(model(), 25e-3), ValidationError);
}

TEST_CASE("shipped model file matches the code") {
    const auto doc = io::read_json_file(std::string(MGOR_DATA_DIR) + "/calibrated_model.json");
    CHECK(doc == io::encode(calibrated_model()));
}

TEST_CASE("snap gap against stiffness") {
    const double k = kCalibratedStiffness;
    CHECK(self_assembly_gap(model(), k * 1e3).gap < 1e-3);
    CHECK(self_assembly_gap(model(), k * 1e-3).gap > 10e-3);
    double previous = 1.0;
    for (double s : {0.5, 0.75, 1.0, 1.5, 2.0, 3.0}) {
        const double g = self_assembly_gap(model(), k * s).gap;
        CHECK(g <= previous);
        previous = g;
    }
}

TEST_CASE("stronger magnets need stiffer hinges") {
    ChainModel strong = model();
    for (auto& em : strong.end_magnets) em.spec.remanence *= 2.0;
    const auto r = calibrate_stiffness(strong, 5e-3);
    CHECK(r.converged);
    CHECK(r.hinge_stiffness > kCalibratedStiffness);
}

TEST_CASE("squeeze between plates and recover") {
    const ChainModel& m = model();
    for (const Vec3 axis : {Vec3::UnitX(), Vec3::UnitZ()}) {
        double previous = -1.0;
        for (double f : {2.0, 4.0, 6.0, 8.0, 10.0}) {
            const auto r = squeeze_test(m, gamma_ref(), f, axis);
            CHECK(r.recovered);
            CHECK(r.loaded.max_hinge_change >= previous);
            CHECK(r.residual.max_hinge_change >= 0.0);
            CHECK(r.released_label == StateLabel::Gamma);
            previous = r.loaded.max_hinge_change;
        }
    }
    const auto zero = squeeze_test(m, gamma_ref(), 0.0, Vec3::UnitZ());
    CHECK(zero.recovered);
    CHECK(zero.loaded.max_hinge_change <= 1e-6);
}

TEST_CASE("the two senses of a plate axis agree") {
    const ChainModel& m = model();
    const auto up = squeeze_test(m, gamma_ref(), 6.0, Vec3::UnitZ());
    const auto down = squeeze_test(m, gamma_ref(), 6.0, -Vec3::UnitZ());
    CHECK(down.residual.max_hinge_change == doctest::Approx(up.residual.max_hinge_change).epsilon(1e-6));
    CHECK(down.loaded.max_hinge_change == doctest::Approx(up.loaded.max_hinge_change).epsilon(1e-6));
}

TEST_CASE("squeeze preconditions") {
    const ChainModel& m = model();
    CHECK_THROWS_AS(squeeze_test(m, gamma_ref(), 25.0, Vec3::UnitZ()), ValidationError);
    CHECK_THROWS_AS(squeeze_test(m, gamma_ref(), -1.0, Vec3::UnitZ()), ValidationError);
    CHECK_THROWS_AS(squeeze_test(m, Config::flat(m), 2.0, Vec3::UnitZ()), ValidationError);
}

TEST_CASE("stiffness helpers") {
    const ChainModel m = with_cell_stiffness(model(), 0.1);
    CHECK(cell_stiffness(m) == doctest::Approx(0.1));
    for (int h : m.notch_hinges()) CHECK(m.hinge_stiffness[h] == doctest::Approx(1.0));
    CHECK(classify(m, snap_family_config(m, 5e-3)) != StateLabel::Beta);
    CHECK(end_gap(m, snap_family_config(m, 5e-3)) == doctest::Approx(5e-3).epsilon(1e-6));
}
