#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <set>
#include <sstream>

#include <boost/math/tools/roots.hpp>

#include "mgor/errors.hpp"
#include "mgor/scenarios.hpp"
#include "support.hpp"

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

std::vector<StateThresholds> perturbed_thresholds() {
    std::vector<StateThresholds> out;
    for (int mask = 0; mask < 32; ++mask) {
        StateThresholds t;
        auto f = [&](int bit) { return (mask >> bit) & 1 ? 1.2 : 0.8; };
        t.beta_mean_angle *= f(0);
        t.beta_min_gap_fraction *= f(1);
        t.lock_gap *= f(2);
        t.lock_alignment *= f(3);
        t.alpha_min_angle *= f(4);
        out.push_back(t);
    }
    // one at a time as well
    for (int k = 0; k < 5; ++k) {
        for (double s : {0.8, 1.2}) {
            StateThresholds t;
            double* fields[] = {&t.beta_mean_angle, &t.beta_min_gap_fraction, &t.lock_gap, &t.lock_alignment,
                                &t.alpha_min_angle};
            *fields[k] *= s;
            out.push_back(t);
        }
    }
    return out;
}

// Independent scan for strict interior minima, NaN as +inf.
std::vector<std::pair<int, int>> brute_force_minima(const std::vector<double>& e, int nx, int ny) {
    auto v = [&](int i, int j) {
        const double x = e[j * nx + i];
        return std::isnan(x) ? std::numeric_limits<double>::infinity() : x;
    };
    std::vector<std::tuple<double, int, int, int>> found;
    int order = 0;
    for (int j = 1; j < ny - 1; ++j) {
        for (int i = 1; i < nx - 1; ++i) {
            if (!std::isfinite(v(i, j))) continue;
            bool ok = true;
            for (int dj = -1; dj <= 1; ++dj)
                for (int di = -1; di <= 1; ++di)
                    if ((di || dj) && v(i + di, j + dj) <= v(i, j)) ok = false;
            if (ok) found.emplace_back(v(i, j), order++, i, j);
        }
    }
    std::sort(found.begin(), found.end());
    std::vector<std::pair<int, int>> out;
    for (auto& [energy, o, i, j] : found) out.emplace_back(i, j);
    return out;
}

} // namespace

TEST_CASE("reference configurations") {
    const ChainModel& m = model();
    CHECK(classify(m, Config::flat(m)) == StateLabel::Beta);
    CHECK(classify(m, gamma_ref()) == StateLabel::Gamma);
    CHECK(classify(m, accordion_config(m, 2.9)) == StateLabel::Alpha);
    CHECK(classify(m, triangle_config(m, 1.0)) == StateLabel::Transitional);
    CHECK(pair_alignment(forward_kinematics(m, gamma_ref()).end_centroids[0],
                         forward_kinematics(m, gamma_ref()).end_centroids[1]) == PairAlignment::Attracting);
    for (auto label : {StateLabel::Alpha, StateLabel::Beta, StateLabel::Gamma, StateLabel::Transitional}) {
        CHECK(state_label_from_string(to_string(label)) == label);
    }
    CHECK_THROWS_AS(state_label_from_string("Delta"), ValidationError);
}

TEST_CASE("reference labels survive threshold changes of 20%") {
    const ChainModel& m = model();
    const Config flat = Config::flat(m), alpha = accordion_config(m, 2.9);
    for (const auto& t : perturbed_thresholds()) {
        CHECK(classify(m, flat, t) == StateLabel::Beta);
        CHECK(classify(m, gamma_ref(), t) == StateLabel::Gamma);
        CHECK(classify(m, alpha, t) == StateLabel::Alpha);
    }
}

TEST_CASE("labels ignore a rigid motion of the robot") {
    const ChainModel& m = model();
    testing::Rng rng(21);
    for (int n = 0; n < 200; ++n) {
        Config q = Config::flat(m);
        const int kind = n % 3;
        if (kind == 0) q = gamma_ref();
        if (kind == 1) q = accordion_config(m, rng.uniform(1.5, 3.0));
        for (auto& h : q.hinge_angles) h = std::clamp(h + rng.uniform(-0.15, 0.15), -m.hinge_limit, m.hinge_limit);
        const StateLabel label = classify(m, q);
        CHECK(classify(m, transformed(q, rng.transform(0.2)), {}) == label);
    }
}

TEST_CASE("a wider lock gap never removes a Gamma label") {
    const ChainModel& m = model();
    testing::Rng rng(22);
    for (int n = 0; n < 300; ++n) {
        Config q = gamma_ref();
        for (auto& h : q.hinge_angles) h += rng.uniform(-0.3, 0.3);
        StateThresholds narrow, wide;
        narrow.lock_gap = rng.uniform(2e-3, 10e-3);
        wide.lock_gap = narrow.lock_gap + rng.uniform(0.0, 10e-3);
        if (classify(m, q, narrow) == StateLabel::Gamma) CHECK(classify(m, q, wide) == StateLabel::Gamma);
    }
}

TEST_CASE("local minima equal the brute-force scan") {
    testing::Rng rng(23);
    for (int n = 0; n < 300; ++n) {
        const int nx = 3 + static_cast<int>(rng.uniform(0, 12)), ny = 3 + static_cast<int>(rng.uniform(0, 12));
        std::vector<double> e(static_cast<std::size_t>(nx * ny));
        for (auto& x : e) {
            x = std::floor(rng.uniform(0, 6));  // coarse values give ties
            if (rng.uniform(0, 1) < 0.05) x = std::nan("");
        }
        const auto got = find_local_minima(e, nx, ny);
        const auto want = brute_force_minima(e, nx, ny);
        REQUIRE(got.size() == want.size());
        for (std::size_t k = 0; k < got.size(); ++k) {
            CHECK(got[k].i == want[k].first);
            CHECK(got[k].j == want[k].second);
        }
    }
    CHECK_THROWS_AS(find_local_minima(std::vector<double>{}, 0, 0), ValidationError);
}

TEST_CASE("fixture grids") {
    const int n = 21;
    std::vector<double> bowl, wells;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const double x = (i - 7) * 0.1, y = (j - 12) * 0.1;
            bowl.push_back(x * x + 2 * y * y);
            const double u = (i - 10) * 0.1;
            wells.push_back((u * u - 0.49) * (u * u - 0.49) + (j - 10) * (j - 10) * 0.01);
        }
    }
    const auto one = find_local_minima(bowl, n, n);
    REQUIRE(one.size() == 1);
    CHECK(one[0].i == 7);
    CHECK(one[0].j == 12);
    CHECK(find_local_minima(wells, n, n).size() == 2);
}

TEST_CASE("landscape without magnets has one minimum at the rest angles") {
    ChainModel m = model();
    for (auto& em : m.end_magnets) em.spec.remanence = 0.0;
    LandscapeSlice s;
    s.x = {m.cell_hinges(), -0.5, 0.5, 11};
    s.y = {m.notch_hinges(), -0.5, 0.5, 11};
    s.base = Config::flat(m);
    const auto grid = energy_landscape(m, s, {});
    const auto mins = find_local_minima(grid, m);
    REQUIRE(mins.size() == 1);
    CHECK(mins[0].i == 5);
    CHECK(mins[0].j == 5);
    for (int j = 0; j < 11; ++j)
        for (int i = 0; i < 11; ++i) CHECK(grid.at(i, j) == doctest::Approx(grid.at(10 - i, 10 - j)).epsilon(1e-12));
}

TEST_CASE("a mirror-symmetric model gives a symmetric landscape") {
    ChainModel m = model();
    for (auto& em : m.end_magnets) em.spec.magnetization_axis = Vec3::UnitY();
    LandscapeSlice s;
    s.x = {m.cell_hinges(), -2.4, 2.4, 13};
    s.y = {m.notch_hinges(), -0.6, 0.6, 9};
    s.base = Config::flat(m);
    const auto grid = energy_landscape(m, s, {});
    for (int j = 0; j < grid.ny; ++j) {
        for (int i = 0; i < grid.nx; ++i) {
            const int mi = grid.nx - 1 - i, mj = grid.ny - 1 - j;
            CHECK(grid.is_singular(i, j) == grid.is_singular(mi, mj));
            if (!grid.is_singular(i, j)) CHECK(grid.at(i, j) == doctest::Approx(grid.at(mi, mj)).epsilon(1e-9));
        }
    }
}

TEST_CASE("calibrated landscape without EPM holds Beta and Gamma minima") {
    const ChainModel& m = model();
    LandscapeSlice s;
    s.x = {m.cell_hinges(), -0.5, 2.6, 32};
    s.y = {m.notch_hinges(), -0.6, 0.9, 32};
    s.base = Config::flat(m);
    const auto grid = energy_landscape(m, s, {});
    std::set<StateLabel> labels;
    for (const auto& mn : find_local_minima(grid, m)) labels.insert(mn.label);
    CHECK(labels.count(StateLabel::Beta) == 1);
    CHECK(labels.count(StateLabel::Gamma) == 1);
    CHECK(labels.count(StateLabel::Alpha) == 0);

    std::ostringstream csv;
    write_landscape_csv(csv, grid);
    const std::string text = csv.str();
    CHECK(text.rfind("# x_hinges=", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3 + 32 * 32);
}

TEST_CASE("slices are validated") {
    const ChainModel& m = model();
    LandscapeSlice s;
    s.x = {m.cell_hinges(), -0.5, 0.5, 7};
    s.y = {m.notch_hinges(), -0.5, 0.5, 8};
    s.base = Config::flat(m);
    CHECK_THROWS_AS(s.validate(m), ValidationError);
    s.x.resolution = 8;
    s.x.max = 3.2;
    CHECK_THROWS_AS(s.validate(m), ValidationError);
    s.x.max = 0.5;
    s.y.hinges = s.x.hinges;
    CHECK_THROWS_AS(s.validate(m), ValidationError);
}

TEST_CASE("pair alignment regimes") {
    const Dipole a{Vec3::Zero(), 0.1 * Vec3::UnitZ()};
    CHECK(pair_alignment(a, {Vec3(0, 0, 0.02), 0.1 * Vec3::UnitZ()}) == PairAlignment::Attracting);
    CHECK(pair_alignment(a, {Vec3(0.02, 0, 0), 0.1 * Vec3::UnitZ()}) == PairAlignment::InPlaneRepulsive);

    // perpendicular moments: b carries x, sits at polar angle theta; find where the
    // radial force vanishes
    auto radial = [&](double theta) {
        const Dipole b{0.02 * Vec3(std::sin(theta), 0, std::cos(theta)), 0.1 * Vec3::UnitX()};
        return magnetics::pair_wrench(a, b).force.dot(b.position.normalized());
    };
    boost::uintmax_t iters = 100;
    const auto [lo, hi] =
        boost::math::tools::toms748_solve(radial, 0.3, 2.0, boost::math::tools::eps_tolerance<double>(50), iters);
    const double theta = 0.5 * (lo + hi);
    CHECK(theta == doctest::Approx(std::numbers::pi / 2).epsilon(1e-9));
    const Dipole b{0.02 * Vec3(std::sin(theta), 0, std::cos(theta)), 0.1 * Vec3::UnitX()};
    CHECK(pair_alignment(a, b) == PairAlignment::Neutral);
    CHECK(pair_alignment(a, {0.02 * Vec3(std::sin(0.8), 0, std::cos(0.8)), 0.1 * Vec3::UnitX()}) != PairAlignment::Neutral);
}
