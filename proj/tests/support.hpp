#pragma once

#include <random>

#include "mgor/geometry.hpp"
#include "mgor/magnetics.hpp"

namespace testing {

using mgor::Mat3;
using mgor::Vec3;

struct Rng {
    std::mt19937_64 gen;
    explicit Rng(unsigned long seed) : gen(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen); }
    Vec3 unit() {
        std::normal_distribution<double> n;
        Vec3 v(n(gen), n(gen), n(gen));
        return v.normalized();
    }
    Mat3 rotation() { return mgor::exp_so3(unit() * uniform(0.0, 3.1)); }
    mgor::RigidTransform transform(double reach) {
        return {unit() * uniform(0.0, reach), rotation()};
    }
};

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// The IPM moment the reference numbers are quoted for.
inline constexpr double kIpmMoment = 0.1034;

} // namespace testing
