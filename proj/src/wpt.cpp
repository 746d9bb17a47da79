#include "mgor/wpt.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

#include "mgor/errors.hpp"

namespace mgor::wpt {

namespace {

void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(std::string(what) + " must be positive and finite");
}

double side_factor(Sides s) { return s == Sides::Double ? 2.0 : 1.0; }

// Single-side Wheeler value in µH for r, w in inches.
double wheeler_uh(double r_in, double w_in, double n) { return r_in * r_in * n * n / (8.0 * r_in + 11.0 * w_in); }

} // namespace

std::string_view to_string(Sides s) { return s == Sides::Double ? "double" : "single"; }

Sides sides_from_string(std::string_view name) {
    if (name == "single") return Sides::Single;
    if (name == "double") return Sides::Double;
    throw ValidationError("sides must be 'single' or 'double', got '" + std::string(name) + "'");
}

void SpiralCoil::validate() const {
    require_positive(mean_radius, "SpiralCoil.mean_radius");
    require_positive(winding_width, "SpiralCoil.winding_width");
    if (turns_per_side < 1) throw ValidationError("SpiralCoil.turns_per_side must be >= 1");
}

double wheeler_inductance(const SpiralCoil& coil) {
    coil.validate();
    const double uh = wheeler_uh(coil.mean_radius / kMetersPerInch, coil.winding_width / kMetersPerInch,
                                 static_cast<double>(coil.turns_per_side));
    return side_factor(coil.sides) * uh * 1e-6;
}

CoilDesign inverse_design_coil(double target_inductance, FreeVariable free, const SpiralCoil& fixed) {
    require_positive(target_inductance, "target inductance");
    const double l = target_inductance * 1e6 / side_factor(fixed.sides);  // µH per side
    CoilDesign d;
    d.coil = fixed;
    switch (free) {
        case FreeVariable::WindingWidth: {
            require_positive(fixed.mean_radius, "SpiralCoil.mean_radius");
            if (fixed.turns_per_side < 1) throw ValidationError("SpiralCoil.turns_per_side must be >= 1");
            const double r = fixed.mean_radius / kMetersPerInch;
            const double n = fixed.turns_per_side;
            const double w = (r * r * n * n / l - 8.0 * r) / 11.0;
            if (!(w > 0.0)) {
                std::ostringstream os;
                os << "no positive winding width reaches " << target_inductance * 1e6
                   << " µH: the width -> 0 limit gives only " << side_factor(fixed.sides) * r * n * n / 8.0
                   << " µH";
                throw ValidationError(os.str());
            }
            d.coil.winding_width = w * kMetersPerInch;
            break;
        }
        case FreeVariable::MeanRadius: {
            require_positive(fixed.winding_width, "SpiralCoil.winding_width");
            if (fixed.turns_per_side < 1) throw ValidationError("SpiralCoil.turns_per_side must be >= 1");
            const double w = fixed.winding_width / kMetersPerInch;
            const double n2 = static_cast<double>(fixed.turns_per_side) * fixed.turns_per_side;
            // n² r² - 8 L r - 11 L w = 0, positive root
            const double r = (8.0 * l + std::sqrt(64.0 * l * l + 44.0 * n2 * l * w)) / (2.0 * n2);
            d.coil.mean_radius = r * kMetersPerInch;
            break;
        }
        case FreeVariable::Turns: {
            require_positive(fixed.mean_radius, "SpiralCoil.mean_radius");
            require_positive(fixed.winding_width, "SpiralCoil.winding_width");
            const double r = fixed.mean_radius / kMetersPerInch;
            const double w = fixed.winding_width / kMetersPerInch;
            d.exact_turns = std::sqrt(l * (8.0 * r + 11.0 * w)) / r;
            d.coil.turns_per_side = std::max(1, static_cast<int>(std::lround(d.exact_turns)));
            break;
        }
    }
    if (free != FreeVariable::Turns) d.exact_turns = d.coil.turns_per_side;
    d.inductance = wheeler_inductance(d.coil);
    d.residual = (d.inductance - target_inductance) / target_inductance;
    return d;
}

double resonant_frequency(double inductance, double capacitance) {
    require_positive(inductance, "inductance");
    require_positive(capacitance, "capacitance");
    return 1.0 / (2.0 * std::numbers::pi * std::sqrt(inductance * capacitance));
}

double required_capacitance(double inductance, double frequency) {
    require_positive(inductance, "inductance");
    require_positive(frequency, "frequency");
    const double w = 2.0 * std::numbers::pi * frequency;
    return 1.0 / (w * w * inductance);
}

double faraday_peak_voltage(double turns, double flux_amplitude, double frequency) {
    require_positive(turns, "turns");
    require_positive(frequency, "frequency");
    if (!(flux_amplitude >= 0.0) || !std::isfinite(flux_amplitude)) {
        throw ValidationError("flux amplitude must be non-negative and finite");
    }
    return turns * 2.0 * std::numbers::pi * frequency * flux_amplitude;
}

double CouplingModel::voltage(double d) const { return (a * d + b) * d + c; }

CouplingModel fit_coupling(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3) throw ValidationError("fit_coupling needs at least 3 points");
    std::vector<double> ds;
    for (const auto& [d, v] : points) {
        if (!std::isfinite(d) || !std::isfinite(v)) throw ValidationError("coupling points must be finite");
        ds.push_back(d);
    }
    std::sort(ds.begin(), ds.end());
    if (std::adjacent_find(ds.begin(), ds.end()) != ds.end()) {
        throw ValidationError("coupling points need distinct distances");
    }

    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd A(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = points[static_cast<std::size_t>(i)].first;
        A.row(i) << d * d, d, 1.0;
        y(i) = points[static_cast<std::size_t>(i)].second;
    }
    const Eigen::Vector3d x = n == 3 ? Eigen::Vector3d(A.fullPivLu().solve(y))
                                     : Eigen::Vector3d(A.colPivHouseholderQr().solve(y));
    CouplingModel m{x(0), x(1), x(2), ds.front(), ds.back()};

    // V' = 2ad + b is linear, so its sign over the range is settled at the ends.
    auto slope = [&](double d) { return 2.0 * m.a * d + m.b; };
    const double s0 = slope(m.range_min), s1 = slope(m.range_max);
    if (!(s0 < 0.0) || !(s1 < 0.0)) {
        double lo = m.range_min, hi = m.range_max;
        if (s0 < 0.0 || s1 < 0.0) {
            const double root = -m.b / (2.0 * m.a);
            (s0 < 0.0 ? lo : hi) = root;
        }
        std::ostringstream os;
        os << "fitted coupling is not strictly decreasing on [" << lo << ", " << hi << "] mm";
        throw ModelRejected(os.str(), lo, hi);
    }
    // decreasing, so the minimum is at the far end
    if (!(m.voltage(m.range_max) > 0.0)) {
        const double hi = m.range_max;
        double lo = hi;
        const double disc = m.b * m.b - 4.0 * m.a * m.c;
        if (m.a != 0.0 && disc >= 0.0) {
            for (double r : {(-m.b - std::sqrt(disc)) / (2.0 * m.a), (-m.b + std::sqrt(disc)) / (2.0 * m.a)}) {
                if (r >= m.range_min && r <= m.range_max) lo = std::min(lo, r);
            }
        } else if (m.a == 0.0) {
            lo = std::clamp(-m.c / m.b, m.range_min, m.range_max);
        }
        std::ostringstream os;
        os << "fitted coupling voltage is not positive on [" << lo << ", " << hi << "] mm";
        throw ModelRejected(os.str(), lo, hi);
    }
    return m;
}

void LedLoad::validate() const {
    if (count < 1) throw ValidationError("LedLoad.count must be >= 1");
    if (!(power_per_led > 0.0)) throw ValidationError("LedLoad.power_per_led must be positive");
    if (!(full_voltage >= 0.0)) throw ValidationError("LedLoad.full_voltage must be >= 0");
}

LedBudget led_budget(const CouplingModel& coupling, double d_mm, const LedLoad& load,
                     double source_power_at_contact) {
    load.validate();
    if (!(source_power_at_contact >= 0.0) || !std::isfinite(source_power_at_contact)) {
        throw ValidationError("source power must be non-negative and finite");
    }
    if (!coupling.in_range(d_mm)) {
        std::ostringstream os;
        os << "distance " << d_mm << " mm is outside the coupling range [" << coupling.range_min
           << ", " << coupling.range_max << "] mm";
        throw ValidationError(os.str());
    }
    LedBudget b;
    b.voltage = coupling.voltage(d_mm);
    const double ratio = b.voltage / coupling.voltage(0.0);
    b.power = source_power_at_contact * ratio * ratio;
    const double lit = std::floor(b.power / load.power_per_led);
    b.lit = static_cast<int>(std::min(static_cast<double>(load.count), lit));
    b.brightness = std::clamp(b.power / (load.count * load.power_per_led), 0.0, 1.0);
    b.above_full_voltage = b.voltage >= load.full_voltage;
    return b;
}

} // namespace mgor::wpt
