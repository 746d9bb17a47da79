#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mgor::wpt {

inline constexpr double kMetersPerInch = 0.0254;

enum class Sides { Single, Double };

std::string_view to_string(Sides s);
Sides sides_from_string(std::string_view name);

/// Planar spiral on a flexible board. `sides = Double` stacks one spiral per face in
/// series, so inductance and turns both count twice.
struct SpiralCoil {
    double mean_radius = 0.0;    // m, to the centre of the windings
    double winding_width = 0.0;  // m
    int turns_per_side = 1;
    Sides sides = Sides::Single;

    void validate() const;
};

/// Wheeler's spiral formula in its native inch/µH form, returned in henries.
double wheeler_inductance(const SpiralCoil& coil);

enum class FreeVariable { MeanRadius, WindingWidth, Turns };

struct CoilDesign {
    SpiralCoil coil;
    double exact_turns = 0.0;  // before rounding; equals turns_per_side unless Turns was free
    double inductance = 0.0;   // H, of the returned coil
    double residual = 0.0;     // (inductance - target) / target
};

/// Solves for `free` with the other two fields of `fixed` held. Throws
/// ValidationError when no positive solution exists.
CoilDesign inverse_design_coil(double target_inductance, FreeVariable free, const SpiralCoil& fixed);

double resonant_frequency(double inductance, double capacitance);
double required_capacitance(double inductance, double frequency);

/// Peak EMF of N turns linking Φ(t) = Φ0 sin(2πft).
double faraday_peak_voltage(double turns, double flux_amplitude, double frequency);

/// V(d) = a d² + b d + c with d in mm.
struct CouplingModel {
    double a = 0.0;  // V/mm²
    double b = 0.0;  // V/mm
    double c = 0.0;  // V
    double range_min = 0.0;   // mm
    double range_max = 20.0;  // mm

    double voltage(double d_mm) const;
    bool in_range(double d_mm) const { return d_mm >= range_min && d_mm <= range_max; }
};

class ModelRejected : public std::runtime_error {
public:
    ModelRejected(const std::string& what, double lo, double hi)
        : std::runtime_error(what), lo_(lo), hi_(hi) {}
    // offending interval, mm
    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }

private:
    double lo_, hi_;
};

/// Three points interpolate exactly, more are fitted by least squares. The range is
/// the span of the input distances. Throws ModelRejected if the curve is not
/// positive and strictly decreasing on it.
CouplingModel fit_coupling(const std::vector<std::pair<double, double>>& points);

struct LedLoad {
    int count = 15;
    double power_per_led = 0.08;   // W
    double full_voltage = 0.0;     // V; 0 disables the threshold report

    void validate() const;
};

struct LedBudget {
    double voltage = 0.0;  // V at the requested distance
    double power = 0.0;    // W deliverable
    int lit = 0;
    double brightness = 0.0;  // 0..1
    bool above_full_voltage = true;
};

/// Delivered power scales with (V(d)/V(0))² into a fixed load.
LedBudget led_budget(const CouplingModel& coupling, double d_mm, const LedLoad& load,
                     double source_power_at_contact);

} // namespace mgor::wpt
