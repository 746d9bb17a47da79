#pragma once

#include <string>
#include <vector>

#include "mgor/chain.hpp"
#include "mgor/states.hpp"

namespace mgor {

/// The stiffness, mobility, and contact values produced by `calibrate_stiffness`
/// and shipped as data/calibrated_model.json.
ChainModel calibrated_model();
inline constexpr double kCalibratedStiffness = 0.06;  // N·m/rad, cell hinges
/// Starting point of the shipped calibration run.
inline constexpr double kUncalibratedStiffness = 0.03;

/// Scale every hinge stiffness so the cell hinges carry `stiffness`.
ChainModel with_cell_stiffness(ChainModel model, double stiffness);
double cell_stiffness(const ChainModel& model);

/// Closed triangle pulled into magnetic contact and relaxed.
Config locked_gamma(const ChainModel& model, const SimParams& params = {});

struct SnapOptions {
    double min_gap = 0.0;      // m; 0 means the smallest gap reachable in the family
    double max_gap = 30e-3;    // m
    double tolerance = 0.1e-3; // m
    double open_margin = 2e-3; // gap growth that counts as failure to snap
    long max_steps = 200000;
};

struct SnapResult {
    double gap = 0.0;  // m, 0 when nothing snaps
    int relaxations = 0;
    std::string diagnostic;
};

/// Starting config of the snap family: cell hinges tied, notches flat, end gap `gap`.
Config snap_family_config(const ChainModel& model, double gap);
/// Smallest end gap along the family before the ends pass each other.
double snap_family_min_gap(const ChainModel& model);

/// Whether relaxation with no EPM from an end gap of `gap` locks into Gamma.
bool snaps_from(const ChainModel& model, double gap, const SimParams& params,
                const SnapOptions& options = {});

SnapResult self_assembly_gap(const ChainModel& model, double stiffness,
                             const SimParams& params = {}, const SnapOptions& options = {});

struct CalibrationResult {
    double hinge_stiffness = 0.0;  // cell hinges, N·m/rad
    double achieved_gap = 0.0;     // m
    int iterations = 0;
    bool converged = false;
};

struct CalibrationOptions {
    double tolerance = 0.5e-3;  // m
    int max_iterations = 30;
    SnapOptions snap;
};

/// Starts from the model's own cell stiffness. Throws std::runtime_error with the
/// bracket state when it cannot converge.
CalibrationResult calibrate_stiffness(const ChainModel& model, double target_gap = 5e-3,
                                      const SimParams& params = {},
                                      const CalibrationOptions& options = {});

struct Deflection {
    double max_hinge_change = 0.0;   // rad
    double max_link_displacement = 0.0;  // m, in the base link frame
};

Deflection deflection_between(const ChainModel& model, const Config& a, const Config& b);

struct SqueezeOptions {
    double plate_stiffness = 1e4;  // N/m per contact point
    long max_steps = 200000;
    double convergence_threshold = 1e-7;
};

struct SqueezeReport {
    double force = 0.0;
    Vec3 axis = Vec3::UnitZ();
    Deflection loaded;
    Deflection residual;
    double gap_change = 0.0;  // m, after release
    StateLabel loaded_label = StateLabel::Transitional;
    StateLabel released_label = StateLabel::Transitional;
    bool recovered = false;
};

/// Throws ScenarioError tagged with the phase (load, hold, release) on divergence.
SqueezeReport squeeze_test(const ChainModel& model, const Config& q_gamma, double force,
                           const Vec3& axis, const SimParams& params = {},
                           const SqueezeOptions& options = {});

class ScenarioError : public std::runtime_error {
public:
    ScenarioError(const std::string& phase, const std::string& what)
        : std::runtime_error(phase + ": " + what), phase_(phase) {}
    const std::string& phase() const noexcept { return phase_; }

private:
    std::string phase_;
};

struct UnfoldResult {
    std::vector<double> times;
    std::vector<Config> trajectory;
    StateLabel final_label = StateLabel::Transitional;
    long steps = 0;
    bool settled = false;
};

/// Relax from `start` with no EPM, sampling every `sample_interval` seconds.
UnfoldResult unfold_scenario(const ChainModel& model, const Config& start,
                             const SimParams& params = {}, double sample_interval = 0.5);

/// The accordion start used by the unfold scenario.
Config folded_start(const ChainModel& model);

} // namespace mgor
