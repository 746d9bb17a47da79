#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "mgor/chain.hpp"

namespace mgor {

enum class StateLabel { Alpha, Beta, Gamma, Transitional };

std::string_view to_string(StateLabel label);
/// Throws ValidationError for unknown names.
StateLabel state_label_from_string(std::string_view name);

struct StateThresholds {
    double beta_mean_angle = 0.2;   // rad
    double beta_min_gap_fraction = 0.5;  // of chain length
    double lock_gap = 6e-3;         // m
    double lock_alignment = -0.7;   // dot of unit end moments
    double alpha_min_angle = 2.0;   // rad
};

/// Dot product of the unit L and R moments.
double end_alignment(const ChainModel& model, const Config& q);

StateLabel classify(const ChainModel& model, const Config& q, const StateThresholds& t = {});

// Reference configurations

/// Cell hinges at `cell_angle`, notch hinges at `notch_angle`. 2π/3 closes the triangle.
Config triangle_config(const ChainModel& model, double cell_angle, double notch_angle = 0.0);
/// Alternating ±angle on every hinge.
Config accordion_config(const ChainModel& model, double angle);

// Landscapes

struct LandscapeAxis {
    std::vector<int> hinges;  // all set to the same value
    double min = 0.0;
    double max = 0.0;
    int resolution = 8;
};

struct LandscapeSlice {
    LandscapeAxis x;
    LandscapeAxis y;
    Config base;  // supplies base pose and any hinge not on an axis
    std::optional<RigidTransform> epm_pose;  // informational; the field itself comes from env

    void validate(const ChainModel& model) const;
    double x_value(int i) const;
    double y_value(int j) const;
    Config config_at(int i, int j) const;
};

struct LandscapeGrid {
    LandscapeSlice slice;
    int nx = 0;
    int ny = 0;
    std::vector<double> energy;  // row-major, index j * nx + i; NaN where singular
    std::vector<bool> singular;

    double at(int i, int j) const { return energy[static_cast<std::size_t>(j * nx + i)]; }
    bool is_singular(int i, int j) const { return singular[static_cast<std::size_t>(j * nx + i)]; }
};

/// Total energy over the slice. Magnet overlap marks the cell instead of throwing.
LandscapeGrid energy_landscape(const ChainModel& model, const LandscapeSlice& slice,
                               const Environment& env, const SimParams& params = {});

struct LocalMinimum {
    int i = 0;
    int j = 0;
    double energy = 0.0;
    StateLabel label = StateLabel::Transitional;
};

/// Interior cells strictly below all 8 neighbours (singular neighbours count as +inf),
/// sorted by energy. Labels come from classifying each cell's config.
std::vector<LocalMinimum> find_local_minima(const LandscapeGrid& grid, const ChainModel& model,
                                            const StateThresholds& t = {});
/// Same scan on a bare row-major array, unlabeled.
std::vector<LocalMinimum> find_local_minima(const std::vector<double>& energy, int nx, int ny);

void write_landscape_csv(std::ostream& os, const LandscapeGrid& grid);

enum class PairAlignment { Attracting, InPlaneRepulsive, Neutral };

std::string_view to_string(PairAlignment a);

/// Sign of the force on `b` projected on the a->b axis.
PairAlignment pair_alignment(const Dipole& a, const Dipole& b, double epsilon = 1e-9);

} // namespace mgor
