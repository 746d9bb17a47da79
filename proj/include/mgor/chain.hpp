#pragma once

#include <array>
#include <functional>
#include <numbers>
#include <optional>
#include <vector>

#include "mgor/geometry.hpp"
#include "mgor/magnetics.hpp"

namespace mgor {

using magnetics::Dipole;
using magnetics::MagnetSpec;

/// A permanent magnet glued to a link, posed in that link's body frame.
struct MountedMagnet {
    MagnetSpec spec;
    RigidTransform mount;
};

/// Overdamped mobility per coordinate class: velocity = mobility * generalized force.
struct Mobility {
    double base_translation = 1e-2;  // m/(N·s)
    double base_rotation = 1.0;      // rad/(N·m·s)
    double hinge = 1.0;              // rad/(N·m·s)
};

/// Finite-size repulsion between the two end magnets (one-sided quadratic on the
/// centre distance). Keeps the point-dipole attraction from collapsing.
struct MagnetContact {
    double distance = 3e-3;  // m
    double stiffness = 6e5;  // N/m
    // Centre distance below which the magnet bodies interpenetrate; energy there is a
    // SingularityError rather than a number.
    double overlap = 2e-3;   // m
};

/// The robot as a planar-foldable strip of rigid links.
///
/// Link i has its body frame at its proximal hinge, extends along body +y for
/// `link_length`, and folds about body +x. Link 0 carries the L-IPM, the last
/// link carries the R-IPM.
struct ChainModel {
    int cells = 3;
    int links_per_cell = 2;
    double link_length = 12.5e-3;
    double link_width = 10e-3;
    double link_thickness = 1e-4;
    double link_mass = 1.7e-5;  // kg, PET strip; only used when gravity is set
    std::vector<double> hinge_stiffness;    // N·m/rad, one per hinge
    std::vector<double> hinge_rest_angles;  // rad, one per hinge
    std::array<MountedMagnet, 2> end_magnets;
    Mobility mobility;
    MagnetContact contact;
    double hinge_limit = std::numbers::pi - 0.05;
    int magnet_subdivisions = 1;

    int link_count() const { return cells * links_per_cell; }
    int hinge_count() const { return link_count() - 1; }
    int coordinate_count() const { return 6 + hinge_count(); }
    double chain_length() const { return link_count() * link_length; }

    /// Hinges between cells (as opposed to the notch hinge inside each cell).
    std::vector<int> cell_hinges() const;
    std::vector<int> notch_hinges() const;

    void validate() const;

    /// Three cells, two links each, 10x5x2 mm IPMs inset half a magnet length
    /// from each chain end with moments tilted ±30° out of the strip plane.
    /// Notch hinges are `notch_ratio` times stiffer than the fold lines between cells.
    static ChainModel mgor(double stiffness, double notch_ratio = 10.0);
};

/// Generalized coordinates: pose of link 0 plus hinge angles.
struct Config {
    RigidTransform base;
    std::vector<double> hinge_angles;

    static Config flat(const ChainModel& model);
};

/// Force-controlled parallel plates squeezing the chain along `normal`.
/// Plate offsets (along the normal) are set by `servo_plates`.
struct SqueezePlates {
    Vec3 normal = Vec3::UnitZ();
    double force = 0.0;        // N, per plate
    double stiffness = 1e4;    // N/m per contact point
    double lower = -1.0;       // plate surface offsets along normal, m
    double upper = 1.0;
};

struct Environment {
    std::vector<Dipole> epm;
    std::optional<SqueezePlates> plates;
    Vec3 gravity = Vec3::Zero();

    void validate() const;
};

struct SimParams {
    double timestep = 1e-3;
    // Per-step displacement caps; a step exceeding either is scaled down uniformly.
    double max_step_translation = 1e-5;  // m
    double max_step_rotation = 1e-3;     // rad
    long max_steps = 400000;
    double convergence_threshold = 1e-8;
    double singularity_guard = magnetics::kMinSeparation;

    void validate() const;
};

struct EnergyBreakdown {
    double elastic = 0.0;
    double ipm_ipm = 0.0;
    double ipm_epm = 0.0;
    double contact = 0.0;
    double external = 0.0;

    double magnetic() const { return ipm_ipm + ipm_epm; }
    double total() const { return elastic + ipm_ipm + ipm_epm + contact + external; }
};

struct KinematicState {
    std::vector<RigidTransform> links;
    std::array<std::vector<Dipole>, 2> end_dipoles;  // [L, R], sub-dipoles if discretized
    std::array<Dipole, 2> end_centroids;
};

/// Throws ValidationError when q does not match the model.
void validate_config(const ChainModel& model, const Config& q);

KinematicState forward_kinematics(const ChainModel& model, const Config& q);

/// Link station points (chain ends and hinges) offset to both panel edges.
std::vector<Vec3> contact_points(const ChainModel& model, const std::vector<RigidTransform>& links);

EnergyBreakdown total_energy(const ChainModel& model, const Config& q, const Environment& env,
                             const SimParams& params = {});

/// -dE/dq by central differences: [force xyz, torque xyz about the base origin, hinge torques].
Eigen::VectorXd generalized_forces(const ChainModel& model, const Config& q,
                                   const Environment& env, const SimParams& params = {},
                                   double step_scale = 1.0);

/// Apply a generalized-coordinate displacement (same layout as generalized_forces).
Config displaced(const ChainModel& model, const Config& q, const Eigen::VectorXd& dq);

/// One explicit overdamped step. Throws DivergenceError (tagged with `step_index`)
/// on non-finite output.
Config step(const ChainModel& model, const Config& q, const Environment& env,
            const SimParams& params, long step_index = 0);

double end_gap(const ChainModel& model, const Config& q);

/// Place both plates so each carries its commanded normal force for the current q.
void servo_plates(const ChainModel& model, const Config& q, SqueezePlates& plates);

/// Rigid motion of the base and environment together.
Config transformed(const Config& q, const RigidTransform& t);
Environment transformed(const Environment& env, const RigidTransform& t);

struct RelaxResult {
    Config config;
    long steps = 0;
    bool settled = false;
    double residual = 0.0;  // max |generalized force| at exit
};

/// Step a static environment until max |generalized force| <= threshold or max_steps.
/// `stop` may end the run early; it sees the config after each step.
RelaxResult relax(const ChainModel& model, Config q, const Environment& env,
                  const SimParams& params,
                  const std::function<bool(const Config&, long)>& stop = {});

} // namespace mgor
