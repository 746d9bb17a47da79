#pragma once

#include <map>
#include <string>
#include <vector>

#include "mgor/chain.hpp"
#include "mgor/states.hpp"

namespace mgor {

/// The handheld controller: two axially magnetized cylinders side by side along rig x,
/// both magnetized along rig z.
struct EpmRig {
    MagnetSpec cylinder = MagnetSpec::cylinder(40e-3, 50e-3);
    double spacing = 45e-3;  // centre to centre, m
    double polarity = 1.0;   // -1 flips both magnets

    void validate() const;
    std::vector<Dipole> dipoles(const RigidTransform& pose) const;
};

enum class PrimitiveKind { Hold, Translate, Rotate, TranslateRotate };

std::string_view to_string(PrimitiveKind kind);
PrimitiveKind primitive_kind_from_string(std::string_view name);

/// Constant-velocity EPM motion. Rotations turn the rig about its own centre.
struct ControlPrimitive {
    PrimitiveKind kind = PrimitiveKind::Hold;
    Vec3 axis = Vec3::UnitY();           // translation direction
    double speed = 0.0;                  // m/s
    Vec3 rotation_axis = Vec3::UnitX();  // world frame
    double rate = 0.0;                   // rad/s
    double duration = 0.0;               // s

    static ControlPrimitive hold(double duration);
    static ControlPrimitive translate(const Vec3& axis, double speed, double duration);
    static ControlPrimitive rotate(const Vec3& axis, double rate, double duration);
    static ControlPrimitive translate_rotate(const Vec3& axis, double speed,
                                             const Vec3& rotation_axis, double rate,
                                             double duration);

    void validate() const;
    Vec3 linear_velocity() const;
    Vec3 angular_velocity() const;
};

struct ControlScript {
    std::string name;
    std::string description;
    RigidTransform initial_pose;
    std::vector<ControlPrimitive> primitives;

    void validate() const;
    double total_duration() const;
};

/// Pose after moving at (v, ω) for `tau` seconds from `start`.
RigidTransform advance_pose(const RigidTransform& start, const Vec3& v, const Vec3& omega,
                            double tau);

RigidTransform epm_pose_at(const ControlScript& script, double t);

/// Durations multiplied by `factor`, speeds and rates divided by it; same path.
ControlScript time_scaled(const ControlScript& script, double factor);

/// One approach leg of the built-in script: move by (dy, dz) in the folding plane
/// while turning by `turn` about world x.
struct ApproachLeg {
    double dy = 0.0;    // m
    double dz = 0.0;    // m
    double turn = 0.0;  // rad
    double duration = 1.0;
};

inline constexpr double kDeg = std::numbers::pi / 180.0;

/// Tunables for the built-in beta -> gamma sequence. Positions are world frame
/// with the robot lying flat on z = 0 along +y.
struct Fig3Params {
    double start_y = 70e-3;
    double standoff = 40e-3;
    double settle_hold = 10.0;
    double swift_turn = 60.0 * kDeg;
    double swift_duration = 3.0;
    double sweep_y = -25e-3;
    double sweep_duration = 25.0;
    std::vector<ApproachLeg> approach = {
        {-25.0e-3, 10.0e-3, 60.0 * kDeg, 30.0},
        {-43.8e-3, -29.9e-3, 96.6 * kDeg, 30.0},
        {24.1e-3, -16.1e-3, 39.5 * kDeg, 25.0},
        {-4.3e-3, -0.5e-3, 153.4 * kDeg, 20.0},
        {7.8e-3, 14.9e-3, -123.1 * kDeg, 20.0},
    };
    double capture_hold = 20.0;
    double flip_turn = 20.0 * kDeg;  // about the plane normal
    double flip_duration = 10.0;
    Vec3 retreat = Vec3(0.0, 30e-3, -52e-3);
    double retreat_duration = 30.0;
    double final_hold = 30.0;
};

ControlScript fig3_script(const Fig3Params& p = {});

struct TrajectorySample {
    double t = 0.0;
    Config q;
    RigidTransform epm_pose;
    double end_gap = 0.0;
    StateLabel label = StateLabel::Transitional;
    EnergyBreakdown energy;
};

struct TransitionReport {
    std::vector<StateLabel> timeline;  // label after each step
    std::map<StateLabel, double> first_seen;
    StateLabel final_label = StateLabel::Transitional;
    double min_end_gap = 0.0;
    int flip_events = 0;  // sign changes of the end-moment alignment
};

struct ExecuteOptions {
    EpmRig rig;
    double sample_interval = 0.1;  // s
    StateThresholds thresholds;
};

struct ExecutionResult {
    std::vector<TrajectorySample> samples;
    TransitionReport report;
};

long step_count(const ControlScript& script, const SimParams& params);

/// Steps the chain in the script's time-varying EPM field, one step per timestep
/// with the field frozen at the step's start time.
ExecutionResult execute(const ControlScript& script, const ChainModel& model, const Config& q0,
                        const SimParams& params, const ExecuteOptions& options = {});

/// Sample of the current state (energy evaluated in `env`).
TrajectorySample make_sample(const ChainModel& model, const Config& q, double t,
                             const RigidTransform& epm_pose, const Environment& env,
                             const SimParams& params, const StateThresholds& thresholds);

} // namespace mgor
