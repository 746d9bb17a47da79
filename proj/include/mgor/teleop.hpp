#pragma once

#include <array>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mgor/chain.hpp"
#include "mgor/control.hpp"
#include "mgor/states.hpp"

namespace mgor::teleop {

inline constexpr int kProtocolVersion = 1;

struct Limits {
    double max_speed = 0.05;  // m/s
    double max_rate = 3.0;    // rad/s
};

enum class CommandType { SetEpmVelocity, SetEpmPose, Pause, Resume, Reset, StartRecording, StopRecording };

std::string_view to_string(CommandType t);
CommandType command_type_from_string(std::string_view name);

struct Command {
    CommandType type = CommandType::Pause;
    Vec3 linear = Vec3::Zero();   // set_epm_velocity
    Vec3 angular = Vec3::Zero();  // set_epm_velocity, world frame
    RigidTransform pose;          // set_epm_pose
    std::string scenario;         // reset
    std::string name;             // stop_recording

    static Command velocity(const Vec3& linear, const Vec3& angular);
    static Command set_pose(const RigidTransform& pose);
    static Command of(CommandType type);
    static Command reset(std::string scenario);
    static Command stop_recording(std::string name);
};

nlohmann::json encode(const Command& c);
/// `{type, payload}` as sent by clients (client_seq is read by the server).
Command decode_command(const nlohmann::json& envelope);

/// A command together with the session step at which it took effect.
struct LoggedCommand {
    long step = 0;
    Command command;
};

nlohmann::json encode_log(const std::vector<LoggedCommand>& log);
std::vector<LoggedCommand> decode_log(const nlohmann::json& j);

struct Snapshot {
    double t = 0.0;
    long step = 0;
    Config q;
    RigidTransform epm_pose;
    Vec3 epm_linear = Vec3::Zero();
    Vec3 epm_angular = Vec3::Zero();
    StateLabel label = StateLabel::Transitional;
    EnergyBreakdown energy;
    double end_gap = 0.0;
    bool recording = false;
    bool paused = false;
    std::vector<Vec3> link_origins;       // chain polyline, plus the far tip
    std::array<Dipole, 2> end_dipoles;    // L, R centroids
    std::vector<Dipole> epm_dipoles;
};

/// Snapshot fields for the wire, ready to be wrapped as `{type: "snapshot", payload}`.
nlohmann::json encode(const Snapshot& s);

struct SessionOptions {
    ChainModel model;
    SimParams params;
    EpmRig rig;
    Limits limits;
};

SessionOptions default_session_options();

/// Scenario ids accepted by reset: "beta", "gamma", "folded".
std::vector<std::string> scenario_ids();

/// One live simulation. Commands are checked on submit and applied at the next step
/// boundary in arrival order; a rejected command leaves the session untouched.
class Session {
public:
    explicit Session(SessionOptions options = default_session_options(), const std::string& scenario = "beta");

    /// Throws ValidationError when the command is rejected. With `at_step` the command
    /// waits for that step boundary instead of the next one.
    void submit(const Command& command, std::optional<long> at_step = std::nullopt);

    /// Take up to `steps` physics steps (none while paused), applying each command at
    /// its boundary. Returns the errors raised on the way. On divergence the last
    /// stable state is restored, motion stops, and the advance ends early.
    std::vector<std::string> advance(long steps);

    Snapshot snapshot() const;
    const std::vector<LoggedCommand>& log() const { return log_; }
    const std::optional<ControlScript>& last_recording() const { return last_recording_; }
    const SessionOptions& options() const { return options_; }
    bool paused() const { return paused_; }
    long step_index() const { return step_; }
    /// Increments each time a recording is finished.
    long recordings_finished() const { return recordings_finished_; }

private:
    void validate(const Command& c, bool will_record) const;
    bool recording_after_pending(std::optional<long> at_step) const;
    void apply_due(std::vector<std::string>& errors);
    void apply(const Command& c);
    void load_scenario(const std::string& id);
    void close_segment();
    RigidTransform pose_at_step(long step) const;

    SessionOptions options_;
    Config q_;
    long step_ = 0;
    bool paused_ = false;

    // EPM motion is integrated per constant-velocity segment, the same way a
    // ControlScript is evaluated.
    RigidTransform segment_pose_;
    long segment_start_ = 0;
    Vec3 linear_ = Vec3::Zero();
    Vec3 angular_ = Vec3::Zero();

    std::deque<Command> pending_;
    std::vector<std::pair<long, Command>> scheduled_;  // sorted by step, stable
    std::vector<LoggedCommand> log_;

    bool recording_ = false;
    ControlScript recording_script_;
    std::optional<ControlScript> last_recording_;
    long recordings_finished_ = 0;
};

/// Rebuild a session from its starting scenario and command log, running `steps` steps.
Session replay(const SessionOptions& options, const std::string& scenario,
               const std::vector<LoggedCommand>& log, long steps);

} // namespace mgor::teleop
