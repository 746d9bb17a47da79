#include "mgor/teleop.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mgor/errors.hpp"
#include "mgor/io.hpp"
#include "mgor/scenarios.hpp"

namespace mgor::teleop {

using nlohmann::json;

namespace {

constexpr CommandType kAllTypes[] = {CommandType::SetEpmVelocity, CommandType::SetEpmPose,
                                     CommandType::Pause,          CommandType::Resume,
                                     CommandType::Reset,          CommandType::StartRecording,
                                     CommandType::StopRecording};

const json& payload_of(const json& envelope) {
    static const json empty = json::object();
    auto it = envelope.find("payload");
    if (it == envelope.end() || it->is_null()) return empty;
    if (!it->is_object()) throw ValidationError("payload: expected an object");
    return *it;
}

std::string fmt(double x) { return io::format_double(x); }

} // namespace

std::string_view to_string(CommandType t) {
    switch (t) {
        case CommandType::SetEpmVelocity: return "set_epm_velocity";
        case CommandType::SetEpmPose: return "set_epm_pose";
        case CommandType::Pause: return "pause";
        case CommandType::Resume: return "resume";
        case CommandType::Reset: return "reset";
        case CommandType::StartRecording: return "start_recording";
        case CommandType::StopRecording: return "stop_recording";
    }
    return "pause";
}

CommandType command_type_from_string(std::string_view name) {
    for (auto t : kAllTypes) {
        if (to_string(t) == name) return t;
    }
    throw ValidationError("unknown command type '" + std::string(name) + "'");
}

Command Command::velocity(const Vec3& linear, const Vec3& angular) {
    Command c;
    c.type = CommandType::SetEpmVelocity;
    c.linear = linear;
    c.angular = angular;
    return c;
}

Command Command::set_pose(const RigidTransform& pose) {
    Command c;
    c.type = CommandType::SetEpmPose;
    c.pose = pose;
    return c;
}

Command Command::of(CommandType type) {
    Command c;
    c.type = type;
    return c;
}

Command Command::reset(std::string scenario) {
    Command c;
    c.type = CommandType::Reset;
    c.scenario = std::move(scenario);
    return c;
}

Command Command::stop_recording(std::string name) {
    Command c;
    c.type = CommandType::StopRecording;
    c.name = std::move(name);
    return c;
}

json encode(const Command& c) {
    json payload = json::object();
    switch (c.type) {
        case CommandType::SetEpmVelocity:
            payload = {{"linear", io::encode(c.linear)}, {"angular", io::encode(c.angular)}};
            break;
        case CommandType::SetEpmPose: payload = {{"pose", io::encode(c.pose)}}; break;
        case CommandType::Reset: payload = {{"scenario", c.scenario}}; break;
        case CommandType::StopRecording: payload = {{"name", c.name}}; break;
        default: break;
    }
    return {{"type", to_string(c.type)}, {"payload", payload}};
}

Command decode_command(const json& envelope) {
    io::require_only(envelope, {"type", "payload", "client_seq", "at_step"}, "command");
    if (!envelope.contains("type") || !envelope["type"].is_string()) {
        throw ValidationError("command: missing string field 'type'");
    }
    Command c;
    c.type = command_type_from_string(envelope["type"].get<std::string>());
    const json& p = payload_of(envelope);
    switch (c.type) {
        case CommandType::SetEpmVelocity:
            io::require_only(p, {"linear", "angular"}, "payload");
            if (p.contains("linear")) c.linear = io::decode_vec3(p["linear"], "payload.linear");
            if (p.contains("angular")) c.angular = io::decode_vec3(p["angular"], "payload.angular");
            break;
        case CommandType::SetEpmPose:
            io::require_only(p, {"pose"}, "payload");
            if (!p.contains("pose")) throw ValidationError("payload: missing field 'pose'");
            c.pose = io::decode_pose(p["pose"], "payload.pose");
            break;
        case CommandType::Reset:
            io::require_only(p, {"scenario"}, "payload");
            c.scenario = p.contains("scenario") && p["scenario"].is_string() ? p["scenario"].get<std::string>()
                                                                               : "beta";
            break;
        case CommandType::StopRecording:
            io::require_only(p, {"name"}, "payload");
            c.name = p.contains("name") && p["name"].is_string() ? p["name"].get<std::string>() : "recording";
            break;
        default:
            io::require_only(p, {}, "payload");
            break;
    }
    return c;
}

json encode_log(const std::vector<LoggedCommand>& log) {
    json out = json::array();
    for (const auto& e : log) {
        json c = encode(e.command);
        c["step"] = e.step;
        out.push_back(c);
    }
    return out;
}

std::vector<LoggedCommand> decode_log(const json& j) {
    if (!j.is_array()) throw ValidationError("command log: expected an array");
    std::vector<LoggedCommand> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        json entry = j[i];
        if (!entry.is_object() || !entry.contains("step") || !entry["step"].is_number_integer()) {
            throw ValidationError("command log[" + std::to_string(i) + "]: missing integer 'step'");
        }
        const long step = entry["step"].get<long>();
        entry.erase("step");
        out.push_back({step, decode_command(entry)});
    }
    return out;
}

json encode(const Snapshot& s) {
    json links = json::array();
    for (const auto& p : s.link_origins) links.push_back(io::encode(p));
    json ends = json::array();
    for (const auto& d : s.end_dipoles) ends.push_back({{"position", io::encode(d.position)}, {"moment", io::encode(d.moment)}});
    json epm = json::array();
    for (const auto& d : s.epm_dipoles) epm.push_back({{"position", io::encode(d.position)}, {"moment", io::encode(d.moment)}});
    return {{"t", s.t},
            {"step", s.step},
            {"q", io::encode(s.q)},
            {"epm_pose", io::encode(s.epm_pose)},
            {"epm_velocity", {{"linear", io::encode(s.epm_linear)}, {"angular", io::encode(s.epm_angular)}}},
            {"label", to_string(s.label)},
            {"energy", io::encode(s.energy)},
            {"end_gap", s.end_gap},
            {"recording", s.recording},
            {"paused", s.paused},
            {"links", links},
            {"end_dipoles", ends},
            {"epm_dipoles", epm}};
}

SessionOptions default_session_options() {
    SessionOptions o;
    o.model = calibrated_model();
    return o;
}

std::vector<std::string> scenario_ids() { return {"beta", "gamma", "folded"}; }

Session::Session(SessionOptions options, const std::string& scenario) : options_(std::move(options)) {
    options_.model.validate();
    options_.params.validate();
    options_.rig.validate();
    load_scenario(scenario);
}

void Session::load_scenario(const std::string& id) {
    const RigidTransform standard = fig3_script().initial_pose;
    if (id == "beta") {
        q_ = Config::flat(options_.model);
        segment_pose_ = standard;
    } else if (id == "gamma") {
        q_ = locked_gamma(options_.model, options_.params);
        segment_pose_ = standard;
    } else if (id == "folded") {
        q_ = folded_start(options_.model);
        // raised far enough that the robot unfolds on its own
        segment_pose_ = RigidTransform::translation(Vec3(0.0, standard.position.y(), 0.3));
    } else {
        throw ValidationError("unknown scenario id '" + id + "' (beta, gamma, folded)");
    }
    linear_ = angular_ = Vec3::Zero();
    segment_start_ = step_;
}

bool Session::recording_after_pending(std::optional<long> at_step) const {
    bool rec = recording_;
    auto track = [&](const Command& p) {
        if (p.type == CommandType::StartRecording) rec = true;
        if (p.type == CommandType::StopRecording) rec = false;
    };
    for (const auto& p : pending_) track(p);
    for (const auto& [step, p] : scheduled_) {
        if (at_step && step <= *at_step) track(p);
    }
    return rec;
}

void Session::validate(const Command& c, bool will_record) const {
    switch (c.type) {
        case CommandType::SetEpmVelocity: {
            if (!c.linear.allFinite() || !c.angular.allFinite()) {
                throw ValidationError("set_epm_velocity: values must be finite");
            }
            const auto& lim = options_.limits;
            if (c.linear.norm() > lim.max_speed) {
                throw ValidationError("set_epm_velocity: speed " + fmt(c.linear.norm()) + " m/s exceeds the cap of " +
                                      fmt(lim.max_speed) + " m/s");
            }
            if (c.angular.norm() > lim.max_rate) {
                throw ValidationError("set_epm_velocity: rate " + fmt(c.angular.norm()) + " rad/s exceeds the cap of " +
                                      fmt(lim.max_rate) + " rad/s");
            }
            break;
        }
        case CommandType::SetEpmPose:
            if (!c.pose.position.allFinite() || orthonormality_error(c.pose.rotation) > 1e-9 ||
                c.pose.rotation.determinant() < 0.0) {
                throw ValidationError("set_epm_pose: not a finite rigid transform");
            }
            if (will_record) throw ValidationError("set_epm_pose is not allowed while recording");
            break;
        case CommandType::Reset: {
            const auto ids = scenario_ids();
            if (std::find(ids.begin(), ids.end(), c.scenario) == ids.end()) {
                throw ValidationError("reset: unknown scenario id '" + c.scenario + "'");
            }
            if (will_record) throw ValidationError("reset is not allowed while recording");
            break;
        }
        case CommandType::StartRecording:
            if (will_record) throw ValidationError("start_recording: already recording");
            break;
        case CommandType::StopRecording:
            if (!will_record) throw ValidationError("stop_recording: not recording");
            break;
        case CommandType::Pause:
        case CommandType::Resume: break;
    }
}

void Session::submit(const Command& command, std::optional<long> at_step) {
    if (at_step && *at_step < step_) {
        throw ValidationError("at_step " + std::to_string(*at_step) + " is in the past (session is at step " +
                              std::to_string(step_) + ")");
    }
    validate(command, recording_after_pending(at_step));
    if (!at_step) {
        pending_.push_back(command);
        return;
    }
    auto pos = std::upper_bound(scheduled_.begin(), scheduled_.end(), *at_step,
                                [](long s, const auto& e) { return s < e.first; });
    scheduled_.insert(pos, {*at_step, command});
}

RigidTransform Session::pose_at_step(long step) const {
    return advance_pose(segment_pose_, linear_, angular_,
                        static_cast<double>(step - segment_start_) * options_.params.timestep);
}

void Session::close_segment() {
    const long n = step_ - segment_start_;
    if (recording_ && n > 0) {
        const double duration = static_cast<double>(n) * options_.params.timestep;
        const double v = linear_.norm();
        const double w = angular_.norm();
        ControlPrimitive p;
        if (v > 0.0 && w > 0.0) {
            p = ControlPrimitive::translate_rotate(linear_ / v, v, angular_ / w, w, duration);
        } else if (v > 0.0) {
            p = ControlPrimitive::translate(linear_ / v, v, duration);
        } else if (w > 0.0) {
            p = ControlPrimitive::rotate(angular_ / w, w, duration);
        } else {
            p = ControlPrimitive::hold(duration);
        }
        recording_script_.primitives.push_back(p);
    }
    segment_pose_ = pose_at_step(step_);
    segment_start_ = step_;
}

void Session::apply(const Command& c) {
    switch (c.type) {
        case CommandType::SetEpmVelocity:
            close_segment();
            linear_ = c.linear;
            angular_ = c.angular;
            break;
        case CommandType::SetEpmPose:
            close_segment();
            segment_pose_ = c.pose;
            break;
        case CommandType::Pause: paused_ = true; break;
        case CommandType::Resume: paused_ = false; break;
        case CommandType::Reset: load_scenario(c.scenario); break;
        case CommandType::StartRecording:
            close_segment();
            recording_ = true;
            recording_script_ = ControlScript{};
            recording_script_.initial_pose = segment_pose_;
            break;
        case CommandType::StopRecording:
            close_segment();
            recording_ = false;
            recording_script_.name = c.name;
            recording_script_.description = "recorded teleoperation session";
            if (!recording_script_.primitives.empty()) {
                last_recording_ = recording_script_;
                ++recordings_finished_;
            }
            break;
    }
    log_.push_back({step_, c});
}

void Session::apply_due(std::vector<std::string>& errors) {
    auto run = [&](const Command& c) {
        // Scheduled commands were checked against a projected state; check again.
        try {
            validate(c, recording_);
        } catch (const ValidationError& e) {
            errors.emplace_back(e.what());
            return;
        }
        const bool empty_stop = c.type == CommandType::StopRecording &&
                                recording_script_.primitives.empty() && step_ == segment_start_;
        apply(c);
        if (empty_stop) errors.emplace_back("stop_recording: empty recording, no script produced");
    };
    while (!pending_.empty()) {
        const Command c = pending_.front();
        pending_.pop_front();
        run(c);
    }
    while (!scheduled_.empty() && scheduled_.front().first <= step_) {
        const Command c = scheduled_.front().second;
        scheduled_.erase(scheduled_.begin());
        run(c);
    }
}

std::vector<std::string> Session::advance(long steps) {
    std::vector<std::string> errors;
    apply_due(errors);
    for (long i = 0; i < steps && !paused_; ++i) {
        Environment env;
        env.epm = options_.rig.dipoles(pose_at_step(step_));
        try {
            q_ = step(options_.model, q_, env, options_.params, step_);
        } catch (const std::runtime_error& e) {
            // DivergenceError or SingularityError: q_ still holds the last stable
            // state, so stop the magnet there.
            close_segment();
            linear_ = angular_ = Vec3::Zero();
            std::ostringstream os;
            os << e.what();
            if (const auto* d = dynamic_cast<const DivergenceError*>(&e)) os << " (step " << d->step() << ")";
            os << "; restored the last stable state";
            errors.push_back(os.str());
            return errors;
        }
        ++step_;
        apply_due(errors);
    }
    return errors;
}

Snapshot Session::snapshot() const {
    Snapshot s;
    s.step = step_;
    s.t = static_cast<double>(step_) * options_.params.timestep;
    s.q = q_;
    s.epm_pose = pose_at_step(step_);
    s.epm_linear = linear_;
    s.epm_angular = angular_;
    Environment env;
    env.epm = options_.rig.dipoles(s.epm_pose);
    s.epm_dipoles = env.epm;
    s.label = classify(options_.model, q_);
    s.energy = total_energy(options_.model, q_, env, options_.params);
    s.end_gap = end_gap(options_.model, q_);
    s.recording = recording_;
    s.paused = paused_;
    const KinematicState ks = forward_kinematics(options_.model, q_);
    for (const auto& l : ks.links) s.link_origins.push_back(l.position);
    s.link_origins.push_back(ks.links.back().apply(Vec3(0.0, options_.model.link_length, 0.0)));
    s.end_dipoles = ks.end_centroids;
    return s;
}

Session replay(const SessionOptions& options, const std::string& scenario,
               const std::vector<LoggedCommand>& log, long steps) {
    Session s(options, scenario);
    for (const auto& e : log) s.submit(e.command, e.step);
    // errors recur exactly as they did live, so the state still matches
    while (s.step_index() < steps) {
        s.advance(steps - s.step_index());
        if (s.paused()) break;
    }
    s.advance(0);
    return s;
}

} // namespace mgor::teleop
