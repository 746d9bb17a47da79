#include "mgor/control.hpp"

#include <cmath>
#include <sstream>

#include "mgor/errors.hpp"

namespace mgor {

namespace {

constexpr double kUnitTolerance = 1e-9;

void require_unit(const Vec3& v, const char* what) {
    if (!v.allFinite() || std::abs(v.norm() - 1.0) > kUnitTolerance) {
        throw ValidationError(std::string(what) + " must be a unit vector");
    }
}

int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

} // namespace

void EpmRig::validate() const {
    cylinder.validate();
    if (!(spacing >= 0.0) || !std::isfinite(spacing)) throw ValidationError("EpmRig.spacing must be >= 0");
    if (polarity != 1.0 && polarity != -1.0) throw ValidationError("EpmRig.polarity must be +1 or -1");
}

std::vector<Dipole> EpmRig::dipoles(const RigidTransform& pose) const {
    const double m = polarity * magnetics::moment_from_spec(cylinder);
    const Vec3 moment = pose.rotation * (m * cylinder.magnetization_axis);
    const Vec3 half(0.5 * spacing, 0.0, 0.0);
    return {{pose.apply(-half), moment}, {pose.apply(half), moment}};
}

std::string_view to_string(PrimitiveKind kind) {
    switch (kind) {
        case PrimitiveKind::Hold: return "hold";
        case PrimitiveKind::Translate: return "translate";
        case PrimitiveKind::Rotate: return "rotate";
        case PrimitiveKind::TranslateRotate: return "translate_rotate";
    }
    return "hold";
}

PrimitiveKind primitive_kind_from_string(std::string_view name) {
    for (auto k : {PrimitiveKind::Hold, PrimitiveKind::Translate, PrimitiveKind::Rotate,
                   PrimitiveKind::TranslateRotate}) {
        if (to_string(k) == name) return k;
    }
    throw ValidationError("unknown primitive kind '" + std::string(name) + "'");
}

ControlPrimitive ControlPrimitive::hold(double duration) {
    ControlPrimitive p;
    p.duration = duration;
    return p;
}

ControlPrimitive ControlPrimitive::translate(const Vec3& axis, double speed, double duration) {
    ControlPrimitive p;
    p.kind = PrimitiveKind::Translate;
    p.axis = axis;
    p.speed = speed;
    p.duration = duration;
    return p;
}

ControlPrimitive ControlPrimitive::rotate(const Vec3& axis, double rate, double duration) {
    ControlPrimitive p;
    p.kind = PrimitiveKind::Rotate;
    p.rotation_axis = axis;
    p.rate = rate;
    p.duration = duration;
    return p;
}

ControlPrimitive ControlPrimitive::translate_rotate(const Vec3& axis, double speed,
                                                    const Vec3& rotation_axis, double rate,
                                                    double duration) {
    ControlPrimitive p;
    p.kind = PrimitiveKind::TranslateRotate;
    p.axis = axis;
    p.speed = speed;
    p.rotation_axis = rotation_axis;
    p.rate = rate;
    p.duration = duration;
    return p;
}

void ControlPrimitive::validate() const {
    if (!(duration > 0.0) || !std::isfinite(duration)) {
        throw ValidationError("primitive duration must be positive and finite");
    }
    const bool moves = kind == PrimitiveKind::Translate || kind == PrimitiveKind::TranslateRotate;
    const bool turns = kind == PrimitiveKind::Rotate || kind == PrimitiveKind::TranslateRotate;
    if (moves) {
        require_unit(axis, "primitive axis");
        if (!std::isfinite(speed)) throw ValidationError("primitive speed must be finite");
    }
    if (turns) {
        require_unit(rotation_axis, "primitive rotation_axis");
        if (!std::isfinite(rate)) throw ValidationError("primitive rate must be finite");
    }
}

Vec3 ControlPrimitive::linear_velocity() const {
    if (kind == PrimitiveKind::Translate || kind == PrimitiveKind::TranslateRotate) return speed * axis;
    return Vec3::Zero();
}

Vec3 ControlPrimitive::angular_velocity() const {
    if (kind == PrimitiveKind::Rotate || kind == PrimitiveKind::TranslateRotate) {
        return rate * rotation_axis;
    }
    return Vec3::Zero();
}

void ControlScript::validate() const {
    if (primitives.empty()) throw ValidationError("control script has no primitives");
    if (!initial_pose.position.allFinite() || orthonormality_error(initial_pose.rotation) > 1e-9 ||
        initial_pose.rotation.determinant() < 0.0) {
        throw ValidationError("control script initial pose is not a rigid transform");
    }
    for (std::size_t i = 0; i < primitives.size(); ++i) {
        try {
            primitives[i].validate();
        } catch (const ValidationError& e) {
            throw ValidationError("primitive " + std::to_string(i) + ": " + e.what());
        }
    }
}

double ControlScript::total_duration() const {
    double t = 0.0;
    for (const auto& p : primitives) t += p.duration;
    return t;
}

RigidTransform advance_pose(const RigidTransform& start, const Vec3& v, const Vec3& omega,
                            double tau) {
    RigidTransform out;
    out.position = start.position + tau * v;
    out.rotation = exp_so3(tau * omega) * start.rotation;
    return out;
}

RigidTransform epm_pose_at(const ControlScript& script, double t) {
    const double total = script.total_duration();
    if (!(t >= 0.0) || t > total * (1.0 + 1e-12) + 1e-12) {
        std::ostringstream os;
        os << "epm_pose_at: t = " << t << " s is outside [0, " << total << "]";
        throw ValidationError(os.str());
    }
    RigidTransform pose = script.initial_pose;
    double start = 0.0;
    for (std::size_t i = 0; i < script.primitives.size(); ++i) {
        const auto& p = script.primitives[i];
        const double end = start + p.duration;
        const bool last = i + 1 == script.primitives.size();
        if (t < end || last) {
            const double tau = std::min(t - start, p.duration);
            return advance_pose(pose, p.linear_velocity(), p.angular_velocity(), tau);
        }
        pose = advance_pose(pose, p.linear_velocity(), p.angular_velocity(), p.duration);
        start = end;
    }
    return pose;
}

ControlScript time_scaled(const ControlScript& script, double factor) {
    if (!(factor > 0.0) || !std::isfinite(factor)) throw ValidationError("time scale must be positive");
    ControlScript out = script;
    for (auto& p : out.primitives) {
        p.duration *= factor;
        p.speed /= factor;
        p.rate /= factor;
    }
    return out;
}

ControlScript fig3_script(const Fig3Params& p) {
    ControlScript s;
    s.name = "fig3";
    s.description =
        "beta to gamma: hold, swift turn about x, sweep along y, approach legs, "
        "capture, turn about the plane normal, retreat";
    s.initial_pose = RigidTransform::translation(Vec3(0.0, p.start_y, p.standoff));

    auto& prims = s.primitives;
    prims.push_back(ControlPrimitive::hold(p.settle_hold));
    prims.push_back(ControlPrimitive::rotate(Vec3::UnitX(), p.swift_turn / p.swift_duration,
                                             p.swift_duration));
    prims.push_back(ControlPrimitive::translate(
        Vec3(0.0, p.sweep_y < 0.0 ? -1.0 : 1.0, 0.0), std::abs(p.sweep_y) / p.sweep_duration,
        p.sweep_duration));
    for (const auto& leg : p.approach) {
        const Vec3 d(0.0, leg.dy, leg.dz);
        const double len = d.norm();
        const Vec3 axis = len > 0.0 ? Vec3(d / len) : Vec3(Vec3::UnitY());
        prims.push_back(ControlPrimitive::translate_rotate(axis, len / leg.duration, Vec3::UnitX(),
                                                           leg.turn / leg.duration, leg.duration));
    }
    prims.push_back(ControlPrimitive::hold(p.capture_hold));
    prims.push_back(ControlPrimitive::rotate(Vec3::UnitZ(), p.flip_turn / p.flip_duration,
                                             p.flip_duration));
    const double r = p.retreat.norm();
    prims.push_back(ControlPrimitive::translate(r > 0.0 ? Vec3(p.retreat / r) : Vec3(Vec3::UnitY()),
                                                r / p.retreat_duration, p.retreat_duration));
    prims.push_back(ControlPrimitive::hold(p.final_hold));
    s.validate();
    return s;
}

long step_count(const ControlScript& script, const SimParams& params) {
    return std::lround(script.total_duration() / params.timestep);
}

TrajectorySample make_sample(const ChainModel& model, const Config& q, double t,
                             const RigidTransform& epm_pose, const Environment& env,
                             const SimParams& params, const StateThresholds& thresholds) {
    TrajectorySample s;
    s.t = t;
    s.q = q;
    s.epm_pose = epm_pose;
    s.end_gap = end_gap(model, q);
    s.label = classify(model, q, thresholds);
    s.energy = total_energy(model, q, env, params);
    return s;
}

ExecutionResult execute(const ControlScript& script, const ChainModel& model, const Config& q0,
                        const SimParams& params, const ExecuteOptions& options) {
    script.validate();
    model.validate();
    params.validate();
    options.rig.validate();
    validate_config(model, q0);
    if (!(options.sample_interval > 0.0)) throw ValidationError("sample_interval must be positive");

    const long steps = step_count(script, params);
    const long every = std::max(1L, std::lround(options.sample_interval / params.timestep));
    const double total = script.total_duration();
    auto env_at = [&](double t, RigidTransform& pose) {
        pose = epm_pose_at(script, std::min(t, total));
        Environment env;
        env.epm = options.rig.dipoles(pose);
        return env;
    };

    ExecutionResult out;
    auto& rep = out.report;
    rep.timeline.reserve(static_cast<std::size_t>(steps));

    Config q = q0;
    RigidTransform pose;
    Environment env = env_at(0.0, pose);
    out.samples.push_back(make_sample(model, q, 0.0, pose, env, params, options.thresholds));
    rep.min_end_gap = out.samples.back().end_gap;
    int last_sign = sign_of(end_alignment(model, q));

    for (long k = 0; k < steps; ++k) {
        env = env_at(static_cast<double>(k) * params.timestep, pose);
        q = step(model, q, env, params, k);

        const double t = static_cast<double>(k + 1) * params.timestep;
        const StateLabel label = classify(model, q, options.thresholds);
        rep.timeline.push_back(label);
        rep.first_seen.try_emplace(label, t);
        rep.min_end_gap = std::min(rep.min_end_gap, end_gap(model, q));
        const int s = sign_of(end_alignment(model, q));
        if (s != 0) {
            if (last_sign != 0 && s != last_sign) ++rep.flip_events;
            last_sign = s;
        }
        if ((k + 1) % every == 0 || k + 1 == steps) {
            RigidTransform sample_pose;
            const Environment sample_env = env_at(t, sample_pose);
            out.samples.push_back(
                make_sample(model, q, t, sample_pose, sample_env, params, options.thresholds));
        }
    }
    rep.final_label = classify(model, q, options.thresholds);
    return out;
}

} // namespace mgor
