#include "mgor/chain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "mgor/errors.hpp"

namespace mgor {

namespace {

constexpr double kTranslationStep = 1e-7;  // m
constexpr double kRotationStep = 1e-6;     // rad

Mat3 rot_x(double angle) { return Eigen::AngleAxisd(angle, Vec3::UnitX()).toRotationMatrix(); }

std::vector<Dipole> magnet_dipoles(const MountedMagnet& magnet, const RigidTransform& link,
                                   int subdivisions) {
    const RigidTransform pose = link * magnet.mount;
    if (subdivisions <= 1) return {magnetics::centroid_dipole(magnet.spec, pose)};
    return magnetics::discretize_magnet(magnet.spec, pose, subdivisions);
}

double checked_pair_energy(const std::vector<Dipole>& a, const std::vector<Dipole>& b,
                           double guard, const char* label) {
    double total = 0.0;
    for (const auto& da : a) {
        for (const auto& db : b) {
            const double d = (da.position - db.position).norm();
            if (!(d >= guard)) {
                std::ostringstream os;
                os << "magnet overlap between " << label << ": separation " << d << " m";
                throw SingularityError(os.str());
            }
            total += magnetics::pair_energy(da, db);
        }
    }
    return total;
}

double plate_energy(const std::vector<Vec3>& points, const SqueezePlates& plates) {
    const Vec3 n = plates.normal.normalized();
    double e = 0.0;
    for (const auto& p : points) {
        const double s = n.dot(p);
        const double below = plates.lower - s;
        const double above = s - plates.upper;
        if (below > 0.0) e += 0.5 * plates.stiffness * below * below;
        if (above > 0.0) e += 0.5 * plates.stiffness * above * above;
    }
    return e;
}

// Offset s of a plate advancing toward +, engaging points with projection below s,
// at which k * sum((s - s_i)^+) equals `force`.
double plate_offset_for_force(std::vector<double> depth_order, double k, double force) {
    std::sort(depth_order.begin(), depth_order.end());
    if (force <= 0.0) return depth_order.front();
    double sum = 0.0;
    for (std::size_t i = 0; i < depth_order.size(); ++i) {
        sum += depth_order[i];
        const double count = static_cast<double>(i + 1);
        // with the first i+1 points engaged: k * (count * s - sum) = force
        const double s = (force / k + sum) / count;
        const bool next_engaged = i + 1 < depth_order.size() && s > depth_order[i + 1];
        if (!next_engaged) return s;
    }
    return depth_order.back();
}

} // namespace

std::vector<int> ChainModel::cell_hinges() const {
    std::vector<int> out;
    for (int h = 0; h < hinge_count(); ++h) {
        if ((h + 1) % links_per_cell == 0) out.push_back(h);
    }
    return out;
}

std::vector<int> ChainModel::notch_hinges() const {
    std::vector<int> out;
    for (int h = 0; h < hinge_count(); ++h) {
        if ((h + 1) % links_per_cell != 0) out.push_back(h);
    }
    return out;
}

void ChainModel::validate() const {
    if (cells < 1) throw ValidationError("ChainModel.cells must be >= 1");
    if (links_per_cell < 1) throw ValidationError("ChainModel.links_per_cell must be >= 1");
    if (link_count() < 2) throw ValidationError("ChainModel needs at least two links");
    if (!(link_length > 0.0)) throw ValidationError("ChainModel.link_length must be positive");
    if (!(link_width > 0.0)) throw ValidationError("ChainModel.link_width must be positive");
    if (!(link_thickness > 0.0)) throw ValidationError("ChainModel.link_thickness must be positive");
    const auto hinges = static_cast<std::size_t>(hinge_count());
    if (hinge_stiffness.size() != hinges) {
        throw ValidationError("ChainModel.hinge_stiffness must have one entry per hinge");
    }
    if (hinge_rest_angles.size() != hinges) {
        throw ValidationError("ChainModel.hinge_rest_angles must have one entry per hinge");
    }
    for (double k : hinge_stiffness) {
        if (!(k > 0.0) || !std::isfinite(k)) {
            throw ValidationError("ChainModel.hinge_stiffness entries must be positive");
        }
    }
    for (const auto& m : end_magnets) m.spec.validate();
    if (!(contact.distance >= 0.0) || !(contact.stiffness >= 0.0)) {
        throw ValidationError("ChainModel.contact must be non-negative");
    }
    if (!(contact.overlap >= 0.0) || contact.overlap > contact.distance) {
        throw ValidationError("ChainModel.contact.overlap must lie in [0, contact.distance]");
    }
    if (!(mobility.base_translation >= 0.0) || !(mobility.base_rotation >= 0.0) ||
        !(mobility.hinge > 0.0)) {
        throw ValidationError("ChainModel.mobility must be non-negative (hinge positive)");
    }
    if (!(hinge_limit > 0.0) || hinge_limit > std::numbers::pi) {
        throw ValidationError("ChainModel.hinge_limit must lie in (0, pi]");
    }
    if (magnet_subdivisions < 1) throw ValidationError("ChainModel.magnet_subdivisions must be >= 1");
}

ChainModel ChainModel::mgor(double stiffness, double notch_ratio) {
    ChainModel m;
    m.hinge_stiffness.assign(static_cast<std::size_t>(m.hinge_count()), stiffness);
    for (int h : m.notch_hinges()) m.hinge_stiffness[static_cast<std::size_t>(h)] *= notch_ratio;
    m.hinge_rest_angles.assign(static_cast<std::size_t>(m.hinge_count()), 0.0);

    const double tilt = std::numbers::pi / 6.0;
    const double inset = 5e-3;
    MountedMagnet left;
    left.spec = MagnetSpec::prism(5e-3, 10e-3, 2e-3, 1.3,
                                  Vec3(0.0, std::cos(tilt), std::sin(tilt)));
    left.mount = RigidTransform::translation(Vec3(0.0, inset, 0.0));
    MountedMagnet right;
    right.spec = MagnetSpec::prism(5e-3, 10e-3, 2e-3, 1.3,
                                   Vec3(0.0, std::cos(tilt), -std::sin(tilt)));
    right.mount = RigidTransform::translation(Vec3(0.0, m.link_length - inset, 0.0));
    m.end_magnets = {left, right};
    return m;
}

Config Config::flat(const ChainModel& model) {
    return {RigidTransform::identity(),
            std::vector<double>(static_cast<std::size_t>(model.hinge_count()), 0.0)};
}

void Environment::validate() const {
    for (const auto& d : epm) {
        if (!d.position.allFinite() || !d.moment.allFinite()) {
            throw ValidationError("Environment.epm dipoles must be finite");
        }
    }
    if (plates) {
        if (!(plates->force >= 0.0)) throw ValidationError("squeeze plate force must be >= 0");
        if (!(plates->normal.norm() > 0.0)) throw ValidationError("squeeze plate normal is zero");
        if (!(plates->stiffness > 0.0)) throw ValidationError("squeeze plate stiffness must be > 0");
    }
    if (!gravity.allFinite()) throw ValidationError("Environment.gravity must be finite");
}

void SimParams::validate() const {
    if (!(timestep > 0.0)) throw ValidationError("SimParams.timestep must be positive");
    if (!(max_step_translation > 0.0) || !(max_step_rotation > 0.0)) {
        throw ValidationError("SimParams step caps must be positive");
    }
    if (max_steps < 0) throw ValidationError("SimParams.max_steps must be non-negative");
    if (!(convergence_threshold > 0.0)) {
        throw ValidationError("SimParams.convergence_threshold must be positive");
    }
    if (!(singularity_guard > 0.0)) throw ValidationError("SimParams.singularity_guard must be positive");
}

void validate_config(const ChainModel& model, const Config& q) {
    if (q.hinge_angles.size() != static_cast<std::size_t>(model.hinge_count())) {
        std::ostringstream os;
        os << "config has " << q.hinge_angles.size() << " hinge angles, model expects "
           << model.hinge_count();
        throw ValidationError(os.str());
    }
    if (!q.base.position.allFinite() || !q.base.rotation.allFinite()) {
        throw ValidationError("config base pose must be finite");
    }
    if (orthonormality_error(q.base.rotation) > 1e-9 || q.base.rotation.determinant() < 0.0) {
        throw ValidationError("config base rotation is not orthonormal");
    }
    for (double a : q.hinge_angles) {
        if (!std::isfinite(a) || a <= -std::numbers::pi || a > std::numbers::pi) {
            throw ValidationError("hinge angles must lie in (-pi, pi]");
        }
    }
}

KinematicState forward_kinematics(const ChainModel& model, const Config& q) {
    validate_config(model, q);
    KinematicState ks;
    const int n = model.link_count();
    ks.links.reserve(static_cast<std::size_t>(n));
    ks.links.push_back(q.base);
    const Vec3 along(0.0, model.link_length, 0.0);
    for (int i = 0; i + 1 < n; ++i) {
        const RigidTransform& prev = ks.links.back();
        const RigidTransform joint{along, rot_x(q.hinge_angles[static_cast<std::size_t>(i)])};
        ks.links.push_back(prev * joint);
    }
    ks.end_dipoles[0] = magnet_dipoles(model.end_magnets[0], ks.links.front(),
                                       model.magnet_subdivisions);
    ks.end_dipoles[1] = magnet_dipoles(model.end_magnets[1], ks.links.back(),
                                       model.magnet_subdivisions);
    ks.end_centroids[0] = magnetics::centroid_dipole(model.end_magnets[0].spec,
                                                     ks.links.front() * model.end_magnets[0].mount);
    ks.end_centroids[1] = magnetics::centroid_dipole(model.end_magnets[1].spec,
                                                     ks.links.back() * model.end_magnets[1].mount);
    return ks;
}

std::vector<Vec3> contact_points(const ChainModel& model,
                                 const std::vector<RigidTransform>& links) {
    std::vector<Vec3> out;
    out.reserve(2 * (links.size() + 1));
    const double half = 0.5 * model.link_width;
    const Vec3 tip(0.0, model.link_length, 0.0);
    for (const auto& link : links) {
        out.push_back(link.apply(Vec3(-half, 0.0, 0.0)));
        out.push_back(link.apply(Vec3(half, 0.0, 0.0)));
    }
    out.push_back(links.back().apply(tip + Vec3(-half, 0.0, 0.0)));
    out.push_back(links.back().apply(tip + Vec3(half, 0.0, 0.0)));
    return out;
}

EnergyBreakdown total_energy(const ChainModel& model, const Config& q, const Environment& env,
                             const SimParams& params) {
    const KinematicState ks = forward_kinematics(model, q);
    EnergyBreakdown e;
    for (std::size_t i = 0; i < q.hinge_angles.size(); ++i) {
        const double d = q.hinge_angles[i] - model.hinge_rest_angles[i];
        e.elastic += 0.5 * model.hinge_stiffness[i] * d * d;
    }

    e.ipm_ipm = checked_pair_energy(ks.end_dipoles[0], ks.end_dipoles[1],
                                    params.singularity_guard, "L-IPM and R-IPM");
    if (!env.epm.empty()) {
        e.ipm_epm = checked_pair_energy(ks.end_dipoles[0], env.epm, params.singularity_guard,
                                        "L-IPM and EPM") +
                    checked_pair_energy(ks.end_dipoles[1], env.epm, params.singularity_guard,
                                        "R-IPM and EPM");
    }

    const double gap = (ks.end_centroids[0].position - ks.end_centroids[1].position).norm();
    if (gap < model.contact.overlap) {
        std::ostringstream os;
        os << "L-IPM and R-IPM overlap (centre distance " << gap << " m)";
        throw SingularityError(os.str());
    }
    if (gap < model.contact.distance) {
        const double pen = model.contact.distance - gap;
        e.contact = 0.5 * model.contact.stiffness * pen * pen;
    }

    if (env.plates) e.external += plate_energy(contact_points(model, ks.links), *env.plates);
    if (!env.gravity.isZero(0.0)) {
        const Vec3 mid(0.0, 0.5 * model.link_length, 0.0);
        for (const auto& link : ks.links) e.external -= model.link_mass * env.gravity.dot(link.apply(mid));
        for (int side = 0; side < 2; ++side) {
            const auto& mag = model.end_magnets[static_cast<std::size_t>(side)];
            const double mass = 7500.0 * mag.spec.volume();  // NdFeB density
            e.external -= mass * env.gravity.dot(ks.end_centroids[static_cast<std::size_t>(side)].position);
        }
    }
    return e;
}

Config displaced(const ChainModel& model, const Config& q, const Eigen::VectorXd& dq) {
    Config out = q;
    out.base.position += dq.segment<3>(0);
    const Vec3 omega = dq.segment<3>(3);
    if (!omega.isZero(0.0)) {
        const Mat3 r = exp_so3(omega);
        // rotate about the base origin, world-frame axis
        out.base.rotation = r * q.base.rotation;
    }
    const int h = model.hinge_count();
    for (int i = 0; i < h; ++i) out.hinge_angles[static_cast<std::size_t>(i)] += dq(6 + i);
    return out;
}

Eigen::VectorXd generalized_forces(const ChainModel& model, const Config& q,
                                   const Environment& env, const SimParams& params,
                                   double step_scale) {
    const int n = model.coordinate_count();
    Eigen::VectorXd f(n);
    Eigen::VectorXd dq = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        const double h = step_scale * (i < 3 ? kTranslationStep : kRotationStep);
        dq(i) = h;
        const double ep = total_energy(model, displaced(model, q, dq), env, params).total();
        dq(i) = -h;
        const double em = total_energy(model, displaced(model, q, dq), env, params).total();
        dq(i) = 0.0;
        f(i) = -(ep - em) / (2.0 * h);
    }
    return f;
}

namespace {

Config advance(const ChainModel& model, const Config& q, const Eigen::VectorXd& f,
               const SimParams& params, long step_index) {
    const double dt = params.timestep;
    Eigen::VectorXd dq(f.size());
    dq.segment<3>(0) = dt * model.mobility.base_translation * f.segment<3>(0);
    dq.segment<3>(3) = dt * model.mobility.base_rotation * f.segment<3>(3);
    dq.tail(f.size() - 6) = dt * model.mobility.hinge * f.tail(f.size() - 6);
    const double trans = dq.segment<3>(0).cwiseAbs().maxCoeff();
    const double rot = std::max(dq.segment<3>(3).cwiseAbs().maxCoeff(),
                                dq.tail(f.size() - 6).cwiseAbs().maxCoeff());
    double scale = 1.0;
    if (trans > params.max_step_translation) scale = params.max_step_translation / trans;
    if (rot > params.max_step_rotation) scale = std::min(scale, params.max_step_rotation / rot);
    if (scale < 1.0) dq *= scale;
    Config out = displaced(model, q, dq);
    out.base.rotation = reorthonormalize(out.base.rotation);
    for (double& a : out.hinge_angles) a = std::clamp(a, -model.hinge_limit, model.hinge_limit);

    bool finite = out.base.position.allFinite() && out.base.rotation.allFinite();
    for (double a : out.hinge_angles) finite = finite && std::isfinite(a);
    if (!finite) {
        throw DivergenceError("non-finite coordinates after step; reduce the timestep",
                              step_index);
    }
    return out;
}

} // namespace

void servo_plates(const ChainModel& model, const Config& q, SqueezePlates& plates) {
    const KinematicState ks = forward_kinematics(model, q);
    const auto pts = contact_points(model, ks.links);
    const Vec3 n = plates.normal.normalized();
    // The upper plate advances toward -n; mirror its projections.
    std::vector<double> low, high;
    for (const auto& p : pts) {
        low.push_back(n.dot(p));
        high.push_back(-n.dot(p));
    }
    plates.lower = plate_offset_for_force(low, plates.stiffness, plates.force);
    plates.upper = -plate_offset_for_force(high, plates.stiffness, plates.force);
}

Config step(const ChainModel& model, const Config& q, const Environment& env,
            const SimParams& params, long step_index) {
    if (env.plates) {
        Environment local = env;
        servo_plates(model, q, *local.plates);
        return advance(model, q, generalized_forces(model, q, local, params), params, step_index);
    }
    return advance(model, q, generalized_forces(model, q, env, params), params, step_index);
}

double end_gap(const ChainModel& model, const Config& q) {
    const KinematicState ks = forward_kinematics(model, q);
    return (ks.end_centroids[0].position - ks.end_centroids[1].position).norm();
}

Config transformed(const Config& q, const RigidTransform& t) {
    Config out = q;
    out.base = t * q.base;
    return out;
}

Environment transformed(const Environment& env, const RigidTransform& t) {
    Environment out = env;
    for (auto& d : out.epm) {
        d.position = t.apply(d.position);
        d.moment = t.rotation * d.moment;
    }
    if (out.plates) {
        const Vec3 n = out.plates->normal.normalized();
        const Vec3 n2 = t.rotation * n;
        const double shift = n2.dot(t.position);
        out.plates->normal = n2;
        out.plates->lower += shift;
        out.plates->upper += shift;
    }
    out.gravity = t.rotation * env.gravity;
    return out;
}

RelaxResult relax(const ChainModel& model, Config q, const Environment& env,
                  const SimParams& params,
                  const std::function<bool(const Config&, long)>& stop) {
    params.validate();
    Environment local = env;
    RelaxResult r;
    for (long k = 0;; ++k) {
        if (local.plates) servo_plates(model, q, *local.plates);
        const Eigen::VectorXd f = generalized_forces(model, q, local, params);
        r.residual = f.cwiseAbs().maxCoeff();
        if (r.residual <= params.convergence_threshold) {
            r.settled = true;
            r.steps = k;
            break;
        }
        if (k >= params.max_steps) {
            r.steps = k;
            break;
        }
        q = advance(model, q, f, params, k);
        if (stop && stop(q, k + 1)) {
            r.steps = k + 1;
            break;
        }
    }
    r.config = std::move(q);
    return r;
}

} // namespace mgor
