#include "mgor/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "mgor/errors.hpp"

namespace mgor {

ChainModel calibrated_model() {
    ChainModel m = ChainModel::mgor(kCalibratedStiffness);
    m.mobility.hinge = 2.0;
    // The stomach wall holds the base link far more firmly than the hinges fold.
    m.mobility.base_translation = 1e-6;
    m.mobility.base_rotation = 1e-4;
    return m;
}

ChainModel with_cell_stiffness(ChainModel model, double stiffness) {
    if (!(stiffness > 0.0) || !std::isfinite(stiffness)) {
        throw ValidationError("hinge stiffness must be positive and finite");
    }
    const double scale = stiffness / cell_stiffness(model);
    for (double& k : model.hinge_stiffness) k *= scale;
    return model;
}

double cell_stiffness(const ChainModel& model) {
    const auto cells = model.cell_hinges();
    const int h = cells.empty() ? 0 : cells.front();
    return model.hinge_stiffness.at(static_cast<std::size_t>(h));
}

namespace {

double family_gap(const ChainModel& model, double angle) {
    return end_gap(model, triangle_config(model, angle));
}

// Cell angle at which the family reaches its closest approach.
double family_closest_angle(const ChainModel& model) {
    const auto r = boost::math::tools::brent_find_minima(
        [&](double a) { return family_gap(model, a); }, 0.5 * std::numbers::pi,
        model.hinge_limit, 40);
    return r.first;
}

} // namespace

Config snap_family_config(const ChainModel& model, double gap) {
    const double closest = family_closest_angle(model);
    const double open = family_gap(model, 0.0);
    if (!(gap > family_gap(model, closest)) || gap > open) {
        std::ostringstream os;
        os << "gap " << gap << " m is outside the snap family range";
        throw ValidationError(os.str());
    }
    boost::uintmax_t iters = 100;
    const auto r = boost::math::tools::toms748_solve(
        [&](double a) { return family_gap(model, a) - gap; }, 0.0, closest,
        boost::math::tools::eps_tolerance<double>(40), iters);
    return triangle_config(model, 0.5 * (r.first + r.second));
}

double snap_family_min_gap(const ChainModel& model) {
    return family_gap(model, family_closest_angle(model));
}

bool snaps_from(const ChainModel& model, double gap, const SimParams& params,
                const SnapOptions& options) {
    const Config q0 = snap_family_config(model, gap);
    SimParams p = params;
    p.max_steps = options.max_steps;
    bool locked = false;
    bool opened = false;
    const auto r = relax(model, q0, Environment{}, p, [&](const Config& q, long) {
        const double g = end_gap(model, q);
        if (g <= model.contact.distance) locked = true;
        if (g >= gap + options.open_margin) opened = true;
        return locked || opened;
    });
    if (locked) return classify(model, r.config) == StateLabel::Gamma;
    if (opened) return false;
    return classify(model, r.config) == StateLabel::Gamma;
}

SnapResult self_assembly_gap(const ChainModel& model, double stiffness, const SimParams& params,
                             const SnapOptions& options) {
    const ChainModel m = with_cell_stiffness(model, stiffness);
    double lo = std::max({options.min_gap, m.contact.distance + options.tolerance,
                          snap_family_min_gap(m) + options.tolerance});
    double hi = options.max_gap;
    SnapResult out;
    ++out.relaxations;
    if (!snaps_from(m, lo, params, options)) {
        std::ostringstream os;
        os << "no snap even from " << lo * 1e3 << " mm";
        out.diagnostic = os.str();
        return out;
    }
    ++out.relaxations;
    if (snaps_from(m, hi, params, options)) {
        std::ostringstream os;
        os << "snaps from the upper search bound " << hi * 1e3 << " mm";
        out.diagnostic = os.str();
        out.gap = hi;
        return out;
    }
    while (hi - lo > options.tolerance) {
        const double mid = 0.5 * (lo + hi);
        ++out.relaxations;
        (snaps_from(m, mid, params, options) ? lo : hi) = mid;
    }
    out.gap = lo;
    return out;
}

CalibrationResult calibrate_stiffness(const ChainModel& model, double target_gap,
                                      const SimParams& params, const CalibrationOptions& options) {
    if (!(target_gap > 0.5e-3 && target_gap < 20e-3)) {
        throw ValidationError("calibration target gap must lie in (0.5, 20) mm");
    }
    CalibrationResult out;
    auto gap_at = [&](double k) { return self_assembly_gap(model, k, params, options.snap).gap; };
    auto done = [&](double g) { return std::abs(g - target_gap) <= options.tolerance; };

    double k = cell_stiffness(model);
    double g = gap_at(k);
    if (done(g)) {
        out = {k, g, 0, true};
        return out;
    }

    // Bracket in log-stiffness: the gap shrinks as stiffness grows.
    double k_soft = k, g_soft = g, k_stiff = k, g_stiff = g;
    int it = 0;
    while (g_soft < target_gap || g_stiff > target_gap) {
        if (++it > options.max_iterations) break;
        if (g_soft < target_gap) {
            k_soft /= 2.0;
            g_soft = gap_at(k_soft);
            if (done(g_soft)) return {k_soft, g_soft, it, true};
        } else {
            k_stiff *= 2.0;
            g_stiff = gap_at(k_stiff);
            if (done(g_stiff)) return {k_stiff, g_stiff, it, true};
        }
    }
    while (it < options.max_iterations) {
        ++it;
        const double mid = std::sqrt(k_soft * k_stiff);
        const double gm = gap_at(mid);
        if (done(gm)) return {mid, gm, it, true};
        if (gm > target_gap) {
            k_soft = mid;
            g_soft = gm;
        } else {
            k_stiff = mid;
            g_stiff = gm;
        }
    }
    std::ostringstream os;
    os << "calibration did not converge: stiffness bracket [" << k_soft << ", " << k_stiff
       << "] N·m/rad gives gaps [" << g_soft * 1e3 << ", " << g_stiff * 1e3 << "] mm";
    throw std::runtime_error(os.str());
}

Config locked_gamma(const ChainModel& model, const SimParams& params) {
    const double start = std::max(model.contact.distance + 0.5e-3, snap_family_min_gap(model) + 0.5e-3);
    SimParams p = params;
    p.convergence_threshold = std::max(p.convergence_threshold, 1e-7);
    return relax(model, snap_family_config(model, start), Environment{}, p).config;
}

Deflection deflection_between(const ChainModel& model, const Config& a, const Config& b) {
    Deflection d;
    for (std::size_t i = 0; i < a.hinge_angles.size(); ++i) {
        d.max_hinge_change = std::max(d.max_hinge_change, std::abs(a.hinge_angles[i] - b.hinge_angles[i]));
    }
    const auto ka = forward_kinematics(model, a);
    const auto kb = forward_kinematics(model, b);
    const RigidTransform ia = ka.links.front().inverse();
    const RigidTransform ib = kb.links.front().inverse();
    const auto pa = contact_points(model, ka.links);
    const auto pb = contact_points(model, kb.links);
    for (std::size_t i = 0; i < pa.size(); ++i) {
        d.max_link_displacement =
            std::max(d.max_link_displacement, (ia.apply(pa[i]) - ib.apply(pb[i])).norm());
    }
    return d;
}

SqueezeReport squeeze_test(const ChainModel& model, const Config& q_gamma, double force,
                           const Vec3& axis, const SimParams& params,
                           const SqueezeOptions& options) {
    if (!(force >= 0.0) || force > 20.0) throw ValidationError("squeeze force must lie in [0, 20] N");
    if (!(axis.norm() > 0.0) || !axis.allFinite()) throw ValidationError("squeeze axis is zero");
    if (classify(model, q_gamma) != StateLabel::Gamma) {
        throw ValidationError("squeeze_test expects a Gamma configuration");
    }
    SimParams p = params;
    p.max_steps = options.max_steps;
    p.convergence_threshold = options.convergence_threshold;

    auto run = [&](const char* phase, const Config& q, const Environment& env) {
        try {
            return relax(model, q, env, p).config;
        } catch (const DivergenceError& e) {
            throw ScenarioError(phase, std::string(e.what()) + " at step " + std::to_string(e.step()));
        }
    };

    SqueezeReport rep;
    rep.force = force;
    rep.axis = axis.normalized();
    const Config before = run("load", q_gamma, Environment{});
    const double gap_before = end_gap(model, before);

    Config loaded = before;
    if (force > 0.0) {
        Environment env;
        env.plates = SqueezePlates{rep.axis, force, options.plate_stiffness};
        loaded = run("hold", before, env);
    }
    rep.loaded = deflection_between(model, before, loaded);
    rep.loaded_label = classify(model, loaded);

    const Config after = force > 0.0 ? run("release", loaded, Environment{}) : loaded;
    rep.residual = deflection_between(model, before, after);
    rep.gap_change = std::abs(end_gap(model, after) - gap_before);
    rep.released_label = classify(model, after);
    rep.recovered = rep.residual.max_hinge_change < 1e-2 && rep.gap_change < 0.5e-3;
    return rep;
}

Config folded_start(const ChainModel& model) { return accordion_config(model, 2.7); }

UnfoldResult unfold_scenario(const ChainModel& model, const Config& start, const SimParams& params,
                             double sample_interval) {
    const long every = std::max(1L, std::lround(sample_interval / params.timestep));
    UnfoldResult out;
    out.times.push_back(0.0);
    out.trajectory.push_back(start);
    const auto r = relax(model, start, Environment{}, params, [&](const Config& q, long k) {
        if (k % every == 0) {
            out.times.push_back(static_cast<double>(k) * params.timestep);
            out.trajectory.push_back(q);
        }
        return false;
    });
    if (out.trajectory.size() == 1 || out.times.back() != static_cast<double>(r.steps) * params.timestep) {
        out.times.push_back(static_cast<double>(r.steps) * params.timestep);
        out.trajectory.push_back(r.config);
    }
    out.steps = r.steps;
    out.settled = r.settled;
    out.final_label = classify(model, r.config);
    return out;
}

} // namespace mgor
