#include "mgor/states.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mgor/errors.hpp"

namespace mgor {

std::string_view to_string(StateLabel label) {
    switch (label) {
        case StateLabel::Alpha: return "Alpha";
        case StateLabel::Beta: return "Beta";
        case StateLabel::Gamma: return "Gamma";
        case StateLabel::Transitional: return "Transitional";
    }
    return "Transitional";
}

StateLabel state_label_from_string(std::string_view name) {
    for (auto l : {StateLabel::Alpha, StateLabel::Beta, StateLabel::Gamma, StateLabel::Transitional}) {
        if (to_string(l) == name) return l;
    }
    throw ValidationError("unknown state label '" + std::string(name) + "'");
}

double end_alignment(const ChainModel& model, const Config& q) {
    const KinematicState ks = forward_kinematics(model, q);
    const Vec3 a = ks.end_centroids[0].moment;
    const Vec3 b = ks.end_centroids[1].moment;
    if (a.norm() == 0.0 || b.norm() == 0.0) return 0.0;
    return a.normalized().dot(b.normalized());
}

StateLabel classify(const ChainModel& model, const Config& q, const StateThresholds& t) {
    const KinematicState ks = forward_kinematics(model, q);
    const auto& angles = q.hinge_angles;
    const double gap = (ks.end_centroids[0].position - ks.end_centroids[1].position).norm();

    double mean = 0.0;
    for (double a : angles) mean += std::abs(a);
    mean /= static_cast<double>(angles.size());
    if (mean < t.beta_mean_angle && gap > t.beta_min_gap_fraction * model.chain_length()) {
        return StateLabel::Beta;
    }

    const Vec3 a = ks.end_centroids[0].moment;
    const Vec3 b = ks.end_centroids[1].moment;
    const bool magnetized = a.norm() > 0.0 && b.norm() > 0.0;
    if (magnetized && gap < t.lock_gap &&
        a.normalized().dot(b.normalized()) < t.lock_alignment) {
        return StateLabel::Gamma;
    }

    bool accordion = true;
    for (std::size_t i = 0; i < angles.size() && accordion; ++i) {
        if (std::abs(angles[i]) <= t.alpha_min_angle) accordion = false;
        if (i > 0 && angles[i] * angles[i - 1] >= 0.0) accordion = false;
    }
    if (accordion) return StateLabel::Alpha;
    return StateLabel::Transitional;
}

Config triangle_config(const ChainModel& model, double cell_angle, double notch_angle) {
    Config q = Config::flat(model);
    for (int h : model.cell_hinges()) q.hinge_angles[static_cast<std::size_t>(h)] = cell_angle;
    for (int h : model.notch_hinges()) q.hinge_angles[static_cast<std::size_t>(h)] = notch_angle;
    return q;
}

Config accordion_config(const ChainModel& model, double angle) {
    Config q = Config::flat(model);
    for (std::size_t i = 0; i < q.hinge_angles.size(); ++i) {
        q.hinge_angles[i] = (i % 2 == 0) ? angle : -angle;
    }
    return q;
}

void LandscapeSlice::validate(const ChainModel& model) const {
    validate_config(model, base);
    for (const LandscapeAxis* axis : {&x, &y}) {
        if (axis->resolution < 8) throw ValidationError("landscape resolution must be >= 8 per axis");
        if (axis->hinges.empty()) throw ValidationError("landscape axis needs at least one hinge");
        if (!(axis->min < axis->max)) throw ValidationError("landscape axis range is empty");
        if (axis->min < -model.hinge_limit || axis->max > model.hinge_limit) {
            throw ValidationError("landscape axis range exceeds the hinge limit");
        }
        for (int h : axis->hinges) {
            if (h < 0 || h >= model.hinge_count()) throw ValidationError("landscape hinge index out of range");
        }
    }
    for (int h : x.hinges) {
        if (std::find(y.hinges.begin(), y.hinges.end(), h) != y.hinges.end()) {
            throw ValidationError("a hinge cannot belong to both landscape axes");
        }
    }
}

namespace {

double axis_value(const LandscapeAxis& a, int i) {
    return a.min + (a.max - a.min) * static_cast<double>(i) / static_cast<double>(a.resolution - 1);
}

} // namespace

double LandscapeSlice::x_value(int i) const { return axis_value(x, i); }
double LandscapeSlice::y_value(int j) const { return axis_value(y, j); }

Config LandscapeSlice::config_at(int i, int j) const {
    Config q = base;
    for (int h : x.hinges) q.hinge_angles[static_cast<std::size_t>(h)] = x_value(i);
    for (int h : y.hinges) q.hinge_angles[static_cast<std::size_t>(h)] = y_value(j);
    return q;
}

LandscapeGrid energy_landscape(const ChainModel& model, const LandscapeSlice& slice,
                               const Environment& env, const SimParams& params) {
    slice.validate(model);
    LandscapeGrid g;
    g.slice = slice;
    g.nx = slice.x.resolution;
    g.ny = slice.y.resolution;
    const auto cells = static_cast<std::size_t>(g.nx * g.ny);
    g.energy.assign(cells, std::numeric_limits<double>::quiet_NaN());
    g.singular.assign(cells, false);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const auto idx = static_cast<std::size_t>(j * g.nx + i);
            try {
                g.energy[idx] = total_energy(model, slice.config_at(i, j), env, params).total();
            } catch (const SingularityError&) {
                g.singular[idx] = true;
            }
        }
    }
    return g;
}

std::vector<LocalMinimum> find_local_minima(const std::vector<double>& energy, int nx, int ny) {
    if (nx <= 0 || ny <= 0 || energy.size() != static_cast<std::size_t>(nx * ny)) {
        throw ValidationError("find_local_minima: grid is empty or has the wrong size");
    }
    auto value = [&](int i, int j) {
        const double e = energy[static_cast<std::size_t>(j * nx + i)];
        return std::isnan(e) ? std::numeric_limits<double>::infinity() : e;
    };
    std::vector<LocalMinimum> out;
    for (int j = 1; j + 1 < ny; ++j) {
        for (int i = 1; i + 1 < nx; ++i) {
            const double e = value(i, j);
            if (!std::isfinite(e)) continue;
            bool lowest = true;
            for (int dj = -1; dj <= 1 && lowest; ++dj) {
                for (int di = -1; di <= 1 && lowest; ++di) {
                    if ((di != 0 || dj != 0) && !(e < value(i + di, j + dj))) lowest = false;
                }
            }
            if (lowest) out.push_back({i, j, e, StateLabel::Transitional});
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const LocalMinimum& a, const LocalMinimum& b) { return a.energy < b.energy; });
    return out;
}

std::vector<LocalMinimum> find_local_minima(const LandscapeGrid& grid, const ChainModel& model,
                                            const StateThresholds& t) {
    auto out = find_local_minima(grid.energy, grid.nx, grid.ny);
    for (auto& m : out) m.label = classify(model, grid.slice.config_at(m.i, m.j), t);
    return out;
}

void write_landscape_csv(std::ostream& os, const LandscapeGrid& grid) {
    auto hinge_list = [](const LandscapeAxis& a) {
        std::string s;
        for (std::size_t k = 0; k < a.hinges.size(); ++k) {
            if (k) s += ' ';
            s += std::to_string(a.hinges[k]);
        }
        return s;
    };
    const auto& s = grid.slice;
    os.precision(17);
    os << "# x_hinges=" << hinge_list(s.x) << " x_min=" << s.x.min << " x_max=" << s.x.max
       << " nx=" << grid.nx << '\n';
    os << "# y_hinges=" << hinge_list(s.y) << " y_min=" << s.y.min << " y_max=" << s.y.max
       << " ny=" << grid.ny << '\n';
    os << "i,j,x_rad,y_rad,energy_j,singular\n";
    for (int j = 0; j < grid.ny; ++j) {
        for (int i = 0; i < grid.nx; ++i) {
            os << i << ',' << j << ',' << s.x_value(i) << ',' << s.y_value(j) << ',';
            if (grid.is_singular(i, j)) {
                os << ",1\n";
            } else {
                os << grid.at(i, j) << ",0\n";
            }
        }
    }
}

std::string_view to_string(PairAlignment a) {
    switch (a) {
        case PairAlignment::Attracting: return "attracting";
        case PairAlignment::InPlaneRepulsive: return "in_plane_repulsive";
        case PairAlignment::Neutral: return "neutral";
    }
    return "neutral";
}

PairAlignment pair_alignment(const Dipole& a, const Dipole& b, double epsilon) {
    const magnetics::Wrench w = magnetics::pair_wrench(a, b);
    const Vec3 axis = (b.position - a.position).normalized();
    const double radial = w.force.dot(axis);
    if (radial < -epsilon) return PairAlignment::Attracting;
    if (radial > epsilon) return PairAlignment::InPlaneRepulsive;
    return PairAlignment::Neutral;
}

} // namespace mgor
