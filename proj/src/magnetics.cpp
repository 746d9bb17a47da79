#include "mgor/magnetics.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "mgor/errors.hpp"

namespace mgor::magnetics {

namespace {

constexpr double kPrefactor = kMu0 / (4.0 * std::numbers::pi);

Vec3 checked_separation(const Vec3& from, const Vec3& to) {
    const Vec3 r = to - from;
    const double d = r.norm();
    if (!(d >= kMinSeparation)) {
        std::ostringstream os;
        os << "dipole separation " << d << " m is below the singularity guard " << kMinSeparation
           << " m";
        throw SingularityError(os.str());
    }
    return r;
}

void require_positive(double value, const char* field) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw ValidationError(std::string("MagnetSpec.") + field + " must be positive and finite");
    }
}

} // namespace

MagnetSpec MagnetSpec::prism(double lx, double ly, double lz, double remanence, const Vec3& axis) {
    return {MagnetShape::RectangularPrism, Vec3(lx, ly, lz), remanence, axis};
}

MagnetSpec MagnetSpec::cylinder(double diameter, double height, double remanence,
                                const Vec3& axis) {
    return {MagnetShape::Cylinder, Vec3(diameter, height, 0.0), remanence, axis};
}

void MagnetSpec::validate() const {
    if (shape == MagnetShape::RectangularPrism) {
        require_positive(dimensions.x(), "dimensions[0]");
        require_positive(dimensions.y(), "dimensions[1]");
        require_positive(dimensions.z(), "dimensions[2]");
    } else {
        require_positive(dimensions.x(), "diameter");
        require_positive(dimensions.y(), "height");
    }
    // Zero remanence is a valid (unmagnetized) magnet; negative is not.
    if (!(remanence >= 0.0) || !std::isfinite(remanence)) {
        throw ValidationError("MagnetSpec.remanence must be non-negative and finite");
    }
    if (!magnetization_axis.allFinite() || std::abs(magnetization_axis.norm() - 1.0) > 1e-12) {
        throw ValidationError("MagnetSpec.magnetization_axis must have unit norm");
    }
}

double MagnetSpec::volume() const {
    if (shape == MagnetShape::RectangularPrism) return dimensions.prod();
    const double radius = 0.5 * dimensions.x();
    return std::numbers::pi * radius * radius * dimensions.y();
}

double MagnetSpec::largest_dimension() const {
    if (shape == MagnetShape::RectangularPrism) return dimensions.maxCoeff();
    return std::max(dimensions.x(), dimensions.y());
}

double moment_from_spec(const MagnetSpec& spec) {
    spec.validate();
    return spec.remanence * spec.volume() / kMu0;
}

Dipole centroid_dipole(const MagnetSpec& spec, const RigidTransform& pose) {
    const double m = moment_from_spec(spec);
    return {pose.position, pose.rotation * (m * spec.magnetization_axis)};
}

Vec3 dipole_field(const Dipole& source, const Vec3& point) {
    const Vec3 r = checked_separation(source.position, point);
    const double d = r.norm();
    const Vec3 rhat = r / d;
    return (kPrefactor / (d * d * d)) * (3.0 * source.moment.dot(rhat) * rhat - source.moment);
}

double pair_energy(const Dipole& a, const Dipole& b) {
    const Vec3 r = checked_separation(a.position, b.position);
    const double d = r.norm();
    const Vec3 rhat = r / d;
    const double ma_r = a.moment.dot(rhat);
    const double mb_r = b.moment.dot(rhat);
    return -(kPrefactor / (d * d * d)) * (3.0 * ma_r * mb_r - a.moment.dot(b.moment));
}

Wrench pair_wrench(const Dipole& source, const Dipole& target) {
    const Vec3 r = checked_separation(source.position, target.position);
    const double d = r.norm();
    const Vec3 rhat = r / d;
    const double ms_r = source.moment.dot(rhat);
    const double mt_r = target.moment.dot(rhat);
    const double d4 = d * d * d * d;

    Wrench w;
    w.force = (3.0 * kPrefactor / d4) *
              (ms_r * target.moment + mt_r * source.moment +
               source.moment.dot(target.moment) * rhat - 5.0 * ms_r * mt_r * rhat);
    w.torque = target.moment.cross(
        (kPrefactor / (d * d * d)) * (3.0 * ms_r * rhat - source.moment));
    return w;
}

double interaction_energy(std::span<const Dipole> a, std::span<const Dipole> b) {
    double total = 0.0;
    for (const auto& da : a) {
        for (const auto& db : b) total += pair_energy(da, db);
    }
    return total;
}

std::vector<Dipole> discretize_magnet(const MagnetSpec& spec, const RigidTransform& pose,
                                      int subdivisions) {
    if (subdivisions < 1) throw ValidationError("discretize_magnet: subdivisions must be >= 1");
    const Vec3 total = moment_from_spec(spec) * spec.magnetization_axis;
    const int k = subdivisions;

    std::vector<Dipole> out;
    if (spec.shape == MagnetShape::RectangularPrism) {
        out.reserve(static_cast<std::size_t>(k) * k * k);
        const Vec3 cell = spec.dimensions / k;
        const Vec3 body_moment = total / (static_cast<double>(k) * k * k);
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
                for (int l = 0; l < k; ++l) {
                    const Vec3 local =
                        (Vec3(i, j, l).array() + 0.5).matrix().cwiseProduct(cell) -
                        0.5 * spec.dimensions;
                    out.push_back({pose.apply(local), pose.rotation * body_moment});
                }
            }
        }
        return out;
    }

    const double radius = 0.5 * spec.dimensions.x();
    const double height = spec.dimensions.y();
    const double ring_width = radius / k;
    struct Sample {
        double r, phi, weight;
    };
    std::vector<Sample> disc;
    disc.push_back({0.0, 0.0, ring_width * ring_width});  // central disc area / π
    for (int j = 1; j < k; ++j) {
        const double inner = j * ring_width;
        const double outer = (j + 1) * ring_width;
        const int count = 6 * j;
        const double w = (outer * outer - inner * inner) / count;
        for (int s = 0; s < count; ++s) {
            disc.push_back({0.5 * (inner + outer), 2.0 * std::numbers::pi * s / count, w});
        }
    }
    double weight_sum = 0.0;
    for (const auto& s : disc) weight_sum += s.weight;

    out.reserve(disc.size() * static_cast<std::size_t>(k));
    for (int layer = 0; layer < k; ++layer) {
        const double z = (layer + 0.5) * height / k - 0.5 * height;
        for (const auto& s : disc) {
            const Vec3 local(s.r * std::cos(s.phi), s.r * std::sin(s.phi), z);
            const Vec3 m = total * (s.weight / (weight_sum * k));
            out.push_back({pose.apply(local), pose.rotation * m});
        }
    }
    return out;
}

} // namespace mgor::magnetics
