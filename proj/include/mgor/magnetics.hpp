#pragma once

#include <numbers>
#include <span>
#include <vector>

#include "mgor/geometry.hpp"

namespace mgor::magnetics {

inline constexpr double kMu0 = 4.0e-7 * std::numbers::pi;  // T·m/A
inline constexpr double kMinSeparation = 1e-6;              // m

enum class MagnetShape { RectangularPrism, Cylinder };

/// Uniformly magnetized permanent magnet in its own body frame.
///
/// Prisms use `dimensions` as edge lengths along body x, y, z. Cylinders use
/// `dimensions.x()` as the diameter and `dimensions.y()` as the height, with the
/// cylinder axis along body z. `magnetization_axis` is a body-frame unit vector.
struct MagnetSpec {
    MagnetShape shape = MagnetShape::RectangularPrism;
    Vec3 dimensions = Vec3::Zero();
    double remanence = 1.3;  // T; sintered NdFeB, see README
    Vec3 magnetization_axis = Vec3::UnitZ();

    static MagnetSpec prism(double lx, double ly, double lz, double remanence = 1.3,
                            const Vec3& axis = Vec3::UnitZ());
    static MagnetSpec cylinder(double diameter, double height, double remanence = 1.3,
                               const Vec3& axis = Vec3::UnitZ());

    /// Throws ValidationError naming the offending field.
    void validate() const;
    double volume() const;
    double largest_dimension() const;
};

struct Dipole {
    Vec3 position = Vec3::Zero();  // m, world frame
    Vec3 moment = Vec3::Zero();    // A·m²
};

struct Wrench {
    Vec3 force = Vec3::Zero();   // N
    Vec3 torque = Vec3::Zero();  // N·m about the target dipole's position
};

/// |m| = Br·V/μ0.
double moment_from_spec(const MagnetSpec& spec);

/// World-frame dipole at the magnet centroid for a body pose.
Dipole centroid_dipole(const MagnetSpec& spec, const RigidTransform& pose);

Vec3 dipole_field(const Dipole& source, const Vec3& point);

/// E = -m_b · B_a(x_b). Symmetric in its arguments.
double pair_energy(const Dipole& a, const Dipole& b);

/// Force and torque exerted by `source` on `target`.
Wrench pair_wrench(const Dipole& source, const Dipole& target);

/// Sum of pair energies between two dipole sets (every a with every b).
double interaction_energy(std::span<const Dipole> a, std::span<const Dipole> b);

/// Split a magnet into sub-dipoles whose moments sum to the total moment.
///
/// Prisms give k³ cell-centred samples. Cylinders give k axial layers, each with
/// a central disc sample plus rings 1..k-1 carrying 6·j samples, weighted by
/// annulus area.
std::vector<Dipole> discretize_magnet(const MagnetSpec& spec, const RigidTransform& pose,
                                      int subdivisions);

} // namespace mgor::magnetics
