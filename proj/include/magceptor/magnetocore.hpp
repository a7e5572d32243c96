#pragma once

// Point-dipole magnetostatics in SI units.
//
// Every permanent magnet is reduced to one or more point dipoles. Fields are
// in tesla, moments in A·m², energies in joules, forces in newtons and
// torques in N·m. A uniform "key" field only ever produces torque; all
// translational forces come from dipole-dipole coupling.

#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "magceptor/error.hpp"

namespace magceptor {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kMu0 = 4.0e-7 * std::numbers::pi;
inline constexpr double kMu0Over4Pi = 1.0e-7;
// Minimum separation between an evaluation point and a dipole (m).
inline constexpr double kCoincidenceTol = 1e-9;

// Returns v / |v|; throws DomainError for zero or non-finite vectors.
Vec3 unit_vector(const Vec3& v);

// Proper rotation taking unit vector `from` onto unit vector `to`.
Mat3 rotation_between(const Vec3& from, const Vec3& to);

// Any unit vector perpendicular to `v`.
Vec3 any_perpendicular(const Vec3& v);

enum class MagnetShape { kCylinder, kBlock };

std::string_view to_string(MagnetShape shape);
MagnetShape magnet_shape_from_string(std::string_view name);

// Geometry and remanence of a uniformly magnetized permanent magnet.
// Cylinder dims are {radius, length}; block dims are the three body-frame
// edges {a, b, c}. The easy axis is the body z axis (cylinder axis / edge c).
struct MagnetSpec {
  MagnetShape shape = MagnetShape::kCylinder;
  std::vector<double> dims;
  double remanence = 0.0;  // T
  Vec3 easy_axis = Vec3::UnitZ();

  void validate() const;
  double volume() const;    // m³
  double diameter() const;  // cylinder: 2r, block: largest transverse edge
  MagnetSpec scaled(double s) const;

  bool operator==(const MagnetSpec&) const = default;
};

struct SubDipole {
  Vec3 offset = Vec3::Zero();  // body frame, m
  double fraction = 1.0;

  bool operator==(const SubDipole&) const = default;
};

// A magnet placed in the world: pose, total moment, and its sub-dipole
// discretization (a single centered dipole unless refined).
struct MagnetSource {
  Vec3 position = Vec3::Zero();
  Mat3 orientation = Mat3::Identity();  // body -> world
  Vec3 moment = Vec3::Zero();           // world frame, A·m²
  Vec3 axis = Vec3::UnitZ();            // easy axis as placed, world frame
  std::vector<SubDipole> parts{SubDipole{}};
  // The physical magnet this source was built from, if any.
  std::optional<MagnetSpec> spec;
  int discretization = 1;

  static MagnetSource point(const Vec3& position, const Vec3& moment);

  Vec3 part_position(const SubDipole& part) const { return position + orientation * part.offset; }
  double volume() const { return spec ? spec->volume() : 0.0; }
  double diameter() const { return spec ? spec->diameter() : 0.0; }

  MagnetSource translated(const Vec3& delta) const;
  MagnetSource with_moment(const Vec3& m) const;
  // Rigid transform about the world origin: positions, moment and pose rotate.
  MagnetSource transformed(const Mat3& rotation) const;
  // Geometric scaling about the world origin; moment and volume scale by s³.
  MagnetSource scaled(double s) const;

  void validate() const;

  bool operator==(const MagnetSource&) const = default;
};

// Standard m = B_r V / μ0 reduction, directed along the easy axis.
Vec3 moment_from_spec(const MagnetSpec& spec);

// Places `spec` at `position` with its easy axis along `axis_world`.
// `discretization` n > 1 fills the magnet envelope with a uniform n×n×n
// sub-dipole lattice (points outside a cylinder's circular section dropped).
MagnetSource make_source(const MagnetSpec& spec, const Vec3& position, const Vec3& axis_world,
                         int discretization = 1);

// Field of a single point dipole `m` at `at`, evaluated at `point`.
Vec3 point_dipole_field(const Vec3& m, const Vec3& at, const Vec3& point);

Vec3 dipole_field_at(const MagnetSource& source, const Vec3& point);

// Interaction energy U = -m_b · B_a(p_b), summed over sub-dipoles.
double pair_energy(const MagnetSource& a, const MagnetSource& b);

// Force exerted by `a` on `b`.
Vec3 pair_force(const MagnetSource& a, const MagnetSource& b);

// A uniform broadcast field acting as an address.
struct FieldKey {
  std::string label;
  Vec3 direction = Vec3::UnitX();  // unit
  double magnitude = 0.0;          // T

  Vec3 field() const { return magnitude * direction; }
  void validate() const;

  bool operator==(const FieldKey&) const = default;
};

// Parses a signed-axis label such as "+x", "-z" or "+x-z" into a unit
// direction. Throws ParseError on anything else.
Vec3 direction_from_label(std::string_view label);
FieldKey make_key(std::string label, double magnitude);
FieldKey make_key(std::string label, const Vec3& direction, double magnitude);

double key_energy(const MagnetSource& source, const FieldKey& key);
Vec3 key_torque(const MagnetSource& source, const FieldKey& key);

// Total energy: every unordered pair plus every key term.
double assembly_energy(std::span<const MagnetSource> sources, const FieldKey& key);
double assembly_energy(std::span<const MagnetSource> sources);

// Net force on sources[index] from all other sources (the key adds none).
Vec3 assembly_force_on(std::span<const MagnetSource> sources, std::size_t index);

}  // namespace magceptor
