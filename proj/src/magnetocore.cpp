#include "magceptor/magnetocore.hpp"

#include <cmath>
#include <string>

namespace magceptor {

Vec3 unit_vector(const Vec3& v) {
  const double n = v.norm();
  if (!std::isfinite(n) || n == 0.0) {
    throw DomainError("cannot normalize a zero or non-finite vector");
  }
  return v / n;
}

Vec3 any_perpendicular(const Vec3& v) {
  const Vec3 u = unit_vector(v);
  const Vec3 helper = std::abs(u.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return unit_vector(u.cross(helper));
}

Mat3 rotation_between(const Vec3& from, const Vec3& to) {
  const Vec3 a = unit_vector(from);
  const Vec3 b = unit_vector(to);
  const double c = a.dot(b);
  if (c < -1.0 + 1e-12) {
    // 180° turn about any axis perpendicular to `a`.
    return Eigen::AngleAxisd(std::numbers::pi, any_perpendicular(a)).toRotationMatrix();
  }
  return Eigen::Quaterniond::FromTwoVectors(a, b).toRotationMatrix();
}

std::string_view to_string(MagnetShape shape) {
  return shape == MagnetShape::kCylinder ? "cylinder" : "block";
}

MagnetShape magnet_shape_from_string(std::string_view name) {
  if (name == "cylinder") return MagnetShape::kCylinder;
  if (name == "block") return MagnetShape::kBlock;
  throw ParseError("unknown magnet shape '" + std::string(name) + "'");
}

void MagnetSpec::validate() const {
  const std::size_t want = shape == MagnetShape::kCylinder ? 2 : 3;
  if (dims.size() != want) {
    throw DomainError("magnet spec: " + std::string(to_string(shape)) + " needs " +
                      std::to_string(want) + " dimensions");
  }
  for (double d : dims) {
    if (!(d > 0.0) || !std::isfinite(d)) throw DomainError("magnet spec: dimensions must be > 0");
  }
  if (!(remanence > 0.0) || !std::isfinite(remanence)) {
    throw DomainError("magnet spec: remanence must be > 0");
  }
  if (std::abs(easy_axis.norm() - 1.0) > 1e-9) {
    throw DomainError("magnet spec: easy axis must be unit-norm");
  }
}

double MagnetSpec::volume() const {
  validate();
  if (shape == MagnetShape::kCylinder) return std::numbers::pi * dims[0] * dims[0] * dims[1];
  return dims[0] * dims[1] * dims[2];
}

double MagnetSpec::diameter() const {
  validate();
  if (shape == MagnetShape::kCylinder) return 2.0 * dims[0];
  return std::max(dims[0], dims[1]);
}

MagnetSpec MagnetSpec::scaled(double s) const {
  MagnetSpec out = *this;
  for (double& d : out.dims) d *= s;
  return out;
}

Vec3 moment_from_spec(const MagnetSpec& spec) {
  return spec.remanence * spec.volume() / kMu0 * spec.easy_axis;
}

MagnetSource MagnetSource::point(const Vec3& position, const Vec3& moment) {
  MagnetSource s;
  s.position = position;
  s.moment = moment;
  if (moment.norm() > 0.0) s.axis = moment.normalized();
  return s;
}

MagnetSource MagnetSource::translated(const Vec3& delta) const {
  MagnetSource out = *this;
  out.position += delta;
  return out;
}

MagnetSource MagnetSource::with_moment(const Vec3& m) const {
  MagnetSource out = *this;
  out.moment = m;
  return out;
}

MagnetSource MagnetSource::transformed(const Mat3& rotation) const {
  MagnetSource out = *this;
  out.position = rotation * position;
  out.orientation = rotation * orientation;
  out.moment = rotation * moment;
  out.axis = rotation * axis;
  return out;
}

MagnetSource MagnetSource::scaled(double s) const {
  MagnetSource out = *this;
  out.position *= s;
  out.moment *= s * s * s;
  for (auto& p : out.parts) p.offset *= s;
  if (out.spec) out.spec = out.spec->scaled(s);
  return out;
}

void MagnetSource::validate() const {
  if (parts.empty()) throw DomainError("magnet source has no sub-dipoles");
  double total = 0.0;
  for (const auto& p : parts) total += p.fraction;
  if (std::abs(total - 1.0) > 1e-9) {
    throw DomainError("sub-dipole moment fractions must sum to 1");
  }
  if (!position.allFinite() || !moment.allFinite()) {
    throw DomainError("magnet source has non-finite pose or moment");
  }
}

MagnetSource make_source(const MagnetSpec& spec, const Vec3& position, const Vec3& axis_world,
                         int discretization) {
  spec.validate();
  if (discretization < 1) throw DomainError("discretization must be >= 1");
  MagnetSource s;
  s.position = position;
  s.orientation = rotation_between(Vec3::UnitZ(), axis_world);
  s.axis = unit_vector(axis_world);
  s.moment = moment_from_spec(spec).norm() * s.axis;
  s.spec = spec;
  s.discretization = discretization;
  if (discretization == 1) return s;

  // Cell-centered grid over the bounding box of the envelope.
  const int n = discretization;
  Vec3 half;
  if (spec.shape == MagnetShape::kCylinder) {
    half = Vec3(spec.dims[0], spec.dims[0], 0.5 * spec.dims[1]);
  } else {
    half = Vec3(0.5 * spec.dims[0], 0.5 * spec.dims[1], 0.5 * spec.dims[2]);
  }
  std::vector<Vec3> offsets;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        const Vec3 t((i + 0.5) / n * 2.0 - 1.0, (j + 0.5) / n * 2.0 - 1.0, (k + 0.5) / n * 2.0 - 1.0);
        const Vec3 off = t.cwiseProduct(half);
        if (spec.shape == MagnetShape::kCylinder &&
            off.head<2>().squaredNorm() > spec.dims[0] * spec.dims[0]) {
          continue;
        }
        offsets.push_back(off);
      }
    }
  }
  s.parts.clear();
  const double f = 1.0 / static_cast<double>(offsets.size());
  for (const auto& off : offsets) s.parts.push_back(SubDipole{off, f});
  return s;
}

Vec3 point_dipole_field(const Vec3& m, const Vec3& at, const Vec3& point) {
  const Vec3 r = point - at;
  const double d = r.norm();
  if (d <= kCoincidenceTol) {
    throw SingularityError("field evaluated within 1e-9 m of a dipole");
  }
  const Vec3 u = r / d;
  return kMu0Over4Pi / (d * d * d) * (3.0 * m.dot(u) * u - m);
}

Vec3 dipole_field_at(const MagnetSource& source, const Vec3& point) {
  Vec3 b = Vec3::Zero();
  for (const auto& p : source.parts) {
    b += point_dipole_field(p.fraction * source.moment, source.part_position(p), point);
  }
  return b;
}

namespace {

// Energy and force (on b) for a pair of point dipoles.
double point_pair_energy(const Vec3& ma, const Vec3& pa, const Vec3& mb, const Vec3& pb) {
  const Vec3 r = pb - pa;
  const double d = r.norm();
  if (d <= kCoincidenceTol) throw SingularityError("coincident dipoles");
  const Vec3 u = r / d;
  return kMu0Over4Pi / (d * d * d) * (ma.dot(mb) - 3.0 * ma.dot(u) * mb.dot(u));
}

Vec3 point_pair_force(const Vec3& ma, const Vec3& pa, const Vec3& mb, const Vec3& pb) {
  const Vec3 r = pb - pa;
  const double d = r.norm();
  if (d <= kCoincidenceTol) throw SingularityError("coincident dipoles");
  const Vec3 u = r / d;
  const double au = ma.dot(u);
  const double bu = mb.dot(u);
  return 3.0 * kMu0Over4Pi / (d * d * d * d) *
         (au * mb + bu * ma + ma.dot(mb) * u - 5.0 * au * bu * u);
}

}  // namespace

double pair_energy(const MagnetSource& a, const MagnetSource& b) {
  double u = 0.0;
  for (const auto& pa : a.parts) {
    for (const auto& pb : b.parts) {
      u += point_pair_energy(pa.fraction * a.moment, a.part_position(pa), pb.fraction * b.moment,
                             b.part_position(pb));
    }
  }
  return u;
}

Vec3 pair_force(const MagnetSource& a, const MagnetSource& b) {
  Vec3 f = Vec3::Zero();
  for (const auto& pa : a.parts) {
    for (const auto& pb : b.parts) {
      f += point_pair_force(pa.fraction * a.moment, a.part_position(pa), pb.fraction * b.moment,
                            b.part_position(pb));
    }
  }
  return f;
}

void FieldKey::validate() const {
  if (!(magnitude >= 0.0) || !std::isfinite(magnitude)) {
    throw DomainError("field key '" + label + "': magnitude must be >= 0");
  }
  if (std::abs(direction.norm() - 1.0) > 1e-9) {
    throw DomainError("field key '" + label + "': direction must be unit-norm");
  }
}

Vec3 direction_from_label(std::string_view label) {
  Vec3 d = Vec3::Zero();
  std::size_t i = 0;
  if (label.empty()) throw ParseError("empty key label");
  while (i < label.size()) {
    if (i + 1 >= label.size()) throw ParseError("bad key label '" + std::string(label) + "'");
    const char sign = label[i];
    const char axis = label[i + 1];
    double s = 0.0;
    if (sign == '+') s = 1.0;
    else if (sign == '-') s = -1.0;
    else throw ParseError("bad key label '" + std::string(label) + "'");
    int k = -1;
    if (axis == 'x') k = 0;
    else if (axis == 'y') k = 1;
    else if (axis == 'z') k = 2;
    else throw ParseError("bad key label '" + std::string(label) + "'");
    if (d[k] != 0.0) throw ParseError("repeated axis in key label '" + std::string(label) + "'");
    d[k] = s;
    i += 2;
  }
  return d.normalized();
}

FieldKey make_key(std::string label, double magnitude) {
  const Vec3 d = direction_from_label(label);
  return make_key(std::move(label), d, magnitude);
}

FieldKey make_key(std::string label, const Vec3& direction, double magnitude) {
  FieldKey k{std::move(label), unit_vector(direction), magnitude};
  k.validate();
  return k;
}

double key_energy(const MagnetSource& source, const FieldKey& key) {
  return -source.moment.dot(key.field());
}

Vec3 key_torque(const MagnetSource& source, const FieldKey& key) {
  return source.moment.cross(key.field());
}

double assembly_energy(std::span<const MagnetSource> sources, const FieldKey& key) {
  double u = 0.0;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    u += key_energy(sources[i], key);
    for (std::size_t j = i + 1; j < sources.size(); ++j) u += pair_energy(sources[i], sources[j]);
  }
  return u;
}

double assembly_energy(std::span<const MagnetSource> sources) {
  double u = 0.0;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    for (std::size_t j = i + 1; j < sources.size(); ++j) u += pair_energy(sources[i], sources[j]);
  }
  return u;
}

Vec3 assembly_force_on(std::span<const MagnetSource> sources, std::size_t index) {
  Vec3 f = Vec3::Zero();
  for (std::size_t j = 0; j < sources.size(); ++j) {
    if (j != index) f += pair_force(sources[j], sources[index]);
  }
  return f;
}

}  // namespace magceptor
