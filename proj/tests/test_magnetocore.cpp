#include <doctest.h>

#include <array>
#include <cmath>
#include <random>

#include "magceptor/magnetocore.hpp"
#include "support.hpp"

using namespace magceptor;
using magceptor::testing::random_point;
using magceptor::testing::random_unit;
using magceptor::testing::rel_close;

namespace {

MagnetSpec cylinder(double r, double len, double br) {
  MagnetSpec s;
  s.shape = MagnetShape::kCylinder;
  s.dims = {r, len};
  s.remanence = br;
  return s;
}

// -grad of pair_energy with respect to b's position, central differences.
Vec3 fd_force(const MagnetSource& a, const MagnetSource& b, double h) {
  Vec3 f;
  for (int i = 0; i < 3; ++i) {
    Vec3 d = Vec3::Zero();
    d[i] = h;
    f[i] = -(pair_energy(a, b.translated(d)) - pair_energy(a, b.translated(-d))) / (2 * h);
  }
  return f;
}

}  // namespace

TEST_CASE("moment of the reference cylinder") {
  const Vec3 m = moment_from_spec(cylinder(0.002, 0.004, 1.2));
  // 1.2 * pi * 4e-6 * 4e-3 / (4 pi 1e-7) = 0.048 exactly
  CHECK(rel_close(m.norm(), 0.048, 1e-12));
  CHECK(rel_close(m.z(), 0.048, 1e-12));
  CHECK(std::abs(m.x()) + std::abs(m.y()) == 0.0);
}

TEST_CASE("moment rejects degenerate specs and scales with volume") {
  CHECK_THROWS_AS(moment_from_spec(cylinder(0.002, 0.004, 0.0)), DomainError);
  CHECK_THROWS_AS(moment_from_spec(cylinder(-0.002, 0.004, 1.2)), DomainError);
  const double m1 = moment_from_spec(cylinder(0.002, 0.004, 1.2)).norm();
  const double m2 = moment_from_spec(cylinder(0.004, 0.008, 1.2)).norm();
  CHECK(rel_close(m2 / m1, 8.0, 1e-12));
}

TEST_CASE("closed-form on-axis and equatorial fields") {
  const auto s = MagnetSource::point(Vec3::Zero(), Vec3(0, 0, 1));
  const Vec3 on = dipole_field_at(s, Vec3(0, 0, 0.1));
  const Vec3 eq = dipole_field_at(s, Vec3(0.1, 0, 0));
  CHECK(rel_close(on.z(), 2.0e-4, 1e-9));
  CHECK(std::abs(on.x()) + std::abs(on.y()) < 1e-20);
  CHECK(rel_close(eq.z(), -1.0e-4, 1e-9));
  CHECK(std::abs(eq.x()) + std::abs(eq.y()) < 1e-20);
  CHECK(dipole_field_at(MagnetSource::point(Vec3::Zero(), Vec3::Zero()), Vec3(0, 0, 0.1)).norm() == 0.0);
  CHECK_THROWS_AS(dipole_field_at(s, Vec3::Zero()), SingularityError);
}

TEST_CASE("coaxial pair energy and force") {
  const auto a = MagnetSource::point(Vec3::Zero(), Vec3(0, 0, 1));
  const auto b = MagnetSource::point(Vec3(0, 0, 1), Vec3(0, 0, 1));
  const auto anti = MagnetSource::point(Vec3(0, 0, 1), Vec3(0, 0, -1));
  CHECK(rel_close(pair_energy(a, b), -2.0e-7, 1e-9));
  CHECK(rel_close(pair_energy(b, a), pair_energy(a, b), 1e-15));
  CHECK(rel_close(pair_energy(a, anti), 2.0e-7, 1e-9));

  const Vec3 f = pair_force(a, b);
  CHECK(rel_close(f.norm(), 6.0e-7, 1e-9));
  CHECK(f.z() < 0.0);  // b pulled toward a
  const auto far = MagnetSource::point(Vec3(0, 0, 2), Vec3(0, 0, 1));
  CHECK(rel_close(pair_force(a, far).norm(), f.norm() / 16.0, 1e-12));
  CHECK_THROWS_AS(pair_energy(a, a), SingularityError);
}

TEST_CASE("perpendicular moment on axis agrees with finite differences") {
  const auto a = MagnetSource::point(Vec3::Zero(), Vec3(0, 0, 1));
  const auto b = MagnetSource::point(Vec3(0, 0, 0.02), Vec3(1, 0, 0));
  const Vec3 f = pair_force(a, b);
  const Vec3 fd = fd_force(a, b, 1e-6);
  CHECK((f - fd).norm() <= 1e-6 * f.norm());
}

TEST_CASE("property: pair force is minus the energy gradient") {
  std::mt19937_64 rng(20260101);
  std::uniform_real_distribution<double> mag(0.001, 0.1);
  std::uniform_real_distribution<double> dist(0.004, 0.05);
  for (int trial = 0; trial < 300; ++trial) {
    const auto a = MagnetSource::point(random_point(rng, 0.01), mag(rng) * random_unit(rng));
    const auto b = MagnetSource::point(a.position + dist(rng) * random_unit(rng), mag(rng) * random_unit(rng));
    const Vec3 f = pair_force(a, b);
    const Vec3 fd = fd_force(a, b, 1e-6);
    CHECK((f - fd).norm() <= 1e-6 * f.norm());
  }
}

TEST_CASE("property: scale covariance of pair energy and force") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(0.004, 0.03);
  for (double s : {0.5, 2.0, 3.4}) {
    for (int trial = 0; trial < 50; ++trial) {
      const MagnetSpec spec = cylinder(0.001, 0.002, 1.2);
      const auto a = make_source(spec, random_point(rng, 0.01), random_unit(rng), 2);
      const auto b = make_source(spec, a.position + dist(rng) * random_unit(rng), random_unit(rng), 2);
      CHECK(rel_close(pair_energy(a.scaled(s), b.scaled(s)), s * s * s * pair_energy(a, b), 1e-9));
      CHECK(rel_close(pair_force(a.scaled(s), b.scaled(s)).norm(), s * s * pair_force(a, b).norm(), 1e-9));
    }
  }
}

TEST_CASE("key energy and torque") {
  const auto m = MagnetSource::point(Vec3::Zero(), Vec3(1, 0, 0));
  CHECK(rel_close(key_energy(m, make_key("+x", 0.02)), -0.02, 1e-12));
  CHECK(key_energy(m, make_key("+z", 0.02)) == 0.0);
  CHECK(key_energy(m, make_key("+x", 0.0)) == 0.0);
  CHECK(key_torque(m, make_key("+x", 0.02)).norm() == 0.0);
  const Vec3 t = key_torque(m, make_key("+y", 0.02));
  CHECK(rel_close(t.z(), 0.02, 1e-12));
  CHECK(std::abs(t.x()) + std::abs(t.y()) == 0.0);

  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto src = MagnetSource::point(Vec3::Zero(), random_unit(rng));
    const FieldKey k = make_key("k", random_unit(rng), 0.03);
    CHECK(key_torque(src, k).norm() <= src.moment.norm() * 0.03 * (1 + 1e-12));
  }
}

TEST_CASE("key labels") {
  CHECK(direction_from_label("+x") == Vec3(1, 0, 0));
  CHECK(direction_from_label("-z") == Vec3(0, 0, -1));
  CHECK(rel_close(direction_from_label("+x+z").x(), std::sqrt(0.5), 1e-15));
  CHECK_THROWS_AS(direction_from_label("x"), ParseError);
  CHECK_THROWS_AS(direction_from_label("+x-x"), ParseError);
  CHECK_THROWS_AS(unit_vector(Vec3::Zero()), DomainError);
}

TEST_CASE("assembly energy against a pairwise oracle") {
  const FieldKey k = make_key("+y", 0.02);
  const auto a = MagnetSource::point(Vec3(0, 0, 0), Vec3(0.01, 0, 0));
  const auto b = MagnetSource::point(Vec3(0.01, 0, 0), Vec3(0, 0.02, 0));
  const auto c = MagnetSource::point(Vec3(0, 0.01, 0.005), Vec3(0, 0, -0.03));
  const std::array one{a};
  CHECK(assembly_energy(one, k) == key_energy(a, k));
  const std::array two{a, b};
  CHECK(rel_close(assembly_energy(two), pair_energy(a, b), 1e-15));

  // independent oracle: -m_j . B_i(p_j) over the three pairs, -m . B_key for each
  const std::array three{a, b, c};
  double oracle = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    oracle -= three[i].moment.dot(k.field());
    for (std::size_t j = i + 1; j < 3; ++j) {
      const Vec3 r = three[j].position - three[i].position;
      const double d = r.norm();
      const Vec3 rh = r / d;
      const Vec3 bij = 1e-7 * (3 * rh * rh.dot(three[i].moment) - three[i].moment) / (d * d * d);
      oracle -= three[j].moment.dot(bij);
    }
  }
  CHECK(rel_close(assembly_energy(three, k), oracle, 1e-12));

  // assembly force on c equals the sum of pair forces
  const Vec3 f = assembly_force_on(three, 2);
  CHECK((f - pair_force(a, c) - pair_force(b, c)).norm() <= 1e-12 * f.norm());
}

TEST_CASE("discretized magnet keeps its total moment and converges to the point model far away") {
  const MagnetSpec spec = cylinder(0.001, 0.002, 1.2);
  const auto fine = make_source(spec, Vec3::Zero(), Vec3::UnitZ(), 4);
  const auto coarse = make_source(spec, Vec3::Zero(), Vec3::UnitZ(), 1);
  double total = 0.0;
  for (const auto& p : fine.parts) total += p.fraction;
  CHECK(rel_close(total, 1.0, 1e-12));
  CHECK(rel_close(fine.moment.norm(), coarse.moment.norm(), 1e-12));
  const Vec3 far(0, 0, 0.2);
  CHECK(rel_close(dipole_field_at(fine, far).z(), dipole_field_at(coarse, far).z(), 1e-4));
}
