#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "magceptor/io.hpp"
#include "magceptor/landscape.hpp"
#include "support.hpp"

using namespace magceptor;
using magceptor::testing::config_path;
using magceptor::testing::rel_close;

namespace {

UnitTriplet lone_unit(std::vector<MagnetSource> stators, double x_in, double x_out,
                      const Vec3& mover_moment = Vec3(0.001, 0, 0)) {
  UnitTriplet u;
  u.id = "u";
  u.stators = std::move(stators);
  u.track.axis = Vec3::UnitX();
  u.track.x_in = x_in;
  u.track.x_out = x_out;
  u.track.mover = MagnetSource::point(Vec3::Zero(), mover_moment);
  u.track.mass = 1e-6;
  return u;
}

Topology single(UnitTriplet u, std::vector<FieldKey> keys = {}) {
  Topology t;
  t.name = "single";
  t.units.push_back(std::move(u));
  t.keys = std::move(keys);
  return t;
}

// Field of a point dipole written out again, for the oracle below.
Vec3 oracle_dipole(const Vec3& m, const Vec3& at, const Vec3& p) {
  const Vec3 r = p - at;
  const double d = r.norm();
  const Vec3 n = r / d;
  return 1e-7 * (3.0 * n * n.dot(m) - m) / (d * d * d);
}

const Topology& demo() {
  static const Topology t = io::load_topology(config_path("demo_topology.json"));
  return t;
}

}  // namespace

TEST_CASE("free mover in a uniform key feels no force") {
  const Topology t = single(lone_unit({}, 0.0, 0.001));
  for (const char* label : {"+x", "-y", "+z"}) {
    const auto p = sample_profile(t, "u", make_key(label, 0.05));
    const double u0 = p.samples.front().energy;
    for (const auto& s : p.samples) {
      CHECK(s.force == 0.0);
      CHECK(s.energy == doctest::Approx(u0).epsilon(1e-15));
    }
    const auto d = decide(refine_equilibria(p));
    CHECK(d.degenerate);
    CHECK_FALSE(d.bistable);
    CHECK_FALSE(d.snap_through);
    CHECK(d.barrier_out == 0.0);
  }
}

TEST_CASE("attracting stator beyond the outer stop gives a monostable outer landscape") {
  const auto stator = MagnetSource::point(Vec3(0.006, 0, 0), Vec3(0.01, 0, 0));
  const Topology t = single(lone_unit({stator}, 0.0, 0.002));
  const auto p = refine_equilibria(sample_profile(t, "u", make_key("+z", 0.0)));
  for (const auto& s : p.samples) CHECK(s.force > 0.0);
  const auto d = decide(p);
  CHECK(d.cls == LandscapeClass::kMonostableOuter);
  CHECK(d.snap_through);
  CHECK(d.driving_peak > 0.0);
}

TEST_CASE("demo profile matches an independent aligning-dipole oracle") {
  const FieldKey key = demo().key("+x");
  const auto p = sample_profile(demo(), "alpha", key);
  REQUIRE(p.samples.size() == 256);
  const auto ev = make_evaluator(demo(), "alpha", key);
  const double m = ev->track().mover.moment.norm();
  std::vector<Vec3> pos, mom;
  for (const auto& s : ev->background()) {
    for (const auto& part : s.parts) {
      pos.push_back(s.part_position(part));
      mom.push_back(part.fraction * s.moment);
    }
  }
  auto oracle = [&](double x) {
    const Vec3 at = ev->track().position_at(x);
    Vec3 b = key.field();
    for (std::size_t i = 0; i < pos.size(); ++i) b += oracle_dipole(mom[i], pos[i], at);
    return -m * b.norm();
  };
  const double base = oracle(p.samples.front().x);
  double span = 0.0;
  for (const auto& s : p.samples) span = std::max(span, std::abs(oracle(s.x) - base));
  REQUIRE(span > 0.0);
  for (const auto& s : p.samples) {
    const double want = oracle(s.x) - base;
    const double got = s.energy - p.samples.front().energy;
    CHECK(std::abs(got - want) <= 1e-12 * span);
  }
}

TEST_CASE("property: axial force is minus the energy slope") {
  for (const auto& u : demo().units) {
    for (const auto& k : demo().keys) {
      const auto p = sample_profile(demo(), u.id, k);
      const auto ev = make_evaluator(demo(), u.id, k);
      const double h = 1e-7;
      for (std::size_t i = 1; i + 1 < p.samples.size(); ++i) {
        const double x = p.samples[i].x;
        const double fd = -(ev->energy(x + h) - ev->energy(x - h)) / (2 * h);
        CHECK(rel_close(p.samples[i].force, fd, 1e-4, 1e-9));
      }
      for (std::size_t i = 1; i < p.samples.size(); ++i) CHECK(p.samples[i].x > p.samples[i - 1].x);
    }
  }
}

TEST_CASE("symmetric pair of stators gives mirrored equilibria") {
  const auto left = MagnetSource::point(Vec3(-0.004, 0, 0), Vec3(0.01, 0, 0));
  const auto right = MagnetSource::point(Vec3(0.004, 0, 0), Vec3(0.01, 0, 0));
  const Topology t = single(lone_unit({left, right}, -0.001, 0.001));
  const auto p = refine_equilibria(sample_profile(t, "u", make_key("+x", 0.0), {255, {}}));
  std::vector<Equilibrium> stable, unstable;
  for (const auto& e : p.equilibria) (e.stability == Stability::kStable ? stable : unstable).push_back(e);
  REQUIRE(stable.size() == 2);
  REQUIRE(unstable.size() == 1);
  CHECK(std::abs(stable[0].x + stable[1].x) < 1e-9);
  CHECK(std::abs(unstable[0].x) < 1e-9);
  CHECK(std::abs(p.evaluator->force(unstable[0].x)) < 1e-9);
  const auto d = decide(p);
  CHECK(d.bistable);
  CHECK_FALSE(d.snap_through);
}

TEST_CASE("refined roots re-evaluate to zero force") {
  // Off-axis stator: the aligning mover sees an interior equilibrium.
  const auto s = MagnetSource::point(Vec3(0.0005, 0.003, 0), Vec3(0, 0.01, 0));
  const Topology t = single(lone_unit({s}, -0.002, 0.003));
  const auto p = refine_equilibria(sample_profile(t, "u", make_key("+x", 0.0)));
  int interior = 0;
  for (const auto& e : p.equilibria) {
    if (e.at_stop) continue;
    ++interior;
    CHECK(std::abs(p.evaluator->force(e.x)) < 1e-9);
  }
  CHECK(interior >= 1);
}

TEST_CASE("monotone force gives at most one equilibrium") {
  const auto stator = MagnetSource::point(Vec3(0.006, 0, 0), Vec3(0.01, 0, 0));
  const auto p = refine_equilibria(sample_profile(single(lone_unit({stator}, 0.0, 0.002)), "u",
                                                  make_key("+x", 0.01)));
  CHECK(p.equilibria.size() <= 1);
}

TEST_CASE("key sweep collapses the inner basin of the demo alpha unit") {
  auto snaps = [](double b) {
    return evaluate_unit(demo(), "alpha", make_key("+x", b)).snap_through;
  };
  REQUIRE_FALSE(snaps(0.0));
  REQUIRE(snaps(0.02));
  double lo = 0.0, hi = 0.02;
  while (hi - lo > 1e-7) {
    const double mid = 0.5 * (lo + hi);
    (snaps(mid) ? hi : lo) = mid;
  }
  const auto below = evaluate_unit(demo(), "alpha", make_key("+x", lo));
  const auto above = evaluate_unit(demo(), "alpha", make_key("+x", hi));
  CHECK_FALSE(below.snap_through);
  REQUIRE(below.inner_equilibrium.has_value());
  CHECK(below.barrier_out > 0.0);
  CHECK(above.snap_through);
  CHECK(above.driving_peak > 0.0);
  CHECK(lo > 0.0);
  CHECK(hi < 0.02);
}

TEST_CASE("anchoring margin under the driving key peaks early, then falls until it fails") {
  // The aligning mover lets a weak key raise the margin slightly before the
  // basin erodes; the rise stays within 0.1% of the zero-key margin.
  const double zero = anchoring_margin(demo(), "alpha", make_key("+x", 0.0));
  CHECK(zero > 0.0);
  std::vector<double> margins{zero};
  bool failed = false;
  for (int i = 1; i <= 40 && !failed; ++i) {
    try {
      margins.push_back(anchoring_margin(demo(), "alpha", make_key("+x", i * 0.0005)));
    } catch (const DomainError&) {
      failed = true;
    }
  }
  CHECK(failed);
  const auto peak = std::max_element(margins.begin(), margins.end());
  CHECK(*peak <= zero * 1.001);
  for (auto it = peak + 1; it != margins.end(); ++it) CHECK(*it <= *(it - 1) + 1e-12);
  CHECK(margins.back() < 1e-9);
  CHECK_THROWS_AS(anchoring_margin(demo(), "alpha", demo().key("+x")), DomainError);
}

TEST_CASE("anchoring margin at zero key agrees with dense sampling") {
  const FieldKey off = make_key("+x", 0.0);
  Topology t = demo();
  t.keys = {off};
  const auto cell = magceptor::testing::dense_cell(t, "beta", off, Thresholds{});
  const double margin = anchoring_margin(demo(), "beta", off);
  CHECK(rel_close(margin, cell.min_rise, 1e-3));
}

TEST_CASE("ejection velocity energy balance") {
  CHECK(rel_close(ejection_velocity(1e-3, 0.001, 5e-4, 0.0), 2.0, 1e-12));
  CHECK_THROWS_AS(ejection_velocity(1e-3, 0.001, 5e-4, 1.0), DomainError);
  CHECK_THROWS_AS(ejection_velocity(0.0, 0.001, 5e-4, 0.0), DomainError);
  const double v1 = ejection_velocity(1e-3, 0.001, 5e-4, 0.0);
  const double v2 = ejection_velocity(1e-3, 0.001, 1e-3, 0.0);
  CHECK(rel_close(v2 * v2, v1 * v1 / 2, 1e-12));
}

TEST_CASE("demo ejection speed sits in the calibrated window") {
  // calibration target: mass chosen so the frictionless bound lands in 1.7-2.2 m/s
  const auto p = refine_equilibria(sample_profile(demo(), "alpha", demo().key("+x")));
  const double v = ejection_velocity(p, demo().unit("alpha").track.mass, 0.0);
  CHECK(v >= 1.7);
  CHECK(v <= 2.2);
}

TEST_CASE("force density") {
  // calibration label: 0.54 N over a back-solved 1.4 mm^3
  CHECK(force_density(0.54, 1.4e-9) == doctest::Approx(385.7).epsilon(1e-3));
  CHECK(rel_close(force_density(0.54, 2.8e-9), force_density(0.54, 1.4e-9) / 2, 1e-12));
  CHECK_THROWS_AS(force_density(Topology{}, {}), DomainError);
  CHECK_THROWS_AS(force_density(0.5, 0.0), DomainError);
}

TEST_CASE("property: geometric scaling of the demo") {
  for (double s : {0.5, 2.0, 3.4}) {
    const Topology big = demo().scaled(s);
    for (const auto& u : demo().units) {
      for (const auto& k : demo().keys) {
        const auto a = evaluate_unit(demo(), u.id, k);
        const auto b = evaluate_unit(big, u.id, k);
        CHECK(a.snap_through == b.snap_through);
        CHECK(rel_close(b.driving_peak, s * s * a.driving_peak, 1e-9));
        CHECK(rel_close(b.barrier_out, s * s * s * a.barrier_out, 1e-9, 1e-30));
        REQUIRE(a.anchoring_force.has_value() == b.anchoring_force.has_value());
        if (a.anchoring_force) CHECK(rel_close(*b.anchoring_force, s * s * *a.anchoring_force, 1e-9));
      }
    }
    const auto pa = refine_equilibria(sample_profile(demo(), "gamma", demo().key("-x")));
    const auto pb = refine_equilibria(sample_profile(big, "gamma", big.key("-x")));
    const double m = demo().unit("gamma").track.mass;
    CHECK(rel_close(ejection_velocity(pb, m * s * s * s, 0.0), ejection_velocity(pa, m, 0.0), 1e-9));
  }
}

TEST_CASE("a stator on the stroke is rejected") {
  const auto s = MagnetSource::point(Vec3(0.0005, 0, 0), Vec3(0.01, 0, 0));
  CHECK_THROWS(sample_profile(single(lone_unit({s}, 0.0, 0.001)), "u", make_key("+x", 0.01)));
}

TEST_CASE("profile csv") {
  const auto p = sample_profile(demo(), "alpha", demo().key("+x"));
  const std::string csv = profile_csv(p);
  CHECK(csv.rfind("x_m,U_J,F_N\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 257);
}
