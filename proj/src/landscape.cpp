#include "magceptor/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "magceptor/format.hpp"

namespace magceptor {

std::string_view to_string(MoverOrientation o) {
  return o == MoverOrientation::kAligning ? "aligning" : "fixed";
}

MoverOrientation mover_orientation_from_string(std::string_view name) {
  if (name == "aligning") return MoverOrientation::kAligning;
  if (name == "fixed") return MoverOrientation::kFixed;
  throw ParseError("unknown mover orientation '" + std::string(name) + "'");
}

std::string_view to_string(LandscapeClass c) {
  switch (c) {
    case LandscapeClass::kMonostableInner: return "monostable_inner";
    case LandscapeClass::kMonostableOuter: return "monostable_outer";
    case LandscapeClass::kBistable: return "bistable";
    case LandscapeClass::kDegenerate: return "degenerate";
  }
  return "degenerate";
}

void MoverTrack::validate() const {
  if (std::abs(axis.norm() - 1.0) > 1e-9) throw DomainError("track axis must be unit-norm");
  if (!(x_out > x_in)) throw DomainError("track stroke must be positive (x_in < x_out)");
  if (!(mass > 0.0)) throw DomainError("mover mass must be > 0");
  if (!(friction_force >= 0.0)) throw DomainError("friction force must be >= 0");
  mover.validate();
  if (orientation == MoverOrientation::kAligning && mover.parts.size() != 1) {
    throw DomainError("aligning movers are modeled as single point dipoles");
  }
}

namespace {

double distance_to_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (a + t * ab - p).norm();
}

}  // namespace

void UnitTriplet::validate() const {
  if (id.empty()) throw DomainError("unit id must not be empty");
  track.validate();
  const Vec3 a = track.position_at(track.x_in);
  const Vec3 b = track.position_at(track.x_out);
  for (const auto& s : stators) {
    s.validate();
    for (const auto& part : s.parts) {
      if (distance_to_segment(s.part_position(part), a, b) <= kCoincidenceTol) {
        throw DomainError("unit '" + id + "': a stator lies on the mover stroke");
      }
    }
  }
}

const UnitTriplet& Topology::unit(std::string_view id) const {
  return units[unit_index(id)];
}

std::size_t Topology::unit_index(std::string_view id) const {
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (units[i].id == id) return i;
  }
  throw DomainError("unknown unit '" + std::string(id) + "'");
}

const FieldKey& Topology::key(std::string_view label) const {
  for (const auto& k : keys) {
    if (k.label == label) return k;
  }
  throw DomainError("unknown key '" + std::string(label) + "'");
}

bool Topology::has_key(std::string_view label) const {
  return std::any_of(keys.begin(), keys.end(), [&](const FieldKey& k) { return k.label == label; });
}

void Topology::validate() const {
  std::set<std::string> ids;
  for (const auto& u : units) {
    u.validate();
    if (!ids.insert(u.id).second) throw DomainError("duplicate unit id '" + u.id + "'");
    if (u.assigned_key && !has_key(*u.assigned_key)) {
      throw DomainError("unit '" + u.id + "' assigned to unknown key '" + *u.assigned_key + "'");
    }
  }
  std::set<std::string> labels;
  for (const auto& k : keys) {
    k.validate();
    if (!labels.insert(k.label).second) throw DomainError("duplicate key label '" + k.label + "'");
  }
  std::vector<Vec3> points;
  for (const auto& u : units) {
    for (const auto& s : u.stators) {
      for (const auto& p : s.parts) points.push_back(s.part_position(p));
    }
    points.push_back(u.track.position_at(u.track.x_in));
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      if ((points[i] - points[j]).norm() <= kCoincidenceTol) {
        throw DomainError("topology '" + name + "': two magnets coincide");
      }
    }
  }
}

double Topology::magnet_volume() const {
  double v = 0.0;
  for (const auto& u : units) {
    for (const auto& s : u.stators) v += s.volume();
    v += u.track.mover.volume();
  }
  return v;
}

Topology Topology::scaled(double s) const {
  if (!(s > 0.0)) throw DomainError("scale factor must be > 0");
  Topology out = *this;
  out.scale *= s;
  for (auto& u : out.units) {
    for (auto& st : u.stators) st = st.scaled(s);
    auto& t = u.track;
    t.origin *= s;
    t.x_in *= s;
    t.x_out *= s;
    t.mover = t.mover.scaled(s);
    t.mass *= s * s * s;
    t.friction_force *= s * s;
  }
  return out;
}

Topology Topology::rotated(const Mat3& r) const {
  Topology out = *this;
  for (auto& u : out.units) {
    for (auto& st : u.stators) st = st.transformed(r);
    u.track.axis = r * u.track.axis;
    u.track.origin = r * u.track.origin;
    u.track.mover = u.track.mover.transformed(r);
  }
  for (auto& k : out.keys) k.direction = r * k.direction;
  return out;
}

// ---------------------------------------------------------------------------

LandscapeEvaluator::LandscapeEvaluator(std::vector<MagnetSource> background, FieldKey key,
                                       MoverTrack track)
    : background_(std::move(background)), key_(std::move(key)), track_(std::move(track)) {
  background_energy_ = assembly_energy(background_, key_);
}

Vec3 LandscapeEvaluator::background_field(const Vec3& p) const {
  Vec3 b = Vec3::Zero();
  for (const auto& s : background_) b += dipole_field_at(s, p);
  return b;
}

MagnetSource LandscapeEvaluator::mover_at(double x) const {
  MagnetSource m = track_.mover;
  m.position = track_.position_at(x);
  if (track_.orientation == MoverOrientation::kAligning) {
    const Vec3 b = background_field(m.position) + key_.field();
    const double n = b.norm();
    if (n > 0.0) m.moment = m.moment.norm() / n * b;
  }
  return m;
}

double LandscapeEvaluator::energy(double x) const {
  const MagnetSource m = mover_at(x);
  double u = background_energy_ + key_energy(m, key_);
  for (const auto& s : background_) u += pair_energy(s, m);
  return u;
}

double LandscapeEvaluator::force(double x) const {
  const MagnetSource m = mover_at(x);
  Vec3 f = Vec3::Zero();
  for (const auto& s : background_) f += pair_force(s, m);
  return track_.axis.dot(f);
}

ProfileSample LandscapeEvaluator::evaluate(double x) const {
  const MagnetSource m = mover_at(x);
  double u = background_energy_ + key_energy(m, key_);
  Vec3 f = Vec3::Zero();
  for (const auto& s : background_) {
    u += pair_energy(s, m);
    f += pair_force(s, m);
  }
  return ProfileSample{x, u, track_.axis.dot(f)};
}

namespace {

double interpolate(const std::vector<ProfileSample>& samples, double x, double ProfileSample::*field) {
  if (samples.empty()) throw DomainError("empty profile");
  if (x <= samples.front().x) return samples.front().*field;
  if (x >= samples.back().x) return samples.back().*field;
  auto it = std::lower_bound(samples.begin(), samples.end(), x,
                             [](const ProfileSample& s, double v) { return s.x < v; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double t = (x - lo.x) / (hi.x - lo.x);
  return lo.*field + t * (hi.*field - lo.*field);
}

}  // namespace

double LandscapeProfile::energy_at(double x) const {
  return evaluator ? evaluator->energy(x) : interpolate(samples, x, &ProfileSample::energy);
}

double LandscapeProfile::force_at(double x) const {
  return evaluator ? evaluator->force(x) : interpolate(samples, x, &ProfileSample::force);
}

std::shared_ptr<const LandscapeEvaluator> make_evaluator(const Topology& topology,
                                                         std::string_view unit_id,
                                                         const FieldKey& key,
                                                         const MoverPositions& positions) {
  for (const auto& u : topology.units) u.validate();
  key.validate();
  const std::size_t target = topology.unit_index(unit_id);
  std::vector<MagnetSource> stators;
  for (const auto& u : topology.units) {
    for (const auto& s : u.stators) stators.push_back(s);
  }

  struct Other {
    MagnetSource source;
    bool aligning;
  };
  std::vector<Other> movers;
  for (std::size_t i = 0; i < topology.units.size(); ++i) {
    if (i == target) continue;
    const auto& t = topology.units[i].track;
    auto it = positions.find(topology.units[i].id);
    const double x = it == positions.end() ? t.x_in : it->second;
    MagnetSource m = t.mover;
    m.position = t.position_at(x);
    movers.push_back({m, t.orientation == MoverOrientation::kAligning});
  }

  // Gauss-Seidel relaxation of the frozen movers' orientations.
  std::vector<Vec3> stator_field(movers.size(), key.field());
  for (std::size_t i = 0; i < movers.size(); ++i) {
    for (const auto& s : stators) stator_field[i] += dipole_field_at(s, movers[i].source.position);
  }
  for (int iter = 0; iter < 2000; ++iter) {
    double change = 0.0;
    for (std::size_t i = 0; i < movers.size(); ++i) {
      if (!movers[i].aligning) continue;
      Vec3 b = stator_field[i];
      for (std::size_t j = 0; j < movers.size(); ++j) {
        if (j != i) b += dipole_field_at(movers[j].source, movers[i].source.position);
      }
      const double n = b.norm();
      if (n == 0.0) continue;
      const Vec3 next = movers[i].source.moment.norm() / n * b;
      change = std::max(change, (next - movers[i].source.moment).norm() / next.norm());
      movers[i].source.moment = next;
    }
    if (change < 1e-15) break;
  }

  std::vector<MagnetSource> background = std::move(stators);
  for (auto& m : movers) background.push_back(std::move(m.source));
  return std::make_shared<const LandscapeEvaluator>(std::move(background), key,
                                                    topology.units[target].track);
}

LandscapeProfile sample_profile(const Topology& topology, std::string_view unit_id,
                                const FieldKey& key, const ProfileOptions& options) {
  if (options.n_samples < kMinSamples) {
    throw DomainError("profiles need at least 16 samples");
  }
  LandscapeProfile p;
  p.unit_id = std::string(unit_id);
  p.key = key;
  p.evaluator = make_evaluator(topology, unit_id, key, options.positions);
  const auto& t = p.evaluator->track();
  p.x_in = t.x_in;
  p.x_out = t.x_out;
  const int n = options.n_samples;
  p.samples.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double x = i == n - 1 ? t.x_out
                                : t.x_in + (t.x_out - t.x_in) * (static_cast<double>(i) / (n - 1));
    p.samples.push_back(p.evaluator->evaluate(x));
  }
  return p;
}

namespace {

bool outward(double f) { return f > 0.0; }

double bisect_root(const LandscapeProfile& p, double lo, double hi) {
  const bool lo_sign = outward(p.force_at(lo));
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (outward(p.force_at(mid)) == lo_sign) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

Stability classify_root(const LandscapeProfile& p, double x, bool force_was_outward) {
  const Stability by_sign = force_was_outward ? Stability::kStable : Stability::kUnstable;
  if (!p.evaluator) return by_sign;
  const double h = 1e-3 * (p.x_out - p.x_in);
  const double lo = std::max(p.x_in, x - h);
  const double hi = std::min(p.x_out, x + h);
  const double mid = 0.5 * (lo + hi);
  const double curv = p.energy_at(lo) - 2.0 * p.energy_at(mid) + p.energy_at(hi);
  const double scale = std::abs(p.energy_at(mid)) * 1e-13;
  if (std::abs(curv) <= scale) return by_sign;
  return curv > 0.0 ? Stability::kStable : Stability::kUnstable;
}

}  // namespace

LandscapeProfile refine_equilibria(LandscapeProfile profile) {
  const auto& s = profile.samples;
  if (s.size() < static_cast<std::size_t>(kMinSamples)) {
    throw DomainError("profiles need at least 16 samples");
  }
  profile.equilibria.clear();
  if (s.front().force < 0.0) {
    profile.equilibria.push_back({s.front().x, Stability::kStable, true});
  }
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const bool a = outward(s[i].force);
    const bool b = outward(s[i + 1].force);
    if (a == b) continue;
    const double root = bisect_root(profile, s[i].x, s[i + 1].x);
    profile.equilibria.push_back({root, classify_root(profile, root, a), false});
  }
  if (s.back().force > 0.0) {
    profile.equilibria.push_back({s.back().x, Stability::kStable, true});
  }
  profile.refined = true;
  return profile;
}

LandscapeDecision decide(const LandscapeProfile& input, double friction_force) {
  const LandscapeProfile refined = input.refined ? LandscapeProfile{} : refine_equilibria(input);
  const LandscapeProfile& p = input.refined ? input : refined;
  const auto& s = p.samples;
  LandscapeDecision d;

  double max_abs = 0.0;
  d.driving_peak = -std::numeric_limits<double>::infinity();
  for (const auto& smp : s) {
    max_abs = std::max(max_abs, std::abs(smp.force));
    d.driving_peak = std::max(d.driving_peak, smp.force);
  }
  if (max_abs == 0.0) {
    d.cls = LandscapeClass::kDegenerate;
    d.degenerate = true;
    d.driving_peak = 0.0;
    return d;
  }

  std::vector<Equilibrium> stable;
  for (const auto& e : p.equilibria) {
    if (e.stability == Stability::kStable) stable.push_back(e);
  }
  const auto is_outer_stop = [&](const Equilibrium& e) { return e.at_stop && e.x == p.x_out; };

  if (stable.size() >= 2) d.cls = LandscapeClass::kBistable;
  else if (stable.size() == 1) d.cls = is_outer_stop(stable.front()) ? LandscapeClass::kMonostableOuter
                                                                    : LandscapeClass::kMonostableInner;
  else d.cls = LandscapeClass::kMonostableOuter;
  d.bistable = d.cls == LandscapeClass::kBistable;

  const bool inner_stable_exists =
      std::any_of(stable.begin(), stable.end(), [&](const Equilibrium& e) { return !is_outer_stop(e); });
  bool pushes_out = true;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    if (!(s[i].force > friction_force)) {
      pushes_out = false;
      break;
    }
  }
  d.snap_through = !inner_stable_exists && pushes_out;

  if (inner_stable_exists) {
    const Equilibrium eq = *std::find_if(stable.begin(), stable.end(),
                                         [&](const Equilibrium& e) { return !is_outer_stop(e); });
    double next = p.x_out;
    for (const auto& e : p.equilibria) {
      if (e.x > eq.x) {
        next = e.x;
        break;
      }
    }
    // Crest: highest energy between the inner minimum and the next equilibrium.
    const double u_eq = p.energy_at(eq.x);
    double crest_x = next;
    double crest_u = p.energy_at(next);
    for (const auto& smp : s) {
      if (smp.x > eq.x && smp.x < next && smp.energy > crest_u) {
        crest_u = smp.energy;
        crest_x = smp.x;
      }
    }
    double restoring = -p.force_at(eq.x);
    restoring = std::min(restoring, -p.force_at(crest_x));
    for (const auto& smp : s) {
      if (smp.x >= eq.x && smp.x <= crest_x) restoring = std::min(restoring, -smp.force);
    }
    d.inner_equilibrium = eq.x;
    d.barrier_crest = crest_x;
    d.barrier_out = crest_u - u_eq;
    d.anchoring_force = restoring;
  }
  return d;
}

LandscapeDecision evaluate_unit(const Topology& topology, std::string_view unit_id,
                                const FieldKey& key, const ProfileOptions& options) {
  const auto profile = refine_equilibria(sample_profile(topology, unit_id, key, options));
  return decide(profile, topology.unit(unit_id).track.friction_force);
}

double anchoring_margin(const Topology& topology, std::string_view unit_id, const FieldKey& key,
                        const ProfileOptions& options) {
  const auto d = evaluate_unit(topology, unit_id, key, options);
  if (!d.anchoring_force) {
    throw DomainError("unit '" + std::string(unit_id) + "' is not anchored under key '" +
                      key.label + "'");
  }
  return *d.anchoring_force;
}

double ejection_velocity(double energy_drop, double stroke, double mass, double friction_force) {
  if (!(mass > 0.0)) throw DomainError("ejection velocity needs a positive mass");
  const double budget = energy_drop - friction_force * stroke;
  if (!(budget > 0.0)) {
    throw DomainError("no positive energy budget for ejection (friction exceeds available work)");
  }
  return std::sqrt(2.0 * budget / mass);
}

double ejection_velocity(const LandscapeProfile& profile, double mass, double friction_force) {
  const auto d = decide(profile, friction_force);
  if (!d.snap_through) throw DomainError("ejection velocity requires a snap-through profile");
  const double drop = profile.samples.front().energy - profile.samples.back().energy;
  return ejection_velocity(drop, profile.x_out - profile.x_in, mass, friction_force);
}

double force_density(double driving_peak, double magnet_volume) {
  if (!(magnet_volume > 0.0)) throw DomainError("force density needs a positive magnet volume");
  return (driving_peak * 1e3) / (magnet_volume * 1e9);
}

double force_density(const Topology& topology, const std::vector<LandscapeDecision>& decisions) {
  double peak = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (const auto& d : decisions) {
    if (d.snap_through) {
      peak = std::max(peak, d.driving_peak);
      any = true;
    }
  }
  if (!any) throw DomainError("force density needs at least one snap-through decision");
  return force_density(peak, topology.magnet_volume());
}

std::string profile_csv(const LandscapeProfile& profile) {
  std::ostringstream out;
  out << "x_m,U_J,F_N\n";
  for (const auto& s : profile.samples) {
    out << format_double(s.x) << ',' << format_double(s.energy) << ',' << format_double(s.force) << '\n';
  }
  return out.str();
}

}  // namespace magceptor
