#include "magceptor/designer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "magceptor/format.hpp"
#include "magceptor/parallel.hpp"

namespace magceptor {

namespace {

constexpr double kDirTol = 1e-9;
// Beyond this many raw combinations the space is sampled instead of walked.
constexpr double kExhaustiveLimit = 2e6;

int find_direction(const std::vector<Vec3>& set, const Vec3& d) {
  for (std::size_t i = 0; i < set.size(); ++i) {
    if ((set[i] - d).norm() < kDirTol) return static_cast<int>(i);
  }
  return -1;
}

bool is_cartesian(const Vec3& d) {
  int nonzero = 0;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) > kDirTol) {
      if (std::abs(std::abs(d[i]) - 1.0) > kDirTol) return false;
      ++nonzero;
    }
  }
  return nonzero == 1;
}

Site axis_step(const Vec3& axis) {
  return Site{static_cast<int>(std::lround(axis.x())), static_cast<int>(std::lround(axis.y())),
              static_cast<int>(std::lround(axis.z()))};
}

Site add(const Site& a, const Site& b) { return Site{a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }

// Signed permutation matrices that map the lattice box and both direction
// sets onto themselves.
std::vector<Mat3> symmetry_group(const Lattice& lattice) {
  std::vector<Mat3> group;
  std::array<int, 3> perm{0, 1, 2};
  do {
    for (int signs = 0; signs < 8; ++signs) {
      Mat3 p = Mat3::Zero();
      for (int i = 0; i < 3; ++i) p(i, perm[i]) = (signs >> i & 1) ? -1.0 : 1.0;
      bool ok = true;
      for (int i = 0; i < 3 && ok; ++i) {
        const auto& a = lattice.extents[i];
        const auto& b = lattice.extents[perm[i]];
        ok = (a[1] - a[0]) == (b[1] - b[0]);
      }
      for (const auto& o : lattice.orientations) ok = ok && find_direction(lattice.orientations, p * o) >= 0;
      for (const auto& a : lattice.track_axes) ok = ok && find_direction(lattice.track_axes, p * a) >= 0;
      if (ok) group.push_back(p);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return group;
}

Placement transform(const Lattice& lattice, const Mat3& p, const Placement& in) {
  Vec3 doubled;
  for (int i = 0; i < 3; ++i) {
    doubled[i] = 2.0 * in.stator[i] - (lattice.extents[i][0] + lattice.extents[i][1]);
  }
  const Vec3 mapped = p * doubled;
  Placement out;
  for (int i = 0; i < 3; ++i) {
    out.stator[i] = static_cast<int>(
        std::lround((mapped[i] + lattice.extents[i][0] + lattice.extents[i][1]) / 2.0));
  }
  out.orientation = find_direction(lattice.orientations, p * lattice.orientations[in.orientation]);
  out.axis = find_direction(lattice.track_axes, p * lattice.track_axes[in.axis]);
  return out;
}

std::string placements_text(std::vector<Placement> ps) {
  std::sort(ps.begin(), ps.end());
  std::string s;
  for (const auto& p : ps) {
    s += std::to_string(p.stator[0]) + ',' + std::to_string(p.stator[1]) + ',' +
         std::to_string(p.stator[2]) + ':' + std::to_string(p.orientation) + ':' +
         std::to_string(p.axis) + ';';
  }
  return s;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string canonical_with(const Lattice& lattice, const std::vector<Mat3>& group,
                           const std::vector<Placement>& placements) {
  std::string best;
  for (const auto& p : group) {
    std::vector<Placement> mapped;
    mapped.reserve(placements.size());
    for (const auto& pl : placements) mapped.push_back(transform(lattice, p, pl));
    std::string s = placements_text(std::move(mapped));
    if (best.empty() || s < best) best = std::move(s);
  }
  return best;
}

bool disjoint(const Lattice& lattice, const std::vector<Placement>& ps) {
  std::set<Site> used;
  for (const auto& p : ps) {
    if (!used.insert(p.stator).second) return false;
    if (!used.insert(add(p.stator, axis_step(lattice.track_axes[p.axis]))).second) return false;
  }
  return true;
}

double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  double r = 1.0;
  for (std::size_t i = 0; i < k; ++i) r = r * static_cast<double>(n - i) / static_cast<double>(i + 1);
  return r;
}

bool one_hot_on(const SelectivityMatrix& m, std::size_t row, std::size_t col, const Thresholds& t) {
  for (std::size_t c = 0; c < m.units.size(); ++c) {
    const auto& cell = m.cells[row][c];
    if (c == col) {
      if (cell.entry != Entry::kDrive || cell.value < t.drive_min) return false;
    } else if (cell.entry != Entry::kAnchor) {
      return false;
    }
  }
  return true;
}

}  // namespace

std::vector<Vec3> cartesian_directions() {
  return {Vec3::UnitX(), -Vec3::UnitX(), Vec3::UnitY(), -Vec3::UnitY(), Vec3::UnitZ(), -Vec3::UnitZ()};
}

std::vector<FieldKey> cartesian_keys(double magnitude) {
  std::vector<FieldKey> keys;
  for (const char* label : {"+x", "-x", "+y", "-y", "+z", "-z"}) keys.push_back(make_key(label, magnitude));
  return keys;
}

void Lattice::validate() const {
  if (!(spacing > 0.0)) throw DomainError("lattice spacing must be > 0");
  for (const auto& e : extents) {
    if (e[1] < e[0]) throw DomainError("lattice extent must have lo <= hi");
  }
  if (orientations.empty()) throw DomainError("lattice needs at least one orientation");
  if (track_axes.empty()) throw DomainError("lattice needs at least one track axis");
  for (const auto& o : orientations) {
    if (std::abs(o.norm() - 1.0) > 1e-9) throw DomainError("lattice orientations must be unit-norm");
  }
  for (const auto& a : track_axes) {
    if (!is_cartesian(a)) throw DomainError("lattice track axes must be Cartesian unit vectors");
  }
}

bool Lattice::contains(const Site& s) const {
  for (int i = 0; i < 3; ++i) {
    if (s[i] < extents[i][0] || s[i] > extents[i][1]) return false;
  }
  return true;
}

void DesignConfig::validate() const {
  lattice.validate();
  if (n_units < 1) throw DomainError("n_units must be >= 1");
  if (budget < 1) throw DomainError("budget must be >= 1");
  if (keys.empty()) throw DomainError("design needs at least one key");
  unit.stator.validate();
  unit.mover.validate();
  if (!(unit.stroke > 0.0)) throw DomainError("unit stroke must be > 0");
  if (!(unit.stroke < lattice.spacing)) throw DomainError("unit stroke must be shorter than the spacing");
  if (!(unit.mass > 0.0)) throw DomainError("unit mass must be > 0");
  if (!(unit.friction_force >= 0.0)) throw DomainError("unit friction must be >= 0");
  if (n_samples < kMinSamples) throw DomainError("n_samples must be >= 16");
  for (const auto& k : keys) k.validate();
  const bool all_cartesian = std::all_of(lattice.orientations.begin(), lattice.orientations.end(), is_cartesian);
  if (all_cartesian && static_cast<std::size_t>(n_units) > kMaxCartesianKeys) {
    throw DomainError("Cartesian orientations support at most 6 addressable units");
  }
}

std::string canonical_form(const Lattice& lattice, std::vector<Placement> placements) {
  return canonical_with(lattice, symmetry_group(lattice), placements);
}

Topology build_topology(const DesignConfig& config, const std::vector<Placement>& placements,
                        const std::string& name) {
  Topology t;
  t.name = name;
  t.keys = config.keys;
  const auto& lat = config.lattice;
  for (std::size_t i = 0; i < placements.size(); ++i) {
    const auto& p = placements[i];
    UnitTriplet u;
    u.id = "u" + std::to_string(i);
    const Vec3 site = lat.position(p.stator);
    u.stators.push_back(make_source(config.unit.stator, site, lat.orientations[p.orientation]));
    auto& tr = u.track;
    tr.axis = lat.track_axes[p.axis];
    tr.origin = site;
    tr.x_in = lat.spacing;
    tr.x_out = lat.spacing + config.unit.stroke;
    tr.mover = make_source(config.unit.mover, tr.position_at(tr.x_in), tr.axis);
    tr.mass = config.unit.mass;
    tr.friction_force = config.unit.friction_force;
    t.units.push_back(std::move(u));
  }
  return t;
}

std::vector<Candidate> enumerate(const DesignConfig& config) {
  config.validate();
  const auto& lat = config.lattice;
  const auto group = symmetry_group(lat);

  std::vector<Placement> all;
  for (int x = lat.extents[0][0]; x <= lat.extents[0][1]; ++x) {
    for (int y = lat.extents[1][0]; y <= lat.extents[1][1]; ++y) {
      for (int z = lat.extents[2][0]; z <= lat.extents[2][1]; ++z) {
        const Site s{x, y, z};
        for (std::size_t a = 0; a < lat.track_axes.size(); ++a) {
          if (!lat.contains(add(s, axis_step(lat.track_axes[a])))) continue;
          for (std::size_t o = 0; o < lat.orientations.size(); ++o) {
            all.push_back(Placement{s, static_cast<int>(o), static_cast<int>(a)});
          }
        }
      }
    }
  }
  const auto n = static_cast<std::size_t>(config.n_units);
  if (all.size() < n || 2 * n > static_cast<std::size_t>((lat.extents[0][1] - lat.extents[0][0] + 1) *
                                                         (lat.extents[1][1] - lat.extents[1][0] + 1) *
                                                         (lat.extents[2][1] - lat.extents[2][0] + 1))) {
    throw DomainError("lattice too small to place " + std::to_string(n) + " units");
  }

  std::vector<Candidate> out;
  std::set<std::string> seen;
  auto offer = [&](const std::vector<Placement>& ps) {
    if (!disjoint(lat, ps)) return;
    std::string canon = canonical_with(lat, group, ps);
    if (!seen.insert(canon).second) return;
    Candidate c;
    c.index = out.size();
    c.placements = ps;
    c.hash = fnv1a(canon);
    c.topology = build_topology(config, ps, config.name + "-" + std::to_string(c.index));
    out.push_back(std::move(c));
  };

  if (binomial(all.size(), n) <= kExhaustiveLimit) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    while (out.size() < config.budget) {
      std::vector<Placement> ps;
      for (auto i : idx) ps.push_back(all[i]);
      offer(ps);
      // Next combination in lexicographic order.
      std::size_t k = n;
      while (k > 0 && idx[k - 1] == all.size() - n + (k - 1)) --k;
      if (k == 0) break;
      ++idx[k - 1];
      for (std::size_t j = k; j < n; ++j) idx[j] = idx[j - 1] + 1;
    }
  } else {
    std::mt19937_64 rng(config.seed);
    std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
    const std::size_t max_attempts = 100 * config.budget;
    for (std::size_t attempt = 0; attempt < max_attempts && out.size() < config.budget; ++attempt) {
      std::set<std::size_t> chosen;
      while (chosen.size() < n) chosen.insert(pick(rng));
      std::vector<Placement> ps;
      for (auto i : chosen) ps.push_back(all[i]);
      offer(ps);
    }
  }
  if (out.empty()) throw DomainError("lattice too small to place " + std::to_string(n) + " units");
  return out;
}

std::string_view to_string(Entry e) {
  switch (e) {
    case Entry::kDrive: return "DRIVE";
    case Entry::kAnchor: return "ANCHOR";
    case Entry::kWeak: return "WEAK";
  }
  return "WEAK";
}

const MatrixCell& SelectivityMatrix::cell(std::string_view key, std::string_view unit) const {
  const auto r = std::find(keys.begin(), keys.end(), key);
  const auto c = std::find(units.begin(), units.end(), unit);
  if (r == keys.end() || c == units.end()) throw DomainError("no such matrix cell");
  return cells[static_cast<std::size_t>(r - keys.begin())][static_cast<std::size_t>(c - units.begin())];
}

SelectivityMatrix selectivity_filter(const Topology& topology, const Thresholds& thresholds,
                                     int n_samples) {
  if (topology.keys.empty()) throw DomainError("selectivity filter needs at least one key");
  const bool all_cartesian = std::all_of(topology.keys.begin(), topology.keys.end(),
                                         [](const FieldKey& k) { return is_cartesian(k.direction); });
  if (all_cartesian && topology.units.size() > kMaxCartesianKeys) {
    throw DomainError("more than 6 units cannot be addressed by Cartesian keys");
  }
  SelectivityMatrix m;
  for (const auto& k : topology.keys) m.keys.push_back(k.label);
  for (const auto& u : topology.units) m.units.push_back(u.id);
  ProfileOptions opts;
  opts.n_samples = n_samples;
  for (const auto& k : topology.keys) {
    std::vector<MatrixCell> row;
    for (const auto& u : topology.units) {
      MatrixCell c;
      c.decision = evaluate_unit(topology, u.id, k, opts);
      if (c.decision.snap_through) {
        c.entry = Entry::kDrive;
        c.value = c.decision.driving_peak;
      } else if (c.decision.anchoring_force && *c.decision.anchoring_force > 0.0 &&
                 *c.decision.anchoring_force >= thresholds.anchor_min) {
        c.entry = Entry::kAnchor;
        c.value = *c.decision.anchoring_force;
      }
      row.push_back(std::move(c));
    }
    m.cells.push_back(std::move(row));
  }

  m.pass = !topology.units.empty();
  for (std::size_t col = 0; col < m.units.size(); ++col) {
    std::string found;
    for (std::size_t row = 0; row < m.keys.size(); ++row) {
      if (one_hot_on(m, row, col, thresholds)) {
        found = m.keys[row];
        break;
      }
    }
    if (found.empty()) m.pass = false;
    m.assignment.push_back(found);
  }
  if (!m.pass) m.assignment.clear();
  return m;
}

Topology assign_keys(const Topology& topology, const SelectivityMatrix& matrix) {
  if (!matrix.pass) throw DomainError("cannot assign keys from a failing selectivity matrix");
  if (matrix.assignment.size() > kMaxCartesianKeys &&
      std::all_of(topology.keys.begin(), topology.keys.end(),
                  [](const FieldKey& k) { return is_cartesian(k.direction); })) {
    throw DomainError("more than 6 Cartesian keys cannot be assigned");
  }
  Topology out = topology;
  out.keys.clear();
  for (std::size_t i = 0; i < matrix.units.size(); ++i) {
    out.units[out.unit_index(matrix.units[i])].assigned_key = matrix.assignment[i];
    out.keys.push_back(topology.key(matrix.assignment[i]));
  }
  return out;
}

double fidelity(const SelectivityMatrix& matrix, double magnet_volume) {
  if (!matrix.pass) throw DomainError("fidelity needs a passing selectivity matrix");
  if (!(magnet_volume > 0.0)) throw DomainError("fidelity needs a positive magnet volume");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t col = 0; col < matrix.units.size(); ++col) {
    const auto& key = matrix.assignment[col];
    const auto row = static_cast<std::size_t>(std::find(matrix.keys.begin(), matrix.keys.end(), key) -
                                              matrix.keys.begin());
    const double drive = matrix.cells[row][col].value;
    double barrier = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < matrix.units.size(); ++c) {
      if (c != col) barrier = std::min(barrier, matrix.cells[row][c].decision.barrier_out);
    }
    if (!std::isfinite(barrier)) {
      // A lone unit: use its own barrier under the keys that anchor it.
      for (std::size_t r = 0; r < matrix.keys.size(); ++r) {
        if (matrix.cells[r][col].entry == Entry::kAnchor) {
          barrier = std::min(barrier, matrix.cells[r][col].decision.barrier_out);
        }
      }
    }
    if (!std::isfinite(barrier)) throw DomainError("fidelity undefined: no anchored entry");
    best = std::min(best, drive * barrier);
  }
  return best / std::pow(magnet_volume, 5.0 / 3.0);
}

double compactness(const Topology& topology) {
  double diameter = 0.0;
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  bool any = false;
  for (const auto& u : topology.units) {
    for (const auto& s : u.stators) {
      diameter = std::max(diameter, s.diameter());
      lo = lo.cwiseMin(s.position);
      hi = hi.cwiseMax(s.position);
      any = true;
    }
  }
  if (!any) throw DomainError("compactness needs at least one stator");
  if (!(diameter > 0.0)) throw DomainError("compactness needs stators with a physical size");
  return ((hi - lo).maxCoeff() + diameter) / diameter;
}

double control_entropy(const Topology& topology, const std::vector<FieldKey>& keys, int n_samples) {
  if (keys.empty()) throw DomainError("control entropy needs at least one key");
  ProfileOptions opts;
  opts.n_samples = n_samples;
  std::map<std::vector<std::size_t>, int> counts;
  for (const auto& k : keys) {
    std::vector<std::size_t> pattern;
    for (std::size_t i = 0; i < topology.units.size(); ++i) {
      if (evaluate_unit(topology, topology.units[i].id, k, opts).snap_through) pattern.push_back(i);
    }
    ++counts[pattern];
  }
  double h = 0.0;
  for (const auto& [pattern, c] : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(keys.size());
    h -= p * std::log2(p);
  }
  return h == 0.0 ? 0.0 : h;
}

Vec3 cone_direction(const Vec3& axis, double angle_deg, double phi_deg) {
  const Vec3 a = unit_vector(axis);
  const Vec3 e1 = any_perpendicular(a);
  const Vec3 e2 = a.cross(e1);
  const double th = angle_deg * std::numbers::pi / 180.0;
  const double ph = phi_deg * std::numbers::pi / 180.0;
  return unit_vector(std::cos(th) * a + std::sin(th) * (std::cos(ph) * e1 + std::sin(ph) * e2));
}

namespace {

struct Assigned {
  std::size_t unit;
  FieldKey key;
};

std::vector<Assigned> assigned_pairs(const Topology& t) {
  std::vector<Assigned> out;
  for (std::size_t i = 0; i < t.units.size(); ++i) {
    if (!t.units[i].assigned_key) throw DomainError("unit '" + t.units[i].id + "' has no assigned key");
    out.push_back({i, t.key(*t.units[i].assigned_key)});
  }
  if (out.empty()) throw DomainError("topology has no units");
  return out;
}

// Whether `key` drives exactly `target` and anchors every other unit.
bool row_one_hot(const Topology& t, std::size_t target, const FieldKey& key, const Thresholds& th,
                 int n_samples) {
  ProfileOptions opts;
  opts.n_samples = n_samples;
  for (std::size_t i = 0; i < t.units.size(); ++i) {
    const auto d = evaluate_unit(t, t.units[i].id, key, opts);
    if (i == target) {
      if (!d.snap_through || d.driving_peak < th.drive_min) return false;
    } else {
      if (d.snap_through || !d.anchoring_force || !(*d.anchoring_force > 0.0) ||
          *d.anchoring_force < th.anchor_min) {
        return false;
      }
    }
  }
  return true;
}

std::vector<Vec3> cone(const Vec3& axis, double angle_deg, int n_azimuths) {
  std::vector<Vec3> dirs{axis};
  for (int k = 0; k < n_azimuths; ++k) {
    dirs.push_back(cone_direction(axis, angle_deg, 360.0 * k / n_azimuths));
  }
  return dirs;
}

int count_violations(const Topology& t, const std::vector<Assigned>& pairs, double angle_deg,
                     const Thresholds& th, int n_azimuths, int n_samples, int* evaluations) {
  int bad = 0;
  for (const auto& p : pairs) {
    for (const auto& d : cone(p.key.direction, angle_deg, n_azimuths)) {
      FieldKey k = p.key;
      k.direction = d;
      if (!row_one_hot(t, p.unit, k, th, n_samples)) ++bad;
      if (evaluations) ++*evaluations;
    }
  }
  return bad;
}

}  // namespace

SensitivityReport sensitivity_sweep(const Topology& assigned, const Thresholds& thresholds,
                                    const SensitivityOptions& o) {
  if (o.n_trials < 1) throw DomainError("sensitivity sweep needs n_trials >= 1");
  if (o.n_azimuths < 8) throw DomainError("sensitivity sweep needs at least 8 cone azimuths");
  const auto pairs = assigned_pairs(assigned);

  SensitivityReport r;
  r.trials = o.n_trials;
  r.directions_per_key = o.n_azimuths + 1;

  std::vector<int> bad(static_cast<std::size_t>(o.n_trials), 0);
  std::vector<int> evals(static_cast<std::size_t>(o.n_trials), 0);
  parallel_for(static_cast<std::size_t>(o.n_trials), o.threads, [&](std::size_t trial) {
    std::seed_seq seq{static_cast<std::uint64_t>(o.seed), static_cast<std::uint64_t>(trial)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Topology t = assigned;
    for (auto& u : t.units) {
      const double radius = o.coax_frac * u.track.mover.diameter() * std::sqrt(uni(rng));
      const double phi = 2.0 * std::numbers::pi * uni(rng);
      const Vec3 e1 = any_perpendicular(u.track.axis);
      const Vec3 e2 = u.track.axis.cross(e1);
      const Vec3 shift = radius * (std::cos(phi) * e1 + std::sin(phi) * e2);
      u.track.origin += shift;
      u.track.mover = u.track.mover.translated(shift);
    }
    bad[trial] = count_violations(t, pairs, o.angle_deg, thresholds, o.n_azimuths, o.n_samples,
                                  &evals[trial]);
  });
  r.violations = std::accumulate(bad.begin(), bad.end(), 0);
  r.evaluations = std::accumulate(evals.begin(), evals.end(), 0);

  if (o.find_margin) {
    auto holds = [&](double angle) {
      return count_violations(assigned, pairs, angle, thresholds, o.n_azimuths, o.n_samples, nullptr) == 0;
    };
    // Coarse 1° scan in parallel, then bisection on the first break.
    constexpr int kMaxDeg = 89;
    std::vector<char> ok(kMaxDeg + 1, 1);
    parallel_for(kMaxDeg, o.threads, [&](std::size_t i) { ok[i + 1] = holds(static_cast<double>(i + 1)); });
    if (!holds(0.0)) {
      r.margin_deg = 0.0;
    } else {
      int first_bad = -1;
      for (int a = 1; a <= kMaxDeg; ++a) {
        if (!ok[static_cast<std::size_t>(a)]) {
          first_bad = a;
          break;
        }
      }
      if (first_bad < 0) {
        r.margin_deg = kMaxDeg;
      } else {
        double lo = first_bad - 1.0;
        double hi = first_bad;
        while (hi - lo > 1e-3) {
          const double mid = 0.5 * (lo + hi);
          if (holds(mid)) lo = mid;
          else hi = mid;
        }
        r.margin_deg = lo;
      }
    }
  }
  return r;
}

double cross_interference(const Topology& assigned, int n_samples) {
  const auto pairs = assigned_pairs(assigned);
  ProfileOptions opts;
  opts.n_samples = n_samples;
  double worst = 0.0;
  for (const auto& p : pairs) {
    const auto target = evaluate_unit(assigned, assigned.units[p.unit].id, p.key, opts);
    if (!target.snap_through) throw DomainError("cross interference needs a passing topology");
    FieldKey off = p.key;
    off.magnitude = 0.0;
    for (std::size_t i = 0; i < assigned.units.size(); ++i) {
      if (i == p.unit) continue;
      const auto& id = assigned.units[i].id;
      const double x = assigned.units[i].track.x_in;
      Topology alone = assigned;
      alone.units = {assigned.units[i]};
      alone.keys.clear();
      alone.units[0].assigned_key.reset();
      // coupling through the neighbours, with and without the key
      const double with_key = make_evaluator(assigned, id, p.key)->force(x) -
                              make_evaluator(alone, id, p.key)->force(x);
      const double without = make_evaluator(assigned, id, off)->force(x) -
                             make_evaluator(alone, id, off)->force(x);
      worst = std::max(worst, std::abs(with_key - without) / target.driving_peak);
    }
  }
  return worst;
}

std::vector<DesignReport> rank(std::vector<DesignReport> reports) {
  std::erase_if(reports, [](const DesignReport& r) { return !r.matrix.pass; });
  if (reports.empty()) throw DomainError("no passing design reports to rank");
  std::sort(reports.begin(), reports.end(), [](const DesignReport& a, const DesignReport& b) {
    if (a.fidelity != b.fidelity) return a.fidelity > b.fidelity;
    if (a.compactness != b.compactness) return a.compactness < b.compactness;
    if (a.entropy != b.entropy) return a.entropy > b.entropy;
    if (a.hash != b.hash) return a.hash < b.hash;
    return a.index < b.index;
  });
  return reports;
}

DesignResult run_design(const DesignConfig& config, unsigned threads) {
  const auto candidates = enumerate(config);
  DesignResult result;
  result.screened = candidates.size();
  result.reports.resize(candidates.size());
  parallel_for(candidates.size(), threads, [&](std::size_t i) {
    const auto& c = candidates[i];
    DesignReport r;
    r.index = c.index;
    r.hash = c.hash;
    r.matrix = selectivity_filter(c.topology, config.thresholds, config.n_samples);
    r.topology = c.topology;
    if (r.matrix.pass) {
      r.topology = assign_keys(c.topology, r.matrix);
      r.fidelity = fidelity(r.matrix, r.topology.magnet_volume());
      r.compactness = compactness(r.topology);
      r.entropy = control_entropy(r.topology, r.topology.keys, config.n_samples);
    }
    result.reports[i] = std::move(r);
  });
  const bool any = std::any_of(result.reports.begin(), result.reports.end(),
                               [](const DesignReport& r) { return r.matrix.pass; });
  if (any) result.ranked = rank(result.reports);
  return result;
}

std::string design_summary_csv(const DesignResult& result) {
  std::ostringstream out;
  out << "index,hash,pass,fidelity_N_J_per_m5,compactness_stator_diameters,entropy_bits,assignment\n";
  for (const auto& r : result.reports) {
    std::string assignment;
    for (std::size_t i = 0; i < r.matrix.assignment.size(); ++i) {
      if (i) assignment += ' ';
      assignment += r.matrix.units[i] + '=' + r.matrix.assignment[i];
    }
    out << r.index << ',' << r.hash << ',' << (r.matrix.pass ? 1 : 0) << ',' << format_double(r.fidelity)
        << ',' << format_double(r.compactness) << ',' << format_double(r.entropy) << ',' << assignment
        << '\n';
  }
  return out.str();
}

}  // namespace magceptor
