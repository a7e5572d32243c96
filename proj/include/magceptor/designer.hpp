#pragma once

// Discrete inverse design: enumerate stator/mover placements on a lattice,
// screen them with the one-hot selectivity filter, score and rank survivors.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "magceptor/landscape.hpp"

namespace magceptor {

using Site = std::array<int, 3>;

struct Lattice {
  double spacing = 0.0;                      // m
  std::array<std::array<int, 2>, 3> extents{};  // inclusive [lo, hi] per axis
  std::vector<Vec3> orientations;            // allowed stator moment directions
  std::vector<Vec3> track_axes;              // allowed outward mover directions

  void validate() const;
  bool contains(const Site& s) const;
  Vec3 position(const Site& s) const { return spacing * Vec3(s[0], s[1], s[2]); }

  bool operator==(const Lattice&) const = default;
};

std::vector<Vec3> cartesian_directions();

// One unit on the lattice: stator at `stator`, mover latched one lattice step
// along track_axes[axis], stator moment along orientations[orientation].
struct Placement {
  Site stator{};
  int orientation = 0;
  int axis = 0;

  auto operator<=>(const Placement&) const = default;
};

// How placements become physical units.
struct UnitTemplate {
  MagnetSpec stator;
  MagnetSpec mover;
  double stroke = 0.0;  // m, outward from the latched inner position
  double mass = 0.0;    // kg
  double friction_force = 0.0;

  bool operator==(const UnitTemplate&) const = default;
};

struct Thresholds {
  double drive_min = 0.0;   // N
  double anchor_min = 0.0;  // N

  bool operator==(const Thresholds&) const = default;
};

struct DesignConfig {
  std::string name = "design";
  std::string note;
  Lattice lattice;
  int n_units = 1;
  UnitTemplate unit;
  std::vector<FieldKey> keys;
  Thresholds thresholds;
  int n_samples = kDefaultSamples;
  std::size_t budget = 100;
  std::uint64_t seed = 1;
  std::size_t top_k = 3;

  void validate() const;
  bool operator==(const DesignConfig&) const = default;
};

// Default key set: ±x, ±y, ±z at `magnitude`.
std::vector<FieldKey> cartesian_keys(double magnitude);

struct Candidate {
  std::size_t index = 0;  // position in the enumeration stream
  std::vector<Placement> placements;
  Topology topology;
  std::uint64_t hash = 0;
};

// Canonical text of a placement set under the lattice symmetry group.
std::string canonical_form(const Lattice& lattice, std::vector<Placement> placements);

Topology build_topology(const DesignConfig& config, const std::vector<Placement>& placements,
                        const std::string& name);

// Symmetry-deduplicated candidates, at most config.budget of them. The space
// is walked exhaustively when it is small, otherwise sampled with config.seed.
std::vector<Candidate> enumerate(const DesignConfig& config);

enum class Entry { kDrive, kAnchor, kWeak };

std::string_view to_string(Entry e);

struct MatrixCell {
  Entry entry = Entry::kWeak;
  double value = 0.0;  // driving_peak for DRIVE, anchoring force for ANCHOR, else 0
  LandscapeDecision decision;
};

struct SelectivityMatrix {
  std::vector<std::string> keys;   // row labels
  std::vector<std::string> units;  // column ids
  std::vector<std::vector<MatrixCell>> cells;
  bool pass = false;
  // key label per unit (same order as `units`) when pass is true.
  std::vector<std::string> assignment;

  const MatrixCell& cell(std::string_view key, std::string_view unit) const;
};

inline constexpr std::size_t kMaxCartesianKeys = 6;

// Evaluates every key against every unit. A key is one-hot on unit u when it
// DRIVEs u with driving_peak >= drive_min and ANCHORs every other unit with
// margin >= anchor_min. Passes when each unit has its own one-hot key; the
// first such key in key order is assigned.
SelectivityMatrix selectivity_filter(const Topology& topology, const Thresholds& thresholds,
                                     int n_samples = kDefaultSamples);

// The topology with only the assigned keys kept and each unit's
// assigned_key set. Throws DomainError for a failing matrix.
Topology assign_keys(const Topology& topology, const SelectivityMatrix& matrix);

// min over assigned keys of target driving_peak × min non-target barrier,
// divided by V^(5/3) for total magnet volume V. N·J/m⁵, scale-free.
double fidelity(const SelectivityMatrix& matrix, double magnet_volume);

// Longest bounding-box edge over the stator centers plus one stator
// diameter, in stator diameters. A lone stator scores 1.
double compactness(const Topology& topology);

// Shannon entropy (bits) of key -> snap-through-set patterns, keys uniform.
double control_entropy(const Topology& topology, const std::vector<FieldKey>& keys,
                       int n_samples = kDefaultSamples);

struct SensitivityOptions {
  double coax_frac = 0.10;
  double angle_deg = 20.0;
  int n_trials = 100;
  std::uint64_t seed = 1;
  int n_azimuths = 8;  // cone directions besides the nominal one
  int n_samples = kDefaultSamples;
  bool find_margin = true;
  unsigned threads = 0;  // 0 = default
};

struct SensitivityReport {
  int trials = 0;
  int directions_per_key = 0;
  int evaluations = 0;
  int violations = 0;
  double margin_deg = 0.0;  // largest cone half-angle keeping the pattern
};

// The assigned topology (each unit has assigned_key) is replayed with
// random mover lateral offsets and keys tilted over a cone.
SensitivityReport sensitivity_sweep(const Topology& assigned, const Thresholds& thresholds,
                                    const SensitivityOptions& options);

// Key direction tilted by `angle_deg` from `axis` toward azimuth `phi_deg`.
Vec3 cone_direction(const Vec3& axis, double angle_deg, double phi_deg);

// How much a key reaches a non-target mover through its neighbours. For each
// assigned key and non-target unit j, c(B) = F_j(x_in) in the full topology
// minus F_j(x_in) with unit j alone; the score is max |c(key) - c(0)| over
// the target's driving_peak. Units far apart score 0.
double cross_interference(const Topology& assigned, int n_samples = kDefaultSamples);

struct DesignReport {
  std::size_t index = 0;
  std::uint64_t hash = 0;
  Topology topology;  // with assigned keys when passing
  SelectivityMatrix matrix;
  double fidelity = 0.0;
  double compactness = 0.0;
  double entropy = 0.0;
  std::optional<SensitivityReport> sensitivity;
};

// Orders passing reports by fidelity (desc), then compactness (asc), then
// entropy (desc), then hash. Throws DomainError when none pass.
std::vector<DesignReport> rank(std::vector<DesignReport> reports);

struct DesignResult {
  std::size_t screened = 0;
  std::vector<DesignReport> reports;  // every candidate, enumeration order
  std::vector<DesignReport> ranked;   // passing only
};

// Enumerate, screen and score; candidate evaluation runs on `threads`
// workers with results merged in enumeration order.
DesignResult run_design(const DesignConfig& config, unsigned threads = 0);

// CSV: one row per screened candidate.
std::string design_summary_csv(const DesignResult& result);

}  // namespace magceptor
