#pragma once

// One-dimensional energy landscapes of a track-constrained mover.
//
// A mover translates along its track between two hard stops. Its moment
// either stays fixed, or (the default) turns freely to align with the local
// field, so a uniform key reshapes the landscape through the mover's
// orientation while contributing no translational force itself. All other
// movers are frozen at their latched positions with their moments relaxed
// once against the key, the stators and each other.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "magceptor/magnetocore.hpp"

namespace magceptor {

enum class MoverOrientation { kAligning, kFixed };

std::string_view to_string(MoverOrientation o);
MoverOrientation mover_orientation_from_string(std::string_view name);

struct MoverTrack {
  Vec3 axis = Vec3::UnitX();  // unit; +x is "outward"
  Vec3 origin = Vec3::Zero();
  double x_in = 0.0;
  double x_out = 0.0;
  MagnetSource mover;  // pose/moment template; position is overwritten per x
  double mass = 0.0;   // kg
  double friction_force = 0.0;  // N, Coulomb
  MoverOrientation orientation = MoverOrientation::kAligning;

  double stroke() const { return x_out - x_in; }
  Vec3 position_at(double x) const { return origin + x * axis; }
  void validate() const;

  bool operator==(const MoverTrack&) const = default;
};

struct UnitTriplet {
  std::string id;
  std::vector<MagnetSource> stators;
  MoverTrack track;
  std::optional<std::string> assigned_key;

  void validate() const;
  bool operator==(const UnitTriplet&) const = default;
};

struct Topology {
  std::string name;
  std::string note;  // free text, e.g. which numbers are calibration targets
  double scale = 1.0;
  std::vector<UnitTriplet> units;
  std::vector<FieldKey> keys;

  const UnitTriplet& unit(std::string_view id) const;
  std::size_t unit_index(std::string_view id) const;
  const FieldKey& key(std::string_view label) const;
  bool has_key(std::string_view label) const;

  // Validates unit invariants and that no two magnets coincide.
  void validate() const;
  double magnet_volume() const;
  // Geometric scaling about the origin: positions and sizes by s, moments and
  // masses by s³. Keys are unchanged.
  Topology scaled(double s) const;
  // Rigid rotation of every source and track about the origin.
  Topology rotated(const Mat3& r) const;

  bool operator==(const Topology&) const = default;
};

// x positions per unit id; units not listed sit at their inner stop.
using MoverPositions = std::map<std::string, double, std::less<>>;

struct ProfileSample {
  double x = 0.0;       // m
  double energy = 0.0;  // J
  double force = 0.0;   // N, axial, positive = outward
};

enum class Stability { kStable, kUnstable };

struct Equilibrium {
  double x = 0.0;
  Stability stability = Stability::kStable;
  bool at_stop = false;  // held against a hard stop rather than force-free
};

// Evaluates the target mover's energy and axial force at any track position
// against a frozen background.
class LandscapeEvaluator {
 public:
  LandscapeEvaluator(std::vector<MagnetSource> background, FieldKey key, MoverTrack track);

  double energy(double x) const;
  double force(double x) const;
  ProfileSample evaluate(double x) const;
  // The mover at x with its relaxed moment.
  MagnetSource mover_at(double x) const;

  const MoverTrack& track() const { return track_; }
  const FieldKey& key() const { return key_; }
  const std::vector<MagnetSource>& background() const { return background_; }

 private:
  Vec3 background_field(const Vec3& p) const;

  std::vector<MagnetSource> background_;
  FieldKey key_;
  MoverTrack track_;
  double background_energy_ = 0.0;
};

struct LandscapeProfile {
  std::string unit_id;
  FieldKey key;
  double x_in = 0.0;
  double x_out = 0.0;
  std::vector<ProfileSample> samples;
  std::vector<Equilibrium> equilibria;  // filled by refine_equilibria
  bool refined = false;
  // Present for profiles produced by sample_profile; synthetic profiles
  // built from samples alone refine by linear interpolation.
  std::shared_ptr<const LandscapeEvaluator> evaluator;

  double energy_at(double x) const;
  double force_at(double x) const;
};

struct ProfileOptions {
  int n_samples = 256;
  MoverPositions positions;
};

inline constexpr int kDefaultSamples = 256;
inline constexpr int kMinSamples = 16;

// Relaxes the other movers and builds the evaluator for `unit_id` under `key`.
std::shared_ptr<const LandscapeEvaluator> make_evaluator(const Topology& topology,
                                                         std::string_view unit_id,
                                                         const FieldKey& key,
                                                         const MoverPositions& positions = {});

LandscapeProfile sample_profile(const Topology& topology, std::string_view unit_id,
                                const FieldKey& key, const ProfileOptions& options = {});

LandscapeProfile refine_equilibria(LandscapeProfile profile);

enum class LandscapeClass { kMonostableInner, kMonostableOuter, kBistable, kDegenerate };

std::string_view to_string(LandscapeClass c);

struct LandscapeDecision {
  LandscapeClass cls = LandscapeClass::kDegenerate;
  bool degenerate = false;
  bool bistable = false;
  bool snap_through = false;
  double barrier_out = 0.0;                // J, from the inner basin
  std::optional<double> anchoring_force;   // N, signed toward x_in
  double driving_peak = 0.0;               // N, max outward force
  std::optional<double> inner_equilibrium;  // m
  std::optional<double> barrier_crest;      // m
};

LandscapeDecision decide(const LandscapeProfile& profile, double friction_force = 0.0);

// Full pipeline: sample, refine, decide, with the unit's own friction.
LandscapeDecision evaluate_unit(const Topology& topology, std::string_view unit_id,
                                const FieldKey& key, const ProfileOptions& options = {});

// Minimum restoring force over the inner basin. Throws DomainError when the
// unit has no stable inner equilibrium under this key.
double anchoring_margin(const Topology& topology, std::string_view unit_id, const FieldKey& key,
                        const ProfileOptions& options = {});

// Energy-balance exit speed: sqrt(2 (ΔU - f·stroke) / m).
double ejection_velocity(double energy_drop, double stroke, double mass, double friction_force);
double ejection_velocity(const LandscapeProfile& profile, double mass, double friction_force);

// Peak driving force per total magnet volume, in mN/mm³.
double force_density(double driving_peak, double magnet_volume);
double force_density(const Topology& topology, const std::vector<LandscapeDecision>& decisions);

// CSV with columns x_m,U_J,F_N.
std::string profile_csv(const LandscapeProfile& profile);

}  // namespace magceptor
