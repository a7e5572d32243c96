#pragma once

// Physical finite-state machine: broadcast pulses are decoded into unit
// activations, rectified into counter/bit state, and checked by AND gates.

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "magceptor/landscape.hpp"

namespace magceptor {

struct Pulse {
  FieldKey key;
  double duration = 0.0;  // s
  double t_start = 0.0;   // s

  bool operator==(const Pulse&) const = default;
};

using BroadcastProgram = std::vector<Pulse>;

// Program text: statements separated by newlines or ';'.
//   LABEL MAGNITUDE DURATION [@START]   e.g.  -x 27mT 50ms
//   off DURATION                        field-off gap
//   repeat N { ... }
// Magnitudes take T or mT, durations s or ms; '#' starts a comment.
// Statements without @START begin where the previous pulse ended.
BroadcastProgram parse_program(std::string_view text);

// Canonical text that parses back to an identical program.
std::string serialize_program(const BroadcastProgram& program);

void validate_program(const BroadcastProgram& program);

enum class UnitRole { kAccumulator, kBuffer };

std::string_view to_string(UnitRole r);
UnitRole unit_role_from_string(std::string_view name);

struct FsmUnit {
  std::string id;
  UnitRole role = UnitRole::kAccumulator;
  std::optional<int> max_count;  // accumulators only; none = unbounded
  std::optional<std::string> reset_key;

  bool operator==(const FsmUnit&) const = default;
};

// AND-tree node. Leaves test one unit (value == / >= threshold) or whether
// another gate has already fired.
struct GateNode {
  enum class Kind { kAnd, kEquals, kAtLeast, kFired };

  Kind kind = Kind::kAnd;
  std::string ref;  // unit id, or gate name for kFired
  int value = 0;
  std::vector<GateNode> children;

  static GateNode all_of(std::vector<GateNode> children);
  static GateNode equals(std::string unit, int value);
  static GateNode at_least(std::string unit, int value);
  static GateNode fired(std::string gate);

  bool operator==(const GateNode&) const = default;
};

struct GateExpr {
  std::string name;
  GateNode expression;
  std::string output_action;

  bool operator==(const GateExpr&) const = default;
};

struct CrankCoupler {
  std::vector<std::string> units;
  double stroke_to_angle = 0.0;  // deg per activation
  std::map<std::string, double, std::less<>> key_sign;  // default +1
  double lever_arm = 0.0;  // m, crank radius for torque estimates; 0 = unset

  void validate() const;
  bool operator==(const CrankCoupler&) const = default;
};

using KeyMap = std::map<std::string, std::vector<std::string>, std::less<>>;

struct MachineDef {
  std::string name;
  std::string note;
  std::vector<FsmUnit> units;
  // Declared decoding when no topology is attached.
  KeyMap key_map;
  // Physical decoding through landscape decisions; unit ids must match.
  std::shared_ptr<const Topology> topology;
  std::optional<std::string> topology_file;  // as written in the machine file
  std::vector<GateExpr> gates;
  double external_load = 0.0;  // N
  std::optional<CrankCoupler> crank;
  int n_samples = kDefaultSamples;

  bool physical() const { return topology != nullptr; }
  std::size_t unit_index(std::string_view id) const;
  void validate() const;
};

using StateTuple = std::vector<int>;

StateTuple initial_state(const MachineDef& machine);

// Units activated by one pulse. Zero-magnitude pulses activate nothing.
std::set<std::string> decode_pulse(const MachineDef& machine, const StateTuple& state,
                                   const Pulse& pulse);

StateTuple apply_activation(const MachineDef& machine, const StateTuple& state,
                            const std::set<std::string>& activated);

// Gates whose expression holds in `state`; `fired` lists gates that have
// already fired earlier in the run.
std::set<std::string> evaluate_gates(const MachineDef& machine, const StateTuple& state,
                                     const std::set<std::string>& fired = {});

// Declared-mode programs must only use mapped labels (or field-off gaps).
void check_program_keys(const MachineDef& machine, const BroadcastProgram& program);

struct TraceRow {
  double time = 0.0;
  std::string key;
  std::set<std::string> activated;
  StateTuple state;
  std::vector<std::string> fired;  // gate names, rising edges at this row
  std::vector<std::string> actions;
};

using Trace = std::vector<TraceRow>;

Trace run(const MachineDef& machine, const BroadcastProgram& program);

std::string trace_csv(const MachineDef& machine, const Trace& trace);

// Whether the external load is held: load <= anchoring margin of every
// anchored unit under a field-off key.
bool holds_external_load(const MachineDef& machine);

struct CrankPoint {
  double time = 0.0;
  double angle = 0.0;  // deg
};

std::vector<CrankPoint> crank_trace(const MachineDef& machine, const BroadcastProgram& program,
                                    const CrankCoupler& coupler);

// max | |angle_k| - k·step | over the activation instants k = 1, 2, ...
double phase_deviation(const std::vector<CrankPoint>& trace, double step);

struct TorqueEstimate {
  double torque = 0.0;          // N·mm
  double baseline = 0.0;        // N·mm
  double amplification = 0.0;
};

// driving force (N) × lever (m), in N·mm.
double torque_from_force(double force, double lever_arm);

// Torque of the unit's snap-through force on a lever, against the largest
// torque the same mover could feel as a free dipole in the key, |m||B|.
TorqueEstimate torque_estimate(const Topology& topology, std::string_view unit_id,
                               const FieldKey& key, double lever_arm,
                               int n_samples = kDefaultSamples);

}  // namespace magceptor
