#pragma once

// Volumetric bus addressing: a dipole bus master selects a node through field
// magnitude (address) and a channel through field direction (control).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "magceptor/magnetocore.hpp"

namespace magceptor {

struct Channel {
  std::string label;
  Vec3 key_direction = Vec3::UnitX();

  bool operator==(const Channel&) const = default;
};

struct NodeSpec {
  std::string id;
  Vec3 position = Vec3::Zero();
  std::vector<Channel> channels;
  double threshold = 0.120;         // T
  double cone_half_angle = 20.0;    // deg

  void validate() const;
  bool operator==(const NodeSpec&) const = default;
};

using NodeGrid = std::vector<NodeSpec>;

void validate_grid(const NodeGrid& grid);

struct MasterDipole {
  Vec3 offset = Vec3::Zero();  // body frame, m
  Vec3 moment = Vec3::Zero();  // body frame, A·m²

  bool operator==(const MasterDipole&) const = default;
};

struct MasterPose {
  Vec3 position = Vec3::Zero();
  Mat3 orientation = Mat3::Identity();
  std::vector<MasterDipole> dipoles;

  void validate() const;
  bool operator==(const MasterPose&) const = default;
};

Vec3 master_field_at(const MasterPose& pose, const Vec3& point);

// A master whose dipoles sit at `offsets` (relative to `position`) and share
// one moment, solved so the field at `target` equals `field` exactly.
MasterPose calibrate_master(const std::vector<Vec3>& offsets, const Vec3& position,
                            const Vec3& target, const Vec3& field);

// Nearest channel within the cone, if |field| reaches the threshold.
std::optional<std::string> decode_node(const NodeSpec& node, const Vec3& field);

struct Command {
  MasterPose pose;
  std::string node;
  std::string channel;
  double dwell = 1.0;  // s

  void validate() const;
};

struct Event {
  double time = 0.0;
  std::string node;
  std::string channel;
  double magnitude = 0.0;  // T
  bool intended = false;
};

using EventLog = std::vector<Event>;

EventLog execute_command(const NodeGrid& grid, const Command& command, double time = 0.0);

struct TruthTable {
  std::vector<std::string> columns;  // "node:channel"
  std::vector<std::vector<int>> rows;
  std::vector<bool> exclusive;
  EventLog log;
};

// Commands run back to back, each starting when the previous dwell ends.
TruthTable truth_table(const NodeGrid& grid, const std::vector<Command>& commands);

std::string truth_table_csv(const TruthTable& table);
std::string event_log_csv(const EventLog& log);

struct ErrorRate {
  double rate = 0.0;
  bool no_events = false;
};

ErrorRate error_rate(const EventLog& log);

// Smallest offset along `axis` from `target` at which |field| drops below
// `threshold`, to 1e-6 m.
double min_spacing(const MasterPose& master, const Vec3& target, double threshold,
                   const Vec3& axis);

struct Noise {
  double angle_sigma_deg = 0.0;
  double magnitude_sigma = 0.0;  // T, at the intended node

  bool operator==(const Noise&) const = default;
};

struct EnduranceStats {
  int cycles = 0;
  int false_triggers = 0;  // cycles with an unintended event
  int misses = 0;          // cycles where the intended channel stayed silent
  int failures = 0;        // cycles with either
  double upper_one_sided = 0.0;  // 95% Clopper–Pearson, one-sided
  double upper_two_sided = 0.0;  // upper end of the 95% two-sided interval
};

// Upper Clopper–Pearson bound on the failure probability at `confidence`
// for `failures` in `n` trials, one-sided.
double clopper_pearson_upper(int failures, int n, double confidence);

EnduranceStats endurance_campaign(const NodeGrid& grid, const Command& command, int n_cycles,
                                  const Noise& noise, std::uint64_t seed);

// The node stays sealed when no event hits it before its first intended
// event and the pressure load does not exceed its anchoring margin.
bool sealing_check(const NodeSpec& node, double pressure_load, double anchoring_margin,
                   const EventLog& log);

// Frictionless energy-balance jet speed for an ejected mass; an upper bound
// (fluid viscosity is not modeled).
double jet_velocity(double energy_drop, double stroke, double ejected_mass);

struct CampaignCommand {
  std::string node;
  std::string channel;
  double dwell = 1.0;
  Vec3 offset = Vec3::Zero();  // master displacement from its calibrated spot

  bool operator==(const CampaignCommand&) const = default;
};

struct Campaign {
  std::string name;
  std::string note;
  NodeGrid grid;
  std::vector<Vec3> master_offsets;  // composite geometry, m
  double depth = 0.005;              // master height above the node plane, m
  double field = 0.120;              // calibration magnitude at the node, T
  std::vector<CampaignCommand> commands;
  Noise noise;
  int cycles = 0;  // endurance cycles per command; 0 = none
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const Campaign&) const = default;
};

// Master pose above the command's node, calibrated to the campaign field
// along the channel direction, then displaced by the command offset.
Command make_command(const Campaign& campaign, const CampaignCommand& c);

}  // namespace magceptor
