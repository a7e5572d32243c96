#include "magceptor/netbus.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <boost/math/distributions/beta.hpp>
#include <Eigen/LU>

#include "magceptor/format.hpp"
#include "magceptor/landscape.hpp"

namespace magceptor {

namespace {

// Relative tolerance so a field calibrated to exactly the threshold decodes.
bool reaches(double magnitude, double threshold) { return magnitude >= threshold * (1.0 - 1e-9); }

}  // namespace

namespace {

double angle_deg(const Vec3& a, const Vec3& b) {
  const double c = std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

}  // namespace

void NodeSpec::validate() const {
  if (id.empty()) throw DomainError("node id must not be empty");
  if (!position.allFinite()) throw DomainError("node '" + id + "' position must be finite");
  if (!(threshold > 0.0)) throw DomainError("node '" + id + "' threshold must be > 0");
  if (!(cone_half_angle > 0.0 && cone_half_angle < 90.0)) {
    throw DomainError("node '" + id + "' cone half-angle must be in (0, 90) degrees");
  }
  if (channels.empty()) throw DomainError("node '" + id + "' needs at least one channel");
  std::set<std::string> labels;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const auto& c = channels[i];
    if (!labels.insert(c.label).second) throw DomainError("node '" + id + "' repeats channel '" + c.label + "'");
    if (std::abs(c.key_direction.norm() - 1.0) > 1e-9) {
      throw DomainError("node '" + id + "' channel directions must be unit-norm");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if ((channels[j].key_direction - c.key_direction).norm() < 1e-9) {
        throw DomainError("node '" + id + "' has two channels with the same direction");
      }
    }
  }
}

void validate_grid(const NodeGrid& grid) {
  std::set<std::string> ids;
  for (const auto& n : grid) {
    n.validate();
    if (!ids.insert(n.id).second) throw DomainError("duplicate node '" + n.id + "'");
  }
}

void MasterPose::validate() const {
  if (dipoles.empty()) throw DomainError("bus master needs at least one dipole");
  double sum = 0.0;
  for (const auto& d : dipoles) sum += d.moment.norm();
  if (!(sum > 0.0)) throw DomainError("bus master moment must be non-zero");
}

Vec3 master_field_at(const MasterPose& pose, const Vec3& point) {
  Vec3 b = Vec3::Zero();
  for (const auto& d : pose.dipoles) {
    b += point_dipole_field(pose.orientation * d.moment, pose.position + pose.orientation * d.offset, point);
  }
  return b;
}

MasterPose calibrate_master(const std::vector<Vec3>& offsets, const Vec3& position,
                            const Vec3& target, const Vec3& field) {
  if (offsets.empty()) throw DomainError("bus master needs at least one dipole");
  if (!(field.norm() > 0.0)) throw DomainError("calibration field must be non-zero");
  // B(target) = Σ_i G_i m with G_i the point-dipole field tensor.
  Mat3 g = Mat3::Zero();
  for (const auto& off : offsets) {
    const Vec3 r = target - (position + off);
    const double d = r.norm();
    if (d <= kCoincidenceTol) throw SingularityError("calibration target coincides with a master dipole");
    const Vec3 u = r / d;
    g += kMu0Over4Pi / (d * d * d) * (3.0 * u * u.transpose() - Mat3::Identity());
  }
  const Eigen::FullPivLU<Mat3> lu(g);
  if (!lu.isInvertible()) throw DomainError("master geometry cannot produce the calibration field");
  const Vec3 m = lu.solve(field);
  MasterPose pose;
  pose.position = position;
  for (const auto& off : offsets) pose.dipoles.push_back(MasterDipole{off, m});
  return pose;
}

std::optional<std::string> decode_node(const NodeSpec& node, const Vec3& field) {
  const double mag = field.norm();
  if (!reaches(mag, node.threshold) || mag == 0.0) return std::nullopt;
  const Channel* best = nullptr;
  double best_angle = 0.0;
  for (const auto& c : node.channels) {
    const double a = angle_deg(field, c.key_direction);
    if (!best || a < best_angle) {
      best = &c;
      best_angle = a;
    }
  }
  if (!best || best_angle > node.cone_half_angle) return std::nullopt;
  return best->label;
}

void Command::validate() const {
  pose.validate();
  if (!(dwell > 0.0)) throw DomainError("command dwell must be > 0");
}

EventLog execute_command(const NodeGrid& grid, const Command& command, double time) {
  command.validate();
  EventLog log;
  for (const auto& n : grid) {
    const Vec3 b = master_field_at(command.pose, n.position);
    if (auto ch = decode_node(n, b)) {
      log.push_back(Event{time, n.id, *ch, b.norm(), n.id == command.node && *ch == command.channel});
    }
  }
  return log;
}

TruthTable truth_table(const NodeGrid& grid, const std::vector<Command>& commands) {
  validate_grid(grid);
  TruthTable t;
  for (const auto& n : grid) {
    for (const auto& c : n.channels) t.columns.push_back(n.id + ':' + c.label);
  }
  double time = 0.0;
  for (const auto& cmd : commands) {
    const auto events = execute_command(grid, cmd, time);
    std::vector<int> row(t.columns.size(), 0);
    for (const auto& e : events) {
      const auto it = std::find(t.columns.begin(), t.columns.end(), e.node + ':' + e.channel);
      row[static_cast<std::size_t>(it - t.columns.begin())] = 1;
    }
    t.exclusive.push_back(events.size() == 1 && events.front().intended);
    t.rows.push_back(std::move(row));
    t.log.insert(t.log.end(), events.begin(), events.end());
    time += cmd.dwell;
  }
  return t;
}

std::string truth_table_csv(const TruthTable& table) {
  std::ostringstream out;
  out << "command";
  for (const auto& c : table.columns) out << ',' << c;
  out << ",exclusive\n";
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    out << i;
    for (int v : table.rows[i]) out << ',' << v;
    out << ',' << (table.exclusive[i] ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string event_log_csv(const EventLog& log) {
  std::ostringstream out;
  out << "t_s,node,channel,B_T,intended\n";
  for (const auto& e : log) {
    out << format_double(e.time) << ',' << e.node << ',' << e.channel << ',' << format_double(e.magnitude)
        << ',' << (e.intended ? 1 : 0) << '\n';
  }
  return out.str();
}

ErrorRate error_rate(const EventLog& log) {
  if (log.empty()) return ErrorRate{0.0, true};
  const auto bad = std::count_if(log.begin(), log.end(), [](const Event& e) { return !e.intended; });
  return ErrorRate{static_cast<double>(bad) / static_cast<double>(log.size()), false};
}

double min_spacing(const MasterPose& master, const Vec3& target, double threshold, const Vec3& axis) {
  if (!(threshold > 0.0)) throw DomainError("threshold must be > 0");
  const Vec3 dir = unit_vector(axis);
  auto above = [&](double t) { return reaches(master_field_at(master, target + t * dir).norm(), threshold); };
  if (!above(0.0)) throw DomainError("threshold is not reached at the target");
  // Walk outward until the field drops below threshold, then bisect.
  double step = 1e-4;
  double lo = 0.0;
  double hi = step;
  while (above(hi)) {
    lo = hi;
    hi += step;
    if (hi > 100.0) throw DomainError("field never drops below threshold along this axis");
  }
  while (hi - lo > 1e-7) {
    const double mid = 0.5 * (lo + hi);
    if (above(mid)) lo = mid;
    else hi = mid;
  }
  return hi;
}

double clopper_pearson_upper(int failures, int n, double confidence) {
  if (n < 1 || failures < 0 || failures > n) throw DomainError("invalid binomial counts");
  if (!(confidence > 0.0 && confidence < 1.0)) throw DomainError("confidence must be in (0, 1)");
  if (failures == n) return 1.0;
  const boost::math::beta_distribution<double> beta(failures + 1.0, static_cast<double>(n - failures));
  return boost::math::quantile(beta, confidence);
}

EnduranceStats endurance_campaign(const NodeGrid& grid, const Command& command, int n_cycles,
                                  const Noise& noise, std::uint64_t seed) {
  if (n_cycles < 1) throw DomainError("endurance campaign needs n_cycles >= 1");
  if (noise.angle_sigma_deg < 0.0 || noise.magnitude_sigma < 0.0) {
    throw DomainError("noise sigmas must be >= 0");
  }
  validate_grid(grid);
  command.validate();
  const auto target = std::find_if(grid.begin(), grid.end(), [&](const NodeSpec& n) { return n.id == command.node; });
  if (target == grid.end()) throw DomainError("command targets unknown node '" + command.node + "'");
  const double nominal = master_field_at(command.pose, target->position).norm();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 2.0 * std::numbers::pi);

  EnduranceStats s;
  s.cycles = n_cycles;
  for (int i = 0; i < n_cycles; ++i) {
    Command c = command;
    const double tilt = noise.angle_sigma_deg * gauss(rng) * std::numbers::pi / 180.0;
    const double phi = uni(rng);
    const double scale = nominal > 0.0 ? (nominal + noise.magnitude_sigma * gauss(rng)) / nominal : 1.0;
    for (auto& d : c.pose.dipoles) {
      if (d.moment.norm() == 0.0) continue;
      const Vec3 e1 = any_perpendicular(d.moment);
      const Vec3 e2 = d.moment.normalized().cross(e1);
      const Vec3 rot_axis = std::cos(phi) * e1 + std::sin(phi) * e2;
      d.moment = scale * (Eigen::AngleAxisd(tilt, rot_axis) * d.moment);
    }
    const auto log = execute_command(grid, c, i * c.dwell);
    const bool false_trigger = std::any_of(log.begin(), log.end(), [](const Event& e) { return !e.intended; });
    const bool hit = std::any_of(log.begin(), log.end(), [](const Event& e) { return e.intended; });
    s.false_triggers += false_trigger ? 1 : 0;
    s.misses += hit ? 0 : 1;
    s.failures += (false_trigger || !hit) ? 1 : 0;
  }
  s.upper_one_sided = clopper_pearson_upper(s.failures, n_cycles, 0.95);
  s.upper_two_sided = clopper_pearson_upper(s.failures, n_cycles, 0.975);
  return s;
}

bool sealing_check(const NodeSpec& node, double pressure_load, double anchoring_margin,
                   const EventLog& log) {
  if (pressure_load > anchoring_margin) return false;
  double first_intended = std::numeric_limits<double>::infinity();
  for (const auto& e : log) {
    if (e.node == node.id && e.intended) first_intended = std::min(first_intended, e.time);
  }
  for (const auto& e : log) {
    if (e.node == node.id && !e.intended && e.time < first_intended) return false;
  }
  return true;
}

double jet_velocity(double energy_drop, double stroke, double ejected_mass) {
  return ejection_velocity(energy_drop, stroke, ejected_mass, 0.0);
}

void Campaign::validate() const {
  validate_grid(grid);
  if (master_offsets.empty()) throw DomainError("campaign master needs at least one dipole");
  if (!(depth > 0.0)) throw DomainError("campaign depth must be > 0");
  if (!(field > 0.0)) throw DomainError("campaign calibration field must be > 0");
  if (cycles < 0) throw DomainError("campaign cycles must be >= 0");
  if (noise.angle_sigma_deg < 0.0 || noise.magnitude_sigma < 0.0) throw DomainError("noise sigmas must be >= 0");
  for (const auto& c : commands) {
    const auto n = std::find_if(grid.begin(), grid.end(), [&](const NodeSpec& s) { return s.id == c.node; });
    if (n == grid.end()) throw DomainError("command targets unknown node '" + c.node + "'");
    const bool has = std::any_of(n->channels.begin(), n->channels.end(),
                                 [&](const Channel& ch) { return ch.label == c.channel; });
    if (!has) throw DomainError("node '" + c.node + "' has no channel '" + c.channel + "'");
    if (!(c.dwell > 0.0)) throw DomainError("command dwell must be > 0");
  }
}

Command make_command(const Campaign& campaign, const CampaignCommand& c) {
  const auto n = std::find_if(campaign.grid.begin(), campaign.grid.end(),
                              [&](const NodeSpec& s) { return s.id == c.node; });
  if (n == campaign.grid.end()) throw DomainError("command targets unknown node '" + c.node + "'");
  const auto ch = std::find_if(n->channels.begin(), n->channels.end(),
                               [&](const Channel& x) { return x.label == c.channel; });
  if (ch == n->channels.end()) throw DomainError("node '" + c.node + "' has no channel '" + c.channel + "'");
  const Vec3 above = n->position + campaign.depth * Vec3::UnitZ();
  Command cmd;
  cmd.pose = calibrate_master(campaign.master_offsets, above, n->position, campaign.field * ch->key_direction);
  cmd.pose.position += c.offset;
  cmd.node = c.node;
  cmd.channel = c.channel;
  cmd.dwell = c.dwell;
  return cmd;
}

}  // namespace magceptor
