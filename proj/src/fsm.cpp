#include "magceptor/fsm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <sstream>

#include "magceptor/format.hpp"

namespace magceptor {

// ---------------------------------------------------------------------------
// Program text

namespace {

struct Token {
  std::string text;
  int line = 0;
};

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  int line = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '#') {
      while (i < text.size() && text[i] != '\n') ++i;
    } else if (c == '\n') {
      out.push_back({";", line});
      ++line;
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == ';' || c == '{' || c == '}') {
      out.push_back({std::string(1, c), line});
      ++i;
    } else {
      std::size_t j = i;
      while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])) && text[j] != ';' &&
             text[j] != '{' && text[j] != '}' && text[j] != '#') {
        ++j;
      }
      out.push_back({std::string(text.substr(i, j - i)), line});
      i = j;
    }
  }
  return out;
}

[[noreturn]] void fail(const Token& t, const std::string& what) {
  throw ParseError("program line " + std::to_string(t.line) + ": " + what);
}

// Splits "27mT" into 27 and "mT" and converts to SI via `units`.
double quantity(const Token& t, std::initializer_list<std::pair<const char*, double>> units) {
  std::string_view s = t.text;
  std::size_t end = s.size();
  while (end > 0 && std::isalpha(static_cast<unsigned char>(s[end - 1]))) --end;
  const std::string_view number = s.substr(0, end);
  const std::string_view unit = s.substr(end);
  double v = 0.0;
  try {
    v = parse_double(number);
  } catch (const ParseError&) {
    fail(t, "bad number '" + std::string(s) + "'");
  }
  if (unit.empty()) return v;
  for (const auto& [name, factor] : units) {
    if (unit == name) return v * factor;
  }
  fail(t, "unknown unit in '" + std::string(s) + "'");
}

double duration_of(const Token& t) { return quantity(t, {{"s", 1.0}, {"ms", 1e-3}}); }
double magnitude_of(const Token& t) { return quantity(t, {{"T", 1.0}, {"mT", 1e-3}}); }

class ProgramParser {
 public:
  explicit ProgramParser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  BroadcastProgram parse() {
    BroadcastProgram out;
    block(out, false);
    return out;
  }

 private:
  bool at_end() const { return pos_ >= tokens_.size(); }
  const Token& peek() const { return tokens_[pos_]; }
  const Token& take(const char* what) {
    if (at_end()) {
      throw ParseError(std::string("program: unexpected end of text, expected ") + what);
    }
    return tokens_[pos_++];
  }

  void block(BroadcastProgram& out, bool nested) {
    while (!at_end()) {
      const Token& t = peek();
      if (t.text == ";") {
        ++pos_;
      } else if (t.text == "}") {
        if (!nested) fail(t, "unmatched '}'");
        ++pos_;
        return;
      } else {
        statement(out);
      }
    }
    if (nested) throw ParseError("program: missing '}'");
  }

  void statement(BroadcastProgram& out) {
    const Token& head = take("statement");
    if (head.text == "repeat") {
      const Token& count = take("repeat count");
      int n = 0;
      try {
        const double v = parse_double(count.text);
        if (v != std::floor(v) || v < 0 || v > 1e6) throw ParseError("");
        n = static_cast<int>(v);
      } catch (const ParseError&) {
        fail(count, "repeat count must be a non-negative integer");
      }
      while (!at_end() && peek().text == ";") ++pos_;
      const Token& open = take("'{'");
      if (open.text != "{") fail(open, "expected '{' after repeat count");
      BroadcastProgram body;
      const double saved = cursor_;
      block(body, true);
      // Replay the body n times by its gaps and durations, so each copy starts
      // exactly where the previous one ended.
      const double body_end = cursor_;
      cursor_ = saved;
      for (int r = 0; r < n; ++r) {
        double prev = saved;
        for (Pulse p : body) {
          cursor_ += p.t_start - prev;
          prev = p.t_start + p.duration;
          p.t_start = cursor_;
          cursor_ += p.duration;
          out.push_back(p);
        }
        cursor_ += body_end - prev;
      }
      return;
    }

    Pulse p;
    if (head.text == "off") {
      p.key = FieldKey{"off", Vec3::UnitX(), 0.0};
      p.duration = duration_of(take("duration"));
    } else {
      Vec3 dir;
      try {
        dir = direction_from_label(head.text);
      } catch (const ParseError&) {
        fail(head, "unknown key label '" + head.text + "'");
      }
      const double mag = magnitude_of(take("magnitude"));
      if (mag < 0.0) fail(head, "negative magnitude");
      p.key = FieldKey{head.text, dir, mag};
      p.duration = duration_of(take("duration"));
    }
    if (!(p.duration > 0.0)) fail(head, "pulse duration must be > 0");
    p.t_start = cursor_;
    if (!at_end() && !peek().text.empty() && peek().text[0] == '@') {
      const Token& at = take("start");
      Token bare = at;
      bare.text = at.text.substr(1);
      p.t_start = duration_of(bare);
      if (p.t_start < cursor_) fail(at, "pulse overlaps the previous one");
    }
    cursor_ = p.t_start + p.duration;
    out.push_back(p);
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  double cursor_ = 0.0;
};

}  // namespace

void validate_program(const BroadcastProgram& program) {
  double end = -std::numeric_limits<double>::infinity();
  for (const auto& p : program) {
    if (!(p.duration > 0.0)) throw DomainError("pulse duration must be > 0");
    if (p.t_start < 0.0) throw DomainError("pulse start must be >= 0");
    if (p.t_start < end) throw DomainError("pulses overlap or are out of order");
    p.key.validate();
    end = p.t_start + p.duration;
  }
}

BroadcastProgram parse_program(std::string_view text) {
  auto program = ProgramParser(tokenize(text)).parse();
  try {
    validate_program(program);
  } catch (const DomainError& e) {
    throw ParseError(std::string("program: ") + e.what());
  }
  return program;
}

std::string serialize_program(const BroadcastProgram& program) {
  std::string out;
  for (const auto& p : program) {
    if (p.key.label == "off" && p.key.magnitude == 0.0) {
      out += "off";
    } else {
      out += p.key.label + ' ' + format_double_shortest(p.key.magnitude) + 'T';
    }
    out += ' ' + format_double_shortest(p.duration) + "s @" + format_double_shortest(p.t_start) + "s\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Machine

std::string_view to_string(UnitRole r) { return r == UnitRole::kAccumulator ? "accumulator" : "buffer"; }

UnitRole unit_role_from_string(std::string_view name) {
  if (name == "accumulator") return UnitRole::kAccumulator;
  if (name == "buffer") return UnitRole::kBuffer;
  throw ParseError("unknown unit role '" + std::string(name) + "'");
}

GateNode GateNode::all_of(std::vector<GateNode> children) {
  GateNode n;
  n.kind = Kind::kAnd;
  n.children = std::move(children);
  return n;
}

GateNode GateNode::equals(std::string unit, int value) {
  GateNode n;
  n.kind = Kind::kEquals;
  n.ref = std::move(unit);
  n.value = value;
  return n;
}

GateNode GateNode::at_least(std::string unit, int value) {
  GateNode n;
  n.kind = Kind::kAtLeast;
  n.ref = std::move(unit);
  n.value = value;
  return n;
}

GateNode GateNode::fired(std::string gate) {
  GateNode n;
  n.kind = Kind::kFired;
  n.ref = std::move(gate);
  return n;
}

std::size_t MachineDef::unit_index(std::string_view id) const {
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (units[i].id == id) return i;
  }
  throw DomainError("unknown unit '" + std::string(id) + "'");
}

namespace {

void check_gate_node(const MachineDef& m, const GateNode& n, const std::set<std::string>& earlier) {
  switch (n.kind) {
    case GateNode::Kind::kAnd:
      if (n.children.empty()) throw DomainError("AND gate node needs at least one child");
      for (const auto& c : n.children) check_gate_node(m, c, earlier);
      break;
    case GateNode::Kind::kEquals:
    case GateNode::Kind::kAtLeast:
      m.unit_index(n.ref);
      break;
    case GateNode::Kind::kFired:
      if (!earlier.count(n.ref)) {
        throw DomainError("gate leaf refers to '" + n.ref + "', which is not an earlier gate");
      }
      break;
  }
}

bool eval_node(const MachineDef& m, const GateNode& n, const StateTuple& s,
               const std::set<std::string>& fired) {
  switch (n.kind) {
    case GateNode::Kind::kAnd:
      return std::all_of(n.children.begin(), n.children.end(),
                         [&](const GateNode& c) { return eval_node(m, c, s, fired); });
    case GateNode::Kind::kEquals: return s[m.unit_index(n.ref)] == n.value;
    case GateNode::Kind::kAtLeast: return s[m.unit_index(n.ref)] >= n.value;
    case GateNode::Kind::kFired: return fired.count(n.ref) > 0;
  }
  return false;
}

}  // namespace

void MachineDef::validate() const {
  std::set<std::string> ids;
  for (const auto& u : units) {
    if (u.id.empty()) throw DomainError("machine unit id must not be empty");
    if (!ids.insert(u.id).second) throw DomainError("duplicate machine unit '" + u.id + "'");
    if (u.role == UnitRole::kBuffer && u.max_count) throw DomainError("buffer '" + u.id + "' cannot have max_count");
    if (u.max_count && *u.max_count < 1) throw DomainError("max_count of '" + u.id + "' must be >= 1");
  }
  for (const auto& [label, targets] : key_map) {
    if (label == "off") throw DomainError("the field-off label cannot be mapped");
    direction_from_label(label);
    std::set<std::string> seen;
    for (const auto& t : targets) {
      unit_index(t);
      if (!seen.insert(t).second) throw DomainError("key '" + label + "' maps to '" + t + "' twice");
    }
  }
  if (topology) {
    topology->validate();
    for (const auto& u : units) topology->unit(u.id);
  }
  std::set<std::string> earlier;
  for (const auto& g : gates) {
    if (g.name.empty()) throw DomainError("gate name must not be empty");
    if (earlier.count(g.name)) throw DomainError("duplicate gate '" + g.name + "'");
    check_gate_node(*this, g.expression, earlier);
    earlier.insert(g.name);
  }
  if (!(external_load >= 0.0)) throw DomainError("external load must be >= 0");
  if (n_samples < kMinSamples) throw DomainError("n_samples must be >= 16");
}

StateTuple initial_state(const MachineDef& machine) { return StateTuple(machine.units.size(), 0); }

std::set<std::string> decode_pulse(const MachineDef& machine, const StateTuple& state,
                                   const Pulse& pulse) {
  (void)state;  // movers are latched back at their inner stops between pulses
  std::set<std::string> out;
  if (pulse.key.magnitude == 0.0) return out;
  if (machine.physical()) {
    ProfileOptions opts;
    opts.n_samples = machine.n_samples;
    for (const auto& u : machine.units) {
      if (evaluate_unit(*machine.topology, u.id, pulse.key, opts).snap_through) out.insert(u.id);
    }
    return out;
  }
  auto it = machine.key_map.find(pulse.key.label);
  if (it != machine.key_map.end()) out.insert(it->second.begin(), it->second.end());
  return out;
}

StateTuple apply_activation(const MachineDef& machine, const StateTuple& state,
                            const std::set<std::string>& activated) {
  StateTuple next = state;
  for (const auto& id : activated) {
    const std::size_t i = machine.unit_index(id);
    const auto& u = machine.units[i];
    if (u.role == UnitRole::kBuffer) {
      next[i] = next[i] ? 0 : 1;
    } else if (!u.max_count || next[i] < *u.max_count) {
      ++next[i];
    }
  }
  return next;
}

std::set<std::string> evaluate_gates(const MachineDef& machine, const StateTuple& state,
                                     const std::set<std::string>& fired) {
  std::set<std::string> seen = fired;
  std::set<std::string> out;
  for (const auto& g : machine.gates) {
    if (eval_node(machine, g.expression, state, seen)) {
      out.insert(g.name);
      seen.insert(g.name);
    }
  }
  return out;
}

void check_program_keys(const MachineDef& machine, const BroadcastProgram& program) {
  if (machine.physical()) return;
  for (const auto& p : program) {
    if (p.key.magnitude == 0.0) continue;
    bool reset = std::any_of(machine.units.begin(), machine.units.end(),
                             [&](const FsmUnit& u) { return u.reset_key && *u.reset_key == p.key.label; });
    if (!reset && !machine.key_map.count(p.key.label)) {
      throw DomainError("program uses key '" + p.key.label + "', which the machine does not declare");
    }
  }
}

Trace run(const MachineDef& machine, const BroadcastProgram& program) {
  machine.validate();
  validate_program(program);
  Trace trace;
  TraceRow row;
  row.state = initial_state(machine);
  trace.push_back(row);

  std::set<std::string> fired_ever;
  std::set<std::string> satisfied = evaluate_gates(machine, row.state, fired_ever);
  // Gates already true in the initial state do not fire: there is no edge.
  StateTuple state = row.state;
  for (const auto& p : program) {
    TraceRow r;
    r.time = p.t_start + p.duration;
    r.key = p.key.label;
    r.activated = decode_pulse(machine, state, p);
    if (p.key.magnitude > 0.0) {
      for (std::size_t i = 0; i < machine.units.size(); ++i) {
        if (machine.units[i].reset_key && *machine.units[i].reset_key == p.key.label) state[i] = 0;
      }
    }
    state = apply_activation(machine, state, r.activated);
    r.state = state;
    std::set<std::string> seen = fired_ever;
    std::set<std::string> now;
    for (const auto& g : machine.gates) {
      if (eval_node(machine, g.expression, state, seen)) {
        now.insert(g.name);
        if (!satisfied.count(g.name)) {
          r.fired.push_back(g.name);
          if (!g.output_action.empty()) r.actions.push_back(g.output_action);
          seen.insert(g.name);
        }
      }
    }
    fired_ever = seen;
    satisfied = std::move(now);
    trace.push_back(std::move(r));
  }
  return trace;
}

std::string trace_csv(const MachineDef& machine, const Trace& trace) {
  std::ostringstream out;
  out << "t_s,key,activated";
  for (const auto& u : machine.units) out << ',' << u.id;
  out << ",fired,actions\n";
  auto join = [](const auto& items) {
    std::string s;
    for (const auto& x : items) {
      if (!s.empty()) s += ' ';
      s += x;
    }
    return s;
  };
  for (const auto& r : trace) {
    out << format_double(r.time) << ',' << r.key << ',' << join(r.activated);
    for (int v : r.state) out << ',' << v;
    out << ',' << join(r.fired) << ',' << join(r.actions) << '\n';
  }
  return out.str();
}

bool holds_external_load(const MachineDef& machine) {
  if (!machine.physical()) throw DomainError("load check needs a physical machine");
  ProfileOptions opts;
  opts.n_samples = machine.n_samples;
  const FieldKey off{"off", Vec3::UnitX(), 0.0};
  for (const auto& u : machine.units) {
    const auto d = evaluate_unit(*machine.topology, u.id, off, opts);
    if (!d.anchoring_force || machine.external_load > *d.anchoring_force) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Crank

void CrankCoupler::validate() const {
  if (units.empty()) throw DomainError("crank coupler needs at least one unit");
  if (!(stroke_to_angle > 0.0)) throw DomainError("stroke_to_angle must be > 0");
  if (!(lever_arm >= 0.0)) throw DomainError("lever arm must be >= 0");
  for (const auto& [label, sign] : key_sign) {
    if (sign != 1.0 && sign != -1.0) throw DomainError("crank key sign must be +1 or -1");
  }
}

std::vector<CrankPoint> crank_trace(const MachineDef& machine, const BroadcastProgram& program,
                                    const CrankCoupler& coupler) {
  coupler.validate();
  for (const auto& id : coupler.units) {
    if (machine.units[machine.unit_index(id)].role != UnitRole::kAccumulator) {
      throw DomainError("crank coupler unit '" + id + "' must be an accumulator");
    }
  }
  const Trace trace = run(machine, program);
  std::vector<CrankPoint> out{CrankPoint{0.0, 0.0}};
  double angle = 0.0;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    const auto& row = trace[i];
    auto it = coupler.key_sign.find(row.key);
    const double sign = it == coupler.key_sign.end() ? 1.0 : it->second;
    for (const auto& id : coupler.units) {
      if (row.activated.count(id)) angle += sign * coupler.stroke_to_angle;
    }
    out.push_back(CrankPoint{row.time, angle});
  }
  return out;
}

double phase_deviation(const std::vector<CrankPoint>& trace, double step) {
  if (!(step > 0.0)) throw DomainError("phase deviation needs a positive step");
  double worst = 0.0;
  int k = 0;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i].angle == trace[i - 1].angle) continue;
    ++k;
    worst = std::max(worst, std::abs(std::abs(trace[i].angle) - k * step));
  }
  return worst;
}

double torque_from_force(double force, double lever_arm) { return force * lever_arm * 1e3; }

TorqueEstimate torque_estimate(const Topology& topology, std::string_view unit_id,
                               const FieldKey& key, double lever_arm, int n_samples) {
  if (!(lever_arm > 0.0)) throw DomainError("lever arm must be > 0");
  const double baseline = topology.unit(unit_id).track.mover.moment.norm() * key.magnitude * 1e3;
  if (!(baseline > 0.0)) throw DomainError("zero dipole torque baseline");
  ProfileOptions opts;
  opts.n_samples = n_samples;
  const auto d = evaluate_unit(topology, unit_id, key, opts);
  if (!d.snap_through) throw DomainError("torque estimate needs the unit to snap through");
  TorqueEstimate t;
  t.torque = torque_from_force(d.driving_peak, lever_arm);
  t.baseline = baseline;
  t.amplification = t.torque / baseline;
  return t;
}

}  // namespace magceptor
