#include <doctest.h>

#include <random>

#include "magceptor/format.hpp"
#include "magceptor/fsm.hpp"
#include "magceptor/io.hpp"
#include "support.hpp"

using namespace magceptor;
using magceptor::testing::config_path;
using magceptor::testing::rel_close;

namespace {

const MachineDef& robot() {
  static const MachineDef m = io::load_machine(config_path("machine_4dof.json"));
  return m;
}

BroadcastProgram mission() {
  return parse_program(read_file(config_path("mission.prog")));
}

Pulse pulse(const std::string& label, double mag = 0.02, double dur = 0.1, double start = 0.0) {
  return Pulse{make_key(label, mag), dur, start};
}

// Random program over the robot's keys with gaps; starts laid end to end.
BroadcastProgram random_program(std::mt19937_64& rng, int length) {
  static const std::vector<std::string> labels{"-x", "+z", "+x", "-z"};
  std::uniform_int_distribution<int> pick(0, 3);
  std::uniform_real_distribution<double> dur(0.01, 0.2);
  std::bernoulli_distribution gap(0.3);
  BroadcastProgram p;
  double t = 0.0;
  for (int i = 0; i < length; ++i) {
    if (gap(rng)) t += dur(rng);
    const double d = dur(rng);
    p.push_back(pulse(labels[pick(rng)], 0.02, d, t));
    t += d;
  }
  return p;
}

StateTuple final_state(const MachineDef& m, const BroadcastProgram& p) {
  return run(m, p).back().state;
}

}  // namespace

TEST_CASE("program grammar") {
  const auto p = parse_program("-x 27mT 0.05s; +z 35mT 0.05s; +x 27mT 0.05s");
  REQUIRE(p.size() == 3);
  CHECK(rel_close(p[0].key.magnitude, 0.027, 1e-15));
  CHECK(rel_close(p[1].key.magnitude, 0.035, 1e-15));
  CHECK(rel_close(p[2].key.magnitude, 0.027, 1e-15));
  CHECK(p[1].key.direction == Vec3(0, 0, 1));
  CHECK(rel_close(p[2].t_start, 0.1, 1e-15));
  CHECK(parse_program("").empty());
  CHECK(parse_program("  # nothing here\n\n").empty());

  const auto r = parse_program("repeat 2 { +x 0.02T 10ms\n off 5ms }");
  REQUIRE(r.size() == 4);
  CHECK(rel_close(r[2].t_start, 0.015, 1e-12));
  CHECK(r[3].key.magnitude == 0.0);

  CHECK_THROWS_AS(parse_program("+x 20mT 100ms @0s\n-x 20mT 100ms @50ms"), ParseError);
  CHECK_THROWS_AS(parse_program("+x 20mT -1s"), ParseError);
  CHECK_THROWS_AS(parse_program("+q 20mT 1s"), ParseError);
  CHECK_THROWS_AS(parse_program("repeat 2 { +x 20mT 1s"), ParseError);
  CHECK_THROWS_AS(parse_program("+x 20mG 1s"), ParseError);
  const auto si = parse_program("+x 0.02 1");  // bare numbers are tesla and seconds
  CHECK(si[0].key.magnitude == 0.02);
  CHECK(si[0].duration == 1.0);
}

TEST_CASE("property: programs survive serialization") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 200; ++i) {
    const auto p = random_program(rng, 1 + i % 12);
    CHECK(parse_program(serialize_program(p)) == p);
  }
}

TEST_CASE("declared decoding") {
  const MachineDef engine = io::load_machine(config_path("engine_declared.json"));
  const auto s = initial_state(engine);
  CHECK(decode_pulse(engine, s, pulse("-x")) == std::set<std::string>{"alpha"});
  CHECK(decode_pulse(engine, s, pulse("+z")) == std::set<std::string>{"beta"});
  CHECK(decode_pulse(engine, s, pulse("+x")) == std::set<std::string>{"gamma"});
  CHECK(decode_pulse(engine, s, pulse("+y")).empty());
  CHECK(decode_pulse(engine, s, pulse("-x", 0.0)).empty());
}

TEST_CASE("physical decoding of a diagonal key co-activates two units with weaker peaks") {
  const Topology demo = io::load_topology(config_path("demo_topology.json"));
  MachineDef m;
  m.name = "demo";
  for (const char* id : {"alpha", "beta", "gamma"}) m.units.push_back(FsmUnit{id, UnitRole::kAccumulator, {}, {}});
  m.topology = std::make_shared<const Topology>(demo);
  m.validate();
  const Pulse diag = pulse("+x-z", 0.03);
  CHECK(decode_pulse(m, initial_state(m), diag) == std::set<std::string>{"alpha", "beta"});
  for (const auto& [id, label] : {std::pair{"alpha", "+x"}, std::pair{"beta", "-z"}}) {
    const double mixed = evaluate_unit(demo, id, diag.key).driving_peak;
    const double single = evaluate_unit(demo, id, demo.key(label)).driving_peak;
    CHECK(mixed < single);
  }
  CHECK(decode_pulse(m, initial_state(m), pulse("+x")) == std::set<std::string>{"alpha"});
}

TEST_CASE("activation semantics") {
  const MachineDef engine = io::load_machine(config_path("engine_declared.json"));
  CHECK(apply_activation(engine, {0, 0, 0}, {"alpha"}) == StateTuple{1, 0, 0});

  MachineDef pipe = robot();
  // (alpha accumulator, beta buffer, gamma accumulator, sigma buffer)
  CHECK(apply_activation(pipe, {5, 0, 0, 0}, {"beta"}) == StateTuple{5, 1, 0, 0});
  CHECK(apply_activation(pipe, {5, 1, 0, 0}, {"beta"}) == StateTuple{5, 0, 0, 0});
  CHECK(apply_activation(pipe, {5, 0, 0, 0}, {"alpha"}) == StateTuple{5, 0, 0, 0});
  CHECK(apply_activation(pipe, {0, 0, 0, 0}, {}) == StateTuple{0, 0, 0, 0});
}

TEST_CASE("reset keys clear an accumulator") {
  MachineDef m = robot();
  m.units[0].reset_key = "+y";
  m.key_map["+y"] = {};
  m.validate();
  const auto trace = run(m, parse_program("-x 20mT 10ms\n-x 20mT 10ms\n+y 20mT 10ms"));
  CHECK(trace[2].state[0] == 2);
  CHECK(trace[3].state[0] == 0);
}

TEST_CASE("mission replay") {
  const auto trace = run(robot(), mission());
  CHECK(trace.front().state == StateTuple{0, 0, 0, 0});
  bool passed = false;
  for (const auto& row : trace) passed = passed || row.state == StateTuple{0, 0, 2, 1};
  CHECK(passed);
  CHECK(trace.back().state == StateTuple{1, 1, 2, 0});

  int cutting = 0, removal = 0;
  for (const auto& row : trace) {
    for (const auto& g : row.fired) {
      if (g == "Object cutting") {
        ++cutting;
        CHECK(row.state == StateTuple{0, 0, 2, 1});
      }
      if (g == "Object removal") {
        ++removal;
        CHECK(cutting == 1);
      }
    }
  }
  CHECK(cutting == 1);
  CHECK(removal == 1);
  CHECK(run(robot(), {}).size() == 1);
  CHECK(trace_csv(robot(), trace).rfind("t_s,key,activated,alpha,beta,gamma,sigma,fired,actions\n", 0) == 0);
}

TEST_CASE("gate evaluation against a truth-table oracle") {
  CHECK(evaluate_gates(robot(), {0, 0, 0, 0}).empty());
  CHECK(evaluate_gates(robot(), {0, 0, 2, 1}) == std::set<std::string>{"Object cutting"});
  for (int a = 0; a <= 3; ++a) {
    for (int b = 0; b <= 1; ++b) {
      for (int g = 0; g <= 3; ++g) {
        for (int s = 0; s <= 1; ++s) {
          for (bool latched : {false, true}) {
            const bool cut = g >= 2 && s == 1;
            const bool removal = (latched || cut) && a >= 1;
            std::set<std::string> want;
            if (cut) want.insert("Object cutting");
            if (removal) want.insert("Object removal");
            std::set<std::string> fired;
            if (latched) fired.insert("Object cutting");
            CHECK(evaluate_gates(robot(), {a, b, g, s}, fired) == want);
          }
        }
      }
    }
  }
}

TEST_CASE("declared programs must use mapped labels") {
  CHECK_NOTHROW(check_program_keys(robot(), mission()));
  CHECK_THROWS_AS(check_program_keys(robot(), parse_program("+y 20mT 1s")), DomainError);
  CHECK_NOTHROW(check_program_keys(robot(), parse_program("off 1s")));
}

TEST_CASE("property: accumulator monotonicity, buffer involution, gap invariance") {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> gap(0.001, 0.5);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto p = random_program(rng, 1 + trial % 20);
    const auto trace = run(robot(), p);
    for (std::size_t i = 1; i < trace.size(); ++i) {
      CHECK(trace[i].state[0] >= trace[i - 1].state[0]);
      CHECK(trace[i].state[2] >= trace[i - 1].state[2]);
    }

    // doubling every buffer pulse leaves buffers untouched
    BroadcastProgram doubled;
    double t = 0.0;
    for (const auto& q : p) {
      const bool buffer = q.key.label == "+z" || q.key.label == "-z";
      for (int k = 0; k < (buffer ? 2 : 1); ++k) {
        doubled.push_back(Pulse{q.key, q.duration, t});
        t += q.duration;
      }
    }
    const auto d = final_state(robot(), doubled);
    CHECK(d[1] == 0);
    CHECK(d[3] == 0);

    // field-off gaps anywhere leave the final state unchanged
    BroadcastProgram padded;
    t = 0.0;
    for (const auto& q : p) {
      const double g = gap(rng);
      padded.push_back(Pulse{make_key("+x", 0.0), g, t});
      t += g;
      padded.push_back(Pulse{q.key, q.duration, t});
      t += q.duration;
    }
    CHECK(final_state(robot(), padded) == final_state(robot(), p));
  }
}

TEST_CASE("gates fire once per true interval and runs are deterministic") {
  std::mt19937_64 rng(5);
  MachineDef m = robot();
  m.gates.push_back(GateExpr{"sigma on", GateNode::equals("sigma", 1), "flag"});
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = random_program(rng, 25);
    const auto a = run(m, p);
    const auto b = run(m, p);
    REQUIRE(a.size() == b.size());
    bool previous = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].state == b[i].state);
      CHECK(a[i].fired == b[i].fired);
      CHECK(a[i].time == b[i].time);
      const bool now = a[i].state[3] == 1;
      const bool fired = std::count(a[i].fired.begin(), a[i].fired.end(), "sigma on") == 1;
      CHECK(fired == (now && !previous));
      previous = now;
    }
  }
}

TEST_CASE("crank rectification") {
  const MachineDef engine = io::load_machine(config_path("engine_declared.json"));
  const auto program = parse_program(read_file(config_path("engine_roundrobin.prog")));
  REQUIRE(program.size() == 18);
  const auto trace = crank_trace(engine, program, *engine.crank);
  CHECK(rel_close(trace.back().angle, 360.0, 1e-12));
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i].angle >= trace[i - 1].angle);
  CHECK(phase_deviation(trace, engine.crank->stroke_to_angle) == 0.0);
  const auto empty = crank_trace(engine, {}, *engine.crank);
  CHECK(empty.back().angle == 0.0);

  CrankCoupler reverse = *engine.crank;
  for (const char* k : {"-x", "+z", "+x"}) reverse.key_sign[k] = -1.0;
  CHECK(rel_close(crank_trace(engine, program, reverse).back().angle, -360.0, 1e-12));
}

TEST_CASE("torque estimates") {
  // calibration label: 0.28 N on a back-solved 37.5 mm lever
  CHECK(rel_close(torque_from_force(0.28, 0.0375), 10.5, 1e-12));
  const Topology engine = io::load_topology(config_path("engine_topology.json"));
  const auto t = torque_estimate(engine, "alpha", engine.key("-x"), 0.0375);
  CHECK(t.amplification > 1.0);
  CHECK(rel_close(t.torque, t.baseline * t.amplification, 1e-12));
  CHECK_THROWS_AS(torque_estimate(engine, "alpha", make_key("-x", 0.0), 0.0375), DomainError);
}

TEST_CASE("external load check") {
  MachineDef m = io::load_machine(config_path("engine_machine.json"));
  m.external_load = 1e-4;
  CHECK(holds_external_load(m));
  m.external_load = 10.0;
  CHECK_FALSE(holds_external_load(m));
}
