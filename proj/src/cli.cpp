#include "magceptor/cli.hpp"

#include <filesystem>
#include <ostream>

#include <CLI11.hpp>

#include "magceptor/format.hpp"
#include "magceptor/io.hpp"
#include "magceptor/parallel.hpp"

namespace magceptor {

namespace fs = std::filesystem;
using io::Json;

namespace {

struct Options {
  unsigned threads = 0;
  std::string out = "out";
  std::uint64_t seed = kDefaultSeed;
  bool seed_given = false;
  int samples = kDefaultSamples;

  // landscape
  std::string topology;
  std::string unit;
  std::string key;
  double magnitude = -1.0;

  // design
  std::string config;
  std::size_t budget = 0;
  bool sensitivity = false;

  // fsm
  std::string machine;
  std::string program;

  // net
  std::string campaign;
  int cycles = -1;

  // validate
  std::vector<std::string> files;
};

void write_out(const fs::path& dir, const std::string& name, const std::string& contents) {
  fs::create_directories(dir);
  write_file_atomic(dir / name, contents);
}

Json decision_json(const LandscapeProfile& p, const LandscapeDecision& d) {
  Json eq = Json::array();
  for (const auto& e : p.equilibria) {
    eq.push_back(Json{{"x_m", e.x},
                      {"stability", e.stability == Stability::kStable ? "stable" : "unstable"},
                      {"at_stop", e.at_stop}});
  }
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(); };
  return Json{{"unit", p.unit_id},
              {"key", p.key.label},
              {"key_magnitude_T", p.key.magnitude},
              {"class", std::string(to_string(d.cls))},
              {"degenerate", d.degenerate},
              {"bistable", d.bistable},
              {"snap_through", d.snap_through},
              {"barrier_out_J", d.barrier_out},
              {"anchoring_force_N", opt(d.anchoring_force)},
              {"driving_peak_N", d.driving_peak},
              {"inner_equilibrium_m", opt(d.inner_equilibrium)},
              {"barrier_crest_m", opt(d.barrier_crest)},
              {"equilibria", eq}};
}

std::string file_stem_for(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '+') out += 'p';
    else if (c == '-') out += 'm';
    else if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') out += c;
    else out += '_';
  }
  return out;
}

int cmd_landscape(const Options& o, std::ostream& out) {
  const Topology t = io::load_topology(o.topology);
  t.unit(o.unit);
  FieldKey key;
  if (t.has_key(o.key)) {
    key = t.key(o.key);
    if (o.magnitude >= 0.0) key.magnitude = o.magnitude;
  } else {
    if (o.magnitude < 0.0) {
      throw ParseError("key '" + o.key + "' is not in the topology; give --magnitude");
    }
    key = make_key(o.key, o.magnitude);
  }
  ProfileOptions opts;
  opts.n_samples = o.samples;
  const auto profile = refine_equilibria(sample_profile(t, o.unit, key, opts));
  const auto decision = decide(profile, t.unit(o.unit).track.friction_force);
  const std::string stem = file_stem_for(o.unit) + "_" + file_stem_for(key.label);
  write_out(o.out, "profile_" + stem + ".csv", profile_csv(profile));
  const Json dj = decision_json(profile, decision);
  write_out(o.out, "decision_" + stem + ".json", dj.dump(2) + "\n");
  out << dj.dump() << "\n";
  return kExitOk;
}

int cmd_design(const Options& o, std::ostream& out, std::ostream& err) {
  DesignConfig c = io::load_design_config(o.config);
  if (o.budget > 0) c.budget = o.budget;
  if (o.seed_given) c.seed = o.seed;
  if (o.samples != kDefaultSamples) c.n_samples = o.samples;
  c.validate();
  const auto result = run_design(c, o.threads);
  write_out(o.out, "design_summary.csv", design_summary_csv(result));
  if (result.ranked.empty()) {
    err << "no passing candidate among " << result.screened << " screened\n";
    return kExitDomain;
  }
  std::vector<DesignReport> top(result.ranked.begin(),
                                result.ranked.begin() + static_cast<std::ptrdiff_t>(
                                                            std::min(c.top_k, result.ranked.size())));
  if (o.sensitivity) {
    for (auto& r : top) {
      SensitivityOptions so;
      so.seed = c.seed;
      so.n_samples = c.n_samples;
      so.threads = o.threads;
      r.sensitivity = sensitivity_sweep(r.topology, c.thresholds, so);
    }
  }
  Json ranked = Json::array();
  for (std::size_t i = 0; i < top.size(); ++i) {
    ranked.push_back(io::to_json(top[i]));
    write_out(o.out, "top_" + std::to_string(i + 1) + ".json", io::to_json(top[i].topology).dump(2) + "\n");
  }
  Json pass_set = Json::array();
  for (const auto& r : result.reports) {
    if (r.matrix.pass) pass_set.push_back(r.hash);
  }
  const Json report{{"config", io::to_json(c)},
                    {"screened", result.screened},
                    {"passing", pass_set.size()},
                    {"pass_set", pass_set},
                    {"ranking", "fidelity desc, compactness asc, entropy desc, hash asc"},
                    {"ranked", ranked}};
  write_out(o.out, "design_report.json", report.dump(2) + "\n");
  out << "screened " << result.screened << ", passing " << pass_set.size() << "\n";
  return kExitOk;
}

int cmd_fsm(const Options& o, std::ostream& out) {
  const MachineDef m = io::load_machine(o.machine);
  const BroadcastProgram program = parse_program(read_file(o.program));
  check_program_keys(m, program);
  const Trace trace = run(m, program);
  write_out(o.out, "trace.csv", trace_csv(m, trace));
  if (m.crank) {
    const auto crank = crank_trace(m, program, *m.crank);
    std::string csv = "t_s,angle_deg\n";
    for (const auto& p : crank) csv += format_double(p.time) + ',' + format_double(p.angle) + '\n';
    write_out(o.out, "crank.csv", csv);
  }
  out << "final (";
  for (std::size_t i = 0; i < trace.back().state.size(); ++i) out << (i ? ", " : "") << trace.back().state[i];
  out << ")\n";
  return kExitOk;
}

int cmd_net(const Options& o, std::ostream& out) {
  Campaign c = io::load_campaign(o.campaign);
  if (o.seed_given) c.seed = o.seed;
  if (o.cycles >= 0) c.cycles = o.cycles;
  std::vector<Command> commands;
  for (const auto& cc : c.commands) commands.push_back(make_command(c, cc));
  const auto table = truth_table(c.grid, commands);
  write_out(o.out, "truth_table.csv", truth_table_csv(table));
  write_out(o.out, "events.csv", event_log_csv(table.log));

  double neighbor = 0.0;
  for (const auto& cmd : commands) {
    for (const auto& n : c.grid) {
      if (n.id != cmd.node) neighbor = std::max(neighbor, master_field_at(cmd.pose, n.position).norm());
    }
  }
  const auto rate = error_rate(table.log);
  const auto exclusive = std::count(table.exclusive.begin(), table.exclusive.end(), true);
  Json stats{{"commands", commands.size()},
             {"exclusive_rows", exclusive},
             {"error_rate", rate.rate},
             {"no_events", rate.no_events},
             {"max_neighbor_field_T", neighbor}};
  Json endurance = Json::array();
  if (c.cycles > 0) {
    for (std::size_t i = 0; i < commands.size(); ++i) {
      const auto s = endurance_campaign(c.grid, commands[i], c.cycles, c.noise, c.seed + i);
      endurance.push_back(Json{{"node", commands[i].node},
                               {"channel", commands[i].channel},
                               {"cycles", s.cycles},
                               {"false_triggers", s.false_triggers},
                               {"misses", s.misses},
                               {"failures", s.failures},
                               {"upper_bound_one_sided_95", s.upper_one_sided},
                               {"upper_bound_two_sided_95", s.upper_two_sided}});
    }
  }
  stats["endurance"] = endurance;
  write_out(o.out, "stats.json", stats.dump(2) + "\n");
  out << "exclusive rows " << exclusive << "/" << commands.size() << ", error rate "
      << format_double_shortest(rate.rate) << "\n";
  return kExitOk;
}

int cmd_validate(const Options& o, std::ostream& out) {
  for (const auto& f : o.files) {
    const fs::path path(f);
    const std::string text = read_file(path);
    bool same = false;
    std::string kind;
    if (path.extension() == ".prog") {
      kind = "program";
      const auto p1 = parse_program(text);
      same = parse_program(serialize_program(p1)) == p1;
    } else {
      const Json j = io::parse_json(text, f);
      if (j.contains("lattice")) {
        kind = "design";
        const auto c1 = io::design_config_from_json(j);
        same = io::design_config_from_json(io::to_json(c1)) == c1;
      } else if (j.contains("decode")) {
        kind = "machine";
        const auto m1 = io::machine_from_json(j, path.parent_path());
        same = io::to_json(io::machine_from_json(io::to_json(m1), path.parent_path())) == io::to_json(m1);
      } else if (j.contains("grid")) {
        kind = "campaign";
        const auto c1 = io::campaign_from_json(j);
        same = io::campaign_from_json(io::to_json(c1)) == c1;
      } else {
        kind = "topology";
        const auto t1 = io::topology_from_json(j);
        same = io::topology_from_json(io::to_json(t1)) == t1;
      }
    }
    if (!same) throw DomainError(f + ": " + kind + " does not round-trip");
    out << "ok " << kind << " " << f << "\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Addressable magnetic logic: landscapes, inverse design, FSM and bus simulation"};
  app.require_subcommand(1);
  app.add_option("--threads", o.threads, "worker threads (default: $MAGCEPTOR_THREADS or all cores)");

  auto* land = app.add_subcommand("landscape", "energy/force profile and decision for one unit");
  land->add_option("--topology", o.topology, "topology file")->required();
  land->add_option("--unit", o.unit, "unit id")->required();
  land->add_option("--key", o.key, "key label, e.g. +x")->required();
  land->add_option("--magnitude", o.magnitude, "key magnitude override (T)");
  land->add_option("--samples", o.samples, "profile samples")->check(CLI::Range(kMinSamples, 1000000));
  land->add_option("--out", o.out, "output directory");

  auto* design = app.add_subcommand("design", "enumerate, screen and rank lattice topologies");
  design->add_option("--config", o.config, "design config file")->required();
  design->add_option("--budget", o.budget, "maximum candidates")->check(CLI::PositiveNumber);
  auto* seed_d = design->add_option("--seed", o.seed, "random seed (default 1)");
  design->add_option("--samples", o.samples, "profile samples")->check(CLI::Range(kMinSamples, 1000000));
  design->add_option("--out", o.out, "output directory");
  design->add_flag("--sensitivity", o.sensitivity, "run the robustness sweep on the top designs");

  auto* fsm = app.add_subcommand("fsm", "run a broadcast program through a state machine");
  fsm->add_option("--machine", o.machine, "machine file")->required();
  fsm->add_option("--program", o.program, "program file")->required();
  fsm->add_option("--out", o.out, "output directory");

  auto* net = app.add_subcommand("net", "bus addressing campaign");
  net->add_option("--campaign", o.campaign, "campaign file")->required();
  auto* seed_n = net->add_option("--seed", o.seed, "random seed (default from file)");
  net->add_option("--cycles", o.cycles, "endurance cycles per command")->check(CLI::NonNegativeNumber);
  net->add_option("--out", o.out, "output directory");

  auto* validate = app.add_subcommand("validate", "parse and round-trip config files");
  validate->add_option("files", o.files, "config or program files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  o.seed_given = seed_d->count() > 0 || seed_n->count() > 0;

  try {
    if (*land) return cmd_landscape(o, out);
    if (*design) return cmd_design(o, out, err);
    if (*fsm) return cmd_fsm(o, out);
    if (*net) return cmd_net(o, out);
    if (*validate) return cmd_validate(o, out);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  }
  return kExitUsage;
}

}  // namespace magceptor
