// Thin Python surface over the C++ core. Configs go in as paths, results come
// back as plain dicts and lists so the module needs no numpy at runtime.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "magceptor/designer.hpp"
#include "magceptor/error.hpp"
#include "magceptor/format.hpp"
#include "magceptor/fsm.hpp"
#include "magceptor/io.hpp"
#include "magceptor/landscape.hpp"
#include "magceptor/magnetocore.hpp"
#include "magceptor/netbus.hpp"

namespace py = pybind11;
using namespace magceptor;

namespace {

FieldKey key_for(const Topology& t, const std::string& label, std::optional<double> magnitude) {
  if (magnitude) return make_key(label, *magnitude);
  return t.key(label);
}

py::dict decision_dict(const LandscapeDecision& d) {
  py::dict out;
  out["class"] = std::string(to_string(d.cls));
  out["degenerate"] = d.degenerate;
  out["bistable"] = d.bistable;
  out["snap_through"] = d.snap_through;
  out["barrier_out"] = d.barrier_out;
  out["anchoring_force"] = d.anchoring_force;
  out["driving_peak"] = d.driving_peak;
  out["inner_equilibrium"] = d.inner_equilibrium;
  out["barrier_crest"] = d.barrier_crest;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "magnetic selectivity, broadcast state machines and the addressing bus";

  auto domain = py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<SingularityError>(m, "SingularityError", domain.ptr());
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  m.def("dipole_field", [](const Vec3& moment, const Vec3& at, const Vec3& point) {
    return dipole_field_at(MagnetSource::point(at, moment), point);
  }, py::arg("moment"), py::arg("at"), py::arg("point"));

  m.def("pair_force", [](const Vec3& ma, const Vec3& pa, const Vec3& mb, const Vec3& pb) {
    return pair_force(MagnetSource::point(pa, ma), MagnetSource::point(pb, mb));
  }, py::arg("moment_a"), py::arg("at_a"), py::arg("moment_b"), py::arg("at_b"),
     "Force on b from a, N.");

  m.def("pair_energy", [](const Vec3& ma, const Vec3& pa, const Vec3& mb, const Vec3& pb) {
    return pair_energy(MagnetSource::point(pa, ma), MagnetSource::point(pb, mb));
  }, py::arg("moment_a"), py::arg("at_a"), py::arg("moment_b"), py::arg("at_b"));

  py::class_<Topology>(m, "Topology")
      .def_static("load", &io::load_topology, py::arg("path"))
      .def_readonly("name", &Topology::name)
      .def_readonly("note", &Topology::note)
      .def_property_readonly("unit_ids", [](const Topology& t) {
        std::vector<std::string> ids;
        for (const auto& u : t.units) ids.push_back(u.id);
        return ids;
      })
      .def_property_readonly("key_labels", [](const Topology& t) {
        std::vector<std::string> labels;
        for (const auto& k : t.keys) labels.push_back(k.label);
        return labels;
      })
      .def("scaled", &Topology::scaled, py::arg("factor"))
      .def("to_json", [](const Topology& t) { return io::to_json(t).dump(2); });

  m.def("evaluate_unit", [](const Topology& t, const std::string& unit, const std::string& key,
                            std::optional<double> magnitude) {
    return decision_dict(evaluate_unit(t, unit, key_for(t, key, magnitude)));
  }, py::arg("topology"), py::arg("unit"), py::arg("key"), py::arg("magnitude") = py::none());

  m.def("selectivity", [](const Topology& t, double drive_min, double anchor_min) {
    const auto mat = selectivity_filter(t, Thresholds{drive_min, anchor_min});
    py::list rows;
    for (const auto& row : mat.cells) {
      py::list r;
      for (const auto& c : row) r.append(std::string(to_string(c.entry)));
      rows.append(r);
    }
    py::dict out;
    out["pass"] = mat.pass;
    out["keys"] = mat.keys;
    out["units"] = mat.units;
    out["entries"] = rows;
    out["assignment"] = mat.assignment;
    return out;
  }, py::arg("topology"), py::arg("drive_min"), py::arg("anchor_min"));

  m.def("control_entropy", [](const Topology& t) { return control_entropy(t, t.keys); }, py::arg("topology"));
  m.def("compactness", &compactness, py::arg("topology"));

  m.def("design", [](const std::filesystem::path& config, unsigned threads) {
    const auto result = run_design(io::load_design_config(config), threads);
    py::dict out;
    out["screened"] = result.screened;
    out["passing"] = result.ranked.size();
    py::list ranked;
    for (const auto& r : result.ranked) {
      py::dict d;
      d["index"] = r.index;
      d["hash"] = r.hash;
      d["fidelity"] = r.fidelity;
      d["compactness"] = r.compactness;
      d["entropy"] = r.entropy;
      ranked.append(d);
    }
    out["ranked"] = ranked;
    out["summary_csv"] = design_summary_csv(result);
    return out;
  }, py::arg("config"), py::arg("threads") = 0u);

  m.def("run_program", [](const std::filesystem::path& machine, const std::string& program) {
    const MachineDef def = io::load_machine(machine);
    const auto trace = run(def, parse_program(program));
    py::list rows;
    for (const auto& row : trace) {
      py::dict d;
      d["time"] = row.time;
      d["key"] = row.key;
      d["activated"] = row.activated;
      d["state"] = row.state;
      d["fired"] = row.fired;
      d["actions"] = row.actions;
      rows.append(d);
    }
    return rows;
  }, py::arg("machine"), py::arg("program"));

  m.def("crank_angles", [](const std::filesystem::path& machine, const std::string& program) {
    const MachineDef def = io::load_machine(machine);
    if (!def.crank) throw DomainError("machine has no crank");
    std::vector<std::pair<double, double>> out;
    for (const auto& p : crank_trace(def, parse_program(program), *def.crank)) out.emplace_back(p.time, p.angle);
    return out;
  }, py::arg("machine"), py::arg("program"));

  m.def("truth_table", [](const std::filesystem::path& campaign) {
    const Campaign c = io::load_campaign(campaign);
    std::vector<Command> cmds;
    for (const auto& cc : c.commands) cmds.push_back(make_command(c, cc));
    const auto table = truth_table(c.grid, cmds);
    py::dict out;
    out["columns"] = table.columns;
    out["rows"] = table.rows;
    out["exclusive"] = table.exclusive;
    out["error_rate"] = error_rate(table.log).rate;
    return out;
  }, py::arg("campaign"));

  m.def("clopper_pearson_upper", &clopper_pearson_upper, py::arg("failures"), py::arg("n"),
        py::arg("confidence") = 0.95);
}
