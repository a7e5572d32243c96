#include "magceptor/io.hpp"

#include <set>

#include "magceptor/format.hpp"

namespace magceptor::io {

namespace {

// Strict object reader: every field must be consumed, unknown ones raise.
class Fields {
 public:
  Fields(const Json& j, std::string context) : j_(j), ctx_(std::move(context)) {
    if (!j_.is_object()) throw ParseError(ctx_ + ": expected an object");
  }

  const Json& need(const std::string& name) {
    used_.insert(name);
    auto it = j_.find(name);
    if (it == j_.end()) throw ParseError(ctx_ + ": missing field '" + name + "'");
    return *it;
  }

  const Json* maybe(const std::string& name) {
    used_.insert(name);
    auto it = j_.find(name);
    if (it == j_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw ParseError(ctx_ + ": unknown field '" + it.key() + "'");
    }
  }

  const std::string& context() const { return ctx_; }

 private:
  const Json& j_;
  std::string ctx_;
  std::set<std::string> used_;
};

double number(const Json& j, const std::string& ctx) {
  if (!j.is_number()) throw ParseError(ctx + ": expected a number");
  return j.get<double>();
}

std::int64_t integer(const Json& j, const std::string& ctx) {
  if (!j.is_number_integer()) throw ParseError(ctx + ": expected an integer");
  return j.get<std::int64_t>();
}

std::string text(const Json& j, const std::string& ctx) {
  if (!j.is_string()) throw ParseError(ctx + ": expected a string");
  return j.get<std::string>();
}

const Json& array(const Json& j, const std::string& ctx) {
  if (!j.is_array()) throw ParseError(ctx + ": expected an array");
  return j;
}

Vec3 vec3(const Json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 3) throw ParseError(ctx + ": expected [x, y, z]");
  return Vec3(number(j[0], ctx), number(j[1], ctx), number(j[2], ctx));
}

// A direction given either as [x, y, z] or as a signed-axis label like "-x".
Vec3 direction(const Json& j, const std::string& ctx) {
  if (j.is_string()) return direction_from_label(j.get<std::string>());
  return vec3(j, ctx);
}

Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

// Runs validation, reporting DomainErrors as parse errors of the document.
template <typename F>
void checked(const std::string& ctx, F&& f) {
  try {
    f();
  } catch (const DomainError& e) {
    throw ParseError(ctx + ": " + e.what());
  }
}

Json source_json(const MagnetSource& s, bool with_position) {
  Json j = Json::object();
  if (with_position) j["position"] = to_json(s.position);
  if (s.spec) {
    j["axis"] = to_json(s.axis);
    j["spec"] = io::to_json(*s.spec);
    j["discretization"] = s.discretization;
  } else {
    j["moment"] = to_json(s.moment);
  }
  return j;
}

MagnetSource source_from(const Json& j, const std::string& ctx, std::optional<Vec3> position,
                         const Vec3& default_axis) {
  Fields f(j, ctx);
  Vec3 pos = position ? *position : vec3(f.need("position"), ctx + ".position");
  MagnetSource s;
  if (const Json* m = f.maybe("moment")) {
    s = MagnetSource::point(pos, vec3(*m, ctx + ".moment"));
  } else {
    const MagnetSpec spec = magnet_spec_from_json(f.need("spec"));
    Vec3 axis = default_axis;
    if (const Json* a = f.maybe("axis")) axis = direction(*a, ctx + ".axis");
    int disc = 1;
    if (const Json* d = f.maybe("discretization")) disc = static_cast<int>(integer(*d, ctx + ".discretization"));
    checked(ctx, [&] { s = make_source(spec, pos, axis, disc); });
  }
  f.finish();
  return s;
}

FieldKey key_from(const Json& j, const std::string& ctx) {
  Fields f(j, ctx);
  FieldKey k;
  k.label = text(f.need("label"), ctx + ".label");
  const double mag = number(f.need("magnitude"), ctx + ".magnitude");
  Vec3 dir;
  if (const Json* d = f.maybe("direction")) dir = direction(*d, ctx + ".direction");
  else dir = direction_from_label(k.label);
  f.finish();
  checked(ctx, [&] { k = make_key(k.label, dir, mag); });
  return k;
}

Json key_json(const FieldKey& k) {
  return Json{{"label", k.label}, {"direction", to_json(k.direction)}, {"magnitude", k.magnitude}};
}

Json gate_node_json(const GateNode& n) {
  switch (n.kind) {
    case GateNode::Kind::kAnd: {
      Json children = Json::array();
      for (const auto& c : n.children) children.push_back(gate_node_json(c));
      return Json{{"and", children}};
    }
    case GateNode::Kind::kEquals: return Json{{"unit", n.ref}, {"eq", n.value}};
    case GateNode::Kind::kAtLeast: return Json{{"unit", n.ref}, {"ge", n.value}};
    case GateNode::Kind::kFired: return Json{{"fired", n.ref}};
  }
  return Json();
}

GateNode gate_node_from(const Json& j, const std::string& ctx) {
  Fields f(j, ctx);
  GateNode n;
  if (const Json* a = f.maybe("and")) {
    std::vector<GateNode> children;
    for (std::size_t i = 0; i < array(*a, ctx + ".and").size(); ++i) {
      children.push_back(gate_node_from((*a)[i], ctx + ".and[" + std::to_string(i) + "]"));
    }
    n = GateNode::all_of(std::move(children));
  } else if (const Json* g = f.maybe("fired")) {
    n = GateNode::fired(text(*g, ctx + ".fired"));
  } else {
    const std::string unit = text(f.need("unit"), ctx + ".unit");
    const Json* eq = f.maybe("eq");
    const Json* ge = f.maybe("ge");
    if ((eq != nullptr) == (ge != nullptr)) throw ParseError(ctx + ": a unit leaf needs exactly one of eq/ge");
    if (eq) n = GateNode::equals(unit, static_cast<int>(integer(*eq, ctx + ".eq")));
    else n = GateNode::at_least(unit, static_cast<int>(integer(*ge, ctx + ".ge")));
  }
  f.finish();
  return n;
}

}  // namespace

Json parse_json(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(origin + ": " + e.what());
  }
}

Json to_json(const MagnetSpec& spec) {
  return Json{{"shape", std::string(to_string(spec.shape))},
              {"dims", spec.dims},
              {"remanence", spec.remanence},
              {"easy_axis", to_json(spec.easy_axis)}};
}

MagnetSpec magnet_spec_from_json(const Json& j) {
  Fields f(j, "magnet spec");
  MagnetSpec s;
  s.shape = magnet_shape_from_string(text(f.need("shape"), "magnet spec.shape"));
  for (const auto& d : array(f.need("dims"), "magnet spec.dims")) s.dims.push_back(number(d, "magnet spec.dims"));
  s.remanence = number(f.need("remanence"), "magnet spec.remanence");
  if (const Json* a = f.maybe("easy_axis")) s.easy_axis = vec3(*a, "magnet spec.easy_axis");
  f.finish();
  checked("magnet spec", [&] { s.validate(); });
  return s;
}

Json to_json(const Topology& t) {
  Json units = Json::array();
  for (const auto& u : t.units) {
    Json stators = Json::array();
    for (const auto& s : u.stators) stators.push_back(source_json(s, true));
    const auto& tr = u.track;
    Json track{{"axis", to_json(tr.axis)},
               {"origin", to_json(tr.origin)},
               {"stroke", Json::array({tr.x_in, tr.x_out})},
               {"mover", source_json(tr.mover, false)},
               {"mass", tr.mass},
               {"friction", tr.friction_force},
               {"orientation", std::string(to_string(tr.orientation))}};
    Json unit{{"id", u.id}, {"stators", stators}, {"track", track}};
    unit["assigned_key"] = u.assigned_key ? Json(*u.assigned_key) : Json();
    units.push_back(unit);
  }
  Json keys = Json::array();
  for (const auto& k : t.keys) keys.push_back(key_json(k));
  Json j{{"name", t.name}, {"scale", t.scale}, {"units", units}, {"keys", keys}};
  if (!t.note.empty()) j["note"] = t.note;
  return j;
}

Topology topology_from_json(const Json& j) {
  Fields f(j, "topology");
  Topology t;
  t.name = text(f.need("name"), "topology.name");
  if (const Json* n = f.maybe("note")) t.note = text(*n, "topology.note");
  if (const Json* s = f.maybe("scale")) t.scale = number(*s, "topology.scale");
  const Json& units = array(f.need("units"), "topology.units");
  for (std::size_t i = 0; i < units.size(); ++i) {
    const std::string ctx = "topology.units[" + std::to_string(i) + "]";
    Fields uf(units[i], ctx);
    UnitTriplet u;
    u.id = text(uf.need("id"), ctx + ".id");
    const Json& stators = array(uf.need("stators"), ctx + ".stators");
    for (std::size_t k = 0; k < stators.size(); ++k) {
      u.stators.push_back(source_from(stators[k], ctx + ".stators[" + std::to_string(k) + "]", std::nullopt,
                                      Vec3::UnitZ()));
    }
    Fields tf(uf.need("track"), ctx + ".track");
    auto& tr = u.track;
    tr.axis = direction(tf.need("axis"), ctx + ".track.axis");
    if (const Json* o = tf.maybe("origin")) tr.origin = vec3(*o, ctx + ".track.origin");
    const Json& stroke = array(tf.need("stroke"), ctx + ".track.stroke");
    if (stroke.size() != 2) throw ParseError(ctx + ".track.stroke: expected [x_in, x_out]");
    tr.x_in = number(stroke[0], ctx + ".track.stroke");
    tr.x_out = number(stroke[1], ctx + ".track.stroke");
    tr.mover = source_from(tf.need("mover"), ctx + ".track.mover", tr.position_at(tr.x_in), tr.axis);
    tr.mass = number(tf.need("mass"), ctx + ".track.mass");
    if (const Json* fr = tf.maybe("friction")) tr.friction_force = number(*fr, ctx + ".track.friction");
    if (const Json* o = tf.maybe("orientation")) {
      tr.orientation = mover_orientation_from_string(text(*o, ctx + ".track.orientation"));
    }
    tf.finish();
    if (const Json* k = uf.maybe("assigned_key")) u.assigned_key = text(*k, ctx + ".assigned_key");
    uf.finish();
    t.units.push_back(std::move(u));
  }
  const Json& keys = array(f.need("keys"), "topology.keys");
  for (std::size_t i = 0; i < keys.size(); ++i) {
    t.keys.push_back(key_from(keys[i], "topology.keys[" + std::to_string(i) + "]"));
  }
  f.finish();
  checked("topology '" + t.name + "'", [&] { t.validate(); });
  return t;
}

Topology load_topology(const std::filesystem::path& path) {
  return topology_from_json(parse_json(read_file(path), path.string()));
}

Json to_json(const Lattice& l) {
  Json extents = Json::array();
  for (const auto& e : l.extents) extents.push_back(Json::array({e[0], e[1]}));
  Json orientations = Json::array();
  for (const auto& o : l.orientations) orientations.push_back(to_json(o));
  Json axes = Json::array();
  for (const auto& a : l.track_axes) axes.push_back(to_json(a));
  return Json{{"spacing", l.spacing}, {"extents", extents}, {"orientations", orientations}, {"track_axes", axes}};
}

Lattice lattice_from_json(const Json& j) {
  Fields f(j, "lattice");
  Lattice l;
  l.spacing = number(f.need("spacing"), "lattice.spacing");
  const Json& ext = array(f.need("extents"), "lattice.extents");
  if (ext.size() != 3) throw ParseError("lattice.extents: expected three [lo, hi] ranges");
  for (int i = 0; i < 3; ++i) {
    if (!ext[i].is_array() || ext[i].size() != 2) throw ParseError("lattice.extents: expected [lo, hi]");
    l.extents[i] = {static_cast<int>(integer(ext[i][0], "lattice.extents")),
                    static_cast<int>(integer(ext[i][1], "lattice.extents"))};
  }
  if (const Json* o = f.maybe("orientations")) {
    for (const auto& d : array(*o, "lattice.orientations")) l.orientations.push_back(direction(d, "lattice.orientations"));
  } else {
    l.orientations = cartesian_directions();
  }
  if (const Json* a = f.maybe("track_axes")) {
    for (const auto& d : array(*a, "lattice.track_axes")) l.track_axes.push_back(direction(d, "lattice.track_axes"));
  } else {
    l.track_axes = cartesian_directions();
  }
  f.finish();
  checked("lattice", [&] { l.validate(); });
  return l;
}

Json to_json(const DesignConfig& c) {
  Json keys = Json::array();
  for (const auto& k : c.keys) keys.push_back(key_json(k));
  Json j{{"name", c.name},
              {"lattice", to_json(c.lattice)},
              {"n_units", c.n_units},
              {"unit",
               {{"stator", to_json(c.unit.stator)},
                {"mover", to_json(c.unit.mover)},
                {"stroke", c.unit.stroke},
                {"mass", c.unit.mass},
                {"friction", c.unit.friction_force}}},
              {"keys", keys},
              {"thresholds", {{"drive_min", c.thresholds.drive_min}, {"anchor_min", c.thresholds.anchor_min}}},
              {"n_samples", c.n_samples},
              {"budget", c.budget},
              {"seed", c.seed},
              {"top_k", c.top_k}};
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

DesignConfig design_config_from_json(const Json& j) {
  Fields f(j, "design");
  DesignConfig c;
  if (const Json* n = f.maybe("name")) c.name = text(*n, "design.name");
  if (const Json* n = f.maybe("note")) c.note = text(*n, "design.note");
  c.lattice = lattice_from_json(f.need("lattice"));
  c.n_units = static_cast<int>(integer(f.need("n_units"), "design.n_units"));
  {
    Fields u(f.need("unit"), "design.unit");
    c.unit.stator = magnet_spec_from_json(u.need("stator"));
    c.unit.mover = magnet_spec_from_json(u.need("mover"));
    c.unit.stroke = number(u.need("stroke"), "design.unit.stroke");
    c.unit.mass = number(u.need("mass"), "design.unit.mass");
    if (const Json* fr = u.maybe("friction")) c.unit.friction_force = number(*fr, "design.unit.friction");
    u.finish();
  }
  const Json& keys = f.need("keys");
  if (keys.is_object()) {
    // Shorthand: {"magnitude": B} for the six Cartesian keys.
    Fields kf(keys, "design.keys");
    c.keys = cartesian_keys(number(kf.need("magnitude"), "design.keys.magnitude"));
    kf.finish();
  } else {
    for (std::size_t i = 0; i < array(keys, "design.keys").size(); ++i) {
      c.keys.push_back(key_from(keys[i], "design.keys[" + std::to_string(i) + "]"));
    }
  }
  if (const Json* t = f.maybe("thresholds")) {
    Fields tf(*t, "design.thresholds");
    if (const Json* d = tf.maybe("drive_min")) c.thresholds.drive_min = number(*d, "design.thresholds.drive_min");
    if (const Json* a = tf.maybe("anchor_min")) c.thresholds.anchor_min = number(*a, "design.thresholds.anchor_min");
    tf.finish();
  }
  if (const Json* n = f.maybe("n_samples")) c.n_samples = static_cast<int>(integer(*n, "design.n_samples"));
  if (const Json* b = f.maybe("budget")) {
    const auto v = integer(*b, "design.budget");
    if (v < 0) throw ParseError("design.budget: must be >= 1");
    c.budget = static_cast<std::size_t>(v);
  }
  if (const Json* s = f.maybe("seed")) c.seed = s->get<std::uint64_t>();
  if (const Json* k = f.maybe("top_k")) c.top_k = static_cast<std::size_t>(integer(*k, "design.top_k"));
  f.finish();
  checked("design", [&] { c.validate(); });
  return c;
}

DesignConfig load_design_config(const std::filesystem::path& path) {
  return design_config_from_json(parse_json(read_file(path), path.string()));
}

Json to_json(const MachineDef& m) {
  Json units = Json::array();
  for (const auto& u : m.units) {
    Json ju{{"id", u.id}, {"role", std::string(to_string(u.role))}};
    ju["max_count"] = u.max_count ? Json(*u.max_count) : Json();
    ju["reset_key"] = u.reset_key ? Json(*u.reset_key) : Json();
    units.push_back(ju);
  }
  Json decode;
  if (m.topology_file) {
    decode = Json{{"mode", "physical"}, {"topology", *m.topology_file}};
  } else {
    Json map = Json::object();
    for (const auto& [label, targets] : m.key_map) map[label] = targets;
    decode = Json{{"mode", "declared"}, {"map", map}};
  }
  Json gates = Json::array();
  for (const auto& g : m.gates) {
    gates.push_back(Json{{"name", g.name}, {"expr", gate_node_json(g.expression)}, {"action", g.output_action}});
  }
  Json j{{"name", m.name}, {"units", units}, {"decode", decode}, {"gates", gates},
         {"external_load", m.external_load}, {"n_samples", m.n_samples}};
  if (!m.note.empty()) j["note"] = m.note;
  if (m.crank) {
    Json signs = Json::object();
    for (const auto& [label, s] : m.crank->key_sign) signs[label] = s;
    j["crank"] = Json{{"units", m.crank->units}, {"stroke_to_angle", m.crank->stroke_to_angle}, {"key_sign", signs},
                      {"lever_arm", m.crank->lever_arm}};
  }
  return j;
}

MachineDef machine_from_json(const Json& j, const std::filesystem::path& base_dir) {
  Fields f(j, "machine");
  MachineDef m;
  m.name = text(f.need("name"), "machine.name");
  if (const Json* n = f.maybe("note")) m.note = text(*n, "machine.note");
  const Json& units = array(f.need("units"), "machine.units");
  for (std::size_t i = 0; i < units.size(); ++i) {
    const std::string ctx = "machine.units[" + std::to_string(i) + "]";
    Fields uf(units[i], ctx);
    FsmUnit u;
    u.id = text(uf.need("id"), ctx + ".id");
    u.role = unit_role_from_string(text(uf.need("role"), ctx + ".role"));
    if (const Json* mc = uf.maybe("max_count")) u.max_count = static_cast<int>(integer(*mc, ctx + ".max_count"));
    if (const Json* rk = uf.maybe("reset_key")) u.reset_key = text(*rk, ctx + ".reset_key");
    uf.finish();
    m.units.push_back(std::move(u));
  }
  {
    Fields df(f.need("decode"), "machine.decode");
    const std::string mode = text(df.need("mode"), "machine.decode.mode");
    if (mode == "declared") {
      const Json& map = df.need("map");
      if (!map.is_object()) throw ParseError("machine.decode.map: expected an object");
      for (auto it = map.begin(); it != map.end(); ++it) {
        std::vector<std::string> targets;
        if (it->is_string()) {
          targets.push_back(it->get<std::string>());
        } else {
          for (const auto& t : array(*it, "machine.decode.map")) targets.push_back(text(t, "machine.decode.map"));
        }
        m.key_map[it.key()] = std::move(targets);
      }
    } else if (mode == "physical") {
      m.topology_file = text(df.need("topology"), "machine.decode.topology");
      m.topology = std::make_shared<const Topology>(load_topology(base_dir / *m.topology_file));
    } else {
      throw ParseError("machine.decode.mode: expected 'declared' or 'physical'");
    }
    df.finish();
  }
  if (const Json* gates = f.maybe("gates")) {
    for (std::size_t i = 0; i < array(*gates, "machine.gates").size(); ++i) {
      const std::string ctx = "machine.gates[" + std::to_string(i) + "]";
      Fields gf((*gates)[i], ctx);
      GateExpr g;
      g.name = text(gf.need("name"), ctx + ".name");
      g.expression = gate_node_from(gf.need("expr"), ctx + ".expr");
      if (const Json* a = gf.maybe("action")) g.output_action = text(*a, ctx + ".action");
      gf.finish();
      m.gates.push_back(std::move(g));
    }
  }
  if (const Json* l = f.maybe("external_load")) m.external_load = number(*l, "machine.external_load");
  if (const Json* n = f.maybe("n_samples")) m.n_samples = static_cast<int>(integer(*n, "machine.n_samples"));
  if (const Json* c = f.maybe("crank")) {
    Fields cf(*c, "machine.crank");
    CrankCoupler k;
    for (const auto& u : array(cf.need("units"), "machine.crank.units")) k.units.push_back(text(u, "machine.crank.units"));
    k.stroke_to_angle = number(cf.need("stroke_to_angle"), "machine.crank.stroke_to_angle");
    if (const Json* s = cf.maybe("key_sign")) {
      if (!s->is_object()) throw ParseError("machine.crank.key_sign: expected an object");
      for (auto it = s->begin(); it != s->end(); ++it) k.key_sign[it.key()] = number(*it, "machine.crank.key_sign");
    }
    if (const Json* l = cf.maybe("lever_arm")) k.lever_arm = number(*l, "machine.crank.lever_arm");
    cf.finish();
    checked("machine.crank", [&] { k.validate(); });
    m.crank = std::move(k);
  }
  f.finish();
  checked("machine '" + m.name + "'", [&] { m.validate(); });
  return m;
}

MachineDef load_machine(const std::filesystem::path& path) {
  return machine_from_json(parse_json(read_file(path), path.string()), path.parent_path());
}

Json to_json(const Campaign& c) {
  Json grid = Json::array();
  for (const auto& n : c.grid) {
    Json channels = Json::array();
    for (const auto& ch : n.channels) channels.push_back(Json{{"label", ch.label}, {"direction", to_json(ch.key_direction)}});
    grid.push_back(Json{{"id", n.id},
                        {"position", to_json(n.position)},
                        {"channels", channels},
                        {"threshold", n.threshold},
                        {"cone_half_angle", n.cone_half_angle}});
  }
  Json offsets = Json::array();
  for (const auto& o : c.master_offsets) offsets.push_back(to_json(o));
  Json commands = Json::array();
  for (const auto& cmd : c.commands) {
    commands.push_back(Json{{"node", cmd.node}, {"channel", cmd.channel}, {"dwell", cmd.dwell}, {"offset", to_json(cmd.offset)}});
  }
  Json j{{"name", c.name},
              {"grid", grid},
              {"master", {{"offsets", offsets}, {"depth", c.depth}, {"field", c.field}}},
              {"commands", commands},
              {"noise", {{"angle_sigma_deg", c.noise.angle_sigma_deg}, {"magnitude_sigma", c.noise.magnitude_sigma}}},
              {"cycles", c.cycles},
              {"seed", c.seed}};
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

Campaign campaign_from_json(const Json& j) {
  Fields f(j, "campaign");
  Campaign c;
  c.name = text(f.need("name"), "campaign.name");
  if (const Json* n = f.maybe("note")) c.note = text(*n, "campaign.note");
  const Json& grid = array(f.need("grid"), "campaign.grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const std::string ctx = "campaign.grid[" + std::to_string(i) + "]";
    Fields nf(grid[i], ctx);
    NodeSpec n;
    n.id = text(nf.need("id"), ctx + ".id");
    n.position = vec3(nf.need("position"), ctx + ".position");
    const Json& chans = array(nf.need("channels"), ctx + ".channels");
    for (std::size_t k = 0; k < chans.size(); ++k) {
      const std::string cctx = ctx + ".channels[" + std::to_string(k) + "]";
      Fields cf(chans[k], cctx);
      Channel ch;
      ch.label = text(cf.need("label"), cctx + ".label");
      ch.key_direction = direction(cf.need("direction"), cctx + ".direction");
      cf.finish();
      n.channels.push_back(std::move(ch));
    }
    if (const Json* t = nf.maybe("threshold")) n.threshold = number(*t, ctx + ".threshold");
    if (const Json* a = nf.maybe("cone_half_angle")) n.cone_half_angle = number(*a, ctx + ".cone_half_angle");
    nf.finish();
    c.grid.push_back(std::move(n));
  }
  {
    Fields mf(f.need("master"), "campaign.master");
    for (const auto& o : array(mf.need("offsets"), "campaign.master.offsets")) {
      c.master_offsets.push_back(vec3(o, "campaign.master.offsets"));
    }
    if (const Json* d = mf.maybe("depth")) c.depth = number(*d, "campaign.master.depth");
    if (const Json* b = mf.maybe("field")) c.field = number(*b, "campaign.master.field");
    mf.finish();
  }
  if (const Json* cmds = f.maybe("commands")) {
    for (std::size_t i = 0; i < array(*cmds, "campaign.commands").size(); ++i) {
      const std::string ctx = "campaign.commands[" + std::to_string(i) + "]";
      Fields cf((*cmds)[i], ctx);
      CampaignCommand cmd;
      cmd.node = text(cf.need("node"), ctx + ".node");
      cmd.channel = text(cf.need("channel"), ctx + ".channel");
      if (const Json* d = cf.maybe("dwell")) cmd.dwell = number(*d, ctx + ".dwell");
      if (const Json* o = cf.maybe("offset")) cmd.offset = vec3(*o, ctx + ".offset");
      cf.finish();
      c.commands.push_back(std::move(cmd));
    }
  }
  if (const Json* n = f.maybe("noise")) {
    Fields nf(*n, "campaign.noise");
    if (const Json* a = nf.maybe("angle_sigma_deg")) c.noise.angle_sigma_deg = number(*a, "campaign.noise.angle_sigma_deg");
    if (const Json* m = nf.maybe("magnitude_sigma")) c.noise.magnitude_sigma = number(*m, "campaign.noise.magnitude_sigma");
    nf.finish();
  }
  if (const Json* cy = f.maybe("cycles")) c.cycles = static_cast<int>(integer(*cy, "campaign.cycles"));
  if (const Json* s = f.maybe("seed")) c.seed = s->get<std::uint64_t>();
  f.finish();
  checked("campaign '" + c.name + "'", [&] { c.validate(); });
  return c;
}

Campaign load_campaign(const std::filesystem::path& path) {
  return campaign_from_json(parse_json(read_file(path), path.string()));
}

Json to_json(const DesignReport& r) {
  Json cells = Json::array();
  for (const auto& row : r.matrix.cells) {
    Json jr = Json::array();
    for (const auto& c : row) jr.push_back(Json{{"entry", std::string(to_string(c.entry))}, {"value", c.value}});
    cells.push_back(jr);
  }
  Json j{{"index", r.index},
         {"hash", r.hash},
         {"pass", r.matrix.pass},
         {"fidelity", r.fidelity},
         {"compactness", r.compactness},
         {"entropy_bits", r.entropy},
         {"matrix", {{"keys", r.matrix.keys}, {"units", r.matrix.units}, {"cells", cells}}},
         {"assignment", r.matrix.assignment}};
  if (r.sensitivity) {
    const auto& s = *r.sensitivity;
    j["sensitivity"] = Json{{"trials", s.trials},
                            {"directions_per_key", s.directions_per_key},
                            {"evaluations", s.evaluations},
                            {"violations", s.violations},
                            {"margin_deg", s.margin_deg}};
  }
  j["topology"] = to_json(r.topology);
  return j;
}

}  // namespace magceptor::io
