#include "olfc/scenario.hpp"

#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"
#include "olfc/oracle.hpp"

namespace olfc {

namespace {

using Json = nlohmann::ordered_json;

// Bounds at or beyond this magnitude are treated as absent.
constexpr double kUnbounded = 1e30;

[[noreturn]] void fail(const std::string& origin, const std::string& what) {
  throw ParseError(origin + ": " + what);
}

const Json& require_field(const Json& j, const char* key, const std::string& where,
                          const std::string& origin) {
  auto it = j.find(key);
  if (it == j.end()) fail(origin, where + ": missing required field '" + key + "'");
  return *it;
}

double number_field(const Json& j, const char* key, double fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : it->get<double>();
}

QuadraticCost parse_cost(const Json& j, const char* key) {
  QuadraticCost cost;
  auto it = j.find(key);
  if (it != j.end()) {
    cost.a = number_field(*it, "quadratic", 1.0);
    cost.b = number_field(*it, "linear", 0.0);
  }
  return cost;
}

std::vector<HalfPlane> parse_halfplanes(const Json& j, const char* key) {
  std::vector<HalfPlane> rows;
  auto it = j.find(key);
  if (it == j.end()) return rows;
  for (const Json& row : *it)
    rows.push_back({row.at("slope").get<double>(), row.at("offset").get<double>()});
  return rows;
}

Eigen::VectorXd parse_gain_vector(const Json& gains, const char* key,
                                  const Eigen::VectorXd& fallback,
                                  const std::map<BusId, int>& bus_index,
                                  const std::string& origin) {
  auto it = gains.find(key);
  if (it == gains.end()) return fallback;
  const int n = static_cast<int>(fallback.size());
  if (it->is_number()) return Eigen::VectorXd::Constant(n, it->get<double>());
  if (it->is_array()) {
    if (static_cast<int>(it->size()) != n)
      fail(origin, std::string("gains.") + key + ": array length must equal the bus count");
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = (*it)[static_cast<size_t>(i)].get<double>();
    return v;
  }
  if (it->is_object()) {
    Eigen::VectorXd v = Eigen::VectorXd::Constant(n, number_field(*it, "default", 1.0));
    auto per_bus = it->find("per_bus");
    if (per_bus != it->end()) {
      for (auto& [id_text, value] : per_bus->items()) {
        const BusId id = std::stoi(id_text);
        auto found = bus_index.find(id);
        if (found == bus_index.end())
          fail(origin, std::string("gains.") + key + ": unknown bus id " + id_text);
        v(found->second) = value.get<double>();
      }
    }
    return v;
  }
  fail(origin, std::string("gains.") + key + ": expected a number, array, or object");
}

Json dump_vector(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (long i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Scenario build_scenario(const Json& doc, const std::string& origin) {
  Scenario scenario;
  scenario.name = doc.value("name", std::string("custom"));

  const Json& buses = require_field(doc, "buses", "document", origin);
  if (!buses.is_array() || buses.empty()) fail(origin, "'buses' must be a non-empty array");

  const int n = static_cast<int>(buses.size());
  std::vector<BusId> ids;
  std::vector<bool> is_gen;
  std::map<BusId, int> bus_index;
  OlfcProblem& problem = scenario.problem;
  problem.phys.inertia = Eigen::VectorXd::Ones(n);
  problem.phys.damping = Eigen::VectorXd::Ones(n);
  problem.phys.p_in = Eigen::VectorXd::Zero(n);
  problem.phys.q_in = Eigen::VectorXd::Zero(n);
  problem.phys.buffer_min = Eigen::VectorXd::Constant(n, -kUnbounded);
  problem.phys.buffer_max = Eigen::VectorXd::Constant(n, kUnbounded);
  problem.d_min = Eigen::VectorXd::Constant(n, -kUnbounded);
  problem.d_max = Eigen::VectorXd::Constant(n, kUnbounded);
  problem.controllable.resize(static_cast<size_t>(n));
  problem.heat_load.resize(static_cast<size_t>(n));
  problem.cost_e.resize(static_cast<size_t>(n));
  problem.cost_h.resize(static_cast<size_t>(n));
  problem.chp.resize(static_cast<size_t>(n));

  for (int i = 0; i < n; ++i) {
    const Json& bus = buses[static_cast<size_t>(i)];
    std::ostringstream where;
    where << "buses[" << i << "]";
    const BusId id = require_field(bus, "id", where.str(), origin).get<BusId>();
    if (bus_index.count(id)) fail(origin, where.str() + ": duplicate bus id");
    bus_index[id] = i;
    ids.push_back(id);

    const std::string type = bus.value("type", std::string("generator"));
    if (type != "generator" && type != "load")
      fail(origin, where.str() + ": type must be 'generator' or 'load'");
    const bool gen = type == "generator";
    is_gen.push_back(gen);

    problem.phys.inertia(i) = number_field(bus, "inertia", 1.0);
    problem.phys.damping(i) =
        require_field(bus, "damping", where.str(), origin).get<double>();
    problem.phys.p_in(i) = number_field(bus, "p_in", 0.0);
    problem.phys.q_in(i) = number_field(bus, "q_in", 0.0);

    problem.controllable[static_cast<size_t>(i)] = bus.value("controllable", gen);
    problem.cost_e[static_cast<size_t>(i)] = parse_cost(bus, "cost_electric");
    problem.d_min(i) = number_field(bus, "d_min", -kUnbounded);
    problem.d_max(i) = number_field(bus, "d_max", kUnbounded);

    problem.heat_load[static_cast<size_t>(i)] = bus.value("heat_load", false);
    problem.cost_h[static_cast<size_t>(i)] = parse_cost(bus, "cost_heat");
    problem.phys.buffer_min(i) = number_field(bus, "buffer_min", -kUnbounded);
    problem.phys.buffer_max(i) = number_field(bus, "buffer_max", kUnbounded);
    problem.chp[static_cast<size_t>(i)].upper = parse_halfplanes(bus, "chp_upper");
    problem.chp[static_cast<size_t>(i)].lower = parse_halfplanes(bus, "chp_lower");
  }

  std::vector<NetworkTopology::Line> lines;
  Eigen::VectorXd flow_min(0), flow_max(0);
  if (doc.contains("lines")) {
    const Json& jlines = doc["lines"];
    flow_min = Eigen::VectorXd::Constant(static_cast<long>(jlines.size()), -kUnbounded);
    flow_max = Eigen::VectorXd::Constant(static_cast<long>(jlines.size()), kUnbounded);
    long l = 0;
    for (const Json& line : jlines) {
      std::ostringstream where;
      where << "lines[" << l << "]";
      lines.push_back({require_field(line, "from", where.str(), origin).get<BusId>(),
                       require_field(line, "to", where.str(), origin).get<BusId>(),
                       require_field(line, "susceptance", where.str(), origin).get<double>()});
      flow_min(l) = number_field(line, "flow_min", -kUnbounded);
      flow_max(l) = number_field(line, "flow_max", kUnbounded);
      ++l;
    }
  }
  problem.topology = NetworkTopology(ids, is_gen, lines);
  problem.flow_min = flow_min;
  problem.flow_max = flow_max;

  const Json gains = doc.value("gains", Json::object());
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd lambda_default(n);
  for (int i = 0; i < n; ++i)
    lambda_default(i) = is_gen[static_cast<size_t>(i)] ? 1.0 / problem.phys.inertia(i) : 1.0;
  scenario.gains.eps_d = parse_gain_vector(gains, "eps_d", ones, bus_index, origin);
  scenario.gains.eps_q = parse_gain_vector(gains, "eps_q", ones, bus_index, origin);
  scenario.gains.eps_phi = parse_gain_vector(gains, "eps_phi", ones, bus_index, origin);
  scenario.gains.eps_lambda =
      parse_gain_vector(gains, "eps_lambda", lambda_default, bus_index, origin);
  scenario.gains.eps_mu = parse_gain_vector(gains, "eps_mu", ones, bus_index, origin);
  scenario.gains.k_r = parse_gain_vector(gains, "k_r", ones, bus_index, origin);
  scenario.gains.eps_zeta = gains.value("eps_zeta", 1.0);
  scenario.gains.eps_gamma = gains.value("eps_gamma", 1.0);
  scenario.gains.eps_delta = gains.value("eps_delta", 1.0);
  scenario.gains.eps_sigma = gains.value("eps_sigma", 1.0);

  scenario.damping_model = InaccurateDamping::exact(n);
  if (doc.contains("damping_model")) {
    const Json& dm = doc["damping_model"];
    if (dm.contains("scale") && dm["scale"].is_array()) {
      for (int i = 0; i < n; ++i) scenario.damping_model.scale(i) = dm["scale"][static_cast<size_t>(i)].get<double>();
    }
    if (dm.contains("offset") && dm["offset"].is_array()) {
      for (int i = 0; i < n; ++i)
        scenario.damping_model.offset(i) = dm["offset"][static_cast<size_t>(i)].get<double>();
    }
    const std::string mode = dm.value("mode", std::string());
    if (mode == "scaled")
      scenario.damping_model = InaccurateDamping::scaled(
          require_field(dm, "scale", "damping_model", origin).get<double>(), n);
    else if (mode == "additive")
      scenario.damping_model = InaccurateDamping::additive(
          require_field(dm, "offset", "damping_model", origin).get<double>(), n);
    else if (!mode.empty() && mode != "exact")
      fail(origin, "damping_model.mode must be 'exact', 'scaled', or 'additive'");
  }

  scenario.chp_enforced = doc.value("chp_enforced", true);
  scenario.instantaneous_primal = doc.value("instantaneous_primal", false);

  if (doc.contains("disturbances")) {
    for (const Json& d : doc["disturbances"]) {
      Disturbance dist;
      dist.time = require_field(d, "time", "disturbances", origin).get<double>();
      dist.bus = require_field(d, "bus", "disturbances", origin).get<BusId>();
      dist.dp = number_field(d, "dp", 0.0);
      dist.dq = number_field(d, "dq", 0.0);
      scenario.disturbances.push_back(dist);
    }
  }

  if (doc.contains("integrator")) {
    const Json& integ = doc["integrator"];
    const std::string method = integ.value("method", std::string("rk4"));
    if (method == "euler")
      scenario.integrator.method = IntegratorConfig::Method::kEuler;
    else if (method == "rk4")
      scenario.integrator.method = IntegratorConfig::Method::kRk4;
    else
      fail(origin, "integrator.method must be 'euler' or 'rk4'");
    scenario.integrator.step = number_field(integ, "step", 1e-3);
    scenario.integrator.duration = number_field(integ, "duration", 60.0);
  }

  if (doc.contains("comm")) {
    const Json& comm = doc["comm"];
    scenario.comm.delay_rounds = comm.value("delay_rounds", 0);
    scenario.comm.drop_probability = comm.value("drop_probability", 0.0);
    scenario.comm.replay_on_drop = comm.value("replay_on_drop", false);
    scenario.comm.seed = comm.value("seed", std::uint64_t{0});
  }

  if (doc.contains("output")) {
    const Json& output = doc["output"];
    scenario.decimate = output.value("decimate", 10);
    scenario.tail_fraction = output.value("tail_fraction", 0.1);
    scenario.settling_band = output.value("settling_band", 1e-3);
  }

  return scenario;
}

const std::map<std::string, const char*>& preset_table() {
  static const std::map<std::string, const char*> presets = {
      {"single-bus", R"json({
  "name": "single-bus",
  "buses": [
    {"id": 1, "type": "generator", "inertia": 1.0, "damping": 1.0, "controllable": true,
     "cost_electric": {"quadratic": 1.0, "linear": 0.0}, "d_min": -1.0, "d_max": 1.0}
  ],
  "lines": [],
  "disturbances": [{"time": 1.0, "bus": 1, "dp": 0.3}],
  "integrator": {"method": "rk4", "step": 0.001, "duration": 30.0}
})json"},
      {"single-bus-chp", R"json({
  "name": "single-bus-chp",
  "buses": [
    {"id": 1, "type": "generator", "inertia": 1.0, "damping": 1.0, "controllable": true,
     "cost_electric": {"quadratic": 1.0, "linear": 0.0}, "d_min": -1.0, "d_max": 1.0,
     "heat_load": true, "cost_heat": {"quadratic": 1.0, "linear": 0.0},
     "buffer_min": -0.2, "buffer_max": 0.2,
     "chp_upper": [{"slope": 0.5, "offset": 0.0}]}
  ],
  "lines": [],
  "disturbances": [{"time": 1.0, "bus": 1, "dp": 0.3, "dq": 0.3}],
  "integrator": {"method": "rk4", "step": 0.001, "duration": 30.0}
})json"},
      {"two-bus", R"json({
  "name": "two-bus",
  "buses": [
    {"id": 1, "type": "generator", "inertia": 1.0, "damping": 1.0, "controllable": true,
     "cost_electric": {"quadratic": 1.0, "linear": 0.0}, "d_min": -1.0, "d_max": 1.0},
    {"id": 2, "type": "generator", "inertia": 1.0, "damping": 1.0, "controllable": true,
     "cost_electric": {"quadratic": 1.0, "linear": 0.0}, "d_min": -1.0, "d_max": 1.0,
     "heat_load": true, "cost_heat": {"quadratic": 1.0, "linear": 0.0},
     "buffer_min": -0.1, "buffer_max": 0.1,
     "chp_upper": [{"slope": 0.8, "offset": 0.0}]}
  ],
  "lines": [{"from": 1, "to": 2, "susceptance": 5.0}],
  "gains": {"eps_d": 10.0, "eps_q": 10.0},
  "disturbances": [{"time": 1.0, "bus": 2, "dp": 0.3, "dq": 0.2}],
  "integrator": {"method": "rk4", "step": 0.001, "duration": 30.0}
})json"},
      {"two-bus-line-limit", R"json({
  "name": "two-bus-line-limit",
  "buses": [
    {"id": 1, "type": "generator", "inertia": 1.0, "damping": 1.0, "controllable": true,
     "cost_electric": {"quadratic": 1.0, "linear": 0.0}, "d_min": -1.0, "d_max": 1.0},
    {"id": 2, "type": "generator", "inertia": 1.0, "damping": 1.0, "controllable": true,
     "cost_electric": {"quadratic": 1.0, "linear": 0.0}, "d_min": -1.0, "d_max": 1.0,
     "heat_load": true, "cost_heat": {"quadratic": 1.0, "linear": 0.0},
     "buffer_min": -0.1, "buffer_max": 0.1,
     "chp_upper": [{"slope": 0.8, "offset": 0.0}]}
  ],
  "lines": [{"from": 1, "to": 2, "susceptance": 5.0, "flow_min": -0.1, "flow_max": 0.1}],
  "gains": {"eps_d": 10.0, "eps_q": 10.0},
  "disturbances": [{"time": 1.0, "bus": 2, "dp": 0.3, "dq": 0.2}],
  "integrator": {"method": "rk4", "step": 0.001, "duration": 30.0}
})json"},
      {"paper-bus3", R"json({
  "name": "paper-bus3",
  "buses": [
    {"id": 1, "type": "generator", "inertia": 1.0, "damping": 1.0, "controllable": true,
     "cost_electric": {"quadratic": 1.0, "linear": 0.0}, "d_min": -1.0, "d_max": 1.0},
    {"id": 2, "type": "generator", "inertia": 1.0, "damping": 1.0, "controllable": true,
     "cost_electric": {"quadratic": 1.0, "linear": 0.0}, "d_min": -1.0, "d_max": 1.0},
    {"id": 3, "type": "generator", "inertia": 1.0, "damping": 1.0, "controllable": true,
     "cost_electric": {"quadratic": 1.0, "linear": 0.0}, "d_min": -1.0, "d_max": 1.0,
     "heat_load": true, "cost_heat": {"quadratic": 1.0, "linear": 0.0},
     "buffer_min": -0.1, "buffer_max": 0.1,
     "chp_upper": [{"slope": 0.5, "offset": 0.0}]}
  ],
  "lines": [
    {"from": 1, "to": 2, "susceptance": 5.0},
    {"from": 2, "to": 3, "susceptance": 5.0},
    {"from": 1, "to": 3, "susceptance": 5.0}
  ],
  "gains": {"eps_d": 10.0, "eps_q": 10.0, "eps_zeta": 10.0},
  "disturbances": [{"time": 1.0, "bus": 3, "dp": 0.3, "dq": 0.3}],
  "integrator": {"method": "rk4", "step": 0.001, "duration": 60.0}
})json"},
      {"three-bus-mixed", R"json({
  "name": "three-bus-mixed",
  "buses": [
    {"id": 1, "type": "generator", "inertia": 1.0, "damping": 1.0, "controllable": true,
     "cost_electric": {"quadratic": 1.0, "linear": 0.0}, "d_min": -1.0, "d_max": 1.0},
    {"id": 2, "type": "generator", "inertia": 1.0, "damping": 1.0, "controllable": true,
     "cost_electric": {"quadratic": 1.0, "linear": 0.0}, "d_min": -1.0, "d_max": 1.0,
     "heat_load": true, "cost_heat": {"quadratic": 1.0, "linear": 0.0},
     "buffer_min": -0.1, "buffer_max": 0.1},
    {"id": 3, "type": "load", "damping": 1.0}
  ],
  "lines": [
    {"from": 1, "to": 3, "susceptance": 5.0},
    {"from": 2, "to": 3, "susceptance": 5.0}
  ],
  "gains": {"eps_d": 10.0, "eps_q": 10.0, "eps_phi": 0.25},
  "disturbances": [
    {"time": 1.0, "bus": 2, "dq": 0.05},
    {"time": 1.0, "bus": 3, "dp": 0.3}
  ],
  "integrator": {"method": "rk4", "step": 0.001, "duration": 60.0}
})json"}};
  return presets;
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& origin) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(origin, e.what());
  }
  Scenario scenario;
  try {
    scenario = build_scenario(doc, origin);
  } catch (const nlohmann::json::exception& e) {
    fail(origin, e.what());
  }
  scenario.validate();
  check_feasible(scenario.oracle_problem());
  return scenario;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str(), path);
}

std::string scenario_to_json(const Scenario& scenario) {
  const OlfcProblem& problem = scenario.problem;
  const NetworkTopology& topo = problem.topology;
  Json doc;
  doc["name"] = scenario.name;

  Json buses = Json::array();
  for (int i = 0; i < problem.bus_count(); ++i) {
    const size_t si = static_cast<size_t>(i);
    Json bus;
    bus["id"] = topo.bus_id(i);
    bus["type"] = topo.is_generator(i) ? "generator" : "load";
    if (topo.is_generator(i)) bus["inertia"] = problem.phys.inertia(i);
    bus["damping"] = problem.phys.damping(i);
    if (problem.phys.p_in(i) != 0.0) bus["p_in"] = problem.phys.p_in(i);
    if (problem.phys.q_in(i) != 0.0) bus["q_in"] = problem.phys.q_in(i);
    bus["controllable"] = bool(problem.controllable[si]);
    if (problem.controllable[si]) {
      bus["cost_electric"] = {{"quadratic", problem.cost_e[si].a}, {"linear", problem.cost_e[si].b}};
      if (problem.d_min(i) > -kUnbounded) bus["d_min"] = problem.d_min(i);
      if (problem.d_max(i) < kUnbounded) bus["d_max"] = problem.d_max(i);
    }
    bus["heat_load"] = bool(problem.heat_load[si]);
    if (problem.heat_load[si]) {
      bus["cost_heat"] = {{"quadratic", problem.cost_h[si].a}, {"linear", problem.cost_h[si].b}};
      if (problem.phys.buffer_min(i) > -kUnbounded) bus["buffer_min"] = problem.phys.buffer_min(i);
      if (problem.phys.buffer_max(i) < kUnbounded) bus["buffer_max"] = problem.phys.buffer_max(i);
    }
    if (!problem.chp[si].upper.empty()) {
      Json rows = Json::array();
      for (const HalfPlane& hp : problem.chp[si].upper)
        rows.push_back({{"slope", hp.slope}, {"offset", hp.offset}});
      bus["chp_upper"] = rows;
    }
    if (!problem.chp[si].lower.empty()) {
      Json rows = Json::array();
      for (const HalfPlane& hp : problem.chp[si].lower)
        rows.push_back({{"slope", hp.slope}, {"offset", hp.offset}});
      bus["chp_lower"] = rows;
    }
    buses.push_back(bus);
  }
  doc["buses"] = buses;

  Json lines = Json::array();
  for (int l = 0; l < problem.line_count(); ++l) {
    Json line;
    line["from"] = topo.lines()[static_cast<size_t>(l)].from;
    line["to"] = topo.lines()[static_cast<size_t>(l)].to;
    line["susceptance"] = topo.susceptance(l);
    if (problem.flow_min(l) > -kUnbounded) line["flow_min"] = problem.flow_min(l);
    if (problem.flow_max(l) < kUnbounded) line["flow_max"] = problem.flow_max(l);
    lines.push_back(line);
  }
  doc["lines"] = lines;

  Json gains;
  gains["eps_d"] = dump_vector(scenario.gains.eps_d);
  gains["eps_q"] = dump_vector(scenario.gains.eps_q);
  gains["eps_phi"] = dump_vector(scenario.gains.eps_phi);
  gains["eps_lambda"] = dump_vector(scenario.gains.eps_lambda);
  gains["eps_mu"] = dump_vector(scenario.gains.eps_mu);
  gains["k_r"] = dump_vector(scenario.gains.k_r);
  gains["eps_zeta"] = scenario.gains.eps_zeta;
  gains["eps_gamma"] = scenario.gains.eps_gamma;
  gains["eps_delta"] = scenario.gains.eps_delta;
  gains["eps_sigma"] = scenario.gains.eps_sigma;
  doc["gains"] = gains;

  doc["damping_model"] = {{"scale", dump_vector(scenario.damping_model.scale)},
                          {"offset", dump_vector(scenario.damping_model.offset)}};
  doc["chp_enforced"] = scenario.chp_enforced;
  doc["instantaneous_primal"] = scenario.instantaneous_primal;

  Json disturbances = Json::array();
  for (const Disturbance& d : scenario.disturbances)
    disturbances.push_back({{"time", d.time}, {"bus", d.bus}, {"dp", d.dp}, {"dq", d.dq}});
  doc["disturbances"] = disturbances;

  doc["integrator"] = {
      {"method", scenario.integrator.method == IntegratorConfig::Method::kEuler ? "euler" : "rk4"},
      {"step", scenario.integrator.step},
      {"duration", scenario.integrator.duration}};
  doc["comm"] = {{"delay_rounds", scenario.comm.delay_rounds},
                 {"drop_probability", scenario.comm.drop_probability},
                 {"replay_on_drop", scenario.comm.replay_on_drop},
                 {"seed", scenario.comm.seed}};
  doc["output"] = {{"decimate", scenario.decimate},
                   {"tail_fraction", scenario.tail_fraction},
                   {"settling_band", scenario.settling_band}};
  return doc.dump(2) + "\n";
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, text] : preset_table()) names.push_back(name);
  return names;
}

bool is_preset(const std::string& name) { return preset_table().count(name) > 0; }

Scenario preset_scenario(const std::string& name) {
  const auto& table = preset_table();
  auto it = table.find(name);
  if (it == table.end()) {
    std::string known;
    for (const auto& [n, text] : table) known += (known.empty() ? "" : ", ") + n;
    throw ParseError("unknown preset '" + name + "' (available: " + known + ")");
  }
  return parse_scenario(it->second, "preset:" + name);
}

}  // namespace olfc
