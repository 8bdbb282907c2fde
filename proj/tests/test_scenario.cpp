#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <fstream>
#include <string>

#include "doctest.h"
#include "olfc/scenario.hpp"

using namespace olfc;

namespace {

std::string replace_once(std::string text, const std::string& from, const std::string& to) {
  const size_t at = text.find(from);
  REQUIRE(at != std::string::npos);
  return text.replace(at, from.size(), to);
}

}  // namespace

TEST_CASE("presets are listed, resolvable, and valid") {
  const std::vector<std::string> names = preset_names();
  REQUIRE(!names.empty());
  for (const std::string& name : names) {
    CAPTURE(name);
    CHECK(is_preset(name));
    const Scenario scenario = preset_scenario(name);
    CHECK(scenario.name == name);
    CHECK_NOTHROW(scenario.validate());
  }
  CHECK(!is_preset("no-such-preset"));
  CHECK_THROWS_AS(preset_scenario("no-such-preset"), ParseError);
}

TEST_CASE("serialization round-trips byte for byte") {
  for (const std::string& name : preset_names()) {
    CAPTURE(name);
    const Scenario scenario = preset_scenario(name);
    const std::string dumped = scenario_to_json(scenario);
    const Scenario reparsed = parse_scenario(dumped, name);
    CHECK(scenario_to_json(reparsed) == dumped);
  }
}

TEST_CASE("files load like in-memory documents") {
  const std::string path = "scenario_roundtrip.json";
  const std::string dumped = scenario_to_json(preset_scenario("two-bus"));
  {
    std::ofstream out(path, std::ios::binary);
    out << dumped;
  }
  const Scenario loaded = load_scenario(path);
  CHECK(scenario_to_json(loaded) == dumped);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_scenario("definitely-missing.json"), ParseError);
}

TEST_CASE("structural problems raise ParseError") {
  CHECK_THROWS_AS(parse_scenario("{nope"), ParseError);
  CHECK_THROWS_AS(parse_scenario("[]"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"name": "x"})"), ParseError);  // no buses
}

TEST_CASE("semantic problems raise ValidationError naming the bus") {
  const std::string good = scenario_to_json(preset_scenario("two-bus"));
  const std::string bad = replace_once(good, "\"damping\": 1.0", "\"damping\": 0.0");
  try {
    parse_scenario(bad, "broken");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    bool saw = false;
    for (const std::string& issue : e.issues())
      saw |= issue.find("damping") != std::string::npos && issue.find("bus") != std::string::npos;
    CHECK(saw);
  }
}

TEST_CASE("unknown integrator method is rejected with the file named") {
  const std::string good = scenario_to_json(preset_scenario("single-bus"));
  const std::string bad = replace_once(good, "\"rk4\"", "\"leapfrog\"");
  try {
    parse_scenario(bad, "myfile.json");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string what = e.what();
    CHECK(what.find("myfile.json") != std::string::npos);
    CHECK(what.find("euler") != std::string::npos);
  }
}

TEST_CASE("disturbances accumulate into the steady-state problem") {
  const Scenario scenario = preset_scenario("paper-bus3");
  const OlfcProblem after = scenario.disturbed_problem();
  const OlfcProblem& before = scenario.problem;
  const int bus3 = scenario.problem.topology.bus_index(3);
  CHECK(after.phys.p_in(bus3) == doctest::Approx(before.phys.p_in(bus3) + 0.3));
  CHECK(after.phys.q_in(bus3) == doctest::Approx(before.phys.q_in(bus3) + 0.3));
  const int bus1 = scenario.problem.topology.bus_index(1);
  CHECK(after.phys.p_in(bus1) == before.phys.p_in(bus1));
}

TEST_CASE("the controller's target problem drops ignored couplings") {
  Scenario scenario = preset_scenario("paper-bus3");
  scenario.chp_enforced = false;
  const OlfcProblem relaxed = scenario.oracle_problem();
  for (const ChpRegion& region : relaxed.chp) CHECK(region.empty());
  scenario.chp_enforced = true;
  const OlfcProblem kept = scenario.oracle_problem();
  const int bus3 = scenario.problem.topology.bus_index(3);
  CHECK(!kept.chp[static_cast<size_t>(bus3)].empty());
}

TEST_CASE("scenario gains are parsed into per-bus vectors") {
  const Scenario scenario = preset_scenario("paper-bus3");
  CHECK(scenario.gains.eps_d.minCoeff() == 10.0);
  CHECK(scenario.gains.eps_d.maxCoeff() == 10.0);
  CHECK(scenario.gains.eps_zeta == 10.0);
  CHECK(scenario.gains.eps_lambda.maxCoeff() == 1.0);
}

TEST_CASE("scenario validation rejects bad run settings") {
  Scenario scenario = preset_scenario("single-bus");
  scenario.integrator.step = 0.0;
  CHECK_THROWS_AS(scenario.validate(), ValidationError);
  scenario = preset_scenario("single-bus");
  scenario.decimate = 0;
  CHECK_THROWS_AS(scenario.validate(), ValidationError);
  scenario = preset_scenario("single-bus");
  scenario.disturbances[0].bus = 77;  // no such bus
  CHECK_THROWS_AS(scenario.validate(), ValidationError);
  scenario = preset_scenario("single-bus");
  scenario.disturbances[0].time = -1.0;
  CHECK_THROWS_AS(scenario.validate(), ValidationError);
}
