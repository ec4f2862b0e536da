#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fluxobs/scenario_io.hpp"
#include "fluxobs/trace_io.hpp"
#include "helpers.hpp"

using namespace fluxobs;
using testing::vec;

TEST_CASE("every preset serializes and parses back unchanged") {
  for (const std::string& name : preset_names()) {
    const std::string text = serialize_scenario(preset(name));
    CHECK(serialize_scenario(parse_scenario_string(text)) == text);
  }
}

TEST_CASE("maglev preset values") {
  const Scenario sc = preset("maglev-paper");
  CHECK(sc.model == ModelKind::maglev);
  CHECK(sc.step == 1e-5);
  CHECK(sc.horizon == 100.0);
  CHECK(sc.nu == 50.0);
  CHECK(sc.maglev.inertia == 9.67e-2);
  CHECK(sc.maglev.turns == 321.0);
  CHECK(sc.maglev.gap == 3.3e-4);
  CHECK(sc.maglev.arm == 0.145);
  REQUIRE(sc.bias.schedule.size() == 2);
  CHECK(sc.bias.schedule[0].delta_i == vec({-0.003, 0.0025}));
  CHECK(sc.bias.schedule[1].start == 50.0);
  CHECK(sc.bias.schedule[1].delta_i == vec({0.001, 0.0008}));
  CHECK(sc.bias.schedule[1].delta_u == vec({0.002, 0.0002}));
  CHECK(sc.robust_gain == vec({1e4, 1e4}));
  CHECK(sc.adaptive_gain == vec({1e20, 1e20, 1e20, 1e20, 2e13, 2e13, 20}));
  CHECK(sc.controller.alpha == 10.0);
  CHECK(sc.controller.beta == -10.0);
}

TEST_CASE("pmsm preset values") {
  const Scenario sc = preset("pmsm-openloop");
  CHECK(sc.model == ModelKind::pmsm);
  CHECK(sc.pmsm.l_s == 2e-3);
  CHECK(sc.pmsm.lambda_m == 0.05);
  CHECK(sc.filter_init == FilterInit::zero);
  CHECK(sc.bias.schedule[0].delta_i == vec({0.02, -0.01}));
  CHECK(sc.bias.schedule[0].delta_u == vec({0.05, -0.03}));
}

TEST_CASE("unknown key reports key and line") {
  try {
    parse_scenario_string("preset = maglev-paper\n# note\nbogus_key = 3\n");
    FAIL("no exception");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "bogus_key");
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("bogus_key") != std::string::npos);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("malformed values are rejected") {
  CHECK_THROWS_AS(parse_scenario_string("step = fast\n"), ConfigError);
  CHECK_THROWS_AS(parse_scenario_string("robust = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse_scenario_string("model = stepper\n"), ConfigError);
  CHECK_THROWS_AS(parse_scenario_string("step 1e-5\n"), ConfigError);
  CHECK_THROWS_AS(parse_scenario_string("step = 1e-5\npreset = maglev-paper\n"), ConfigError);
}

TEST_CASE("settings override the preset") {
  const Scenario sc =
      parse_scenario_string("preset = maglev-paper\nhorizon = 2\nrobust_gain = 5, 6\n");
  CHECK(sc.horizon == 2.0);
  CHECK(sc.robust_gain == vec({5, 6}));
  CHECK(sc.step == 1e-5);
}

TEST_CASE("missing scenario") {
  CHECK_THROWS_WITH_AS(load_scenario("no-such-thing"), "scenario not found: no-such-thing",
                       ScenarioNotFound);
}

TEST_CASE("scenario keys are all accepted") {
  Scenario sc = preset("maglev-paper");
  const std::string text = serialize_scenario(sc);
  for (const std::string& key : scenario_keys()) {
    if (key.rfind("bias.", 0) == 0) continue;
    CHECK_MESSAGE(text.find(key + " = ") != std::string::npos, key);
  }
}

TEST_CASE("trace csv columns and round trip") {
  Scenario sc = preset("pmsm-openloop");
  sc.horizon = 0.05;
  sc.decimation = 1000;
  const RunResult r = run(sc);
  const auto cols = trace_columns(r.trace);
  REQUIRE(cols.size() > 10);
  CHECK(cols[0] == "t");
  CHECK(cols[1] == "lambda_1");
  CHECK(cols[2] == "lambda_2");
  CHECK(cols[3] == "q_1");
  CHECK(cols[cols.size() - 2] == "w_residual");
  CHECK(cols.back() == "regression_residual");

  std::stringstream ss;
  write_trace_csv(r.trace, ss);
  const CsvTable t = read_csv(ss);
  CHECK(t.header == cols);
  REQUIRE(t.rows.size() == r.trace.records.size());
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    CHECK(t.rows[k][t.column("lambda_1")] == r.trace.records[k].lambda(0));
    CHECK(t.rows[k][t.column("robust_error")] == r.trace.records[k].robust_error);
  }
  CHECK_THROWS_AS(t.column("nope"), std::out_of_range);
}

TEST_CASE("run outputs and metadata parse back") {
  Scenario sc = preset("pmsm-openloop");
  sc.horizon = 0.05;
  const RunResult r = run(sc);
  const auto dir = std::filesystem::temp_directory_path() / "fluxobs_io_test";
  std::filesystem::remove_all(dir);
  write_run_outputs(sc, r, dir.string());
  CHECK(std::filesystem::exists(dir / "trace.csv"));
  CHECK(std::filesystem::exists(dir / "summary.txt"));
  const Scenario back = load_scenario((dir / "metadata.txt").string());
  CHECK(serialize_scenario(back) == serialize_scenario(sc));

  std::ifstream sum(dir / "summary.txt");
  std::string first;
  std::getline(sum, first);
  CHECK(first.find(" = ") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("sweep csv") {
  std::ostringstream out;
  write_sweep_csv({{0.0, 1e-3}, {2.0, 0.5}}, out);
  CHECK(out.str() == "scale,steady_error\n0,0.001\n2,0.5\n");
}
