#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "uerw/cli.hpp"

using namespace uerw;
using cli::Json;
using cli::RunConfig;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "uerw_cli_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("regime classification output") {
  const auto crit = run({"regime", "--p", "0.5", "--beta", "1"});
  REQUIRE(crit.code == 0);
  const auto j = Json::parse(crit.out);
  CHECK(j["regime"] == "CRITICAL");
  CHECK(j["theta"].get<double>() == Catch::Approx(0.0).margin(1e-15));

  const auto sub = run({"regime", "--p", "0.5", "--beta", "2"});
  REQUIRE(sub.code == 0);
  CHECK(Json::parse(sub.out)["regime"] == "SUBEXTINCT");

  const auto drift = Json::parse(run({"regime", "--p", "0.7", "--beta", "0.5"}).out);
  CHECK(drift["regime"] == "DRIFT_SUPER");
  CHECK(drift["theta"].get<double>() == Catch::Approx(0.55));
  CHECK(Json::parse(run({"regime", "--p", "0.7", "--beta", "0"}).out)["regime"] == "DRIFT_SUB");
}

TEST_CASE("simulate with one step") {
  const auto r = run({"simulate", "--p", "0.5", "--beta", "0", "--steps", "1"});
  REQUIRE(r.code == 0);
  CHECK(r.out == "n,S,Sigma,M\n1,1,1,1\n");
  // The resolved config goes to the secondary sink.
  const auto cfg = Json::parse(r.err);
  CHECK(cfg["steps"] == 1);
  CHECK(cfg["version"] == cli::kVersion);
}

TEST_CASE("beta = -1 is a usage error") {
  const auto r = run({"simulate", "--p", "0.5", "--beta", "-1"});
  CHECK(r.code == 1);
  CHECK(r.err.find("beta > -1") != std::string::npos);
  CHECK(r.out.empty());
}

TEST_CASE("other usage errors") {
  CHECK(run({"simulate", "--p", "1.5", "--beta", "0"}).code == 1);
  CHECK(run({"simulate", "--p", "0.5"}).code == 1);
  CHECK(run({"simulate", "--p", "0.5", "--beta", "0", "--steps", "0"}).code == 1);
  CHECK(run({"simulate", "--p", "0.5", "--beta", "0", "--bogus", "1"}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({}).code == 1);
  CHECK(run({"clt", "--p", "0.7", "--beta", "0", "--n-eval", "100", "--n-ref", "50"}).code == 1);
  CHECK(run({"moments", "--p", "0.7", "--beta", "0", "--index-set", "odd"}).code == 1);
}

TEST_CASE("domain and resource failures") {
  // CLT needs θ > 0.
  const auto clt = run({"clt", "--p", "0.5", "--beta", "2", "--steps", "100", "--replicas", "2"});
  CHECK(clt.code == 2);
  const auto big = run({"simulate", "--p", "0.5", "--beta", "0", "--steps", "1000000000", "--memory-budget-mb", "1"});
  CHECK(big.code == 3);
  CHECK_FALSE(big.err.empty());
}

TEST_CASE("help and version") {
  const auto v = run({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find(cli::kVersion) != std::string::npos);
  const auto h = run({"--help"});
  CHECK(h.code == 0);
  CHECK(h.out.find("simulate") != std::string::npos);
}

TEST_CASE("minimal arguments fill defaults") {
  const auto c = cli::parse_config({"ensemble", "--p", "0.5", "--beta", "0", "--steps", "1000"});
  CHECK(c.command == "ensemble");
  CHECK(c.p == 0.5);
  CHECK(c.beta == 0.0);
  CHECK(c.steps == 1000);
  CHECK(c.checkpoint_ratio == 1.2);
  CHECK(c.delta == 1e-6);
  CHECK(c.seed == 1);
  CHECK(c.threads == 1);
  CHECK(c.out == "-");
  CHECK_FALSE(c.n_eval);
  CHECK(c.overrides == std::vector<std::string>{"p", "beta", "steps"});
  CHECK_NOTHROW(cli::validate(c));
}

TEST_CASE("config serialization round-trips") {
  RunConfig c;
  c.command = "clt";
  c.p = 0.1 + 0.2;
  c.beta = -1.0 / 3.0;
  c.steps = 123456789;
  c.replicas = 77;
  c.seed = 18446744073709551615ull;
  c.checkpoint_ratio = 1.0 + 1e-9;
  c.n_eval = 1000;
  c.delta = 1e-300;
  c.index_set = "arith:2,3";
  c.out = "x.csv";
  c.threads = 8;
  c.raw_links = true;
  c.config_file = "cfg.json";
  c.overrides = {"p", "seed"};
  const Json j = cli::to_json(c);
  CHECK(cli::config_from_json(Json::parse(j.dump())) == c);
  CHECK_THROWS_AS(cli::config_from_json(Json{{"unknown-key", 1}}), UsageError);
  CHECK_THROWS_AS(cli::config_from_json(Json{{"steps", "many"}}), UsageError);
}

TEST_CASE("config file with flag override") {
  const auto path = scratch("cfg.json");
  {
    std::ofstream f(path);
    f << R"({"command": "simulate", "p": 0.6, "beta": 0.25, "steps": 50, "seed": 9})";
  }
  const auto c = cli::parse_config({"simulate", "--config", path.string(), "--steps", "80"});
  CHECK(c.p == 0.6);
  CHECK(c.beta == 0.25);
  CHECK(c.seed == 9);
  CHECK(c.steps == 80);
  CHECK(c.config_file == path.string());
  CHECK(c.overrides == std::vector<std::string>{"steps"});

  const auto r = run({"simulate", "--config", path.string(), "--steps", "80"});
  REQUIRE(r.code == 0);
  const auto resolved = Json::parse(r.err);
  CHECK(resolved["steps"] == 80);
  CHECK(resolved["config-file"] == path.string());
  CHECK(resolved["overrides"] == Json::array({"steps"}));

  CHECK(run({"ensemble", "--config", path.string()}).code == 1);
  CHECK(run({"simulate", "--config", scratch("missing.json").string()}).code == 1);
}

TEST_CASE("index-set specs") {
  const auto all = cli::parse_index_set("all", 100);
  CHECK(all.contains(1));
  CHECK(all.contains(99));
  const auto ar = cli::parse_index_set("arith:2,3", 100);
  CHECK(ar.contains(2));
  CHECK(ar.contains(5));
  CHECK_FALSE(ar.contains(3));
  CHECK_THROWS_AS(cli::parse_index_set("arith:0,3", 100), UsageError);
  CHECK_THROWS_AS(cli::parse_index_set("arith:2", 100), UsageError);
  CHECK_THROWS_AS(cli::parse_index_set("arith:2,x", 100), UsageError);

  const auto members = scratch("members.txt");
  {
    std::ofstream f(members);
    f << "1\n4\n9\n16\n";
  }
  const auto listed = cli::parse_index_set("file:" + members.string(), 20);
  CHECK(listed.contains(9));
  CHECK_FALSE(listed.contains(10));
  const auto comp = cli::parse_index_set("complement-file:" + members.string(), 20);
  CHECK_FALSE(comp.contains(9));
  CHECK(comp.contains(10));
  CHECK_THROWS_AS(cli::parse_index_set("file:" + scratch("nope.txt").string(), 20), UsageError);
  CHECK_THROWS_AS(cli::parse_index_set("squares", 20), UsageError);
}

TEST_CASE("simulate CSV matches the library") {
  const auto r = run({"simulate", "--p", "0.7", "--beta", "0.5", "--steps", "500", "--seed", "42"});
  REQUIRE(r.code == 0);
  const auto t = simulate(ModelParams(0.7, 0.5), 500, 42, CheckpointGrid::geometric(500));
  std::string expected = "n,S,Sigma,M\n";
  for (const auto& cp : t.checkpoints()) {
    expected += std::to_string(cp.n) + "," + std::to_string(cp.s) + "," + cli::detail::fmt(cp.sigma) + "," +
                cli::detail::fmt(cp.m) + "\n";
  }
  CHECK(r.out == expected);
}

TEST_CASE("output files and sibling files") {
  const auto out = scratch("ens.json");
  const auto r = run({"ensemble", "--p", "0.7", "--beta", "0", "--steps", "2000", "--replicas", "20", "--out",
                      out.string()});
  REQUIRE(r.code == 0);
  const auto report = Json::parse(slurp(out));
  CHECK(report["config"]["replicas"] == 20);
  const auto csv = slurp(out.string() + ".csv");
  CHECK(csv.rfind("n,mean_S,mean_Sigma,mean_M,se_M,S_q10,S_q50,S_q90\n", 0) == 0);
}

TEST_CASE("moments, clt and genealogy outputs") {
  const auto m = run({"moments", "--p", "0.5", "--beta", "0", "--steps", "10"});
  REQUIRE(m.code == 0);
  CHECK(m.out.rfind("n,E_S,E_Sigma,E_Xi2,ratio\n1,1,1,1,1\n", 0) == 0);

  const auto c = run({"clt", "--p", "0.7", "--beta", "0", "--steps", "4000", "--replicas", "30"});
  REQUIRE(c.code == 0);
  CHECK(c.out.rfind("replica,Z,W_scaled\n", 0) == 0);
  const auto summary = Json::parse(c.err);
  CHECK(summary["n_eval"] == 1000);
  CHECK(summary["n_ref"] == 4000);

  const auto g = run({"genealogy", "--p", "0.7", "--beta", "0.5", "--steps", "3000", "--seed", "3"});
  REQUIRE(g.code == 0);
  std::istringstream lines(g.out);
  std::string line;
  std::size_t records = 0;
  while (std::getline(lines, line)) {
    const auto rec = Json::parse(line);
    CHECK(rec.contains("level"));
    CHECK(rec.contains("root"));
    CHECK(rec.contains("size"));
    CHECK(rec["growth"].is_array());
    ++records;
  }
  CHECK(records > 0);
  CHECK(Json::parse(g.err)["decomposition_check"] == true);
}

TEST_CASE("outputs are byte-identical across thread budgets") {
  for (const std::string cmd : {"ensemble", "clt"}) {
    const std::vector<std::string> base = {cmd, "--p", "0.7", "--beta", "0.5", "--steps", "5000", "--replicas", "64",
                                           "--seed", "11"};
    auto one = base, eight = base;
    one.insert(one.end(), {"--threads", "1"});
    eight.insert(eight.end(), {"--threads", "8"});
    const auto a = run(one);
    const auto b = run(eight);
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK_FALSE(a.out.empty());
    CHECK(a.out == b.out);
    CHECK(a.err == b.err);
  }
}
