#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "se2hypo/config.hpp"
#include "se2hypo/errors.hpp"

using namespace se2hypo;
namespace fs = std::filesystem;

namespace {

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p;
}

std::string config_error(const ConfigSources& src) {
  try {
    resolve_config(src);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("minimal file gives defaults") {
  const auto p = write_file("se2hypo_min.toml", "command = \"verify-identities\"\n");
  const RunConfig cfg = resolve_config({p, {}, false});
  CHECK(cfg.command == Command::VerifyIdentities);
  CHECK(cfg.sigma == 1.0);
  CHECK(cfg.seed == 0);
  CHECK(cfg.potential_spec().id() == PotentialSpec::quadratic(1, 1).id());
  fs::remove(p);
}

TEST_CASE("validation names the key") {
  const auto p = write_file("se2hypo_neg.toml", "sigma = -1\n");
  const std::string msg = config_error({p, {}, false});
  CHECK(msg.find("sigma") != std::string::npos);
  CHECK(msg.find("> 0") != std::string::npos);
  fs::remove(p);

  const std::string dt = config_error({{}, {"simulation.dt=0.5"}, false});
  CHECK(dt.find("simulation.dt") != std::string::npos);
  CHECK_FALSE(config_error({{}, {"discretization.n1=2"}, false}).empty());
  CHECK_FALSE(config_error({{}, {"potential.kind=\"cubic\""}, false}).empty());
}

TEST_CASE("flags override the file") {
  const auto p = write_file("se2hypo_prec.toml", "sigma = 1\n[discretization]\nn1 = 20\n");
  const RunConfig cfg = resolve_config({p, {"sigma=2", "discretization.n1=24"}, false});
  CHECK(cfg.sigma == 2.0);
  CHECK(cfg.discretization.n1 == 24);
  CHECK(cfg.discretization.n2 == 40);
  fs::remove(p);
}

TEST_CASE("environment sits between file and flags") {
  const auto p = write_file("se2hypo_env.toml", "output_dir = \"from-file\"\n");
  setenv("SE2HYPO_OUTPUT_DIR", "from-env", 1);
  CHECK(resolve_config({p, {}, true}).output_dir == "from-env");
  CHECK(resolve_config({p, {}, false}).output_dir == "from-file");
  CHECK(resolve_config({p, {"output_dir=\"from-flag\""}, true}).output_dir == "from-flag");
  unsetenv("SE2HYPO_OUTPUT_DIR");
  fs::remove(p);
}

TEST_CASE("parse errors carry positions") {
  try {
    parse_toml("sigma = 1\nseed = \n", "f.toml");
    FAIL("expected a parse error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("f.toml:2:") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_toml("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_toml("[t]\n[t]\n"), ConfigError);
  CHECK_THROWS_AS(parse_toml("name = bare\n"), ConfigError);
  const auto doc = parse_toml("# c\nn = 1_000 # trailing\nx = 2.5e-3\nb = true\ns = \"a#b\"\n");
  CHECK(std::get<std::int64_t>(doc.at("n").value) == 1000);
  CHECK(std::get<double>(doc.at("x").value) == 2.5e-3);
  CHECK(std::get<bool>(doc.at("b").value));
  CHECK(std::get<std::string>(doc.at("s").value) == "a#b");
}

TEST_CASE("unknown keys are rejected with position") {
  const auto doc = parse_toml("sigma = 1\n[spectrum]\nmethd = \"dense\"\n");
  try {
    config_from_toml(doc);
    FAIL("expected an unknown-key error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("spectrum.methd") != std::string::npos);
    CHECK(msg.find("line 3") != std::string::npos);
  }
}

TEST_CASE("overrides") {
  TomlDocument doc;
  apply_override(doc, "potential.kind=double_well");
  apply_override(doc, "sigma=0.5");
  const RunConfig cfg = config_from_toml(doc);
  CHECK(cfg.potential.kind == "double_well");
  CHECK(cfg.sigma == 0.5);
  CHECK_THROWS_AS(apply_override(doc, "novalue"), ConfigError);
}

TEST_CASE("canonical rendering round-trips") {
  RunConfig cfg;
  cfg.command = Command::Rates;
  cfg.sigma = 1.25;
  cfg.seed = 12345678901234ULL;
  cfg.simulation.mirrored = true;
  cfg.potential.kind = "double_well";
  cfg.rates.tol = 0.2;
  const std::string text = to_toml(cfg);
  const RunConfig back = config_from_toml(parse_toml(text));
  CHECK(to_toml(back) == text);
  CHECK(back.seed == cfg.seed);
  CHECK(back.command == Command::Rates);
}

TEST_CASE("derived simulation config") {
  RunConfig cfg;
  cfg.simulation.initial = "equilibrium";
  CHECK_FALSE(cfg.simulation_config().initial_point.has_value());
  cfg.simulation.initial = "point";
  cfg.simulation.initial_theta = 1.0;
  CHECK(cfg.simulation_config().initial_point->theta() == 1.0);
  CHECK(parse_command("full-report") == Command::FullReport);
  CHECK(std::string(to_string(Command::VerifyIdentities)) == "verify-identities");
  CHECK_THROWS_AS(parse_command("nope"), ConfigError);
}

}
