#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "spdo/cli.hpp"
#include "spdo/errors.hpp"

using namespace spdo;
namespace fs = std::filesystem;

namespace {
std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}
fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("spdo_cli_test_" + name);
  fs::remove_all(p);
  return p;
}
}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("config round trip") {
    const RunConfig a = RunConfig::parse("# demo\nseed = 4\n[grid]\nn=32\ndim=1\n[symbol]\nexpr = sin(x)*xi\n");
    CHECK(a.get_int("grid.n", 0) == 32);
    CHECK(a.get_string("symbol.expr", "") == "sin(x)*xi");
    const RunConfig b = RunConfig::parse(a.serialize());
    CHECK(a == b);
    CHECK(b.serialize() == a.serialize());
  }

  TEST_CASE("config errors name the key") {
    auto message = [](const std::string& text, const std::string& key) {
      try {
        const RunConfig c = RunConfig::parse(text);
        c.get_int(key, 0);
      } catch (const ConfigError& e) {
        return std::string(e.what());
      }
      return std::string();
    };
    CHECK(message("grid.n=abc\n", "grid.n").find("grid.n") != std::string::npos);
    CHECK(message("grid.n=1\ngrid.n=2\n", "grid.n").find("grid.n") != std::string::npos);
    CHECK(message("oops\n", "x").find("oops") != std::string::npos);
  }

  TEST_CASE("compose prints the expansion") {
    const CommandResult r = run_command("compose", RunConfig());
    CHECK(r.text == "x·ξ − i\n");
    CHECK(r.pass);
  }

  TEST_CASE("exit codes") {
    std::ostringstream log;
    CHECK(run("compose", RunConfig(), scratch("ok"), log) == 0);
    CHECK(fs::exists(scratch("ok").parent_path()));
    RunConfig unknown;
    unknown.set("symbol.name", "no-such-symbol");
    CHECK(run("verify-symbol", unknown, scratch("unknown"), log) == 1);
    CHECK(log.str().find("symbol.name") != std::string::npos);
    RunConfig stray;
    stray.set("grid.nn", "8");
    CHECK(run("compose", stray, scratch("stray"), log) == 1);
    CHECK(log.str().find("grid.nn") != std::string::npos);
    CHECK(run("no-such-command", RunConfig(), scratch("cmd"), log) == 1);
    RunConfig failing;
    failing.set("parametrix.tolerance", "0.0001");
    CHECK(run("parametrix", failing, scratch("fail"), log) == 2);
  }

  TEST_CASE("reports are byte-identical across runs") {
    RunConfig cfg;
    cfg.set("seed", "17");
    cfg.set("cz.draws", "5");
    std::ostringstream log;
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    REQUIRE(run("cz", cfg, a, log) == 0);
    REQUIRE(run("cz", cfg, b, log) == 0);
    CHECK(slurp(a / "report.json") == slurp(b / "report.json"));
    CHECK(slurp(a / "data" / "properties.csv") == slurp(b / "data" / "properties.csv"));
    CHECK(fs::exists(a / "meta.json"));
  }

  TEST_CASE("registry") {
    CHECK_NOTHROW(registry_symbol("sgn-smoothed", 1));
    CHECK_NOTHROW(registry_symbol("laplacian", 2));
    CHECK_THROWS_AS(registry_symbol("nope", 1), ConfigError);
    CHECK(registry_equation("wave", 1, 0.1).m == 2);
    CHECK_THROWS_AS(registry_equation("heat", 1, 0.1), ConfigError);
  }
}
