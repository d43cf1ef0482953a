// One PASS/FAIL line per acceptance criterion. Each criterion is a single CLI
// command with the configuration shown in its line.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "spdo/cli.hpp"

using namespace spdo;
namespace fs = std::filesystem;

namespace {

fs::path g_root;

struct Outcome {
  bool ok = false;
  double seconds = 0.0;
  Json report;
  fs::path dir;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

RunConfig config(const std::string& text) { return RunConfig::parse(text); }

Outcome execute(const std::string& tag, const std::string& command, const RunConfig& cfg) {
  Outcome o;
  o.dir = g_root / tag;
  fs::remove_all(o.dir);
  std::ostringstream log;
  const auto t0 = std::chrono::steady_clock::now();
  const int code = run(command, cfg, o.dir, log);
  o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (fs::exists(o.dir / "report.json")) o.report = Json::parse(slurp(o.dir / "report.json"));
  o.ok = code == 0;
  if (code == 1) std::cerr << tag << ": " << log.str();
  return o;
}

int failures = 0;

void line(int id, bool ok, const std::string& what, const std::string& detail, double seconds) {
  char buf[64];
  std::snprintf(buf, sizeof buf, " (%.1f s)", seconds);
  std::cout << (ok ? "PASS" : "FAIL") << "  " << id << ". " << what << ": " << detail << buf << std::endl;
  failures += !ok;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double num(const Json& j) { return j.is_number() ? j.get<double>() : std::nan(""); }

}  // namespace

int main(int argc, char** argv) {
  g_root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "spdo_acceptance";
  fs::create_directories(g_root);

  struct Spec {
    std::string tag, command, text;
  };
  const std::vector<Spec> runs{
      {"c1", "compose", "seed=1\ncompose.oracle_pairs=100\ncompose.oracle_fields=20\ngrid.n=64\n"},
      {"c2", "quantize-demo", "seed=1\nquantize.count=20\ngrid.n=64\n"},
      {"c3", "parametrix", "seed=1\nsymbol.name=elliptic-2\nparametrix.terms=1,2,3\nparametrix.frequencies=8,16,32\n"},
      {"c4", "cz", "seed=1\ncz.draws=100\ncz.dims=1,2\n"},
      {"c5", "bounds", "seed=1\nbounds.symbols=sgn-smoothed,modulated-0,riesz-smoothed\nbounds.sizes=32,64,128\n"
                       "ensemble.paths=16\n"},
      {"c6", "garding", "seed=1\nsymbol.name=garding\ngarding.delta_star=1\ngarding.epsilon=0.1\ngarding.r=0\n"
                        "garding.trials=50\nensemble.paths=16\n"},
      {"c6b", "garding", "seed=1\nsymbol.name=laplacian\ngarding.trials=50\nensemble.paths=16\n"},
      {"c7", "carleman", "seed=1\ncarleman.b1.name=elliptic-1\ntime.horizon=0.5\ncarleman.mu=50,100,200\n"
                         "carleman.ensembles=50\nensemble.paths=16\n"},
      {"c8", "uniqueness", "seed=1\nequation.name=schrodinger\nuniqueness.mu=50,100,200,400\nensemble.paths=64\n"
                           "grid.n=32\n"},
      {"c9", "integrator", "seed=1\nintegrator.paths=10000\nintegrator.unitary_steps=1000\n"},
  };
  std::map<std::string, Outcome> out;
  for (const auto& r : runs) out[r.tag] = execute(r.tag, r.command, config(r.text));
  auto res = [&](const std::string& tag) -> const Json& { return out[tag].report["results"]; };

  {
    const auto& o = out["c1"];
    const double e = num(res("c1")["oracle"]["max_relative_error"]);
    line(1, o.ok && o.seconds <= 60, "composition vs direct operator product", "max relative L2 error " + fmt(e),
         o.seconds);
  }
  {
    const auto& o = out["c2"];
    line(2, o.ok && o.seconds <= 30, "symbol extraction from plane waves",
         "max error " + fmt(num(res("c2")["max_error"])), o.seconds);
  }
  {
    const auto& o = out["c3"];
    std::string d = "slopes";
    for (const auto& r : res("c3")["runs"]) d += " " + fmt(num(r["slope"])) + "/" + fmt(num(r["target"]));
    line(3, o.ok && o.seconds <= 120, "parametrix residual decay", d, o.seconds);
  }
  {
    const auto& o = out["c4"];
    line(4, o.ok && o.seconds <= 60, "CZ decomposition properties",
         std::to_string(res("c4")["passed"].get<int>()) + "/" + std::to_string(res("c4")["draws"].get<int>()) +
             " draws",
         o.seconds);
  }
  {
    const auto& o = out["c5"];
    std::string d = "norm variation";
    for (const auto& r : res("c5")["reports"]) d += " " + fmt(num(r["variation"]));
    line(5, o.ok && o.seconds <= 120, "L2 boundedness across grids", d, o.seconds);
  }
  {
    const auto& a = out["c6"];
    const auto& b = out["c6b"];
    bool unit = b.ok;
    for (const auto& c : res("c6b")["constants"]) unit = unit && num(c) <= 1.0;
    std::string d = "C";
    for (const auto& c : res("c6")["constants"]) d += " " + fmt(num(c));
    d += ", |xi|^2 C";
    for (const auto& c : res("c6b")["constants"]) d += " " + fmt(num(c));
    line(6, a.ok && unit && a.seconds <= 120, "Garding inequality", d, a.seconds + b.seconds);
  }
  {
    const auto& o = out["c7"];
    line(7, o.ok && o.seconds <= 300, "Carleman inequality",
         "pass rate " + fmt(num(res("c7")["pass_rate"])) + ", robust at 2mu " + fmt(num(res("c7")["robust_rate"])),
         o.seconds);
  }
  {
    const auto& o = out["c8"];
    line(8, o.ok && o.seconds <= 600, "uniqueness decay",
         "slope " + fmt(num(res("c8")["slope"])) + " vs " + fmt(num(res("c8")["target"])) + " (rel. error " +
             fmt(num(res("c8")["relative_error"])) + ")",
         o.seconds);
  }
  {
    const auto& o = out["c9"];
    const auto& r = res("c9");
    line(9, o.ok && o.seconds <= 60, "integrator sanity",
         "isometry error " + fmt(num(r["isometry"]["relative_error"])) + ", unitary drift " +
             fmt(num(r["unitary"]["norm_drift"])),
         o.seconds);
  }
  {
    // Repeat every run with the same seed; the Carleman ensemble count is reduced to bound the runtime.
    double seconds = 0.0;
    int same = 0, total = 0;
    for (const auto& r : runs) {
      std::string text = r.text;
      if (r.tag == "c7") {
        text = "seed=1\ncarleman.b1.name=elliptic-1\ntime.horizon=0.5\ncarleman.mu=50,100,200\n"
               "carleman.ensembles=3\nensemble.paths=16\n";
        execute(r.tag + "_small", r.command, config(text));
      }
      const Outcome again = execute(r.tag + "_again", r.command, config(text));
      seconds += again.seconds;
      const fs::path first = r.tag == "c7" ? g_root / "c7_small" : out[r.tag].dir;
      ++total;
      same += slurp(first / "report.json") == slurp(again.dir / "report.json");
    }
    line(10, same == total, "determinism", std::to_string(same) + "/" + std::to_string(total) +
                                               " reports byte-identical", seconds);
  }
  return failures == 0 ? 0 : 1;
}
