#include "spdo/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "spdo/bounds.hpp"
#include "spdo/calculus.hpp"
#include "spdo/errors.hpp"
#include "spdo/field.hpp"
#include "spdo/harmonic.hpp"
#include "spdo/quantize.hpp"

namespace spdo {

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (1 + a) + 0xD1B54A32D192ED03ULL * (1 + b);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "(%.17g)", v);
  return buf;
}

// |xi|^2 over the active axes.
std::string xi_sq(int dim) {
  if (dim == 1) return "xi^2";
  std::string s;
  for (int d = 1; d <= dim; ++d) s += (d > 1 ? "+xi" : "xi") + std::to_string(d) + "^2";
  return "(" + s + ")";
}

struct RegistryEntry {
  std::string name;
  double order;
  std::string (*text)(int dim);
};

const std::vector<RegistryEntry>& registry() {
  static const std::vector<RegistryEntry> entries{
      {"xi", 1.0, [](int) { return std::string("xi"); }},
      {"x", 0.0, [](int) { return std::string("x"); }},
      {"laplacian", 2.0, [](int d) { return xi_sq(d); }},
      {"bessel-1", 1.0, [](int d) { return "(1+" + xi_sq(d) + ")^0.5"; }},
      {"elliptic-1", 1.0, [](int d) { return "(2+sin(x))*(1+" + xi_sq(d) + ")^0.5"; }},
      {"elliptic-2", 2.0, [](int d) { return "(1+sin(x)^2)*(1+" + xi_sq(d) + ")"; }},
      {"sgn-smoothed", 0.0, [](int d) { return "xi*(1+" + xi_sq(d) + ")^(-0.5)"; }},
      {"modulated-0", 0.0, [](int) { return std::string("(2+sin(x))*(1+0.5*sin(w))"); }},
      {"riesz-smoothed", 0.0, [](int d) { return "(1+0.3*cos(x))*" + xi_sq(d) + "*(1+" + xi_sq(d) + ")^(-1)"; }},
      {"garding", 2.0, [](int d) { return "(2+sin(x)+0.1*sin(w))*" + xi_sq(d); }},
  };
  return entries;
}

Symbol parse_symbol(const std::string& text, double order, double p, const std::string& key) {
  try {
    return Symbol::from_expr(text, order, p);
  } catch (const ParseError& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

// `<prefix>.expr` with `<prefix>.order`, else `<prefix>.name` from the registry.
Symbol config_symbol(const RunConfig& cfg, const std::string& prefix, const std::string& fallback, int dim) {
  const double p = cfg.get_double(prefix + ".p", kInf);
  if (cfg.has(prefix + ".expr")) {
    if (!cfg.has(prefix + ".order")) throw ConfigError("config key '" + prefix + ".order' is required with an expression");
    return parse_symbol(cfg.get_string(prefix + ".expr", ""), cfg.get_double(prefix + ".order", 0.0), p,
                        prefix + ".expr");
  }
  Symbol s = registry_symbol(cfg.get_string(prefix + ".name", fallback), dim, prefix + ".name");
  if (std::isfinite(p)) s = Symbol::from_expr(s.expr(), s.order(), p, s.name());
  return s;
}

Grid config_grid(const RunConfig& cfg, int n, int dim = 1) {
  const int d = cfg.get_int("grid.dim", dim);
  const int points = cfg.get_int("grid.n", n);
  if (d < 1 || d > 3) throw ConfigError("config key 'grid.dim' must be 1, 2 or 3");
  if (points < 8 || (points & (points - 1)) != 0) throw ConfigError("config key 'grid.n' must be a power of two >= 8");
  return Grid(d, points, cfg.get_double("grid.period", 2.0 * kPi));
}

TimeGrid config_time(const RunConfig& cfg, double horizon, int steps) {
  const double T = cfg.get_double("time.horizon", horizon);
  const int K = cfg.get_int("time.steps", steps);
  if (!(T > 0.0)) throw ConfigError("config key 'time.horizon' must be positive");
  if (K < 1) throw ConfigError("config key 'time.steps' must be positive");
  return TimeGrid(T, K);
}

int config_paths(const RunConfig& cfg, int paths) {
  const int m = cfg.get_int("ensemble.paths", paths);
  if (m < 1) throw ConfigError("config key 'ensemble.paths' must be positive");
  return m;
}

std::vector<Grid> config_grids(const RunConfig& cfg, const std::string& key, std::vector<double> sizes, int dim) {
  std::vector<Grid> out;
  for (double s : cfg.get_list(key, sizes)) {
    const int n = static_cast<int>(s);
    if (n < 8 || (n & (n - 1)) != 0 || n != s) throw ConfigError("config key '" + key + "' needs powers of two");
    out.emplace_back(dim, n, cfg.get_double("grid.period", 2.0 * kPi));
  }
  return out;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0 ? sxy / sxx : 0.0;
}

CVector plane_wave(const Grid& g, const Vec3& xi) {
  CVector u(static_cast<Eigen::Index>(g.size()));
  for (std::size_t s = 0; s < g.size(); ++s) {
    const Vec3 x = g.point(s);
    u[static_cast<Eigen::Index>(s)] = std::exp(kI * (x[0] * xi[0] + x[1] * xi[1] + x[2] * xi[2]));
  }
  return u;
}

CVector apply_op(const Symbol& a, const Grid& g, const CVector& u, double t = 0.0, const PathPrefix& path = {}) {
  return apply_symbol_op(a, SpectralField(g, u, Representation::physical), t, path).values;
}

Json series_json(const AsymptoticSeries& s) {
  Json terms = Json::array();
  for (const auto& t : s.terms)
    terms.push_back({{"order", t.order}, {"symbol", t.symbol.expr() ? expr::to_string(*t.symbol.expr()) : t.symbol.name()}});
  return terms;
}

}  // namespace

Symbol registry_symbol(const std::string& name, int dim, const std::string& key) {
  for (const auto& e : registry())
    if (e.name == name) return Symbol::from_expr(Symbol::from_expr(e.text(dim), e.order).expr(), e.order, kInf, e.name);
  std::string known;
  for (const auto& e : registry()) known += (known.empty() ? "" : ", ") + e.name;
  throw ConfigError("config key '" + key + "': unknown symbol '" + name + "' (known: " + known + ")");
}

std::vector<std::string> registry_symbol_names() {
  std::vector<std::string> out;
  for (const auto& e : registry()) out.push_back(e.name);
  return out;
}

EquationSpec registry_equation(const std::string& name, int dim, double noise, const std::string& key) {
  if (name == "wave") return wave_spec(dim, noise);
  if (name == "schrodinger") return schrodinger_spec(dim, noise);
  if (name == "double-root") return double_root_spec(dim);
  throw ConfigError("config key '" + key + "': unknown equation '" + name + "' (known: wave, schrodinger, double-root)");
}


namespace {

std::string random_poly_symbol(std::mt19937_64& rng, int degree) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> mode(1, 3);
  std::string s;
  for (int d = 0; d <= degree; ++d) {
    const std::string coef = "(" + num(u(rng)) + "+" + num(u(rng)) + "*sin(" + std::to_string(mode(rng)) + "*x+" +
                             num(u(rng)) + ")+" + num(u(rng)) + "*cos(" + std::to_string(mode(rng)) + "*x))";
    s += (d ? "+" : "") + coef + (d ? "*xi^" + std::to_string(d) : "");
  }
  return s;
}

CVector random_band_limited(const Grid& g, std::mt19937_64& rng, int band) {
  std::normal_distribution<double> n01;
  CVector h = CVector::Zero(static_cast<Eigen::Index>(g.size()));
  for (std::size_t s = 0; s < g.size(); ++s)
    if (std::abs(g.wavenumber(s)[0]) <= band) h[static_cast<Eigen::Index>(s)] = cplx(n01(rng), n01(rng));
  fft_inverse_inplace(g, h);
  return h;
}

CommandResult cmd_compose(const RunConfig& cfg) {
  CommandResult res;
  const int dim = cfg.get_int("grid.dim", 1);
  const Symbol b = config_symbol(cfg, "compose.b", "xi", dim);
  const Symbol a = config_symbol(cfg, "compose.a", "x", dim);
  const int terms = cfg.get_int("compose.terms", 3);
  const AsymptoticSeries series = compose_symbols(b, a, terms, dim);
  const Symbol total = series.truncated_sum();
  const std::string printed = total.expr() ? expr::to_string(*total.expr()) : to_string(series);
  res.text = printed + "\n";
  res.report["expansion"] = printed;
  res.report["terms"] = series_json(series);
  res.pass = true;

  // Oracle: random xi-polynomials, where the truncated series is exact on band-limited fields.
  const int pairs = cfg.get_int("compose.oracle_pairs", 0);
  if (pairs > 0) {
    const Grid g = config_grid(cfg, 64);
    const int fields = cfg.get_int("compose.oracle_fields", 20);
    const double tol = cfg.get_double("compose.oracle_tolerance", 1e-9);
    std::vector<double> errors(static_cast<std::size_t>(pairs), 0.0);
    const std::uint64_t seed = cfg.get_u64("seed", 1);
    parallel_for(static_cast<std::size_t>(pairs), [&](std::size_t i) {
      std::mt19937_64 rng(mix(seed, 11, i));
      const int db = static_cast<int>(rng() % 4), da = static_cast<int>(rng() % 4);
      const Symbol bs = Symbol::from_expr(random_poly_symbol(rng, db), db);
      const Symbol as = Symbol::from_expr(random_poly_symbol(rng, da), da);
      const Symbol c = compose_symbols(bs, as, db + 1, 1).truncated_sum();
      double worst = 0.0;
      for (int f = 0; f < fields; ++f) {
        const CVector u = random_band_limited(g, rng, g.n() / 4 - 4);
        const CVector direct = apply_op(bs, g, apply_op(as, g, u));
        const CVector composed = apply_op(c, g, u);
        worst = std::max(worst, (direct - composed).norm() / std::max(direct.norm(), 1e-300));
      }
      errors[i] = worst;
    });
    CsvTable t{{"pair", "relative_error"}, {}};
    for (std::size_t i = 0; i < errors.size(); ++i) t.add({static_cast<double>(i), errors[i]});
    const double worst = *std::max_element(errors.begin(), errors.end());
    res.report["oracle"] = {{"pairs", pairs}, {"fields", fields}, {"max_relative_error", finite_or_null(worst)},
                            {"tolerance", tol}};
    res.data["oracle"] = t;
    res.pass = worst <= tol;
  }
  return res;
}

std::string random_order1_symbol(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> mode(1, 3);
  const double s = u(rng);
  return "(" + num(1.5 + u(rng)) + "+" + num(u(rng)) + "*sin(" + std::to_string(mode(rng)) + "*x+" + num(u(rng)) +
         ")+" + num(0.5 * u(rng)) + "*sin(w))*(1+xi^2)^" + num(s / 2) + "+" + num(u(rng)) + "*cos(" +
         std::to_string(mode(rng)) + "*x+t)*xi*(1+xi^2)^(-0.5)";
}

CommandResult cmd_quantize_demo(const RunConfig& cfg) {
  CommandResult res;
  const Grid g = config_grid(cfg, 64);
  if (g.dim() != 1) throw ConfigError("config key 'grid.dim': quantize-demo runs in one dimension");
  const TimeGrid tg = config_time(cfg, 1.0, 8);
  const std::uint64_t seed = cfg.get_u64("seed", 1);
  const BrownianEnsemble ens = sample_brownian(config_paths(cfg, 2), tg, mix(seed, 21));
  const double tol = cfg.get_double("quantize.tolerance", 1e-8);
  std::vector<Symbol> symbols;
  if (cfg.has("symbol.expr") || cfg.has("symbol.name")) {
    symbols.push_back(config_symbol(cfg, "symbol", "sgn-smoothed", 1));
  } else {
    std::mt19937_64 rng(mix(seed, 22));
    for (int i = 0, n = cfg.get_int("quantize.count", 20); i < n; ++i)
      symbols.push_back(Symbol::from_expr(random_order1_symbol(rng), 1.0));
  }
  const std::vector<int> nodes{0, tg.steps() / 2, tg.steps()};
  CsvTable t{{"symbol", "path", "node", "max_error"}, {}};
  double worst = 0.0;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    for (int m = 0; m < ens.paths(); ++m) {
      for (int j : nodes) {
        const PathPrefix path = ens.prefix(m, j);
        const double time = tg.node(j);
        std::vector<double> err(g.size(), 0.0);
        parallel_for(g.size(), [&](std::size_t f) {
          const Vec3 xi0 = g.frequency(f);
          const CVector e = plane_wave(g, xi0);
          const CVector v = apply_op(symbols[i], g, e, time, path);
          Sample s;
          s.t = time;
          s.path = path;
          s.xi = xi0;
          double w = 0.0;
          for (std::size_t x = 0; x < g.size(); ++x) {
            s.x = g.point(x);
            s.y = s.x;
            const auto ix = static_cast<Eigen::Index>(x);
            w = std::max(w, std::abs(v[ix] / e[ix] - symbols[i](s)));
          }
          err[f] = w;
        });
        const double e = *std::max_element(err.begin(), err.end());
        worst = std::max(worst, e);
        t.add({static_cast<double>(i), static_cast<double>(m), static_cast<double>(j), e});
      }
    }
  }
  res.data["extraction"] = t;
  res.report["symbols"] = symbols.size();
  res.report["max_error"] = finite_or_null(worst);
  res.report["tolerance"] = tol;
  res.pass = worst <= tol;

  if (cfg.get_bool("quantize.kernel", false)) {
    const KernelMatrix k = compute_kernel(symbols.front(), g, 0.0, ens.prefix(0, 0), {true});
    std::ostringstream os;
    write_kernel_csv(k, os);
    res.raw["kernel"] = os.str();
    res.report["kernel"] = {{"ibp_power", k.ibp_power}, {"diagonal_valid", k.diagonal_valid}};
  }
  return res;
}

CommandResult cmd_verify_symbol(const RunConfig& cfg) {
  CommandResult res;
  const Grid g = config_grid(cfg, 32);
  const TimeGrid tg = config_time(cfg, 1.0, 16);
  const BrownianEnsemble ens = sample_brownian(config_paths(cfg, 4), tg, mix(cfg.get_u64("seed", 1), 31));
  const Symbol a = config_symbol(cfg, "symbol", "elliptic-1", g.dim());
  const EstimateReport r = check_symbol_estimate(a, cfg.get_int("estimate.alpha_max", 2),
                                                 cfg.get_int("estimate.beta_max", 2), g, ens);
  CsvTable t{{"alpha", "beta", "lpf_norm", "slope", "violation"}, {}};
  Json entries = Json::array();
  for (const auto& e : r.entries) {
    t.add({static_cast<double>(total(e.alpha)), static_cast<double>(total(e.beta)), e.lpf_norm, e.slope,
           e.violation ? 1.0 : 0.0});
    entries.push_back({{"alpha", e.alpha},
                       {"beta", e.beta},
                       {"lpf_norm", finite_or_null(e.lpf_norm)},
                       {"slope", finite_or_null(e.slope)},
                       {"violation", e.violation}});
  }
  res.data["estimates"] = t;
  res.report["order"] = r.order;
  res.report["integrability"] = finite_or_null(r.integrability);
  res.report["entries"] = entries;
  res.report["violation"] = r.violation;
  res.report["note"] = r.note;
  res.pass = !r.violation;
  return res;
}

CommandResult cmd_parametrix(const RunConfig& cfg) {
  CommandResult res;
  const Grid g = config_grid(cfg, 128);
  const TimeGrid tg = config_time(cfg, 1.0, 4);
  const BrownianEnsemble ens = sample_brownian(config_paths(cfg, 2), tg, mix(cfg.get_u64("seed", 1), 41));
  const Symbol a = config_symbol(cfg, "symbol", "elliptic-2", g.dim());
  const std::vector<double> orders = cfg.get_list("parametrix.terms", {1, 2, 3});
  const std::vector<double> freqs = cfg.get_list("parametrix.frequencies", {8, 16, 32});
  const double tol = cfg.get_double("parametrix.tolerance", 0.2);
  const std::string side_name = cfg.get_string("parametrix.side", "left");
  if (side_name != "left" && side_name != "right") throw ConfigError("config key 'parametrix.side' must be left or right");
  const ParametrixSide side = side_name == "left" ? ParametrixSide::left : ParametrixSide::right;

  CsvTable t{{"terms", "frequency", "residual"}, {}};
  Json runs = Json::array();
  res.pass = true;
  for (double nd : orders) {
    const int n = static_cast<int>(nd);
    const Symbol p = parametrix(a, n, g, ens, side).truncated_sum();
    std::vector<double> lk, lr;
    for (double k : freqs) {
      const CVector u = plane_wave(g, {k, 0.0, 0.0});
      const CVector r = side == ParametrixSide::left ? CVector(apply_op(p, g, apply_op(a, g, u)) - u)
                                                     : CVector(apply_op(a, g, apply_op(p, g, u)) - u);
      const double rel = r.norm() / u.norm();
      t.add({nd, k, rel});
      lk.push_back(std::log(k));
      lr.push_back(std::log(rel));
    }
    const double slope = fit_slope(lk, lr);
    const double target = -(n + 1);
    const bool ok = std::abs(slope - target) <= tol * std::abs(target);
    res.pass = res.pass && ok;
    runs.push_back({{"terms", n}, {"slope", finite_or_null(slope)}, {"target", target}, {"pass", ok}});
  }
  res.data["residuals"] = t;
  res.report["symbol"] = a.expr() ? expr::to_string(*a.expr()) : a.name();
  res.report["runs"] = runs;
  res.report["tolerance"] = tol;
  return res;
}

CommandResult cmd_bounds(const RunConfig& cfg) {
  CommandResult res;
  const int dim = cfg.get_int("grid.dim", 1);
  const std::vector<Grid> grids = config_grids(cfg, "bounds.sizes", {32, 64, 128}, dim);
  const TimeGrid tg = config_time(cfg, 1.0, 8);
  const std::uint64_t seed = cfg.get_u64("seed", 1);
  const BrownianEnsemble ens = sample_brownian(config_paths(cfg, 16), tg, mix(seed, 51));
  BoundOptions opt;
  opt.trials = cfg.get_int("bounds.trials", 4);
  opt.factor = cfg.get_double("bounds.factor", 2.0);
  opt.seed = mix(seed, 52);
  const double delta = cfg.get_double("bounds.delta", 0.0);

  std::vector<Symbol> symbols;
  if (cfg.has("symbol.expr")) {
    symbols.push_back(config_symbol(cfg, "symbol", "", dim));
  } else {
    std::string list = cfg.get_string("bounds.symbols", "sgn-smoothed,modulated-0,riesz-smoothed");
    std::istringstream in(list);
    std::string name;
    while (std::getline(in, name, ',')) symbols.push_back(registry_symbol(name, dim, "bounds.symbols"));
  }
  CsvTable t{{"symbol", "size", "norm"}, {}};
  Json reports = Json::array();
  res.pass = true;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const BoundReport r = delta == 0.0 ? l2_boundedness_check(symbols[i], grids, ens, opt)
                                       : sobolev_boundedness_check(symbols[i], delta, grids, ens, opt);
    for (std::size_t k = 0; k < r.sizes.size(); ++k) t.add({static_cast<double>(i), double(r.sizes[k]), r.norms[k]});
    reports.push_back({{"symbol", symbols[i].name().empty() ? expr::to_string(*symbols[i].expr()) : symbols[i].name()},
                       {"source", r.source},
                       {"target", r.target},
                       {"sizes", r.sizes},
                       {"norms", finite_or_null(r.norms)},
                       {"variation", finite_or_null(r.variation)},
                       {"factor", r.factor},
                       {"verdict", r.verdict},
                       {"pass", r.pass}});
    res.pass = res.pass && r.pass;
  }
  res.data["norms"] = t;
  res.report["reports"] = reports;
  return res;
}

CommandResult cmd_cz(const RunConfig& cfg) {
  CommandResult res;
  const int draws = cfg.get_int("cz.draws", 100);
  const double p = cfg.get_double("cz.p", 2.0);
  const std::vector<double> dims = cfg.get_list("cz.dims", {1, 2});
  const int n1 = cfg.get_int("cz.n1", 32), n2 = cfg.get_int("cz.n2", 16);
  const TimeGrid tg = config_time(cfg, 1.0, 4);
  const int paths = config_paths(cfg, 4);
  const std::uint64_t seed = cfg.get_u64("seed", 1);
  struct Row {
    int dim = 0;
    double r = 0, recon = 0, measure = 0, mean_zero = 0, good = 0, l1 = 0, outside = 0;
    bool disjoint = false, pass = false;
    std::size_t cubes = 0;
  };
  std::vector<Row> rows(static_cast<std::size_t>(draws) * dims.size());
  parallel_for(rows.size(), [&](std::size_t i) {
    const int dim = static_cast<int>(dims[i % dims.size()]);
    const Grid g(dim, dim == 1 ? n1 : n2);
    const BrownianEnsemble ens = sample_brownian(paths, tg, mix(seed, 61, i));
    const SampledField u = random_adapted_field(g, ens, mix(seed, 62, i), g.n() / 4);
    const std::vector<double> dens = site_lpf_density(u, tg, p);
    double avg = 0.0;
    for (double d : dens) avg += d / static_cast<double>(dens.size());
    std::mt19937_64 rng(mix(seed, 63, i));
    const double r = avg * (1.2 + 4.0 * std::uniform_real_distribution<double>(0.0, 1.0)(rng));
    const CZDecomposition cz = cz_decompose(u, tg, r, p);
    const CZCheck c = check_cz_properties(u, tg, cz);
    rows[i] = {dim, r, c.reconstruction_error, c.measure_bound, c.mean_zero_error, c.good_bound, c.l1_ratio,
               c.outside_error, c.disjoint, c.pass, cz.bad.size()};
  });
  CsvTable t{{"draw", "dim", "level", "cubes", "reconstruction", "measure", "mean_zero", "good", "l1", "outside", "pass"},
             {}};
  int passed = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& w = rows[i];
    t.add({double(i), double(w.dim), w.r, double(w.cubes), w.recon, w.measure, w.mean_zero, w.good, w.l1, w.outside,
           w.pass ? 1.0 : 0.0});
    passed += w.pass;
  }
  res.data["properties"] = t;
  res.report["draws"] = rows.size();
  res.report["passed"] = passed;
  res.pass = passed == static_cast<int>(rows.size());
  return res;
}

CommandResult cmd_garding(const RunConfig& cfg) {
  CommandResult res;
  const int dim = cfg.get_int("grid.dim", 1);
  const std::vector<Grid> grids = config_grids(cfg, "garding.sizes", {32, 64}, dim);
  const TimeGrid tg = config_time(cfg, 1.0, 8);
  const std::uint64_t seed = cfg.get_u64("seed", 1);
  const BrownianEnsemble ens = sample_brownian(config_paths(cfg, 16), tg, mix(seed, 71));
  const Symbol a = config_symbol(cfg, "symbol", "garding", dim);
  GardingOptions opt;
  opt.delta_star = cfg.get_double("garding.delta_star", 1.0);
  opt.epsilon = cfg.get_double("garding.epsilon", 0.1);
  opt.r = cfg.get_double("garding.r", 0.0);
  opt.radius = cfg.get_double("garding.radius", 1.0);
  opt.trials = cfg.get_int("garding.trials", 50);
  opt.seed = mix(seed, 72);
  opt.enforce_hypothesis = cfg.get_bool("garding.enforce_hypothesis", false);
  const GardingReport r = garding_check(a, grids, ens, opt);
  CsvTable t{{"size", "constant", "lhs", "energy", "lower"}, {}};
  for (std::size_t k = 0; k < r.sizes.size(); ++k)
    t.add({double(r.sizes[k]), r.constants[k], r.lhs[k], r.energy[k], r.lower[k]});
  res.data["constants"] = t;
  res.report["sizes"] = r.sizes;
  res.report["constants"] = finite_or_null(r.constants);
  res.report["hypothesis_margin"] = finite_or_null(r.hypothesis_margin);
  res.report["hypothesis_holds"] = r.hypothesis_holds;
  res.pass = r.pass;
  return res;
}

Json carleman_json(const CarlemanReport& r) {
  Json blocks = Json::array();
  for (const auto& b : r.blocks)
    blocks.push_back({{"mass", finite_or_null(b.mass)},
                      {"shifted", finite_or_null(b.shifted)},
                      {"pairing", finite_or_null(b.pairing)},
                      {"skew", finite_or_null(b.skew)},
                      {"variation", finite_or_null(b.variation)},
                      {"energy", finite_or_null(b.energy)},
                      {"lhs", finite_or_null(b.lhs)},
                      {"rhs", finite_or_null(b.rhs)}});
  return {{"mu", r.mu},
          {"log_scale", r.log_scale},
          {"lhs", finite_or_null(r.lhs)},
          {"rhs", finite_or_null(r.rhs)},
          {"margin", finite_or_null(r.margin)},
          {"pass", r.pass},
          {"blocks", blocks}};
}

CommandResult cmd_carleman(const RunConfig& cfg) {
  CommandResult res;
  const Grid g = config_grid(cfg, 32);
  const TimeGrid tg = config_time(cfg, 0.5, 64);
  const int paths = config_paths(cfg, 16);
  const std::uint64_t seed = cfg.get_u64("seed", 1);
  const Symbol b1 = config_symbol(cfg, "carleman.b1", "elliptic-1", g.dim());
  const Symbol a1 = cfg.has("carleman.a1.expr") || cfg.has("carleman.a1.name")
                        ? config_symbol(cfg, "carleman.a1", "", g.dim())
                        : zero_symbol(1.0);
  const std::vector<double> mus = cfg.get_list("carleman.mu", {50, 100, 200});
  const int ensembles = cfg.get_int("carleman.ensembles", 50);
  const double robust_rate = cfg.get_double("carleman.robust_rate", 0.95);

  struct Cell {
    CarlemanReport at, doubled;
  };
  std::vector<Cell> cells(static_cast<std::size_t>(ensembles) * mus.size());
  parallel_for(static_cast<std::size_t>(ensembles), [&](std::size_t e) {
    const BrownianEnsemble ens = sample_brownian(paths, tg, mix(seed, 81, e));
    const SampledField z = pinned_semimartingale(g, ens, mix(seed, 82, e), g.n() / 4);
    for (std::size_t k = 0; k < mus.size(); ++k)
      cells[e * mus.size() + k] = {carleman_report(z, a1, b1, mus[k], ens), carleman_report(z, a1, b1, 2 * mus[k], ens)};
  });
  CsvTable t{{"ensemble", "mu", "lhs", "rhs", "margin", "pass", "pass_2mu"}, {}};
  int passed = 0, robust = 0;
  Json first = Json::array();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    t.add({double(i / mus.size()), c.at.mu, c.at.lhs, c.at.rhs, c.at.margin, c.at.pass ? 1.0 : 0.0,
           c.doubled.pass ? 1.0 : 0.0});
    passed += c.at.pass;
    robust += c.at.pass && c.doubled.pass;
    if (i < mus.size()) first.push_back(carleman_json(c.at));
  }
  const double n = static_cast<double>(cells.size());
  res.data["carleman"] = t;
  res.report["horizon"] = tg.horizon();
  res.report["pass_rate"] = passed / n;
  res.report["robust_rate"] = robust / n;
  res.report["first_ensemble"] = first;
  res.pass = passed == static_cast<int>(cells.size()) && robust / n >= robust_rate;
  return res;
}

CommandResult cmd_uniqueness(const RunConfig& cfg) {
  CommandResult res;
  const Grid g = config_grid(cfg, 32);
  const TimeGrid tg = config_time(cfg, 1.0, 2000);
  const BrownianEnsemble ens = sample_brownian(config_paths(cfg, 64), tg, mix(cfg.get_u64("seed", 1), 91));
  const EquationSpec spec = registry_equation(cfg.get_string("equation.name", "wave"), g.dim(),
                                              cfg.get_double("equation.noise", 0.1));
  UniquenessOptions opt;
  opt.mu_list = cfg.get_list("uniqueness.mu", opt.mu_list);
  opt.radius = cfg.get_double("uniqueness.radius", 0.0);
  opt.forcing = cfg.get_double("uniqueness.forcing", 1.0);
  opt.tolerance = cfg.get_double("uniqueness.tolerance", 0.25);
  const UniquenessReport r = uniqueness_experiment(spec, g, ens, opt);
  CsvTable t{{"mu", "log_lhs", "log_rhs", "log_bound"}, {}};
  for (std::size_t i = 0; i < r.log_bound.size(); ++i) t.add({r.mu[i], r.log_lhs[i], r.log_rhs[i], r.log_bound[i]});
  res.data["decay"] = t;
  res.report["equation"] = spec.name;
  res.report["route"] = r.route;
  res.report["horizon"] = r.horizon;
  res.report["mu"] = r.mu;
  res.report["log_bound"] = finite_or_null(r.log_bound);
  res.report["constant"] = finite_or_null(r.constant);
  res.report["slope"] = finite_or_null(r.slope);
  res.report["target"] = r.target;
  res.report["relative_error"] = finite_or_null(r.relative_error);
  res.report["early_energy"] = r.early_energy;
  res.report["decreasing"] = r.decreasing;
  res.pass = r.pass;
  return res;
}

CommandResult cmd_integrator(const RunConfig& cfg) {
  CommandResult res;
  const std::uint64_t seed = cfg.get_u64("seed", 1);
  const double sigma = cfg.get_double("integrator.sigma", 0.5);
  const double tol = cfg.get_double("integrator.tolerance", 0.05);
  const Grid point(1, 8);
  const auto size = static_cast<Eigen::Index>(point.size());

  // Additive noise, A = 0: E|Y(T)|^2 = sigma^2 T.
  const TimeGrid tg = config_time(cfg, 1.0, 100);
  const BrownianEnsemble big = sample_brownian(cfg.get_int("integrator.paths", 10000), tg, mix(seed, 101));
  SpdeSystem additive;
  additive.drift = MatrixSymbol(1, 1);
  additive.drift(0, 0) = zero_symbol(1.0);
  additive.sources = [&](int, int, double, const PathPrefix&, std::vector<CVector>&, std::vector<CVector>& F) {
    F[0] = CVector::Constant(size, sigma);
  };
  std::vector<double> final_sq(static_cast<std::size_t>(big.paths()), 0.0);
  integrate_spde_system(additive, point, big, {CVector::Zero(size)}, [&](int p, int j, const std::vector<CVector>& y) {
    if (j == tg.steps()) final_sq[static_cast<std::size_t>(p)] = std::norm(y[0][0]);
  });
  double isometry = 0.0;
  for (double v : final_sq) isometry += v / static_cast<double>(final_sq.size());
  const double isometry_target = sigma * sigma * tg.horizon();
  const double isometry_error = std::abs(isometry - isometry_target) / isometry_target;

  // Multiplicative noise: E|Y_K|^2 = (1 + sigma^2 dt)^K for the scheme.
  SpdeSystem mult;
  mult.drift = additive.drift;
  mult.noise = MatrixSymbol(1, 1);
  mult.noise(0, 0) = Symbol::constant(sigma);
  std::vector<double> mult_sq(final_sq.size(), 0.0);
  integrate_spde_system(mult, point, big, {CVector::Ones(size)}, [&](int p, int j, const std::vector<CVector>& y) {
    if (j == tg.steps()) mult_sq[static_cast<std::size_t>(p)] = std::norm(y[0][0]);
  });
  double second = 0.0;
  for (double v : mult_sq) second += v / static_cast<double>(mult_sq.size());
  const double second_target = std::pow(1.0 + sigma * sigma * tg.dt(), tg.steps());
  const double second_error = std::abs(second - second_target) / second_target;

  // Unitary case: Hermitian x-independent drift preserves the L^2 norm.
  const Grid g = config_grid(cfg, 32);
  const TimeGrid tu(1.0, cfg.get_int("integrator.unitary_steps", 1000));
  const BrownianEnsemble few = sample_brownian(4, tu, mix(seed, 102));
  SpdeSystem unitary;
  unitary.drift = MatrixSymbol(1, 1);
  unitary.drift(0, 0) = Symbol::from_expr("xi+3*xi^2*(1+xi^2)^(-1)", 1.0);
  std::mt19937_64 rng(mix(seed, 103));
  const CVector u0 = random_band_limited(g, rng, g.n() / 4);
  const double n0 = u0.norm();
  std::vector<double> drift(4, 0.0);
  integrate_spde_system(unitary, g, few, {u0}, [&](int p, int, const std::vector<CVector>& y) {
    drift[static_cast<std::size_t>(p)] = std::max(drift[static_cast<std::size_t>(p)], std::abs(y[0].norm() / n0 - 1.0));
  });
  const double norm_drift = *std::max_element(drift.begin(), drift.end());
  const double drift_tol = cfg.get_double("integrator.unitary_tolerance", 1e-6);

  res.report["isometry"] = {{"estimate", isometry}, {"target", isometry_target}, {"relative_error", isometry_error}};
  res.report["multiplicative"] = {{"estimate", second}, {"target", second_target}, {"relative_error", second_error}};
  res.report["unitary"] = {{"steps", tu.steps()}, {"norm_drift", norm_drift}, {"tolerance", drift_tol}};
  CsvTable t{{"case", "estimate", "target"}, {}};
  t.add({0, isometry, isometry_target});
  t.add({1, second, second_target});
  t.add({2, norm_drift, 0.0});
  res.data["integrator"] = t;
  res.pass = isometry_error <= tol && second_error <= tol && norm_drift <= drift_tol;
  return res;
}

using Handler = CommandResult (*)(const RunConfig&);

const std::vector<std::pair<std::string, Handler>>& handlers() {
  static const std::vector<std::pair<std::string, Handler>> h{
      {"verify-symbol", cmd_verify_symbol}, {"quantize-demo", cmd_quantize_demo}, {"compose", cmd_compose},
      {"parametrix", cmd_parametrix},       {"bounds", cmd_bounds},               {"cz", cmd_cz},
      {"garding", cmd_garding},             {"carleman", cmd_carleman},           {"uniqueness", cmd_uniqueness},
      {"integrator", cmd_integrator}};
  return h;
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [n, h] : handlers()) v.push_back(n);
    return v;
  }();
  return names;
}

CommandResult run_command(const std::string& command, const RunConfig& cfg) {
  for (const auto& [name, handler] : handlers()) {
    if (name != command) continue;
    cfg.get_u64("seed", 1);
    const std::string declared = cfg.get_string("command", command);
    if (declared != command)
      throw ConfigError("config key 'command' says '" + declared + "' but '" + command + "' was requested");
    CommandResult res = handler(cfg);
    if (const auto extra = cfg.unused(); !extra.empty())
      throw ConfigError("config key '" + extra.front() + "' is not used by " + command);
    Json report;
    report["command"] = command;
    report["seed"] = cfg.get_u64("seed", 1);
    report["config"] = cfg.values();
    report["verdict"] = res.pass ? "PASS" : "FAIL";
    report["results"] = std::move(res.report);
    res.report = std::move(report);
    return res;
  }
  throw ConfigError("unknown command '" + command + "'");
}

int run(const std::string& command, const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
  const std::string started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();
  CommandResult res;
  try {
    res = run_command(command, cfg);
  } catch (const ConfigError& e) {
    log << "configuration error: " << e.what() << '\n';
    return 1;
  } catch (const ParameterError& e) {
    log << "parameter error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    // A violated hypothesis or unstable run is a failed verdict with a report.
    res.report = {{"command", command}, {"seed", cfg.get_u64("seed", 1)}, {"config", cfg.values()},
                  {"verdict", "FAIL"}, {"error", e.what()}};
    res.pass = false;
    log << "error: " << e.what() << '\n';
  }
  write_json(out / "report.json", res.report);
  for (const auto& [name, table] : res.data) write_csv(out / "data" / (name + ".csv"), table);
  for (const auto& [name, text] : res.raw) {
    std::filesystem::create_directories(out / "data");
    std::ofstream(out / "data" / (name + ".csv"), std::ios::binary) << text;
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_json(out / "meta.json", {{"command", command}, {"started", started}, {"finished", utc_now()},
                                 {"elapsed_seconds", elapsed}});
  log << res.text;
  log << command << ": " << (res.pass ? "PASS" : "FAIL") << '\n';
  return res.pass ? 0 : 2;
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Stochastic pseudo-differential operator toolkit"};
  std::string command, config_path, out = "out";
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string names;
  for (const auto& n : command_names()) names += (names.empty() ? "" : ", ") + n;
  app.add_option("command", command, "one of: " + names);
  app.add_option("--config", config_path, "key=value configuration file");
  auto* seed_opt = app.add_option("--seed", seed, "random seed");
  app.add_option("--out", out, "output directory");
  app.add_option("--threads", threads, "worker cap (0 = hardware)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = RunConfig::load(config_path);
    if (*seed_opt) cfg.set("seed", std::to_string(seed));
    if (command.empty()) command = cfg.get_string("command", "");
    if (command.empty()) throw ConfigError("no command given; expected one of: " + names);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 1;
  }
  if (threads > 0) set_thread_limit(threads);
  return run(command, cfg, out, std::cout);
}

}  // namespace spdo
