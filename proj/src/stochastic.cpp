#include "spdo/stochastic.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <mutex>
#include <thread>

namespace spdo {

BrownianEnsemble::BrownianEnsemble(TimeGrid tg, std::uint64_t seed, std::vector<double> values, int paths)
    : tg_(tg), seed_(seed), w_(std::move(values)), paths_(paths) {}

PathPrefix BrownianEnsemble::prefix(int m, int j) const {
  return PathPrefix{path(m).first(static_cast<std::size_t>(j) + 1), tg_.dt()};
}

std::span<const double> BrownianEnsemble::path(int m) const {
  const std::size_t nodes = tg_.steps() + 1;
  return std::span<const double>(w_.data() + static_cast<std::size_t>(m) * nodes, nodes);
}

BrownianEnsemble sample_brownian(int paths, const TimeGrid& tg, std::uint64_t seed) {
  if (paths < 1) throw ParameterError("ensemble needs at least one path");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd = std::sqrt(tg.dt());
  const int nodes = tg.steps() + 1;
  std::vector<double> w(static_cast<std::size_t>(paths) * nodes, 0.0);
  for (int m = 0; m < paths; ++m) {
    double acc = 0.0;
    for (int j = 1; j < nodes; ++j) {
      acc += sd * normal(rng);
      w[static_cast<std::size_t>(m) * nodes + j] = acc;
    }
  }
  return BrownianEnsemble(tg, seed, std::move(w), paths);
}

LpfNorm lpf_norm(const ScalarProcess& x, const TimeGrid& tg, double p) {
  if (!(p >= 1.0)) throw ParameterError("L^p_F exponent must be >= 1");
  LpfNorm out;
  if (std::isinf(p)) {
    double mx = 0.0;
    for (double v : x.values) mx = std::max(mx, std::abs(v));
    out.raw = out.norm = mx;
    return out;
  }
  double acc = 0.0;
  for (int m = 0; m < x.paths; ++m) {
    double integral = 0.0;
    for (int j = 0; j < x.nodes; ++j) integral += tg.weight(j) * std::pow(std::abs(x.at(m, j)), p);
    acc += integral;
  }
  out.raw = acc / x.paths;
  out.norm = std::pow(out.raw, 1.0 / p);
  return out;
}

namespace {
std::atomic<unsigned> g_thread_limit{0};
}

void set_thread_limit(unsigned limit) { g_thread_limit = limit; }

namespace {
thread_local bool t_inside_worker = false;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  unsigned workers = t_inside_worker ? 1u : g_thread_limit.load();
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      t_inside_worker = true;
      for (std::size_t i; (i = next++) < count;) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace spdo
