#include <algorithm>
#include <chrono>
#include <numeric>

#include "pedpred/error.hpp"
#include "pedpred/evaluation.hpp"

namespace pedpred {

namespace {

template <typename F>
TimingRow time_calls(const std::string& method, int tau, int iterations, F&& call) {
  std::vector<double> ms;
  ms.reserve(static_cast<std::size_t>(iterations));
  for (int i = 0; i < iterations; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    call();
    const auto t1 = std::chrono::steady_clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  TimingRow row{method, tau, iterations, 0.0, 0.0};
  row.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(ms.size());
  std::sort(ms.begin(), ms.end());
  const std::size_t n = ms.size();
  row.median_ms = n % 2 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
  return row;
}

}  // namespace

const TimingRow& BenchmarkResult::row(const std::string& method, int tau) const {
  for (const TimingRow& r : rows) {
    if (r.method == method && r.tau == tau) return r;
  }
  throw Error(ErrorCode::kInvalidParams, "no timing for " + method + " tau=" + std::to_string(tau));
}

BenchmarkResult benchmark(const BenchmarkScenario& sc, const BenchmarkOptions& options) {
  if (!sc.graph || !sc.cache || !sc.grid || !sc.value) {
    throw Error(ErrorCode::kInvalidParams, "benchmark scenario is incomplete");
  }
  if (options.lqr_iterations < 1 || options.rl_iterations < 1 || options.rl_samples < 1) {
    throw Error(ErrorCode::kInvalidParams, "iterations and samples must be >= 1");
  }
  BenchmarkResult result;
  for (int tau : options.taus) {
    PredictorParams params = sc.params;
    params.horizon = tau;
    PredictionTree tree;
    result.rows.push_back(time_calls("lqr", tau, options.lqr_iterations, [&] {
      tree = predict(*sc.graph, sc.start, Mat4::Zero(), params, *sc.cache);
    }));
    result.lqr_outputs[tau] = std::move(tree);

    SamplingOptions so;
    so.horizon = tau;
    so.samples = options.rl_samples;
    so.seed = options.seed;
    so.t_s = sc.params.t_s;
    so.speed = sc.start.v;
    Rollouts rollouts;
    result.rows.push_back(time_calls("rl", tau, options.rl_iterations, [&] {
      rollouts = sample_rollouts(*sc.grid, sc.rewards, *sc.value, options.alpha,
                                 sc.start.position(), so);
    }));
    result.rl_outputs[tau] = std::move(rollouts);
    result.ratio[tau] = result.row("rl", tau).mean_ms / result.row("lqr", tau).mean_ms;
  }
  return result;
}

}  // namespace pedpred
