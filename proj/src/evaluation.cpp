#include "pedpred/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

#include "pedpred/error.hpp"

namespace pedpred {

unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PEDPRED_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, static_cast<unsigned>(cap));
  }
  return n;
}

LqrTrajectoryPredictor::LqrTrajectoryPredictor(const RoadGraph& graph, PredictorParams params,
                                               const ControllerCache& cache)
    : graph_(graph), params_(std::move(params)), cache_(cache) {}

HorizonPrediction LqrTrajectoryPredictor::predict(const StateTrack& track, std::size_t start,
                                                  int horizon) const {
  PredictorParams params = params_;
  params.horizon = horizon;
  const PredictionTree tree = pedpred::predict(graph_, track.states.at(start), Mat4::Zero(),
                                               params, cache_);
  const std::size_t end = std::min(track.positions.size(), start + horizon + 1);
  const std::vector<Vec2> measured(track.positions.begin() + static_cast<std::ptrdiff_t>(start),
                                   track.positions.begin() + static_cast<std::ptrdiff_t>(end));
  const PredictedPath path = prune_to_measured(tree, measured);

  HorizonPrediction out;
  for (const GaussianBelief& b : path.beliefs) {
    out.mean.push_back(b.mean.position());
    out.cov.push_back(b.cov.topLeftCorner<2, 2>());
  }
  return out;
}

RlTrajectoryPredictor::RlTrajectoryPredictor(const SemanticGrid& grid, RewardConfig rewards,
                                             ValueFunctionStore& store,
                                             RlPredictorOptions options)
    : grid_(grid), rewards_(rewards), store_(store), options_(options) {}

std::int64_t RlTrajectoryPredictor::goal_for(const StateTrack& track) const {
  if (grid_.goals.empty()) throw Error(ErrorCode::kInvalidParams, "grid has no goals");
  const Vec2 end = track.positions.back();
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid_.goals.size(); ++i) {
    const double d = (grid_.center(grid_.goals[i]) - end).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return grid_.goal_ids[best];
}

HorizonPrediction RlTrajectoryPredictor::predict(const StateTrack& track, std::size_t start,
                                                 int horizon) const {
  const ValueFunction& vf = store_.get(goal_for(track));
  SamplingOptions so;
  so.horizon = horizon;
  so.samples = options_.samples;
  so.t_s = options_.t_s;
  so.speed = std::clamp(track.states.at(start).v, options_.min_speed, options_.max_speed);
  so.seed = options_.seed * 0x9E3779B97F4A7C15ULL + std::hash<std::string>{}(track.id) * 31 + start;
  const SampledPrediction sp =
      sample_prediction(grid_, rewards_, vf, options_.alpha, track.positions.at(start), so);
  return HorizonPrediction{sp.mean, sp.cov};
}

PredictedPath prune_to_measured(const PredictionTree& tree, const std::vector<Vec2>& measured) {
  std::vector<PredictedPath> paths = enumerate_paths(tree);
  if (paths.empty()) throw Error(ErrorCode::kInvalidParams, "empty prediction tree");
  std::size_t best = 0;
  std::size_t best_cover = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const std::size_t cover = std::min(paths[i].beliefs.size(), measured.size());
    double cost = 0.0;
    for (std::size_t k = 1; k < cover; ++k) {
      cost += (paths[i].beliefs[k].mean.position() - measured[k]).squaredNorm();
    }
    // enumerate_paths yields leaves in increasing id order, so strict
    // comparisons keep the lowest id on ties.
    if (cover > best_cover || (cover == best_cover && cost < best_cost)) {
      best = i;
      best_cover = cover;
      best_cost = cost;
    }
  }
  return std::move(paths[best]);
}

const HorizonErrors& ErrorTable::at(int tau) const {
  for (const auto& h : horizons) {
    if (h.tau == tau) return h;
  }
  throw Error(ErrorCode::kInvalidParams, "no horizon " + std::to_string(tau));
}

const CovarianceRow& CovarianceReport::at(int tau) const {
  for (const auto& r : rows) {
    if (r.tau == tau) return r;
  }
  throw Error(ErrorCode::kInvalidParams, "no horizon " + std::to_string(tau));
}

ErrorTable prediction_errors(const std::vector<StateTrack>& dataset,
                             const TrajectoryPredictor& predictor, const std::vector<int>& taus,
                             const ErrorOptions& options) {
  if (taus.empty()) throw Error(ErrorCode::kInvalidParams, "empty horizon list");
  if (options.stride < 1) throw Error(ErrorCode::kInvalidParams, "stride must be >= 1");
  for (int tau : taus) {
    if (tau < 1) throw Error(ErrorCode::kInvalidParams, "horizons must be >= 1");
  }
  const int max_tau = *std::max_element(taus.begin(), taus.end());

  // per_traj[i][h] holds trajectory i's samples for taus[h].
  std::vector<std::vector<std::vector<ErrorSample>>> per_traj(
      dataset.size(), std::vector<std::vector<ErrorSample>>(taus.size()));
  auto run = [&](std::size_t i) {
    const StateTrack& track = dataset[i];
    const int T = static_cast<int>(track.size());
    for (int t = 0; t + 1 < T; t += options.stride) {
      const int horizon = std::min(max_tau, T - 1 - t);
      if (horizon < 1) break;
      const HorizonPrediction pred = predictor.predict(track, static_cast<std::size_t>(t), horizon);
      for (std::size_t h = 0; h < taus.size(); ++h) {
        const int tau = taus[h];
        if (tau > horizon || static_cast<std::size_t>(tau) >= pred.mean.size()) continue;
        const Vec2 meas = track.positions[t + tau];
        per_traj[i][h].push_back(ErrorSample{i, t, meas.x() - pred.mean[tau].x(),
                                             meas.y() - pred.mean[tau].y(), pred.cov[tau]});
      }
    }
  };

  // Warm any lazily built state serially before fanning out.
  if (!dataset.empty() && dataset.front().size() >= 2) {
    for (const StateTrack& track : dataset) predictor.predict(track, 0, 1);
  }
  const unsigned workers = std::min<unsigned>(worker_count(), std::max<std::size_t>(1, dataset.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < dataset.size(); ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < dataset.size(); i += workers) run(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  ErrorTable table;
  table.trajectories = dataset.size();
  for (std::size_t h = 0; h < taus.size(); ++h) {
    HorizonErrors he;
    he.tau = taus[h];
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      he.samples.insert(he.samples.end(), per_traj[i][h].begin(), per_traj[i][h].end());
    }
    if (he.samples.empty()) {
      throw Error(ErrorCode::kNoValidWindows,
                  "no trajectory is long enough for tau=" + std::to_string(he.tau));
    }
    double sx = 0.0, sy = 0.0, ss = 0.0;
    for (const ErrorSample& s : he.samples) {
      sx += s.ex;
      sy += s.ey;
      ss += s.ex * s.ex + s.ey * s.ey;
    }
    const double n = static_cast<double>(he.samples.size());
    he.mean_ex = sx / n;
    he.mean_ey = sy / n;
    he.l2 = std::sqrt(he.mean_ex * he.mean_ex + he.mean_ey * he.mean_ey);
    he.rms = std::sqrt(ss / n);
    table.horizons.push_back(std::move(he));
  }
  return table;
}

CovarianceReport covariance_metrics(const ErrorTable& table) {
  CovarianceReport report;
  for (const HorizonErrors& he : table.horizons) {
    const std::size_t n = he.samples.size();
    if (n < 2) {
      throw Error(ErrorCode::kInsufficientSamples,
                  "tau=" + std::to_string(he.tau) + " has " + std::to_string(n) + " sample(s)");
    }
    double mx = 0.0, my = 0.0;
    for (const ErrorSample& s : he.samples) {
      mx += s.ex;
      my += s.ey;
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    Mat2 meas = Mat2::Zero();
    for (const ErrorSample& s : he.samples) {
      const Vec2 d(s.ex - mx, s.ey - my);
      meas += d * d.transpose();
    }
    meas /= static_cast<double>(n - 1);

    CovarianceRow row;
    row.tau = he.tau;
    row.measured = meas;
    row.count = n;
    const double det_meas = meas.determinant();
    double sum_f = 0.0, sum_l = 0.0;
    for (const ErrorSample& s : he.samples) {
      sum_f += (meas - s.predicted_cov).norm();
      sum_l += det_meas - s.predicted_cov.determinant();
    }
    row.delta_f = sum_f / static_cast<double>(n);
    row.delta_lambda = sum_l / static_cast<double>(n);
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace pedpred
