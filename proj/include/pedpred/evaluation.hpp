#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "pedpred/lqr.hpp"
#include "pedpred/map_document.hpp"
#include "pedpred/predictor.hpp"
#include "pedpred/rl_baseline.hpp"
#include "pedpred/roadgraph.hpp"
#include "pedpred/types.hpp"

namespace pedpred {

// ---------------------------------------------------------------------------
// Trajectory data

enum class TrajectoryLabel { kCrossing, kSidewalk, kUnknown };

TrajectoryLabel trajectory_label_from_string(const std::string& s);
std::string to_string(TrajectoryLabel label);

struct TrajectorySample {
  double t = 0.0;  // s
  double x = 0.0;  // m
  double y = 0.0;  // m
};

struct Trajectory {
  std::string id;
  std::vector<TrajectorySample> samples;
  TrajectoryLabel label = TrajectoryLabel::kUnknown;
};

/// Delimited text with header `t,x,y[,id,label]`. Rows of one id must be
/// contiguous-in-time but may interleave with other ids; output keeps the
/// order of first appearance. Throws kMalformedRow (with line number) and
/// kNonMonotoneTime.
std::vector<Trajectory> load_trajectories(std::istream& in);
std::vector<Trajectory> load_trajectories(const std::filesystem::path& file);

void write_trajectories(std::ostream& out, const std::vector<Trajectory>& trajectories);

/// Linear interpolation onto t0, t0 + t_s, ... up to the last sample.
std::vector<Vec2> resample_positions(const Trajectory& traj, double t_s);

/// Uniform-rate states estimated from positions.
struct StateTrack {
  std::string id;
  TrajectoryLabel label = TrajectoryLabel::kUnknown;
  double t0 = 0.0;
  double t_s = 0.1;
  std::vector<Vec2> positions;  // resampled measurements
  std::vector<PedestrianState> states;

  std::size_t size() const { return states.size(); }
};

/// Resamples to t_s, smooths with a centred moving average (`window`
/// samples, shrinking symmetrically at the ends) and takes central
/// differences for speed and heading. Heading is unwrapped and held through
/// stationary stretches. Throws kTooShort below 3 resampled samples.
StateTrack estimate_states(const Trajectory& traj, double t_s, int window = 5);

// ---------------------------------------------------------------------------
// Prediction errors

/// Position prediction for steps 0..horizon (index = step).
struct HorizonPrediction {
  std::vector<Vec2> mean;
  std::vector<Mat2> cov;
};

/// A predictor evaluated on recorded tracks. It receives the whole track so
/// it can condition on the measured route (pruning / goal selection); it must
/// not read measured positions for any other purpose.
class TrajectoryPredictor {
 public:
  virtual ~TrajectoryPredictor() = default;
  virtual std::string name() const = 0;
  virtual HorizonPrediction predict(const StateTrack& track, std::size_t start,
                                    int horizon) const = 0;
};

/// Prediction tree from the estimated state, pruned to the measured route.
class LqrTrajectoryPredictor : public TrajectoryPredictor {
 public:
  LqrTrajectoryPredictor(const RoadGraph& graph, PredictorParams params,
                         const ControllerCache& cache);
  std::string name() const override { return "lqr"; }
  HorizonPrediction predict(const StateTrack& track, std::size_t start,
                            int horizon) const override;

 private:
  const RoadGraph& graph_;
  PredictorParams params_;
  const ControllerCache& cache_;
};

struct RlPredictorOptions {
  double alpha = 100.0;
  int samples = 100;
  std::uint64_t seed = 0;
  double t_s = 0.1;
  double min_speed = 0.2;  // m/s clamp for the sampled walking speed
  double max_speed = 2.5;
};

/// Grid baseline conditioned on the known goal (the goal nearest the
/// track's final position).
class RlTrajectoryPredictor : public TrajectoryPredictor {
 public:
  RlTrajectoryPredictor(const SemanticGrid& grid, RewardConfig rewards,
                        ValueFunctionStore& store, RlPredictorOptions options);
  std::string name() const override { return "rl"; }
  HorizonPrediction predict(const StateTrack& track, std::size_t start,
                            int horizon) const override;
  std::int64_t goal_for(const StateTrack& track) const;

 private:
  const SemanticGrid& grid_;
  RewardConfig rewards_;
  ValueFunctionStore& store_;
  RlPredictorOptions options_;
};

/// Picks the root-to-leaf path whose means are closest (sum of squared
/// distances) to the measured positions; measured[k] is the position at
/// step k. Paths covering the whole overlap window win over shorter ones;
/// ties go to the lowest leaf id.
PredictedPath prune_to_measured(const PredictionTree& tree, const std::vector<Vec2>& measured);

struct ErrorSample {
  std::size_t trajectory = 0;
  int t = 0;
  double ex = 0.0;  // measured - predicted
  double ey = 0.0;
  Mat2 predicted_cov = Mat2::Zero();
};

struct HorizonErrors {
  int tau = 0;
  std::vector<ErrorSample> samples;  // trajectory-major, t ascending
  double mean_ex = 0.0;
  double mean_ey = 0.0;
  double l2 = 0.0;   // sqrt(mean_ex^2 + mean_ey^2)
  double rms = 0.0;  // sqrt(mean(ex^2 + ey^2)); extra column, not part of the l2 metric
};

struct ErrorTable {
  std::vector<HorizonErrors> horizons;
  std::size_t trajectories = 0;

  const HorizonErrors& at(int tau) const;
};

struct ErrorOptions {
  int stride = 1;  // start-time stride in steps
};

/// Signed position errors at each horizon for every trajectory and start
/// time t with t + tau inside the track. Throws kNoValidWindows when some
/// tau has no window at all.
ErrorTable prediction_errors(const std::vector<StateTrack>& dataset,
                             const TrajectoryPredictor& predictor, const std::vector<int>& taus,
                             const ErrorOptions& options = {});

struct CovarianceRow {
  int tau = 0;
  Mat2 measured = Mat2::Zero();  // pooled sample covariance of (ex, ey)
  double delta_f = 0.0;
  double delta_lambda = 0.0;
  std::size_t count = 0;
};

struct CovarianceReport {
  std::vector<CovarianceRow> rows;
  const CovarianceRow& at(int tau) const;
};

/// Pooled measured covariance vs. predicted covariances. Throws
/// kInsufficientSamples below two samples for some tau.
CovarianceReport covariance_metrics(const ErrorTable& table);

// ---------------------------------------------------------------------------
// Synthetic data

struct SynthOptions {
  int crossing = 29;
  int sidewalk = 17;
  double noise_scale = 1.0;  // multiplies the standard deviation of W
  std::uint64_t seed = 1;
  double sample_rate = 52.0;  // Hz
  double t_s = 0.1;           // control / noise step
  Mat4 W = PredictorParams::default_process_noise();
  LqrWeights weights = LqrWeights::scaled_identity(0.02, 1.0);
  // Aligns the heading with the new edge at a switch, mirroring the
  // predictor's hand-off.
  bool heading_reset_at_switch = true;
  int max_route_edges = 8;
};

/// Simulated pedestrians on random routes between dead-end nodes; route
/// choices at bifurcations are uniform. Crossing trajectories use at least
/// one crosswalk edge. Deterministic given the seed.
std::vector<Trajectory> synth_dataset(const RoadGraph& graph, const SynthOptions& options);

// ---------------------------------------------------------------------------
// Runtime benchmark

struct TimingRow {
  std::string method;
  int tau = 0;
  int iterations = 0;
  double mean_ms = 0.0;
  double median_ms = 0.0;
};

struct BenchmarkResult {
  std::vector<TimingRow> rows;
  std::map<int, double> ratio;  // rl mean / lqr mean per tau
  // Outputs of the final timed call per tau, for work-equivalence checks.
  std::map<int, PredictionTree> lqr_outputs;
  std::map<int, Rollouts> rl_outputs;

  const TimingRow& row(const std::string& method, int tau) const;
};

struct BenchmarkOptions {
  std::vector<int> taus{50, 100, 150, 200};
  int lqr_iterations = 1000;
  int rl_iterations = 1000;
  int rl_samples = 100;
  double alpha = 100.0;
  std::uint64_t seed = 0;
};

struct BenchmarkScenario {
  const RoadGraph* graph = nullptr;
  const ControllerCache* cache = nullptr;  // warmed
  PredictorParams params;
  PedestrianState start;
  const SemanticGrid* grid = nullptr;
  RewardConfig rewards;
  const ValueFunction* value = nullptr;  // warmed
};

/// Wall-clock mean/median per call. The grid timing covers sample
/// generation only; the LQR timing includes covariance propagation.
BenchmarkResult benchmark(const BenchmarkScenario& scenario, const BenchmarkOptions& options);

/// Worker count from PEDPRED_THREADS (default: hardware concurrency).
unsigned worker_count();

}  // namespace pedpred
