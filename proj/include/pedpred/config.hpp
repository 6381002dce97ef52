#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pedpred/evaluation.hpp"
#include "pedpred/predictor.hpp"
#include "pedpred/rl_baseline.hpp"
#include "pedpred/types.hpp"

namespace pedpred {

/// Everything an experiment needs besides its input files. Serialized as a
/// JSON object; every key is optional and unknown keys are rejected.
struct RunConfig {
  std::string map;
  double t_s = 0.1;
  double q = 0.02;
  double r = 1.0;
  Mat42 S = Mat42::Zero();
  Mat4 W = PredictorParams::default_process_noise();
  double d = kDefaultSwitchDistance;
  int horizon = 200;
  std::vector<int> taus{10, 50, 100, 150, 200};
  std::size_t max_branches = 64;
  bool allow_uturn = false;
  int stride = 1;

  double alpha = 100.0;
  RewardConfig rewards;
  int rl_samples = 100;
  std::optional<std::string> value_cache;  // directory for solved value functions

  std::uint64_t seed = 1;
  int synth_crossing = 29;
  int synth_sidewalk = 17;
  double synth_noise = 1.0;

  int bench_iterations = 1000;
  PedestrianState bench_state{-3.5, -10.0, 1.0, kPi / 2};
  std::optional<std::int64_t> bench_goal;  // default: first goal of the map

  double ellipse_percentile = 0.99;

  LqrWeights weights() const;
  PredictorParams predictor_params() const;
  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);
/// Throws kMalformedDocument on wrong types or unknown keys.
RunConfig config_from_json(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& file);

nlohmann::json to_json(const std::vector<TimingRow>& rows);
std::vector<TimingRow> timing_rows_from_json(const nlohmann::json& doc);

}  // namespace pedpred
