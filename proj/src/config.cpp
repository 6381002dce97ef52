#include "pedpred/config.hpp"

#include <fstream>
#include <set>

#include "pedpred/error.hpp"

namespace pedpred {

namespace {

template <typename M>
nlohmann::json matrix_rows(const M& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

template <typename M>
M matrix_from(const nlohmann::json& j, const char* key) {
  M m;
  if (!j.is_array() || static_cast<int>(j.size()) != m.rows()) {
    throw Error(ErrorCode::kMalformedDocument,
                std::string(key) + " must have " + std::to_string(m.rows()) + " rows");
  }
  for (int i = 0; i < m.rows(); ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != m.cols()) {
      throw Error(ErrorCode::kMalformedDocument,
                  std::string(key) + " rows must have " + std::to_string(m.cols()) + " entries");
    }
    for (int k = 0; k < m.cols(); ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

}  // namespace

LqrWeights RunConfig::weights() const {
  LqrWeights w = LqrWeights::scaled_identity(q, r);
  w.S = S;
  return w;
}

PredictorParams RunConfig::predictor_params() const {
  PredictorParams p;
  p.W = W;
  p.horizon = horizon;
  p.t_s = t_s;
  p.max_branches = max_branches;
  p.weights = weights();
  p.allow_uturn = allow_uturn;
  return p;
}

void RunConfig::validate() const {
  predictor_params().validate();
  rewards.validate();
  if (!(q >= 0.0) || !(r > 0.0)) throw Error(ErrorCode::kInvalidParams, "need q >= 0 and r > 0");
  if (!(d >= 0.0)) throw Error(ErrorCode::kInvalidParams, "d must be >= 0");
  if (!(alpha > 0.0)) throw Error(ErrorCode::kInvalidParams, "alpha must be positive");
  if (rl_samples < 1) throw Error(ErrorCode::kInvalidParams, "rl_samples must be >= 1");
  if (stride < 1) throw Error(ErrorCode::kInvalidParams, "stride must be >= 1");
  if (bench_iterations < 1) throw Error(ErrorCode::kInvalidParams, "bench_iterations must be >= 1");
  if (synth_crossing < 0 || synth_sidewalk < 0 || !(synth_noise >= 0.0)) {
    throw Error(ErrorCode::kInvalidParams, "bad synthetic dataset settings");
  }
  if (!(ellipse_percentile > 0.0 && ellipse_percentile < 1.0)) {
    throw Error(ErrorCode::kInvalidParams, "ellipse_percentile must lie in (0, 1)");
  }
  for (int tau : taus) {
    if (tau < 1) throw Error(ErrorCode::kInvalidParams, "taus must be >= 1");
  }
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["map"] = c.map;
  j["t_s"] = c.t_s;
  j["q"] = c.q;
  j["r"] = c.r;
  j["S"] = matrix_rows(c.S);
  j["W"] = matrix_rows(c.W);
  j["d"] = c.d;
  j["horizon"] = c.horizon;
  j["taus"] = c.taus;
  j["max_branches"] = c.max_branches;
  j["allow_uturn"] = c.allow_uturn;
  j["stride"] = c.stride;
  j["alpha"] = c.alpha;
  j["rewards"] = {{"road", c.rewards.road},
                  {"sidewalk", c.rewards.sidewalk},
                  {"crosswalk", c.rewards.crosswalk},
                  {"goal", c.rewards.goal},
                  {"gamma", c.rewards.gamma}};
  j["rl_samples"] = c.rl_samples;
  j["value_cache"] = c.value_cache ? nlohmann::json(*c.value_cache) : nlohmann::json(nullptr);
  j["seed"] = c.seed;
  j["synth"] = {{"crossing", c.synth_crossing},
                {"sidewalk", c.synth_sidewalk},
                {"noise", c.synth_noise}};
  j["bench"] = {{"iterations", c.bench_iterations},
                {"state", {c.bench_state.x, c.bench_state.y, c.bench_state.v, c.bench_state.theta}},
                {"goal", c.bench_goal ? nlohmann::json(*c.bench_goal) : nlohmann::json(nullptr)}};
  j["ellipse_percentile"] = c.ellipse_percentile;
  return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kMalformedDocument, "config must be an object");
  static const std::set<std::string> known{
      "map",     "t_s",        "q",         "r",          "S",          "W",
      "d",       "horizon",    "taus",      "max_branches", "allow_uturn", "stride",
      "alpha",   "rewards",    "rl_samples", "value_cache", "seed",      "synth",
      "bench",   "ellipse_percentile"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorCode::kMalformedDocument, "unknown config key '" + key + "'");
  }
  RunConfig c;
  try {
    c.map = j.value("map", c.map);
    c.t_s = j.value("t_s", c.t_s);
    c.q = j.value("q", c.q);
    c.r = j.value("r", c.r);
    if (j.contains("S")) c.S = matrix_from<Mat42>(j["S"], "S");
    if (j.contains("W")) c.W = matrix_from<Mat4>(j["W"], "W");
    c.d = j.value("d", c.d);
    c.horizon = j.value("horizon", c.horizon);
    c.taus = j.value("taus", c.taus);
    c.max_branches = j.value("max_branches", c.max_branches);
    c.allow_uturn = j.value("allow_uturn", c.allow_uturn);
    c.stride = j.value("stride", c.stride);
    c.alpha = j.value("alpha", c.alpha);
    if (j.contains("rewards")) {
      const auto& rw = j["rewards"];
      c.rewards.road = rw.value("road", c.rewards.road);
      c.rewards.sidewalk = rw.value("sidewalk", c.rewards.sidewalk);
      c.rewards.crosswalk = rw.value("crosswalk", c.rewards.crosswalk);
      c.rewards.goal = rw.value("goal", c.rewards.goal);
      c.rewards.gamma = rw.value("gamma", c.rewards.gamma);
    }
    c.rl_samples = j.value("rl_samples", c.rl_samples);
    if (j.contains("value_cache") && !j["value_cache"].is_null()) {
      c.value_cache = j["value_cache"].get<std::string>();
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("synth")) {
      const auto& s = j["synth"];
      c.synth_crossing = s.value("crossing", c.synth_crossing);
      c.synth_sidewalk = s.value("sidewalk", c.synth_sidewalk);
      c.synth_noise = s.value("noise", c.synth_noise);
    }
    if (j.contains("bench")) {
      const auto& b = j["bench"];
      c.bench_iterations = b.value("iterations", c.bench_iterations);
      if (b.contains("state")) {
        const auto v = b["state"].get<std::vector<double>>();
        if (v.size() != 4) throw Error(ErrorCode::kMalformedDocument, "bench.state needs 4 values");
        c.bench_state = {v[0], v[1], v[2], v[3]};
      }
      if (b.contains("goal") && !b["goal"].is_null()) c.bench_goal = b["goal"].get<std::int64_t>();
    }
    c.ellipse_percentile = j.value("ellipse_percentile", c.ellipse_percentile);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kMalformedDocument, ex.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config file " + file.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& ex) {
    throw Error(ErrorCode::kMalformedDocument, file.string() + ": " + ex.what());
  }
  RunConfig cfg;
  try {
    cfg = config_from_json(doc);
  } catch (const Error& ex) {
    throw Error(ex.code(), file.string() + ": " + ex.detail());
  }
  // Relative paths inside a config are relative to the config file.
  auto anchor = [&](std::string& path) {
    if (!path.empty() && std::filesystem::path(path).is_relative()) {
      path = (file.parent_path() / path).lexically_normal().string();
    }
  };
  anchor(cfg.map);
  if (cfg.value_cache) anchor(*cfg.value_cache);
  return cfg;
}

nlohmann::json to_json(const std::vector<TimingRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const TimingRow& r : rows) {
    out.push_back({{"method", r.method},
                   {"tau", r.tau},
                   {"iterations", r.iterations},
                   {"mean_ms", r.mean_ms},
                   {"median_ms", r.median_ms}});
  }
  return out;
}

std::vector<TimingRow> timing_rows_from_json(const nlohmann::json& doc) {
  std::vector<TimingRow> rows;
  try {
    const auto& arr = doc.is_object() ? doc.at("rows") : doc;
    for (const auto& r : arr) {
      rows.push_back(TimingRow{r.at("method").get<std::string>(), r.at("tau").get<int>(),
                               r.at("iterations").get<int>(), r.at("mean_ms").get<double>(),
                               r.at("median_ms").get<double>()});
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kMalformedDocument, ex.what());
  }
  return rows;
}

}  // namespace pedpred
