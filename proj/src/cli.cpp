#include "pedpred/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "pedpred/config.hpp"
#include "pedpred/evaluation.hpp"
#include "pedpred/map_document.hpp"
#include "pedpred/predictor.hpp"
#include "pedpred/rl_baseline.hpp"
#include "pedpred/svg.hpp"

namespace pedpred {

namespace fs = std::filesystem;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNoConvergence:
    case ErrorCode::kNotStabilizable:
    case ErrorCode::kSingularInnerMatrix:
      return 4;
    case ErrorCode::kNoValidWindows:
    case ErrorCode::kInsufficientSamples:
    case ErrorCode::kTooShort:
      return 3;
    default:
      return 2;
  }
}

namespace {

struct CommonFlags {
  std::optional<std::string> map;
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<int> tau;
  std::optional<std::string> method;
};

struct PredictFlags {
  std::vector<double> state;
  std::optional<int> horizon;
  std::optional<std::string> svg;
};

struct EvaluateFlags {
  std::string data;
  std::optional<int> stride;
  std::optional<std::string> value_cache;
  bool rms = false;
};

struct BenchFlags {
  std::optional<int> iterations;
};

struct SynthFlags {
  std::optional<int> n;
  std::optional<int> crossing;
  std::optional<int> sidewalk;
  std::optional<double> noise;
};

RunConfig resolve_config(const CommonFlags& flags) {
  RunConfig cfg = flags.config ? load_config(*flags.config) : RunConfig{};
  if (flags.map) cfg.map = *flags.map;
  if (flags.seed) cfg.seed = *flags.seed;
  if (!flags.tau.empty()) cfg.taus = flags.tau;
  return cfg;
}

MapDocument resolve_map(const RunConfig& cfg) {
  if (cfg.map.empty()) throw Error(ErrorCode::kIo, "no map given (use --map or the config's map)");
  BuildOptions options;
  options.default_switch_distance = cfg.d;
  return load_map(cfg.map, options);
}

std::ofstream open_out(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream os(file);
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + file.string());
  os << std::setprecision(17);
  return os;
}

void write_text(const fs::path& file, const std::string& text) { open_out(file) << text; }

int cmd_predict(const CommonFlags& common, const PredictFlags& flags, std::ostream& out) {
  RunConfig cfg = resolve_config(common);
  if (flags.horizon) cfg.horizon = *flags.horizon;
  if (common.tau.size() == 1 && !flags.horizon) cfg.horizon = common.tau.front();
  cfg.validate();
  if (flags.state.size() != 4) throw Error(ErrorCode::kInvalidParams, "--state needs x,y,v,theta");
  const MapDocument map = resolve_map(cfg);
  const PedestrianState x0{flags.state[0], flags.state[1], flags.state[2], flags.state[3]};
  const PredictionTree tree = predict(map.graph, x0, Mat4::Zero(), cfg.predictor_params());

  const fs::path json_file = common.out.value_or("prediction.json");
  open_out(json_file) << to_json(tree).dump(1) << '\n';

  // Columnar copy of every root-to-leaf path.
  fs::path csv_file = json_file;
  csv_file.replace_extension(".paths.csv");
  std::ofstream csv = open_out(csv_file);
  csv << "leaf,step,x,y,v,theta,cxx,cxy,cyy\n";
  for (const PredictedPath& path : enumerate_paths(tree)) {
    for (std::size_t k = 0; k < path.beliefs.size(); ++k) {
      const GaussianBelief& b = path.beliefs[k];
      csv << path.leaf << ',' << k << ',' << b.mean.x << ',' << b.mean.y << ',' << b.mean.v << ','
          << b.mean.theta << ',' << b.cov(0, 0) << ',' << b.cov(0, 1) << ',' << b.cov(1, 1)
          << '\n';
    }
  }
  if (flags.svg) {
    SvgOptions so;
    so.percentile = cfg.ellipse_percentile;
    so.goals = map.goals;
    write_text(*flags.svg, render_prediction_svg(map.graph, tree, so));
  }
  out << "branches " << tree.branches.size() << ", leaves " << tree.leaves().size()
      << (tree.truncated ? " (truncated)" : "") << " -> " << json_file.string() << '\n';
  return 0;
}

struct MethodResult {
  std::string method;
  ErrorTable errors;
  CovarianceReport cov;
};

nlohmann::json metrics_json(const MethodResult& r, std::size_t skipped, bool rms) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t h = 0; h < r.errors.horizons.size(); ++h) {
    const HorizonErrors& he = r.errors.horizons[h];
    const CovarianceRow& cr = r.cov.rows[h];
    nlohmann::json row{{"tau", he.tau},
                       {"count", he.samples.size()},
                       {"mean_ex", he.mean_ex},
                       {"mean_ey", he.mean_ey},
                       {"e", he.l2},
                       {"delta_f", cr.delta_f},
                    {"delta_lambda", cr.delta_lambda},
                    {"det_measured", cr.measured.determinant()},
                    {"measured_cov",
                     {cr.measured(0, 0), cr.measured(0, 1), cr.measured(1, 0), cr.measured(1, 1)}}};
    if (rms) row["rms"] = he.rms;
    rows.push_back(std::move(row));
  }
  return {{"method", r.method},
          {"trajectories", r.errors.trajectories},
          {"skipped", skipped},
          {"horizons", rows}};
}

int cmd_evaluate(const CommonFlags& common, const EvaluateFlags& flags, std::ostream& out,
                 std::ostream& err) {
  RunConfig cfg = resolve_config(common);
  if (flags.stride) cfg.stride = *flags.stride;
  if (flags.value_cache) cfg.value_cache = *flags.value_cache;
  cfg.validate();
  const std::string method = common.method.value_or("both");
  if (method != "lqr" && method != "rl" && method != "both") {
    throw Error(ErrorCode::kInvalidParams, "--method must be lqr, rl or both");
  }
  const MapDocument map = resolve_map(cfg);
  const std::vector<Trajectory> raw = load_trajectories(flags.data);
  if (raw.empty()) throw Error(ErrorCode::kNoValidWindows, "dataset " + flags.data + " is empty");

  std::vector<StateTrack> tracks;
  std::size_t skipped = 0;
  for (const Trajectory& t : raw) {
    try {
      tracks.push_back(estimate_states(t, cfg.t_s));
    } catch (const Error& ex) {
      if (ex.code() != ErrorCode::kTooShort) throw;
      err << "skipping: " << ex.detail() << '\n';
      ++skipped;
    }
  }
  if (tracks.empty()) throw Error(ErrorCode::kNoValidWindows, "no usable trajectory in " + flags.data);

  ErrorOptions eo;
  eo.stride = cfg.stride;
  std::vector<MethodResult> results;
  if (method != "rl") {
    ControllerCache cache(cfg.weights(), cfg.t_s);
    cache.warm(map.graph);
    LqrTrajectoryPredictor lqr(map.graph, cfg.predictor_params(), cache);
    ErrorTable table = prediction_errors(tracks, lqr, cfg.taus, eo);
    CovarianceReport cov = covariance_metrics(table);
    results.push_back({"lqr", std::move(table), std::move(cov)});
  }
  if (method != "lqr") {
    const SemanticGrid grid = rasterize(map);
    std::optional<fs::path> dir;
    if (cfg.value_cache) dir = *cfg.value_cache;
    ValueFunctionStore store(grid, cfg.rewards, dir);
    RlPredictorOptions ro;
    ro.alpha = cfg.alpha;
    ro.samples = cfg.rl_samples;
    ro.seed = cfg.seed;
    ro.t_s = cfg.t_s;
    RlTrajectoryPredictor rl(grid, cfg.rewards, store, ro);
    ErrorTable table = prediction_errors(tracks, rl, cfg.taus, eo);
    CovarianceReport cov = covariance_metrics(table);
    results.push_back({"rl", std::move(table), std::move(cov)});
  }

  const fs::path dir = common.out.value_or("results");
  std::ofstream fig10 = open_out(dir / "error_vs_tau.csv");
  std::ofstream fig11 = open_out(dir / "frobenius_vs_tau.csv");
  std::ofstream fig12 = open_out(dir / "determinant_vs_tau.csv");
  fig10 << "method,tau,e,mean_ex,mean_ey," << (flags.rms ? "rms," : "") << "count\n";
  fig11 << "method,tau,delta_f\n";
  fig12 << "method,tau,delta_lambda,det_measured\n";
  std::ostringstream report;
  report << std::fixed << std::setprecision(4);
  for (const MethodResult& r : results) {
    open_out(dir / ("metrics_" + r.method + ".json")) << metrics_json(r, skipped, flags.rms).dump(1) << '\n';
    std::ofstream samples = open_out(dir / ("errors_" + r.method + ".csv"));
    samples << "trajectory,t,tau,ex,ey,pxx,pxy,pyy\n";
    report << "method " << r.method << " (" << r.errors.trajectories << " trajectories)\n";
    report << std::setw(6) << "tau" << std::setw(10) << "Ex" << std::setw(10) << "Ey"
           << std::setw(10) << "E";
    if (flags.rms) report << std::setw(10) << "RMS*";
    report << std::setw(12) << "dF"
           << std::setw(12) << "dLambda" << std::setw(9) << "n" << '\n';
    for (std::size_t h = 0; h < r.errors.horizons.size(); ++h) {
      const HorizonErrors& he = r.errors.horizons[h];
      const CovarianceRow& cr = r.cov.rows[h];
      fig10 << r.method << ',' << he.tau << ',' << he.l2 << ',' << he.mean_ex << ','
            << he.mean_ey << ',';
      if (flags.rms) fig10 << he.rms << ',';
      fig10 << he.samples.size() << '\n';
      fig11 << r.method << ',' << he.tau << ',' << cr.delta_f << '\n';
      fig12 << r.method << ',' << he.tau << ',' << cr.delta_lambda << ','
            << cr.measured.determinant() << '\n';
      for (const ErrorSample& s : he.samples) {
        samples << tracks[s.trajectory].id << ',' << s.t << ',' << he.tau << ',' << s.ex << ','
                << s.ey << ',' << s.predicted_cov(0, 0) << ',' << s.predicted_cov(0, 1) << ','
                << s.predicted_cov(1, 1) << '\n';
      }
      report << std::setw(6) << he.tau << std::setw(10) << he.mean_ex << std::setw(10)
             << he.mean_ey << std::setw(10) << he.l2;
      if (flags.rms) report << std::setw(10) << he.rms;
      report << std::setw(12) << cr.delta_f << std::setw(12) << cr.delta_lambda << std::setw(9)
             << he.samples.size() << '\n';
    }
  }
  if (flags.rms) {
    report << "(RMS* = sqrt(mean(ex^2 + ey^2)), an extra column; E is the norm of the mean error)\n";
  }
  write_text(dir / "report.txt", report.str());
  out << report.str();
  return 0;
}

int cmd_bench(const CommonFlags& common, const BenchFlags& flags, std::ostream& out) {
  RunConfig cfg = resolve_config(common);
  if (flags.iterations) cfg.bench_iterations = *flags.iterations;
  cfg.validate();
  const MapDocument map = resolve_map(cfg);

  ControllerCache cache(cfg.weights(), cfg.t_s);
  cache.warm(map.graph);
  const SemanticGrid grid = rasterize(map);
  if (grid.goals.empty()) throw Error(ErrorCode::kInvalidParams, "map has no goals");
  std::optional<fs::path> dir;
  if (cfg.value_cache) dir = *cfg.value_cache;
  ValueFunctionStore store(grid, cfg.rewards, dir);
  const ValueFunction& vf = store.get(cfg.bench_goal.value_or(grid.goal_ids.front()));

  BenchmarkScenario sc;
  sc.graph = &map.graph;
  sc.cache = &cache;
  sc.params = cfg.predictor_params();
  sc.start = cfg.bench_state;
  sc.grid = &grid;
  sc.rewards = cfg.rewards;
  sc.value = &vf;
  BenchmarkOptions bo;
  bo.lqr_iterations = cfg.bench_iterations;
  bo.rl_iterations = cfg.bench_iterations;
  bo.rl_samples = cfg.rl_samples;
  bo.alpha = cfg.alpha;
  bo.seed = cfg.seed;
  if (!common.tau.empty()) bo.taus = common.tau;
  const BenchmarkResult result = benchmark(sc, bo);

  const fs::path outdir = common.out.value_or("bench");
  nlohmann::json doc{{"rows", to_json(result.rows)}, {"ratio", nlohmann::json::object()}};
  for (const auto& [tau, ratio] : result.ratio) doc["ratio"][std::to_string(tau)] = ratio;
  open_out(outdir / "runtime.json") << doc.dump(1) << '\n';
  std::ofstream csv = open_out(outdir / "runtime.csv");
  csv << "method,tau,iterations,mean_ms,median_ms\n";
  for (const TimingRow& r : result.rows) {
    csv << r.method << ',' << r.tau << ',' << r.iterations << ',' << r.mean_ms << ','
        << r.median_ms << '\n';
  }
  write_text(outdir / "runtime.svg", render_runtime_svg(result.rows));

  out << std::fixed << std::setprecision(3);
  out << std::setw(6) << "tau" << std::setw(14) << "lqr mean ms" << std::setw(14) << "rl mean ms"
      << std::setw(10) << "ratio" << '\n';
  for (const auto& [tau, ratio] : result.ratio) {
    out << std::setw(6) << tau << std::setw(14) << result.row("lqr", tau).mean_ms << std::setw(14)
        << result.row("rl", tau).mean_ms << std::setw(10) << ratio << '\n';
  }
  return 0;
}

int cmd_synth(const CommonFlags& common, const SynthFlags& flags, std::ostream& out) {
  RunConfig cfg = resolve_config(common);
  int crossing = flags.crossing.value_or(cfg.synth_crossing);
  int sidewalk = flags.sidewalk.value_or(cfg.synth_sidewalk);
  if (flags.n) {
    if (*flags.n < 0) throw Error(ErrorCode::kInvalidParams, "--n must be >= 0");
    if (flags.crossing && flags.sidewalk && crossing + sidewalk != *flags.n) {
      throw Error(ErrorCode::kInvalidParams, "--n disagrees with --crossing + --sidewalk");
    } else if (flags.crossing) {
      sidewalk = *flags.n - crossing;
    } else if (flags.sidewalk) {
      crossing = *flags.n - sidewalk;
    } else {
      // Keep the configured composition ratio.
      const int total = cfg.synth_crossing + cfg.synth_sidewalk;
      crossing = total > 0 ? static_cast<int>(std::lround(
                                 static_cast<double>(*flags.n) * cfg.synth_crossing / total))
                           : *flags.n;
      sidewalk = *flags.n - crossing;
    }
  }
  cfg.synth_crossing = crossing;
  cfg.synth_sidewalk = sidewalk;
  if (flags.noise) cfg.synth_noise = *flags.noise;
  cfg.validate();
  const MapDocument map = resolve_map(cfg);

  SynthOptions so;
  so.crossing = crossing;
  so.sidewalk = sidewalk;
  so.noise_scale = cfg.synth_noise;
  so.seed = cfg.seed;
  so.t_s = cfg.t_s;
  so.W = cfg.W;
  so.weights = cfg.weights();
  const std::vector<Trajectory> data = synth_dataset(map.graph, so);
  const fs::path file = common.out.value_or("synth.csv");
  std::ofstream os = open_out(file);
  write_trajectories(os, data);
  out << data.size() << " trajectories (" << crossing << " crossing, " << sidewalk
      << " sidewalk) -> " << file.string() << '\n';
  return 0;
}

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--map", f.map, "Map document (JSON)");
  app->add_option("--config", f.config, "Run configuration (JSON); flags override it");
  app->add_option("--seed", f.seed, "Random seed");
  app->add_option("--out", f.out, "Output file or directory");
  app->add_option("--tau", f.tau, "Prediction horizon(s) in steps")->delimiter(',');
  app->add_option("--method", f.method, "lqr, rl or both");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pedestrian path prediction on road graphs", "pedpred"};
  app.require_subcommand(1);

  CommonFlags common;
  PredictFlags pf;
  EvaluateFlags ef;
  BenchFlags bf;
  SynthFlags sf;

  auto* predict_cmd = app.add_subcommand("predict", "Prediction tree for one initial state");
  add_common(predict_cmd, common);
  predict_cmd->add_option("--state", pf.state, "x,y,v,theta")->delimiter(',')->required();
  predict_cmd->add_option("--horizon", pf.horizon, "Steps to predict");
  predict_cmd->add_option("--svg", pf.svg, "Also write a vector plot");

  auto* eval_cmd = app.add_subcommand("evaluate", "Error and covariance metrics on a dataset");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--data", ef.data, "Trajectory file t,x,y[,id,label]")->required();
  eval_cmd->add_option("--stride", ef.stride, "Start-time stride in steps");
  eval_cmd->add_option("--value-cache", ef.value_cache, "Directory for solved value functions");
  eval_cmd->add_flag("--rms", ef.rms, "Also report the root-mean-square error");

  auto* bench_cmd = app.add_subcommand("bench", "Runtime of both predictors");
  add_common(bench_cmd, common);
  bench_cmd->add_option("--iterations", bf.iterations, "Calls per method and horizon");

  auto* synth_cmd = app.add_subcommand("synth", "Simulated trajectory dataset");
  add_common(synth_cmd, common);
  synth_cmd->add_option("--n", sf.n, "Number of trajectories");
  synth_cmd->add_option("--crossing", sf.crossing, "Trajectories using a crosswalk");
  synth_cmd->add_option("--sidewalk", sf.sidewalk, "Sidewalk-only trajectories");
  synth_cmd->add_option("--noise", sf.noise, "Process noise scale (standard deviation factor)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*predict_cmd) return cmd_predict(common, pf, out);
    if (*eval_cmd) return cmd_evaluate(common, ef, out, err);
    if (*bench_cmd) return cmd_bench(common, bf, out);
    if (*synth_cmd) return cmd_synth(common, sf, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace pedpred
