// loopdet: loop-closure detection over descriptor votes with a binomial
// null-model score. Subcommands: synth, calibrate, run, eval, score-matrix.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "loopdet/detector.h"
#include "loopdet/evaluation.h"
#include "loopdet/synthetic.h"

namespace {

using loopdet::DataError;
using nlohmann::json;

struct RunOptions {
  std::string dataset_dir;
  std::string config_file;
  std::string mode = "v2v";
  double alpha = 1e-3;
  double alpha_map = -1.0;  // <0: follow alpha
  double t_delay = 10.0;
  double dt = 1.0;
  double theta = 0.0;  // <=0: disabled / from model
  int codebook_size = 64;
  int probe_cells = 32;
  std::uint64_t seed = 42;
  int fixed_k = 0;  // 0: adaptive table
  int target_dim = 10;
  std::size_t train_size = 50000;
  std::string model_file;
  bool verify = false;
  double verify_ratio = 0.8;
  int verify_min_matches = 8;
  std::string out;
};

void add_run_flags(CLI::App* cmd, RunOptions* opt) {
  cmd->add_option("dataset", opt->dataset_dir, "Dataset bundle directory")
      ->required();
  cmd->add_option("--config", opt->config_file,
                  "JSON config file; command-line flags take precedence");
  cmd->add_option("--mode", opt->mode, "Matching mode: v2v or v2m")
      ->check(CLI::IsMember({"v2v", "v2m"}));
  cmd->add_option("--alpha", opt->alpha, "Rejection threshold on the vote pmf");
  cmd->add_option("--alpha-map", opt->alpha_map,
                  "Score threshold for the covisible candidate set (v2m)");
  cmd->add_option("--t-delay", opt->t_delay, "Database admission delay [s]");
  cmd->add_option("--dt", opt->dt, "Vertex-to-map vote window half-width [s]");
  cmd->add_option("--theta", opt->theta,
                  "Maximum squared descriptor distance (<= 0 disables)");
  cmd->add_option("--codebook-size", opt->codebook_size, "Codewords per index half");
  cmd->add_option("--probe-cells", opt->probe_cells, "Cell pairs probed per query");
  cmd->add_option("--seed", opt->seed, "Seed for codebook training");
  cmd->add_option("--fixed-k", opt->fixed_k,
                  "Fixed neighbor count (0 = adaptive table)");
  cmd->add_option("--target-dim", opt->target_dim, "Projected dimensionality");
  cmd->add_option("--train-size", opt->train_size,
                  "Leading descriptors used to fit projection and codebooks");
  cmd->add_option("--model", opt->model_file,
                  "Calibrated model file (skips in-run training)");
  cmd->add_flag("--verify", opt->verify, "Run the ratio-test verification gate");
  cmd->add_option("--verify-ratio", opt->verify_ratio, "Ratio-test threshold");
  cmd->add_option("--verify-min-matches", opt->verify_min_matches,
                  "Survivors needed for verification acceptance");
  cmd->add_option("--out", opt->out, "Output directory")->required();
}

// Flags override config-file values; config-file values override defaults.
void merge_config_file(const CLI::App& cmd, RunOptions* opt) {
  if (opt->config_file.empty()) {
    return;
  }
  std::ifstream in(opt->config_file);
  if (!in) {
    throw DataError("cannot open config file " + opt->config_file);
  }
  json cfg;
  try {
    in >> cfg;
  } catch (const json::exception& e) {
    throw DataError(opt->config_file + ": invalid JSON (" + e.what() + ")");
  }
  auto maybe = [&](const char* flag, const char* key, auto* target) {
    if (cmd.count(flag) == 0 && cfg.contains(key)) {
      *target = cfg.at(key).get<std::remove_pointer_t<decltype(target)>>();
    }
  };
  maybe("--mode", "mode", &opt->mode);
  maybe("--alpha", "alpha", &opt->alpha);
  maybe("--alpha-map", "alpha_map", &opt->alpha_map);
  maybe("--t-delay", "t_delay", &opt->t_delay);
  maybe("--dt", "dt", &opt->dt);
  maybe("--theta", "theta", &opt->theta);
  maybe("--codebook-size", "codebook_size", &opt->codebook_size);
  maybe("--probe-cells", "probe_cells", &opt->probe_cells);
  maybe("--seed", "seed", &opt->seed);
  maybe("--fixed-k", "fixed_k", &opt->fixed_k);
  maybe("--target-dim", "target_dim", &opt->target_dim);
  maybe("--train-size", "train_size", &opt->train_size);
  maybe("--model", "model", &opt->model_file);
  maybe("--verify", "verify", &opt->verify);
  maybe("--verify-ratio", "verify_ratio", &opt->verify_ratio);
  maybe("--verify-min-matches", "verify_min_matches", &opt->verify_min_matches);
}

loopdet::DetectorConfig to_detector_config(const RunOptions& opt) {
  loopdet::DetectorConfig cfg;
  cfg.mode = opt.mode == "v2m" ? loopdet::DetectorMode::kVertexToMap
                               : loopdet::DetectorMode::kVertexToVertex;
  cfg.alpha = opt.alpha;
  if (opt.alpha_map > 0.0) {
    cfg.alpha_map = opt.alpha_map;
  }
  cfg.t_delay = opt.t_delay;
  cfg.dt = opt.dt;
  cfg.index.codebook_size = opt.codebook_size;
  cfg.index.probe_cells = opt.probe_cells;
  cfg.index.seed = opt.seed;
  if (opt.theta > 0.0) {
    cfg.index.max_distance = opt.theta;
  }
  if (opt.fixed_k > 0) {
    cfg.fixed_k = opt.fixed_k;
  }
  cfg.verify = opt.verify;
  cfg.verify_ratio = opt.verify_ratio;
  cfg.verify_min_matches = opt.verify_min_matches;
  return cfg;
}

loopdet::CalibratedModel resolve_model(const RunOptions& opt,
                                       const loopdet::Dataset& dataset,
                                       loopdet::DetectorConfig* cfg,
                                       bool theta_flag_given) {
  loopdet::CalibratedModel model;
  if (!opt.model_file.empty()) {
    model = loopdet::load_model(opt.model_file);
    if (!model.codebooks) {
      throw DataError(opt.model_file + ": model has no index codebooks");
    }
    if (!theta_flag_given && model.theta && *model.theta > 0.0 &&
        std::isfinite(*model.theta)) {
      cfg->index.max_distance = *model.theta;
    }
  } else {
    model = loopdet::fit_run_model(dataset, opt.target_dim, *cfg, opt.train_size);
  }
  return model;
}

int cmd_run(const CLI::App& cmd, RunOptions& opt, bool score_matrix) {
  merge_config_file(cmd, &opt);
  loopdet::DetectorConfig cfg = to_detector_config(opt);
  const loopdet::Dataset dataset = loopdet::load_dataset(opt.dataset_dir);
  const loopdet::CalibratedModel model =
      resolve_model(opt, dataset, &cfg, cmd.count("--theta") > 0);

  const std::filesystem::path out_dir(opt.out);
  std::filesystem::create_directories(out_dir);

  loopdet::RunHooks hooks;
  std::ofstream matrix;
  if (score_matrix) {
    matrix.open(out_dir / "score_matrix.csv");
    if (!matrix) {
      throw DataError("cannot write " + (out_dir / "score_matrix.csv").string());
    }
    matrix << "query_id,database_id,neg_log_score,eq3_pass\n";
    hooks.score_sink = [&matrix](loopdet::VertexId query,
                                 const loopdet::ScoreMap& scores) {
      char buffer[128];
      for (const auto& [vertex, score] : scores) {
        std::snprintf(buffer, sizeof(buffer), "%lld,%lld,%.17g,%d\n",
                      static_cast<long long>(query), static_cast<long long>(vertex),
                      score.neg_log10, score.eq3_pass ? 1 : 0);
        matrix << buffer;
      }
    };
  }

  const loopdet::RunReport report = loopdet::run_detector(dataset, model, cfg, hooks);
  loopdet::write_detections_csv(out_dir / "detections.csv", report.records);
  loopdet::write_baseline_csv(out_dir / "baseline.csv", report.records);
  {
    std::ofstream rj(out_dir / "run_report.json");
    rj << loopdet::run_report_json(report) << '\n';
  }

  std::size_t accepted = 0;
  for (const auto& r : report.records) {
    accepted += r.accepted ? 1 : 0;
  }
  std::cout << report.records.size() << " queries, " << accepted
            << " accepted loops; query " << report.query_avg_ms << " +- "
            << report.query_std_ms << " ms, add " << report.add_avg_ms << " +- "
            << report.add_std_ms << " ms\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Loop-closure detection by probabilistic descriptor voting"};
  app.require_subcommand(1);

  // synth
  loopdet::SynthParams synth_params;
  std::string synth_out;
  bool synth_landmarks = false;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset bundle");
  synth->add_option("--seed", synth_params.seed, "RNG seed");
  synth->add_option("--places", synth_params.n_places, "Number of distinct places");
  synth->add_option("--revisits", synth_params.n_revisits, "Number of revisits");
  synth->add_option("--dwell", synth_params.dwell, "Vertices emitted per visit");
  synth->add_option("--desc-min", synth_params.descriptors_per_place_min,
                    "Min descriptors per place");
  synth->add_option("--desc-max", synth_params.descriptors_per_place_max,
                    "Max descriptors per place");
  synth->add_option("--sigma", synth_params.sigma, "Latent-space noise");
  synth->add_option("--aliasing", synth_params.aliasing_rate,
                    "Fraction of place pairs sharing the aliased pool");
  synth->add_option("--pool-size", synth_params.alias_pool_size,
                    "Descriptors in the shared aliased pool");
  synth->add_option("--d-raw", synth_params.d_raw, "Raw descriptor bits");
  synth->add_option("--latent-dim", synth_params.latent_dim, "Latent dimensionality");
  synth->add_option("--step", synth_params.step_seconds, "Seconds between vertices");
  synth->add_option("--spacing", synth_params.place_spacing, "Place grid spacing [m]");
  synth->add_option("--jitter", synth_params.revisit_jitter, "Revisit pose jitter [m]");
  synth->add_flag("--landmarks", synth_landmarks, "Generate landmark links");
  synth->add_option("--landmark-fraction", synth_params.landmark_fraction,
                    "Fraction of descriptors linked to a landmark");
  synth->add_option("--out", synth_out, "Output bundle directory")->required();

  // calibrate
  RunOptions calib_opt;
  double calib_percentile = 95.0;
  std::string calib_out;
  auto* calib = app.add_subcommand(
      "calibrate", "Fit projection and codebooks, set the distance threshold");
  calib->add_option("dataset", calib_opt.dataset_dir, "Dataset bundle directory")
      ->required();
  calib->add_option("--target-dim", calib_opt.target_dim, "Projected dimensionality");
  calib->add_option("--train-size", calib_opt.train_size, "Training descriptors");
  calib->add_option("--codebook-size", calib_opt.codebook_size,
                    "Codewords per index half");
  calib->add_option("--seed", calib_opt.seed, "Seed for codebook training");
  calib->add_option("--percentile", calib_percentile,
                    "Self-match distance percentile for theta");
  calib->add_option("--out", calib_out, "Model file to write")->required();

  // run and score-matrix share flags
  RunOptions run_opt;
  auto* run = app.add_subcommand("run", "Replay a dataset through the detector");
  add_run_flags(run, &run_opt);
  RunOptions matrix_opt;
  auto* score_matrix = app.add_subcommand(
      "score-matrix", "Replay and dump the per-query score matrix");
  add_run_flags(score_matrix, &matrix_opt);

  // eval
  std::string eval_detections;
  std::string eval_dataset;
  std::string eval_out;
  loopdet::EvalConfig eval_cfg;
  bool eval_accepted_only = false;
  bool eval_verified_only = false;
  auto* eval = app.add_subcommand(
      "eval", "Precision/recall sweep over a detections CSV");
  eval->add_option("detections", eval_detections, "detections.csv from a run")
      ->required();
  eval->add_option("dataset", eval_dataset, "Dataset bundle directory")->required();
  eval->add_option("--d-near", eval_cfg.d_near, "True-match distance [m]");
  eval->add_option("--d-far", eval_cfg.d_far, "False-match distance [m]");
  eval->add_option("--t-delay", eval_cfg.t_delay,
                   "Admission delay the run used [s]");
  eval->add_option("--sweep", eval_cfg.sweep,
                   "Explicit score thresholds (default: all observed scores)");
  eval->add_flag("--accepted-only", eval_accepted_only,
                 "Use only rows the detector accepted");
  eval->add_flag("--verified-only", eval_verified_only,
                 "Use only rows that passed verification");
  eval->add_option("--out", eval_out, "PR CSV to write")->required();

  try {
    app.parse(argc, argv);

    if (synth->parsed()) {
      synth_params.with_landmarks = synth_landmarks;
      const loopdet::SynthResult result = loopdet::synth_generate(synth_params);
      loopdet::save_dataset(result.dataset, synth_out);
      std::cout << "wrote " << result.dataset.vertices.size() << " vertices, "
                << result.dataset.landmarks.size() << " landmarks to "
                << synth_out << '\n';
      return 0;
    }
    if (calib->parsed()) {
      const loopdet::Dataset dataset = loopdet::load_dataset(calib_opt.dataset_dir);
      loopdet::DetectorConfig cfg = to_detector_config(calib_opt);
      const loopdet::CalibratedModel model = loopdet::calibrate(
          dataset, calib_opt.target_dim, cfg, calib_opt.train_size,
          calib_percentile);
      loopdet::save_model(model, calib_out);
      std::cout << "theta = " << *model.theta << " (squared distance, p"
                << calib_percentile << "), model written to " << calib_out << '\n';
      return 0;
    }
    if (run->parsed()) {
      return cmd_run(*run, run_opt, false);
    }
    if (score_matrix->parsed()) {
      return cmd_run(*score_matrix, matrix_opt, true);
    }
    if (eval->parsed()) {
      const loopdet::Dataset dataset = loopdet::load_dataset(eval_dataset);
      auto rows = loopdet::read_detections_csv(eval_detections);
      if (eval_accepted_only) {
        std::erase_if(rows, [](const loopdet::DetectionRow& r) { return !r.accepted; });
      }
      if (eval_verified_only) {
        std::erase_if(rows, [](const loopdet::DetectionRow& r) {
          return r.post_verification != 1;
        });
      }
      const auto groundtruth = loopdet::groundtruth_from_dataset(dataset);
      const auto curve =
          loopdet::pr_curve(loopdet::to_detections(rows), groundtruth, eval_cfg);
      const double best = loopdet::max_recall_at_full_precision(curve);
      loopdet::write_pr_csv(eval_out, curve, best);
      std::cout << "max_recall_at_full_precision=" << best << '\n';
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // any parse failure is a usage error
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
