#include "ssllab/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ssllab/dynamics.hpp"
#include "ssllab/errors.hpp"
#include "ssllab/experiments.hpp"
#include "ssllab/graph.hpp"
#include "ssllab/io.hpp"
#include "ssllab/kernel.hpp"
#include "ssllab/rng.hpp"
#include "ssllab/types.hpp"

namespace ssllab {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct GraphOpts {
  std::string family = "toy";  // toy | block; a file path overrides both
  std::string path;
  double rho = 0.4, mu = 0.3, nu = 0.2, delta = 0.1;
  int classes = 2;
  int groups_per_class = 2;
  int views_per_image = 3;
  double within_image = 0.5;
  double within_class = 0.25;
  double within_group = 0.15;
  double background = 0.1;
  double jitter = 0.05;
  std::uint64_t graph_seed = 7;
};

void add_graph_options(CLI::App* cmd, GraphOpts& g) {
  cmd->add_option("--family", g.family, "graph family: toy or block")
      ->check(CLI::IsMember({"toy", "block"}))
      ->capture_default_str();
  cmd->add_option("--graph", g.path, "read the graph from this file instead")
      ->capture_default_str();
  cmd->add_option("--rho", g.rho, "toy: same-vertex weight")->capture_default_str();
  cmd->add_option("--mu", g.mu, "toy: same class, other group")->capture_default_str();
  cmd->add_option("--nu", g.nu, "toy: other class, same group")->capture_default_str();
  cmd->add_option("--delta", g.delta, "toy: other class, other group")
      ->capture_default_str();
  cmd->add_option("--classes", g.classes, "block: class count")->capture_default_str();
  cmd->add_option("--groups-per-class", g.groups_per_class, "block: groups per class")
      ->capture_default_str();
  cmd->add_option("--views-per-image", g.views_per_image, "block: views per image")
      ->capture_default_str();
  cmd->add_option("--within-image", g.within_image, "block: same-image mass")
      ->capture_default_str();
  cmd->add_option("--within-class", g.within_class, "block: same-class mass")
      ->capture_default_str();
  cmd->add_option("--within-group", g.within_group, "block: same-group mass")
      ->capture_default_str();
  cmd->add_option("--background", g.background, "block: remaining mass")
      ->capture_default_str();
  cmd->add_option("--jitter", g.jitter, "block: multiplicative weight noise")
      ->capture_default_str();
  cmd->add_option("--graph-seed", g.graph_seed, "block: jitter seed")
      ->capture_default_str();
}

AugmentationGraph build_graph(const GraphOpts& g) {
  if (!g.path.empty()) return read_graph(g.path);
  if (g.family == "toy") return build_toy_graph(g.rho, g.mu, g.nu, g.delta);
  return build_block_graph(g.classes, g.groups_per_class, g.views_per_image,
                           g.within_image, g.within_class, g.within_group,
                           g.background, g.graph_seed, g.jitter);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string bool_field(bool b) { return b ? "1" : "0"; }

double auto_eta(const Matrix& t) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (t + t.transpose()));
  return 0.02 / std::max(solver.eigenvalues().cwiseAbs().maxCoeff(), 1e-12);
}

// Resolved-config dump for the manifest hash and for lossless reruns.
// CLI11's own config renderer guarantees the round trip.
std::string resolved_config(CLI::App& app) {
  return app.config_to_str(true, true);
}

struct RunPaths {
  fs::path out_dir;
  fs::path manifest;
  fs::path config;
};

RunPaths prepare_out(const std::string& out, const std::string& experiment,
                     std::uint64_t seed, int workers,
                     const std::string& config_text, Manifest& manifest) {
  RunPaths paths;
  paths.out_dir = out;
  fs::create_directories(paths.out_dir);
  paths.manifest = paths.out_dir / "manifest.json";
  paths.config = paths.out_dir / "config.ini";

  std::ofstream cfg(paths.config);
  cfg << config_text;
  cfg.close();

  manifest.experiment = experiment;
  manifest.seed = seed;
  manifest.workers = workers;
  manifest.code_version = kVersion;
  manifest.config_hash = hash_config(config_text);
  manifest.complete = false;
  write_manifest(manifest, paths.manifest.string());
  return paths;
}

void finish(Manifest& manifest, const RunPaths& paths) {
  manifest.complete = true;
  write_manifest(manifest, paths.manifest.string());
}

int cmd_spectrum(CLI::App& app, const GraphOpts& gopts, const std::string& out,
                 std::uint64_t seed, int workers, int topk) {
  Manifest manifest;
  const RunPaths paths =
      prepare_out(out, "spectrum", seed, workers, resolved_config(app), manifest);

  // For inline toy parameters the object of interest is the structural
  // 4x4 kernel itself; for everything else, the degree-normalized
  // similarity kernel of the graph.
  KernelMatrix k;
  if (gopts.path.empty() && gopts.family == "toy") {
    k = toy_adjacency(gopts.rho, gopts.mu, gopts.nu, gopts.delta);
  } else {
    k = normalize(adjacency(build_graph(gopts)));
  }
  const SpectralDecomposition s = spectral_decompose(k);

  std::vector<std::string> columns = {"index", "eigenvalue"};
  for (int x = 0; x < s.n(); ++x) columns.push_back("v" + std::to_string(x));
  CsvWriter csv((paths.out_dir / "spectrum.csv").string(), columns);
  for (int i = 0; i < s.n(); ++i) {
    std::vector<std::string> row = {std::to_string(i),
                                    format_number(s.eigenvalues(i))};
    for (int x = 0; x < s.n(); ++x) {
      row.push_back(format_number(s.eigenvectors(x, i)));
    }
    csv.write_row(row);
  }

  for (int i = 0; i < std::min(topk, s.n()); ++i) {
    std::printf("lambda_%d = %s\n", i, format_number(s.eigenvalues(i)).c_str());
  }
  finish(manifest, paths);
  return 0;
}

int cmd_dynamics(CLI::App& app, const GraphOpts& gopts, const std::string& out,
                 std::uint64_t seed, int workers, int d, double beta, double eta,
                 long long steps, long long record_every, double init_scale,
                 const std::string& mode_name) {
  Manifest manifest;
  const RunPaths paths =
      prepare_out(out, "dynamics", seed, workers, resolved_config(app), manifest);

  const AugmentationGraph g = build_graph(gopts);
  const Matrix t = joint_matrix(g);
  const double eta_used = eta > 0.0 ? eta : auto_eta(t);
  const WeightMode mode =
      mode_name == "projection" ? WeightMode::projection : WeightMode::penalty;

  CounterRng rng(stream_key(seed, 0x64796e616dull));
  Matrix w0(d, t.rows());
  for (Eigen::Index p = 0; p < w0.rows(); ++p) {
    for (Eigen::Index q = 0; q < w0.cols(); ++q) {
      w0(p, q) = init_scale * rng.normal();
    }
  }

  const Trajectory traj =
      integrate(w0, t, eta_used, beta, steps, record_every, mode);

  std::vector<std::string> columns = {"step", "time", "loss", "effective_rank"};
  for (Eigen::Index p = 0; p < w0.rows(); ++p) {
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      columns.push_back("z_" + std::to_string(p) + "_" + std::to_string(i));
    }
  }
  CsvWriter csv((paths.out_dir / "trajectory.csv").string(), columns);
  for (std::size_t k = 0; k < traj.n_snapshots(); ++k) {
    std::vector<std::string> row = {std::to_string(traj.steps[k]),
                                    format_number(traj.times[k]),
                                    format_number(traj.loss_values[k]),
                                    format_number(effective_rank(traj.weights[k]))};
    for (Eigen::Index p = 0; p < traj.modes[k].rows(); ++p) {
      for (Eigen::Index i = 0; i < traj.modes[k].cols(); ++i) {
        row.push_back(format_number(traj.modes[k](p, i)));
      }
    }
    csv.write_row(row);
  }

  json summary;
  summary["eta"] = eta_used;
  summary["beta"] = beta;
  summary["final_loss"] = traj.loss_values.back();
  summary["final_effective_rank"] = effective_rank(traj.weights.back());
  summary["mode_eigenvalues"] = std::vector<double>(
      traj.mode_eigenvalues.data(),
      traj.mode_eigenvalues.data() + traj.mode_eigenvalues.size());
  try {
    const SignLawReport sign = check_sign_law(traj, traj.mode_eigenvalues);
    summary["sign_law"] = {{"min_compliance", sign.min_compliance},
                           {"transitions", sign.transitions}};
  } catch (const validation_error& e) {
    summary["sign_law"] = {{"refused", e.what()}};
  }
  try {
    const PowerLawReport power = check_power_law(traj, traj.mode_eigenvalues);
    json pairs = json::array();
    for (const PowerLawPair& p : power.pairs) {
      pairs.push_back({{"mode_i", p.mode_i},
                       {"mode_j", p.mode_j},
                       {"expected", p.expected},
                       {"slope", p.slope},
                       {"points", p.points},
                       {"sufficient", p.sufficient}});
    }
    summary["power_law"] = pairs;
  } catch (const validation_error& e) {
    summary["power_law"] = {{"refused", e.what()}};
  }
  std::ofstream sf(paths.out_dir / "summary.json");
  sf << summary.dump(2) << "\n";

  std::printf("final loss %s, effective rank %s\n",
              format_number(traj.loss_values.back()).c_str(),
              format_number(effective_rank(traj.weights.back())).c_str());
  finish(manifest, paths);
  return 0;
}

struct ExperimentOpts {
  std::string name;
  std::vector<int> m_values = {2, 4, 8, 16, 32, 64};
  std::vector<int> d_values = {2, 4, 8, 16};
  std::vector<double> beta_values;  // empty = log grid 1e-4 .. 1e1
  std::vector<double> fractions = {1.0, 0.5, 0.25};
  int n_seeds = 20;
  int d = 2;
  double beta = 1.0;
  double eta = 0.0;
  long long steps = 2000;
  long long budget = 2000;
  long long record_every = 50;
  double init_scale = 1e-3;
  double threshold = 0.9;
  double train_frac = 0.5;
  bool epochs_matched = false;
  long long abort_after_cells = -1;  // test hook for interrupted runs
};

std::vector<double> default_beta_grid() {
  // 11 logarithmic points, 1e-4 .. 1e1.
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) {
    grid.push_back(std::pow(10.0, -4.0 + 0.5 * i));
  }
  return grid;
}

int cmd_experiment(CLI::App& app, const GraphOpts& gopts, const std::string& out,
                   std::uint64_t seed, int workers, const ExperimentOpts& opts) {
  static const std::vector<std::string> kNames = {
      "ansatz", "estimator", "pdim_beta", "convergence", "pareto"};
  if (std::find(kNames.begin(), kNames.end(), opts.name) == kNames.end()) {
    std::string valid;
    for (const auto& n : kNames) valid += (valid.empty() ? "" : ", ") + n;
    throw validation_error("unknown experiment '" + opts.name +
                           "' (valid names: " + valid + ")");
  }

  Manifest manifest;
  const RunPaths paths =
      prepare_out(out, opts.name, seed, workers, resolved_config(app), manifest);
  const std::string csv_path = (paths.out_dir / (opts.name + ".csv")).string();

  DynamicsConfig cfg;
  cfg.eta = opts.eta;
  cfg.beta = opts.beta;
  cfg.d = opts.d;
  cfg.steps = opts.steps;
  cfg.init_scale = opts.init_scale;
  cfg.record_every = opts.record_every;
  cfg.train_frac = opts.train_frac;

  // Test hook: abort the run once N rows are out, leaving the prefix CSV
  // and an incomplete manifest (what a mid-run crash would leave behind).
  // Called before each row lands, so the file holds exactly N rows.
  long long emitted = 0;
  auto abort_gate = [&]() {
    if (opts.abort_after_cells >= 0 && emitted >= opts.abort_after_cells) {
      throw numeric_error("aborted after " +
                          std::to_string(opts.abort_after_cells) + " cells");
    }
    ++emitted;
  };

  json summary;
  if (opts.name == "ansatz") {
    const auto rows = ansatz_experiment(gopts.rho, gopts.mu, gopts.nu,
                                        gopts.delta, opts.m_values,
                                        opts.n_seeds, seed);
    CsvWriter csv(csv_path, {"m", "abs_mu_minus_nu_mean", "abs_mu_minus_nu_sd",
                             "delta_mean", "delta_sd"});
    for (const AnsatzRow& r : rows) {
      abort_gate();
      csv.write_row({std::to_string(r.m), format_number(r.abs_mu_minus_nu_mean),
                     format_number(r.abs_mu_minus_nu_sd),
                     format_number(r.delta_mean), format_number(r.delta_sd)});
    }
  } else if (opts.name == "estimator") {
    const AugmentationGraph g = build_graph(gopts);
    const EstimatorStudy study = estimator_study(g, opts.m_values, opts.n_seeds,
                                                 opts.d, seed, workers);
    CsvWriter csv(csv_path, {"m", "error_mean", "error_sd", "alignment_mean"});
    for (const EstimatorRow& r : study.rows) {
      abort_gate();
      csv.write_row({std::to_string(r.m), format_number(r.error_mean),
                     format_number(r.error_sd), format_number(r.alignment_mean)});
    }
    summary["loglog_slope"] = study.loglog_slope;
  } else if (opts.name == "pdim_beta") {
    const AugmentationGraph g = build_graph(gopts);
    const std::vector<double> betas =
        opts.beta_values.empty() ? default_beta_grid() : opts.beta_values;
    CsvWriter csv(csv_path, {"d", "beta", "seed", "alignment", "accuracy",
                             "effective_rank", "loss_final", "failed", "failure"});
    const SweepResult sweep = pdim_beta_sweep(
        g, opts.d_values, betas, cfg, opts.n_seeds, seed, workers,
        [&](const SweepCell& c) {
          abort_gate();
          csv.write_row({std::to_string(c.d), format_number(c.beta),
                         std::to_string(c.seed), format_number(c.alignment),
                         format_number(c.accuracy),
                         format_number(c.effective_rank),
                         format_number(c.loss_final), bool_field(c.failed),
                         csv_escape(c.failure)});
        });
    json best = json::array();
    for (const BetaChoice& b : best_beta_per_d(sweep)) {
      best.push_back(
          {{"d", b.d}, {"beta", b.beta}, {"alignment", b.alignment}});
    }
    summary["best_beta"] = best;
  } else if (opts.name == "convergence") {
    const AugmentationGraph g = build_graph(gopts);
    CsvWriter csv(csv_path, {"m", "seed", "steps_to_threshold", "censored",
                             "alignment", "loss_final", "failed", "failure"});
    convergence_study(g, opts.m_values, opts.d, cfg, opts.threshold,
                      opts.budget, opts.n_seeds, seed, workers,
                      [&](const SweepCell& c) {
                        abort_gate();
                        csv.write_row({std::to_string(c.m), std::to_string(c.seed),
                                       std::to_string(c.steps_to_threshold),
                                       bool_field(c.censored),
                                       format_number(c.alignment),
                                       format_number(c.loss_final),
                                       bool_field(c.failed),
                                       csv_escape(c.failure)});
                      });
  } else {  // pareto
    const AugmentationGraph g = build_graph(gopts);
    CsvWriter csv(csv_path, {"fraction", "m", "seed", "accuracy", "alignment",
                             "loss_final", "failed", "failure"});
    pareto_sweep(g, opts.fractions, opts.m_values, opts.budget, cfg,
                 opts.n_seeds, seed, workers, opts.epochs_matched,
                 [&](const SweepCell& c) {
                   abort_gate();
                   csv.write_row({format_number(c.fraction), std::to_string(c.m),
                                  std::to_string(c.seed),
                                  format_number(c.accuracy),
                                  format_number(c.alignment),
                                  format_number(c.loss_final),
                                  bool_field(c.failed), csv_escape(c.failure)});
                 });
  }

  if (!summary.empty()) {
    std::ofstream sf(paths.out_dir / "summary.json");
    sf << summary.dump(2) << "\n";
  }
  std::printf("wrote %s\n", csv_path.c_str());
  finish(manifest, paths);
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"numerical laboratory for augmentation-graph feature learning"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from this file");

  std::string out = "out";
  std::uint64_t seed = 1;
  int workers = 1;
  app.add_option("--out", out, "output directory")
      ->envname("SSLLAB_OUT")
      ->capture_default_str();
  app.add_option("--seed", seed, "master seed")
      ->envname("SSLLAB_SEED")
      ->capture_default_str();
  app.add_option("--workers", workers, "worker thread count")
      ->envname("SSLLAB_WORKERS")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // spectrum
  CLI::App* spectrum = app.add_subcommand("spectrum", "eigendecompose a graph kernel");
  spectrum->configurable();
  spectrum->fallthrough();
  GraphOpts spectrum_graph;
  add_graph_options(spectrum, spectrum_graph);
  int topk = 4;
  spectrum->add_option("--topk", topk, "eigenvalues to print")
      ->capture_default_str();

  // dynamics
  CLI::App* dynamics = app.add_subcommand("dynamics", "integrate the training flow");
  dynamics->configurable();
  dynamics->fallthrough();
  GraphOpts dynamics_graph;
  add_graph_options(dynamics, dynamics_graph);
  int dyn_d = 4;
  double dyn_beta = 0.0;
  double dyn_eta = 0.0;
  long long dyn_steps = 2000;
  long long dyn_record = 10;
  double dyn_init = 1e-3;
  std::string dyn_mode = "penalty";
  dynamics->add_option("--d", dyn_d, "projector width")->capture_default_str();
  dynamics->add_option("--beta", dyn_beta, "redundancy penalty weight")
      ->capture_default_str();
  dynamics->add_option("--eta", dyn_eta, "step size (0 = auto)")
      ->capture_default_str();
  dynamics->add_option("--steps", dyn_steps, "step count")->capture_default_str();
  dynamics->add_option("--record-every", dyn_record, "snapshot cadence")
      ->capture_default_str();
  dynamics->add_option("--init-scale", dyn_init, "initial weight scale")
      ->capture_default_str();
  dynamics->add_option("--mode", dyn_mode, "penalty or projection")
      ->check(CLI::IsMember({"penalty", "projection"}))
      ->capture_default_str();

  // experiment
  CLI::App* experiment = app.add_subcommand("experiment", "run a named study");
  experiment->configurable();
  experiment->fallthrough();
  GraphOpts experiment_graph;
  experiment_graph.family = "block";
  add_graph_options(experiment, experiment_graph);
  ExperimentOpts eopts;
  experiment->add_option("--name", eopts.name,
                         "ansatz | estimator | pdim_beta | convergence | pareto")
      ->required();
  experiment->add_option("--m-values", eopts.m_values, "views per image grid")
      ->delimiter(',')
      ->capture_default_str();
  experiment->add_option("--d-values", eopts.d_values, "projector width grid")
      ->delimiter(',')
      ->capture_default_str();
  experiment->add_option("--beta-values", eopts.beta_values,
                         "penalty grid (default: 11-point log grid 1e-4..1e1)")
      ->delimiter(',');
  experiment->add_option("--fractions", eopts.fractions, "dataset fractions")
      ->delimiter(',')
      ->capture_default_str();
  experiment->add_option("--seeds", eopts.n_seeds, "Monte-Carlo seed count")
      ->capture_default_str();
  experiment->add_option("--d", eopts.d, "projector width")->capture_default_str();
  experiment->add_option("--beta", eopts.beta, "redundancy penalty weight")
      ->capture_default_str();
  experiment->add_option("--eta", eopts.eta, "step size (0 = auto)")
      ->capture_default_str();
  experiment->add_option("--steps", eopts.steps, "integrator steps per cell")
      ->capture_default_str();
  experiment->add_option("--budget", eopts.budget, "step budget per cell")
      ->capture_default_str();
  experiment->add_option("--record-every", eopts.record_every, "snapshot cadence")
      ->capture_default_str();
  experiment->add_option("--init-scale", eopts.init_scale, "initial weight scale")
      ->capture_default_str();
  experiment->add_option("--threshold", eopts.threshold, "alignment target")
      ->capture_default_str();
  experiment->add_option("--train-frac", eopts.train_frac, "probe train fraction")
      ->capture_default_str();
  experiment->add_flag("--epochs-matched", eopts.epochs_matched,
                       "scale each cell's budget by its dataset fraction");
  experiment
      ->add_option("--abort-after-cells", eopts.abort_after_cells,
                   "abort after emitting N rows (crash-recovery testing)")
      ->group("")
      // keep the crash hook out of dumped configs, where its empty default
      // would read back as 0 and kill every replay on the first row
      ->configurable(false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (spectrum->parsed()) {
      return cmd_spectrum(app, spectrum_graph, out, seed, workers, topk);
    }
    if (dynamics->parsed()) {
      return cmd_dynamics(app, dynamics_graph, out, seed, workers, dyn_d,
                          dyn_beta, dyn_eta, dyn_steps, dyn_record, dyn_init,
                          dyn_mode);
    }
    return cmd_experiment(app, experiment_graph, out, seed, workers, eopts);
  } catch (const validation_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const numeric_error& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return 1;
  }
}

}  // namespace ssllab
