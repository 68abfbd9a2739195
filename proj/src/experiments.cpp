#include "ssllab/experiments.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "ssllab/errors.hpp"
#include "ssllab/kernel.hpp"
#include "ssllab/probe.hpp"
#include "ssllab/rng.hpp"
#include "ssllab/workqueue.hpp"

namespace ssllab {

namespace {

// Stream tags keeping each consumer of a cell seed on its own substream.
constexpr std::uint64_t kInitTag = 0x696e6974ull;
constexpr std::uint64_t kJointTag = 0x6a6e74ull;
constexpr std::uint64_t kSubsampleTag = 0x737562ull;
constexpr std::uint64_t kCellTag = 0x63656c6cull;

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

Moments moments(const std::vector<double>& xs) {
  Moments m;
  if (xs.empty()) return m;
  m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  if (xs.size() > 1) {
    double acc = 0.0;
    for (double x : xs) acc += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(acc / (xs.size() - 1));
  }
  return m;
}

// Mean of the named block positions of a 4x4 symmetric estimate.
double block_mean(const Matrix& w, std::initializer_list<std::pair<int, int>> at) {
  double acc = 0.0;
  for (auto [r, c] : at) acc += w(r, c);
  return acc / static_cast<double>(at.size());
}

Matrix gaussian_matrix(int rows, int cols, double scale, std::uint64_t key) {
  CounterRng rng(key);
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
  }
  return m;
}

// Descending eigenvectors of a symmetric matrix, top-d columns as rows.
FeatureMap top_eigenspace(const Matrix& t, int d) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (t + t.transpose()));
  if (solver.info() != Eigen::Success) {
    throw numeric_error("top_eigenspace: eigendecomposition failed");
  }
  const auto n = t.rows();
  d = std::min<int>(d, static_cast<int>(n));
  Matrix rows(d, n);
  for (int k = 0; k < d; ++k) {
    rows.row(k) = solver.eigenvectors().col(n - 1 - k).transpose();
  }
  return FeatureMap{rows};
}

double auto_eta(const Matrix& t) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (t + t.transpose()));
  const double top = solver.eigenvalues().cwiseAbs().maxCoeff();
  // Keep eta ||T||_2 well under the Euler stability bound.
  return 0.02 / std::max(top, 1e-12);
}

// Ordinary least-squares slope of y on x.
double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double xm = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  const double ym = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - xm) * (x[i] - xm);
    sxy += (x[i] - xm) * (y[i] - ym);
  }
  return sxy / sxx;
}

struct NoisyRun {
  Matrix w;
  double alignment = 0.0;
  double loss_final = 0.0;
  long long steps_to_threshold = -1;
  bool censored = false;
};

// Forward-Euler run where the covariance is re-estimated from m fresh views
// per image every step (m == 0 uses the population covariance).  Tracks
// alignment of the weight row span against `target` each step; a negative
// threshold disables the stopping rule.
NoisyRun run_noisy(const AugmentationGraph& sample_from, const Matrix& t_pop,
                   const FeatureMap& target, int d, int m, double eta,
                   double beta, double init_scale, double threshold,
                   long long budget, std::uint64_t run_key) {
  NoisyRun run;
  run.w = gaussian_matrix(d, static_cast<int>(t_pop.rows()), init_scale,
                          stream_key(run_key, kInitTag));
  run.censored = threshold >= 0.0;
  // m == 0 trains on the population covariance of the training graph
  // (which is t_pop itself unless the images were subsampled).
  const Matrix t_train = m == 0 ? joint_matrix(sample_from) : Matrix();
  for (long long k = 0; k <= budget; ++k) {
    run.alignment = subspace_alignment(FeatureMap{run.w}, target);
    if (threshold >= 0.0 && run.alignment >= threshold) {
      run.steps_to_threshold = k;
      run.censored = false;
      break;
    }
    if (k == budget) break;
    const Matrix t_step =
        m == 0 ? t_train
               : empirical_joint_matrix(sample_from, m,
                                        stream_key(run_key, kJointTag,
                                                   static_cast<std::uint64_t>(k)));
    run.w -= 4.0 * eta * bt_gradient(run.w, t_step, beta);
    if (!run.w.allFinite() || run.w.cwiseAbs().maxCoeff() > 1e6) {
      throw divergence_error("noisy run: weights diverged at step " +
                                 std::to_string(k + 1),
                             k + 1);
    }
  }
  run.loss_final = bt_matrix_loss(run.w, t_pop, beta);
  return run;
}

}  // namespace

std::vector<AnsatzRow> ansatz_experiment(double rho, double mu, double nu,
                                         double delta,
                                         const std::vector<int>& m_values,
                                         int n_seeds, std::uint64_t seed) {
  if (m_values.empty() || n_seeds < 2) {
    throw validation_error("ansatz_experiment: need m values and >= 2 seeds");
  }
  const AugmentationGraph g = build_toy_graph(rho, mu, nu, delta);

  std::vector<AnsatzRow> rows;
  for (int m : m_values) {
    if (m < 2) {
      throw validation_error("ansatz_experiment: m must be >= 2, got " +
                             std::to_string(m));
    }
    std::vector<double> gaps;
    std::vector<double> deltas;
    for (int s = 0; s < n_seeds; ++s) {
      const Matrix w = empirical_structural_matrix(
          g, m, stream_key(seed, static_cast<std::uint64_t>(m), s));
      const double mu_hat = block_mean(w, {{0, 1}, {1, 0}, {2, 3}, {3, 2}});
      const double nu_hat = block_mean(w, {{0, 2}, {2, 0}, {1, 3}, {3, 1}});
      const double delta_hat = block_mean(w, {{0, 3}, {3, 0}, {1, 2}, {2, 1}});
      gaps.push_back(std::abs(mu_hat - nu_hat));
      deltas.push_back(delta_hat);
    }
    const Moments gap_m = moments(gaps);
    const Moments delta_m = moments(deltas);
    rows.push_back({m, gap_m.mean, gap_m.sd, delta_m.mean, delta_m.sd});
  }
  return rows;
}

EstimatorStudy estimator_study(const AugmentationGraph& g,
                               const std::vector<int>& m_values, int n_seeds,
                               int d, std::uint64_t seed, int workers) {
  if (m_values.empty() || n_seeds < 2) {
    throw validation_error("estimator_study: need m values and >= 2 seeds");
  }
  for (int m : m_values) {
    if (m < 2) {
      throw validation_error("estimator_study: m must be >= 2, got " +
                             std::to_string(m));
    }
  }
  const KernelMatrix population = adjacency(g);
  const FeatureMap pop_space = top_eigenspace(population.w, d);

  struct CellOut {
    double error = 0.0;
    double alignment = 0.0;
  };
  const std::size_t per_m = static_cast<std::size_t>(n_seeds);
  std::vector<std::vector<CellOut>> by_m(m_values.size());
  for (auto& v : by_m) v.resize(per_m);

  run_cells(
      m_values.size() * per_m, workers,
      [&](std::size_t i) {
        const std::size_t mi = i / per_m;
        const std::size_t s = i % per_m;
        const KernelMatrix est = empirical_adjacency(
            g, m_values[mi],
            stream_key(seed, static_cast<std::uint64_t>(m_values[mi]), s));
        CellOut out;
        out.error = (est.w - population.w).norm();
        out.alignment = subspace_alignment(top_eigenspace(est.w, d), pop_space);
        return out;
      },
      [&](std::size_t i, const CellOut& out) {
        by_m[i / per_m][i % per_m] = out;
      });

  EstimatorStudy study;
  std::vector<double> log_m;
  std::vector<double> log_err;
  for (std::size_t mi = 0; mi < m_values.size(); ++mi) {
    std::vector<double> errs;
    std::vector<double> aligns;
    for (const CellOut& out : by_m[mi]) {
      errs.push_back(out.error);
      aligns.push_back(out.alignment);
    }
    const Moments err_m = moments(errs);
    const Moments align_m = moments(aligns);
    study.rows.push_back({m_values[mi], err_m.mean, err_m.sd, align_m.mean});
    log_m.push_back(std::log(static_cast<double>(m_values[mi])));
    log_err.push_back(std::log(err_m.mean));
  }
  study.loglog_slope = ls_slope(log_m, log_err);
  return study;
}

SweepResult pdim_beta_sweep(const AugmentationGraph& g,
                            const std::vector<int>& d_values,
                            const std::vector<double>& beta_values,
                            const DynamicsConfig& cfg, int n_seeds,
                            std::uint64_t seed, int workers,
                            const CellSink& on_cell) {
  if (d_values.empty() || beta_values.empty() || n_seeds < 1) {
    throw validation_error("pdim_beta_sweep: empty grid");
  }
  g.validate();

  const std::size_t n_beta = beta_values.size();
  const std::size_t n_s = static_cast<std::size_t>(n_seeds);
  const std::size_t n_cells = d_values.size() * n_beta * n_s;

  SweepResult result;
  result.cells.resize(n_cells);
  run_cells(
      n_cells, workers,
      [&](std::size_t i) {
        const std::size_t di = i / (n_beta * n_s);
        const std::size_t bi = (i / n_s) % n_beta;
        const std::size_t s = i % n_s;
        SweepCell cell;
        cell.d = d_values[di];
        cell.beta = beta_values[bi];
        cell.seed = s;
        const std::uint64_t key = stream_key(seed, kCellTag, i);
        try {
          const CollapseResult run = collapse_experiment(
              g, cell.d, cell.beta, cfg.init_scale, key, cfg.steps, cfg.mode,
              cfg.record_every, cfg.eta);
          cell.alignment = run.alignment;
          cell.effective_rank = run.effective_rank;
          cell.loss_final = run.trajectory.loss_values.back();
          const ProbeResult probe = linear_probe(
              run.trajectory.weights.back(), g.labels, cfg.train_frac, key);
          cell.accuracy = probe.accuracy;
        } catch (const std::exception& e) {
          cell.failed = true;
          cell.failure = e.what();
        }
        return cell;
      },
      [&](std::size_t i, const SweepCell& cell) {
        result.cells[i] = cell;
        if (on_cell) on_cell(cell);
      });
  return result;
}

std::vector<BetaChoice> best_beta_per_d(const SweepResult& sweep) {
  // Mean alignment over the non-failed seeds of each (d, beta) point.
  std::map<int, std::map<double, std::pair<double, int>>> acc;
  for (const SweepCell& cell : sweep.cells) {
    if (cell.failed) continue;
    auto& slot = acc[cell.d][cell.beta];
    slot.first += cell.alignment;
    slot.second += 1;
  }
  std::vector<BetaChoice> out;
  for (const auto& [d, by_beta] : acc) {
    BetaChoice best{d, 0.0, -1.0};
    for (const auto& [beta, sum_count] : by_beta) {
      const double mean = sum_count.first / sum_count.second;
      // Strict > plus ascending beta iteration = ties go to smaller beta.
      if (mean > best.alignment) best = {d, beta, mean};
    }
    out.push_back(best);
  }
  return out;
}

SweepResult convergence_study(const AugmentationGraph& g,
                              const std::vector<int>& m_values, int d,
                              const DynamicsConfig& cfg, double threshold,
                              long long budget, int n_seeds,
                              std::uint64_t seed, int workers,
                              const CellSink& on_cell) {
  if (m_values.empty() || n_seeds < 1) {
    throw validation_error("convergence_study: empty grid");
  }
  if (threshold >= 1.0) {
    throw validation_error("convergence_study: threshold must be < 1");
  }
  for (int m : m_values) {
    if (m != 0 && m < 2) {
      throw validation_error(
          "convergence_study: m must be 0 (population) or >= 2, got " +
          std::to_string(m));
    }
  }
  g.validate();

  const Matrix t_pop = joint_matrix(g);
  const FeatureMap target = top_eigenspace(t_pop, d);
  const double eta = cfg.eta > 0.0 ? cfg.eta : auto_eta(t_pop);

  const std::size_t n_s = static_cast<std::size_t>(n_seeds);
  const std::size_t n_cells = m_values.size() * n_s;
  SweepResult result;
  result.cells.resize(n_cells);
  run_cells(
      n_cells, workers,
      [&](std::size_t i) {
        const std::size_t mi = i / n_s;
        const std::size_t s = i % n_s;
        SweepCell cell;
        cell.d = d;
        cell.m = m_values[mi];
        cell.beta = cfg.beta;
        cell.seed = s;
        // Key on the seed index only, so runs at different m share their
        // initialization and are paired for sign tests.
        const std::uint64_t key = stream_key(seed, kCellTag, s);
        try {
          const NoisyRun run =
              run_noisy(g, t_pop, target, d, cell.m, eta, cfg.beta,
                        cfg.init_scale, threshold, budget, key);
          cell.alignment = run.alignment;
          cell.loss_final = run.loss_final;
          cell.steps_to_threshold = run.steps_to_threshold;
          cell.censored = run.censored;
        } catch (const std::exception& e) {
          cell.failed = true;
          cell.failure = e.what();
        }
        return cell;
      },
      [&](std::size_t i, const SweepCell& cell) {
        result.cells[i] = cell;
        if (on_cell) on_cell(cell);
      });
  return result;
}

int image_class(const AugmentationGraph& g, int image) {
  if (image < 0 || image >= g.n_images()) {
    throw validation_error("image_class: image index out of range");
  }
  Eigen::Index best = 0;
  g.cond.row(image).maxCoeff(&best);
  return g.labels[static_cast<std::size_t>(best)];
}

AugmentationGraph subsample_graph(const AugmentationGraph& g, double fraction,
                                  std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw validation_error("subsample_graph: fraction must lie in (0, 1]");
  }
  std::map<int, std::vector<int>> by_class;
  for (int i = 0; i < g.n_images(); ++i) {
    by_class[image_class(g, i)].push_back(i);
  }

  std::vector<int> kept;
  std::uint64_t class_index = 0;
  for (auto& [cls, images] : by_class) {
    const auto keep = static_cast<std::size_t>(
        std::floor(fraction * static_cast<double>(images.size()) + 1e-12));
    if (keep == 0) {
      throw validation_error("subsample_graph: fraction " +
                             std::to_string(fraction) + " leaves class " +
                             std::to_string(cls) + " empty");
    }
    CounterRng rng(stream_key(seed, kSubsampleTag, class_index++));
    for (std::size_t i = images.size() - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(i + 1));
      std::swap(images[i], images[j]);
    }
    kept.insert(kept.end(), images.begin(), images.begin() + keep);
  }
  std::sort(kept.begin(), kept.end());

  AugmentationGraph sub;
  sub.cond.resize(static_cast<Eigen::Index>(kept.size()), g.n_views());
  sub.image_prior.resize(static_cast<Eigen::Index>(kept.size()));
  for (std::size_t r = 0; r < kept.size(); ++r) {
    sub.cond.row(static_cast<Eigen::Index>(r)) = g.cond.row(kept[r]);
    sub.image_prior(static_cast<Eigen::Index>(r)) = g.image_prior(kept[r]);
  }
  sub.image_prior /= sub.image_prior.sum();
  sub.labels = g.labels;
  sub.groups = g.groups;
  sub.validate();
  return sub;
}

SweepResult pareto_sweep(const AugmentationGraph& g,
                         const std::vector<double>& fractions,
                         const std::vector<int>& m_values, long long budget,
                         const DynamicsConfig& cfg, int n_seeds,
                         std::uint64_t seed, int workers, bool epochs_matched,
                         const CellSink& on_cell) {
  if (fractions.empty() || m_values.empty() || n_seeds < 1) {
    throw validation_error("pareto_sweep: empty grid");
  }
  if (budget < 1) {
    throw validation_error("pareto_sweep: budget must be >= 1");
  }
  g.validate();

  const Matrix t_pop = joint_matrix(g);
  const FeatureMap target = top_eigenspace(t_pop, cfg.d);
  const double eta = cfg.eta > 0.0 ? cfg.eta : auto_eta(t_pop);

  const std::size_t n_m = m_values.size();
  const std::size_t n_s = static_cast<std::size_t>(n_seeds);
  const std::size_t n_cells = fractions.size() * n_m * n_s;
  SweepResult result;
  result.cells.resize(n_cells);
  run_cells(
      n_cells, workers,
      [&](std::size_t i) {
        const std::size_t fi = i / (n_m * n_s);
        const std::size_t mi = (i / n_s) % n_m;
        const std::size_t s = i % n_s;
        SweepCell cell;
        cell.d = cfg.d;
        cell.beta = cfg.beta;
        cell.fraction = fractions[fi];
        cell.m = m_values[mi];
        cell.seed = s;
        const std::uint64_t key = stream_key(seed, kCellTag, s);
        try {
          const AugmentationGraph sub = subsample_graph(
              g, cell.fraction, stream_key(key, kSubsampleTag, fi));
          long long steps = budget;
          if (epochs_matched) {
            steps = std::max<long long>(
                1, std::llround(static_cast<double>(budget) * cell.fraction));
          }
          const NoisyRun run =
              run_noisy(sub, t_pop, target, cfg.d, cell.m, eta, cfg.beta,
                        cfg.init_scale, -1.0, steps, key);
          cell.alignment = run.alignment;
          cell.loss_final = run.loss_final;
          // Features trained on the subsample, evaluated over every view of
          // the full graph.
          const ProbeResult probe =
              linear_probe(run.w, g.labels, cfg.train_frac, key);
          cell.accuracy = probe.accuracy;
        } catch (const std::exception& e) {
          cell.failed = true;
          cell.failure = e.what();
        }
        return cell;
      },
      [&](std::size_t i, const SweepCell& cell) {
        result.cells[i] = cell;
        if (on_cell) on_cell(cell);
      });
  return result;
}

}  // namespace ssllab
