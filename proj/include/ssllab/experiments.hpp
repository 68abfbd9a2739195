#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ssllab/dynamics.hpp"
#include "ssllab/graph.hpp"
#include "ssllab/types.hpp"

namespace ssllab {

/// One row of the undersampling study: Monte-Carlo statistics of the
/// block-position estimators of the structural edge weights at a given
/// views-per-image count m.
struct AnsatzRow {
  int m = 0;
  double abs_mu_minus_nu_mean = 0.0;
  double abs_mu_minus_nu_sd = 0.0;
  double delta_mean = 0.0;
  double delta_sd = 0.0;
};

/// Per-m Monte-Carlo quality of the sampled similarity kernel: Frobenius
/// distance to the population kernel and top-d eigenspace alignment.
struct EstimatorRow {
  int m = 0;
  double error_mean = 0.0;
  double error_sd = 0.0;
  double alignment_mean = 0.0;
};

struct EstimatorStudy {
  std::vector<EstimatorRow> rows;
  double loglog_slope = 0.0;  // d log(error_mean) / d log(m)
};

/// Shared integrator settings for the sweep drivers.  eta <= 0 derives a
/// stable step from the population covariance.
struct DynamicsConfig {
  double eta = 0.0;
  double beta = 1.0;
  int d = 4;  // projector width, where the sweep does not scan it
  long long steps = 2000;
  double init_scale = 1e-3;
  long long record_every = 50;
  WeightMode mode = WeightMode::penalty;
  double train_frac = 0.5;  // probe split used by the sweeps
};

/// One grid cell of a sweep.  Axis fields that a sweep does not vary keep
/// their defaults.  A cell either carries metrics or is marked failed with
/// the reason; censored marks a convergence run that exhausted its budget.
struct SweepCell {
  int d = 0;
  double beta = 0.0;
  int m = 0;
  double fraction = 1.0;
  std::uint64_t seed = 0;
  double alignment = 0.0;
  double accuracy = 0.0;
  double effective_rank = 0.0;
  double loss_final = 0.0;
  long long steps_to_threshold = -1;
  bool censored = false;
  bool failed = false;
  std::string failure;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // grid order: outer axes first, seed innermost
};

/// Observer invoked in grid order as sweep cells complete (the work queue
/// guarantees prefix order), letting callers stream rows to disk.  An
/// exception thrown here aborts the sweep after the completed prefix.
using CellSink = std::function<void(const SweepCell&)>;

/// Selected penalty weight for one projector width: the beta whose mean
/// alignment over seeds is largest (ties toward smaller beta).
struct BetaChoice {
  int d = 0;
  double beta = 0.0;
  double alignment = 0.0;
};

/// Estimate the structural edge weights of the 4-vertex toy graph from m
/// sampled views per image, per seed, and report the spread of |mu - nu|
/// and delta across n_seeds runs for each m.  As m shrinks the estimators
/// collapse toward each other (the undersampling effect).
std::vector<AnsatzRow> ansatz_experiment(double rho, double mu, double nu,
                                         double delta,
                                         const std::vector<int>& m_values,
                                         int n_seeds, std::uint64_t seed);

/// Monte-Carlo study of the sampled similarity kernel on an arbitrary
/// graph: per m, mean/sd Frobenius error against the population kernel and
/// mean top-d eigenspace alignment, plus the fitted log-log error slope.
EstimatorStudy estimator_study(const AugmentationGraph& g,
                               const std::vector<int>& m_values, int n_seeds,
                               int d, std::uint64_t seed, int workers = 1);

/// Grid of collapse runs over projector widths and penalty weights.  Each
/// cell records final alignment to the top-d covariance eigenspace, probe
/// accuracy, effective rank, and final loss; integrator failures are
/// recorded per cell and the sweep continues.
SweepResult pdim_beta_sweep(const AugmentationGraph& g,
                            const std::vector<int>& d_values,
                            const std::vector<double>& beta_values,
                            const DynamicsConfig& cfg, int n_seeds,
                            std::uint64_t seed, int workers = 1,
                            const CellSink& on_cell = {});

std::vector<BetaChoice> best_beta_per_d(const SweepResult& sweep);

/// Training-speed study under sampled covariances: per (m, seed), integrate
/// with a fresh m-view empirical covariance drawn every step and record the
/// first step whose weight span aligns with the population top-d eigenspace
/// at `threshold` or better.  m = 0 runs the population covariance (the
/// no-noise lower bound).  Budget exhaustion marks the cell censored.
SweepResult convergence_study(const AugmentationGraph& g,
                              const std::vector<int>& m_values, int d,
                              const DynamicsConfig& cfg, double threshold,
                              long long budget, int n_seeds,
                              std::uint64_t seed, int workers = 1,
                              const CellSink& on_cell = {});

/// Dataset-size / augmentation-count tradeoff: stratified-subsample the
/// images to each fraction, train with m views per image per step, and
/// probe the final features on the full view set.  Matched gradient steps
/// by default; epochs_matched scales each cell's budget by its fraction.
/// Subsamples that lose a class entirely are recorded as failed cells.
SweepResult pareto_sweep(const AugmentationGraph& g,
                         const std::vector<double>& fractions,
                         const std::vector<int>& m_values, long long budget,
                         const DynamicsConfig& cfg, int n_seeds,
                         std::uint64_t seed, int workers = 1,
                         bool epochs_matched = false,
                         const CellSink& on_cell = {});

/// Stratification key for subsampling: an image's class is the label of
/// its most probable view.
int image_class(const AugmentationGraph& g, int image);

/// Keep round-down(fraction * count) images per class, chosen by seeded
/// shuffle within each class.  Throws validation_error when a class would
/// be left empty.
AugmentationGraph subsample_graph(const AugmentationGraph& g, double fraction,
                                  std::uint64_t seed);

}  // namespace ssllab
