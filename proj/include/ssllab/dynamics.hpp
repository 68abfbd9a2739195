#pragma once

#include <cstdint>
#include <vector>

#include "ssllab/graph.hpp"
#include "ssllab/types.hpp"

namespace ssllab {

/// How the orthogonality constraint is enforced during integration:
/// penalty leaves the gradient flow alone (beta does the work) while
/// projection re-orthonormalizes the rows of W after every step.
enum class WeightMode { penalty, projection };

/// Recorded state of one gradient-flow run.  Snapshots are stored every
/// record_every steps plus the final step; times holds step * eta.
/// modes[t] = weights[t] * V where V diagonalizes the symmetric data
/// covariance, so column i of a mode snapshot tracks the coefficient on
/// the eigenvector with mode_eigenvalues(i).
struct Trajectory {
  std::vector<double> times;
  std::vector<long long> steps;
  std::vector<Matrix> weights;
  std::vector<Matrix> modes;
  std::vector<double> loss_values;
  std::vector<Vector> diag_c;
  Matrix mode_basis;        // V, columns ordered by descending eigenvalue
  Vector mode_eigenvalues;  // matching covariance eigenvalues
  double eta = 0.0;
  double beta = 0.0;

  std::size_t n_snapshots() const { return times.size(); }
};

/// Per-coordinate compliance with the growth/decay sign prediction.
/// compliance(p, i) is the fraction of counted transitions of mode i in
/// row p whose relative change matches the sign of eigenvalue i;
/// counted(p, i) is how many transitions survived the dead-zone filters.
struct SignLawReport {
  Matrix compliance;
  Eigen::MatrixXi counted;
  double min_compliance = 1.0;
  long long transitions = 0;
};

/// Fitted growth-exponent ratio for one ordered mode pair.  slope is the
/// through-origin regression of log growth of mode i on log growth of
/// mode j over the window where both growth ratios lie in [2, 100].
struct PowerLawPair {
  int mode_i = 0;
  int mode_j = 0;
  double expected = 0.0;
  double slope = 0.0;
  long long points = 0;
  bool sufficient = false;
};

struct PowerLawReport {
  std::vector<PowerLawPair> pairs;
};

struct CollapseResult {
  Trajectory trajectory;
  double effective_rank = 0.0;
  double alignment = 0.0;
};

/// Scaled gradient of the redundancy-reduction loss at W: with
/// C = W T W^T, returns ((1 - beta) diag(C_pp - 1) + beta (C - I)) W T.
/// The full gradient of bt_matrix_loss is 4 times this; the integrator
/// applies that factor together with eta.
Matrix bt_gradient(const Matrix& w, const Matrix& t_matrix, double beta);

/// sum_p (C_pp - 1)^2 + beta sum_{p != q} C_pq^2 with C = W T W^T.
double bt_matrix_loss(const Matrix& w, const Matrix& t_matrix, double beta);

/// Forward-Euler integration of W <- W - 4 eta bt_gradient(W).  Warns on
/// stderr when eta ||T||_2 >= 0.1; aborts with divergence_error when any
/// weight entry passes 1e6 in magnitude.
Trajectory integrate(const Matrix& w0, const Matrix& t_matrix, double eta,
                     double beta, long long steps, long long record_every,
                     WeightMode mode = WeightMode::penalty);

/// Checks sign(delta z / z) == sign(lambda) across consecutive snapshots
/// of a beta = 0, small-initialization run.  Refuses (validation_error)
/// when the run violates those preconditions or saturates (h_p <= 0).
SignLawReport check_sign_law(const Trajectory& traj, const Vector& lambda);

/// Checks z_i(t)/z_i(0) = (z_j(t)/z_j(0))^(lambda_i / lambda_j) for every
/// ordered pair of positive modes, pooling rows.  Pairs whose growth
/// window holds fewer than two points are reported as insufficient.
PowerLawReport check_power_law(const Trajectory& traj, const Vector& lambda);

/// exp(Shannon entropy of the normalized squared singular values); ranges
/// from 1 (rank one) to min(rows, cols) (flat spectrum).
double effective_rank(const Matrix& z);

/// End-to-end collapse run: build the covariance from the graph, integrate
/// from a small random start, report the final effective rank and the
/// alignment of the learned row span with the top-d eigenspace.  eta <= 0
/// picks a stable step from the covariance spectral norm.
CollapseResult collapse_experiment(const AugmentationGraph& g, int d,
                                   double beta, double init_scale,
                                   std::uint64_t seed, long long steps,
                                   WeightMode mode = WeightMode::penalty,
                                   long long record_every = 10,
                                   double eta = 0.0);

}  // namespace ssllab
