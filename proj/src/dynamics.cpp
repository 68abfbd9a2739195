#include "ssllab/dynamics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <string>

#include "ssllab/errors.hpp"
#include "ssllab/kernel.hpp"
#include "ssllab/rng.hpp"

namespace ssllab {

namespace {

constexpr double kDivergenceLimit = 1e6;
constexpr double kSmallInit = 1e-2;   // sign/power law precondition on |z(0)|
constexpr double kZeroMode = 1e-9;    // coordinates below this are skipped
constexpr double kSignDeadZone = 1e-10;

void check_symmetric(const Matrix& t, const char* who) {
  if (t.rows() != t.cols()) {
    throw validation_error(std::string(who) + ": covariance must be square");
  }
  const double scale = std::max(1.0, t.cwiseAbs().maxCoeff());
  if ((t - t.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw validation_error(std::string(who) + ": covariance must be symmetric");
  }
}

int sign_of(double v, double dead_zone) {
  if (std::abs(v) <= dead_zone) return 0;
  return v > 0 ? 1 : -1;
}

// Descending eigendecomposition of a symmetric matrix.
void eigen_descending(const Matrix& t, Vector& values, Matrix& vectors) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (t + t.transpose()));
  if (solver.info() != Eigen::Success) {
    throw numeric_error("integrate: covariance eigendecomposition failed");
  }
  const auto n = t.rows();
  values.resize(n);
  vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    values(k) = solver.eigenvalues()(n - 1 - k);
    vectors.col(k) = solver.eigenvectors().col(n - 1 - k);
  }
}

// Both law checks share the trajectory preconditions.
void check_law_preconditions(const Trajectory& traj, const Vector& lambda,
                             const char* who) {
  if (traj.n_snapshots() < 2) {
    throw validation_error(std::string(who) + ": need at least 2 snapshots");
  }
  if (traj.beta != 0.0) {
    throw validation_error(std::string(who) + ": needs a beta = 0 run, got beta = " +
                           std::to_string(traj.beta));
  }
  if (lambda.size() != traj.modes.front().cols()) {
    throw validation_error(std::string(who) + ": eigenvalue count " +
                           std::to_string(lambda.size()) + " does not match " +
                           std::to_string(traj.modes.front().cols()) + " modes");
  }
  const double z0max = traj.modes.front().cwiseAbs().maxCoeff();
  if (z0max > kSmallInit) {
    throw validation_error(std::string(who) + ": initialization too large, max |z(0)| = " +
                           std::to_string(z0max) + " > " + std::to_string(kSmallInit));
  }
}

}  // namespace

Matrix bt_gradient(const Matrix& w, const Matrix& t_matrix, double beta) {
  check_symmetric(t_matrix, "bt_gradient");
  if (w.cols() != t_matrix.rows()) {
    throw validation_error("bt_gradient: W has " + std::to_string(w.cols()) +
                           " columns, covariance is " +
                           std::to_string(t_matrix.rows()) + " wide");
  }
  Matrix wt = w * t_matrix;
  Matrix c = wt * w.transpose();
  // Coefficient matrix: full (C_pp - 1) on the diagonal, beta C_pq off it.
  Matrix coeff = beta * c;
  coeff.diagonal() = c.diagonal().array() - 1.0;
  return coeff * wt;
}

double bt_matrix_loss(const Matrix& w, const Matrix& t_matrix, double beta) {
  check_symmetric(t_matrix, "bt_matrix_loss");
  Matrix c = w * t_matrix * w.transpose();
  double diag = 0.0;
  double off = 0.0;
  for (Eigen::Index p = 0; p < c.rows(); ++p) {
    const double dp = c(p, p) - 1.0;
    diag += dp * dp;
    for (Eigen::Index q = 0; q < c.cols(); ++q) {
      if (q != p) off += c(p, q) * c(p, q);
    }
  }
  return diag + beta * off;
}

Trajectory integrate(const Matrix& w0, const Matrix& t_matrix, double eta,
                     double beta, long long steps, long long record_every,
                     WeightMode mode) {
  check_symmetric(t_matrix, "integrate");
  if (w0.cols() != t_matrix.rows()) {
    throw validation_error("integrate: W0 has " + std::to_string(w0.cols()) +
                           " columns, covariance is " +
                           std::to_string(t_matrix.rows()) + " wide");
  }
  if (!(eta > 0.0)) {
    throw validation_error("integrate: step size must be positive, got " +
                           std::to_string(eta));
  }
  if (steps < 1) {
    throw validation_error("integrate: need at least 1 step");
  }
  if (record_every < 1) {
    throw validation_error("integrate: record_every must be >= 1, got " +
                           std::to_string(record_every));
  }

  Trajectory traj;
  traj.eta = eta;
  traj.beta = beta;
  eigen_descending(t_matrix, traj.mode_eigenvalues, traj.mode_basis);

  const double spectral_norm = traj.mode_eigenvalues.cwiseAbs().maxCoeff();
  if (eta * spectral_norm >= 0.1) {
    std::fprintf(stderr,
                 "integrate: eta * ||T||_2 = %.3g exceeds the 0.1 stability "
                 "bound; expect a rough trajectory\n",
                 eta * spectral_norm);
  }

  Matrix w = w0;
  auto record = [&](long long step) {
    traj.steps.push_back(step);
    traj.times.push_back(static_cast<double>(step) * eta);
    traj.weights.push_back(w);
    traj.modes.push_back(w * traj.mode_basis);
    traj.loss_values.push_back(bt_matrix_loss(w, t_matrix, beta));
    traj.diag_c.push_back((w * t_matrix * w.transpose()).diagonal());
  };

  for (long long k = 0; k < steps; ++k) {
    if (k % record_every == 0) record(k);
    w -= 4.0 * eta * bt_gradient(w, t_matrix, beta);
    if (mode == WeightMode::projection) {
      Eigen::JacobiSVD<Matrix> svd(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
      w = svd.matrixU() * svd.matrixV().transpose();
    }
    if (!w.allFinite() || w.cwiseAbs().maxCoeff() > kDivergenceLimit) {
      throw divergence_error("integrate: weights diverged at step " +
                                 std::to_string(k + 1),
                             k + 1);
    }
  }
  record(steps);
  return traj;
}

SignLawReport check_sign_law(const Trajectory& traj, const Vector& lambda) {
  check_law_preconditions(traj, lambda, "check_sign_law");

  // Saturation guard: the prediction only covers the h_p(t) > 0 regime.
  for (std::size_t t = 0; t < traj.n_snapshots(); ++t) {
    const Matrix& z = traj.modes[t];
    for (Eigen::Index p = 0; p < z.rows(); ++p) {
      const double h = 1.0 - z.row(p).cwiseAbs2().dot(lambda.transpose());
      if (h <= 0.0) {
        throw validation_error(
            "check_sign_law: run saturated, h_" + std::to_string(p) + "(" +
            std::to_string(traj.times[t]) + ") = " + std::to_string(h));
      }
    }
  }

  const Eigen::Index d = traj.modes.front().rows();
  const Eigen::Index n = traj.modes.front().cols();
  SignLawReport report;
  Matrix compliant = Matrix::Zero(d, n);
  report.counted = Eigen::MatrixXi::Zero(d, n);

  for (std::size_t t = 0; t + 1 < traj.n_snapshots(); ++t) {
    const Matrix& z0 = traj.modes[t];
    const Matrix& z1 = traj.modes[t + 1];
    for (Eigen::Index p = 0; p < d; ++p) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(z0(p, i)) < kZeroMode) continue;
        const double ratio = (z1(p, i) - z0(p, i)) / z0(p, i);
        const int observed = sign_of(ratio, kSignDeadZone);
        const int expected = sign_of(lambda(i), 0.0);
        ++report.counted(p, i);
        ++report.transitions;
        if (observed == expected) compliant(p, i) += 1.0;
      }
    }
  }

  report.compliance = Matrix::Ones(d, n);
  for (Eigen::Index p = 0; p < d; ++p) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (report.counted(p, i) > 0) {
        report.compliance(p, i) = compliant(p, i) / report.counted(p, i);
      }
    }
  }
  report.min_compliance = report.compliance.minCoeff();
  return report;
}

PowerLawReport check_power_law(const Trajectory& traj, const Vector& lambda) {
  check_law_preconditions(traj, lambda, "check_power_law");

  const Matrix& z0 = traj.modes.front();
  const Eigen::Index d = z0.rows();
  const Eigen::Index n = z0.cols();

  PowerLawReport report;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lambda(i) <= 0.0) continue;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (lambda(j) <= 0.0) continue;
      PowerLawPair pair;
      pair.mode_i = static_cast<int>(i);
      pair.mode_j = static_cast<int>(j);
      pair.expected = lambda(i) / lambda(j);

      double sxx = 0.0;
      double sxy = 0.0;
      for (std::size_t t = 1; t < traj.n_snapshots(); ++t) {
        const Matrix& z = traj.modes[t];
        for (Eigen::Index p = 0; p < d; ++p) {
          if (std::abs(z0(p, i)) < kZeroMode || std::abs(z0(p, j)) < kZeroMode)
            continue;
          const double ri = z(p, i) / z0(p, i);
          const double rj = z(p, j) / z0(p, j);
          if (ri < 2.0 || ri > 100.0 || rj < 2.0 || rj > 100.0) continue;
          const double x = std::log(rj);
          const double y = std::log(ri);
          sxx += x * x;
          sxy += x * y;
          ++pair.points;
        }
      }
      pair.sufficient = pair.points >= 2;
      pair.slope = pair.sufficient ? sxy / sxx : 0.0;
      report.pairs.push_back(pair);
    }
  }
  return report;
}

double effective_rank(const Matrix& z) {
  if (z.size() == 0 || z.cwiseAbs().maxCoeff() == 0.0) {
    throw validation_error("effective_rank: zero matrix");
  }
  Eigen::JacobiSVD<Matrix> svd(z);
  Vector s2 = svd.singularValues().cwiseAbs2();
  s2 /= s2.sum();
  double entropy = 0.0;
  for (Eigen::Index k = 0; k < s2.size(); ++k) {
    if (s2(k) > 0.0) entropy -= s2(k) * std::log(s2(k));
  }
  return std::exp(entropy);
}

CollapseResult collapse_experiment(const AugmentationGraph& g, int d, double beta,
                                   double init_scale, std::uint64_t seed,
                                   long long steps, WeightMode mode,
                                   long long record_every, double eta) {
  if (d < 1) throw validation_error("collapse_experiment: d must be >= 1");
  if (!(init_scale > 0.0)) {
    throw validation_error("collapse_experiment: init_scale must be positive");
  }
  Matrix t = joint_matrix(g);

  Vector lam;
  Matrix basis;
  eigen_descending(t, lam, basis);
  if (eta <= 0.0) {
    // Keep eta ||T||_2 well under the stability bound.
    eta = 0.02 / std::max(lam.cwiseAbs().maxCoeff(), 1e-12);
  }

  CounterRng rng(stream_key(seed, 0x636f6c6cull));
  Matrix w0(d, t.rows());
  for (Eigen::Index p = 0; p < w0.rows(); ++p) {
    for (Eigen::Index q = 0; q < w0.cols(); ++q) {
      w0(p, q) = init_scale * rng.normal();
    }
  }

  CollapseResult result;
  result.trajectory = integrate(w0, t, eta, beta, steps, record_every, mode);
  const Matrix& w_final = result.trajectory.weights.back();
  result.effective_rank = effective_rank(w_final);

  const int span = std::min<int>(d, static_cast<int>(t.rows()));
  FeatureMap learned{w_final};
  FeatureMap target{basis.leftCols(span).transpose()};
  result.alignment = subspace_alignment(learned, target);
  return result;
}

}  // namespace ssllab
