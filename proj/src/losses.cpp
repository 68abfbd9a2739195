#include "ssllab/losses.hpp"

#include <cmath>
#include <string>

#include "ssllab/errors.hpp"

namespace ssllab {

namespace {

void check_views(const std::vector<Matrix>& views, const char* who) {
  if (views.size() < 2) {
    throw validation_error(std::string(who) + ": need at least 2 views, got " +
                           std::to_string(views.size()));
  }
  const auto rows = views.front().rows();
  const auto cols = views.front().cols();
  if (rows < 1 || cols < 1) {
    throw validation_error(std::string(who) + ": empty view matrices");
  }
  for (const Matrix& v : views) {
    if (v.rows() != rows || v.cols() != cols) {
      throw validation_error(std::string(who) + ": view shape mismatch");
    }
  }
}

// beta * ||(1/n) Z Z^T - I||_F^2 for one [d x n] embedding matrix.
double gram_penalty(const Matrix& z, double beta) {
  const double n = static_cast<double>(z.cols());
  Matrix gram = (z * z.transpose()) / n;
  gram -= Matrix::Identity(z.rows(), z.rows());
  return beta * gram.squaredNorm();
}

double view_penalty(const std::vector<Matrix>& views, double beta,
                    PenaltyTarget target) {
  if (target == PenaltyTarget::averaged) {
    Matrix mean = views.front();
    for (std::size_t j = 1; j < views.size(); ++j) mean += views[j];
    mean /= static_cast<double>(views.size());
    return gram_penalty(mean, beta);
  }
  double acc = 0.0;
  for (const Matrix& v : views) acc += gram_penalty(v, beta);
  return acc / static_cast<double>(views.size());
}

}  // namespace

double idealized_loss(const FeatureMap& f, const KernelMatrix& k) {
  const int n = k.n();
  if (f.n() != n) {
    throw validation_error("idealized_loss: feature map covers " +
                           std::to_string(f.n()) + " vertices, kernel has " +
                           std::to_string(n));
  }
  // Weight each squared residual by rho_x rho_z; the marginal sums to one,
  // so this is the mean under the product measure.
  Matrix resid = k.w - f.weights.transpose() * f.weights;
  double acc = 0.0;
  for (int x = 0; x < n; ++x) {
    for (int z = 0; z < n; ++z) {
      acc += k.marginal(x) * k.marginal(z) * resid(x, z) * resid(x, z);
    }
  }
  return acc;
}

double operator_invariance_loss(const FeatureMap& f, const KernelOperator& t,
                                double beta) {
  if (!t.square()) {
    throw validation_error("operator_invariance_loss: operator must be square");
  }
  if ((t.in_measure - t.out_measure).cwiseAbs().maxCoeff() > 1e-14) {
    throw validation_error(
        "operator_invariance_loss: input and output measures differ");
  }
  if (f.n() != t.n_in()) {
    throw validation_error("operator_invariance_loss: feature map covers " +
                           std::to_string(f.n()) + " vertices, operator acts on " +
                           std::to_string(t.n_in()));
  }
  const Vector& rho = t.in_measure;

  // Rows of f.weights are the features; shift each by the operator and take
  // the rho-weighted squared norm.
  Matrix shifted = t.matrix * f.weights.transpose() - f.weights.transpose();
  double invariance = 0.0;
  for (int i = 0; i < f.d(); ++i) {
    invariance += shifted.col(i).cwiseAbs2().dot(rho);
  }

  // Gram deviation in the rho inner product, diagonal included so the
  // penalty also pins the feature scale.
  Matrix gram = f.weights * rho.asDiagonal() * f.weights.transpose();
  gram -= Matrix::Identity(f.d(), f.d());
  return invariance + beta * gram.squaredNorm();
}

MultiViewParts multi_aug_parts(const std::vector<Matrix>& views, double beta,
                               PenaltyTarget target) {
  check_views(views, "multi_aug_loss");
  const Eigen::Index n = views.front().cols();

  Matrix mean = views.front();
  for (std::size_t j = 1; j < views.size(); ++j) mean += views[j];
  mean /= static_cast<double>(views.size());

  MultiViewParts parts;
  for (const Matrix& v : views) {
    for (Eigen::Index x = 0; x < n; ++x) {
      parts.invariance += (v.col(x) - mean.col(x)).squaredNorm();
      ++parts.distance_evaluations;
    }
  }
  parts.invariance /= static_cast<double>(n);
  parts.penalty = view_penalty(views, beta, target);
  return parts;
}

double multi_aug_loss(const std::vector<Matrix>& views, double beta,
                      PenaltyTarget target) {
  return multi_aug_parts(views, beta, target).total();
}

MultiViewParts pairwise_parts(const std::vector<Matrix>& views, double beta,
                              PenaltyTarget target) {
  check_views(views, "pairwise_loss");
  const Eigen::Index n = views.front().cols();
  const std::size_t m = views.size();

  MultiViewParts parts;
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = 0; k < m; ++k) {
      if (j == k) continue;
      for (Eigen::Index x = 0; x < n; ++x) {
        parts.invariance += (views[j].col(x) - views[k].col(x)).squaredNorm();
        ++parts.distance_evaluations;
      }
    }
  }
  parts.invariance /= static_cast<double>(n);
  parts.penalty = view_penalty(views, beta, target);
  return parts;
}

double pairwise_loss(const std::vector<Matrix>& views, double beta,
                     PenaltyTarget target) {
  return pairwise_parts(views, beta, target).total();
}

Matrix cross_covariance(const Matrix& z1, const Matrix& z2) {
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols()) {
    throw validation_error("cross_covariance: batch shapes differ");
  }
  if (z1.rows() < 2) {
    throw validation_error("cross_covariance: need a batch of at least 2, got " +
                           std::to_string(z1.rows()));
  }
  Matrix c1 = z1.rowwise() - z1.colwise().mean();
  Matrix c2 = z2.rowwise() - z2.colwise().mean();
  return (c1.transpose() * c2) / static_cast<double>(z1.rows() - 1);
}

double barlow_twins_loss(const Matrix& z1, const Matrix& z2, double beta) {
  Matrix c = cross_covariance(z1, z2);
  double diag = 0.0;
  double off = 0.0;
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    const double di = c(i, i) - 1.0;
    diag += di * di;
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      if (j != i) off += c(i, j) * c(i, j);
    }
  }
  return diag + beta * off;
}

namespace {

// Mean over columns of max(0, 1 - sample stdev).
double hinge_variance(const Matrix& z) {
  Matrix centered = z.rowwise() - z.colwise().mean();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < z.cols(); ++i) {
    const double var =
        centered.col(i).squaredNorm() / static_cast<double>(z.rows() - 1);
    acc += std::max(0.0, 1.0 - std::sqrt(var));
  }
  return acc / static_cast<double>(z.cols());
}

// (1/d) sum_{i != j} Cov(Z)_ij^2.
double off_diagonal_covariance(const Matrix& z) {
  Matrix cov = cross_covariance(z, z);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    for (Eigen::Index j = 0; j < cov.cols(); ++j) {
      if (j != i) acc += cov(i, j) * cov(i, j);
    }
  }
  return acc / static_cast<double>(z.cols());
}

}  // namespace

double vicreg_loss(const Matrix& z1, const Matrix& z2, double mu) {
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols()) {
    throw validation_error("vicreg_loss: batch shapes differ");
  }
  if (z1.rows() < 2) {
    throw validation_error("vicreg_loss: need a batch of at least 2, got " +
                           std::to_string(z1.rows()));
  }
  const double invariance =
      (z1 - z2).rowwise().squaredNorm().sum() / static_cast<double>(z1.rows());
  const double variance = hinge_variance(z1) + hinge_variance(z2);
  const double covariance =
      off_diagonal_covariance(z1) + off_diagonal_covariance(z2);
  return mu * invariance + (mu / 2.0) * variance + 0.5 * covariance;
}

SpectralContrastiveParts spectral_contrastive_decomposition(
    const Matrix& z, const KernelMatrix& w_bar) {
  const Eigen::Index n = z.rows();
  const Eigen::Index d = z.cols();
  if (w_bar.n() != n) {
    throw validation_error("spectral_contrastive_decomposition: embedding covers " +
                           std::to_string(n) + " vertices, kernel has " +
                           std::to_string(w_bar.n()));
  }

  SpectralContrastiveParts parts;
  parts.total = (z * z.transpose() - w_bar.w).squaredNorm();
  parts.covariance = (z.transpose() * z - Matrix::Identity(d, d)).squaredNorm();
  for (Eigen::Index x = 0; x < n; ++x) {
    parts.variance += 2.0 * (1.0 - w_bar.w(x, x)) * z.row(x).squaredNorm();
    for (Eigen::Index y = 0; y < n; ++y) {
      if (y != x) parts.alignment -= 2.0 * w_bar.w(x, y) * z.row(x).dot(z.row(y));
    }
  }
  parts.kappa = w_bar.w.squaredNorm() - static_cast<double>(d);
  return parts;
}

}  // namespace ssllab
