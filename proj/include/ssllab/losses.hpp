#pragma once

#include <vector>

#include "ssllab/graph.hpp"
#include "ssllab/kernel.hpp"
#include "ssllab/types.hpp"

namespace ssllab {

/// Knobs shared by the loss family: beta weights the orthogonality
/// (redundancy) penalty, mu the VICReg invariance term, m the number of
/// views drawn per image.
struct LossConfig {
  double beta = 1.0;
  double mu = 1.0;
  int m = 2;
};

/// Where the multi-view orthonormality penalty applies: to the per-image
/// averaged embedding (default) or to each view separately.
enum class PenaltyTarget { averaged, per_view };

/// Breakdown of a multi-view loss.  distance_evaluations counts the
/// per-image vector-distance computations, so the linear-vs-quadratic cost
/// of the two aggregation schemes is observable in tests.
struct MultiViewParts {
  double invariance = 0.0;
  double penalty = 0.0;
  long long distance_evaluations = 0;
  double total() const { return invariance + penalty; }
};

/// Decomposition of ||Z Z^T - W||_F^2 into a feature-covariance term, a
/// per-vertex variance term, a cross-vertex alignment term, and the
/// Z-independent remainder kappa.  total = covariance + variance +
/// alignment + kappa holds exactly.
struct SpectralContrastiveParts {
  double total = 0.0;
  double covariance = 0.0;
  double variance = 0.0;
  double alignment = 0.0;
  double kappa = 0.0;
};

/// Mean of (k(x,z) - F(x)^T F(z))^2 under the product measure rho x rho.
/// Minimized exactly by the top-d weighted eigenfeatures.
double idealized_loss(const FeatureMap& f, const KernelMatrix& k);

/// sum_i ||T f_i - f_i||^2_rho plus beta * ||Gram(F) - I||_F^2, where the
/// Gram matrix collects the rho-weighted inner products (f_i, f_j).
/// Requires a square operator whose input and output measures agree.
double operator_invariance_loss(const FeatureMap& f, const KernelOperator& t,
                                double beta);

/// Linear-cost multi-view loss: per image, squared distances of each view
/// embedding to the per-image mean, averaged over images, plus beta times
/// the orthonormality penalty.  Each matrix in `views` is [d x n_images],
/// one column per image.
MultiViewParts multi_aug_parts(const std::vector<Matrix>& views, double beta,
                               PenaltyTarget target = PenaltyTarget::averaged);
double multi_aug_loss(const std::vector<Matrix>& views, double beta,
                      PenaltyTarget target = PenaltyTarget::averaged);

/// Quadratic-cost baseline: squared distances over all ordered view pairs,
/// same penalty term.  Its invariance part equals 2m times the multi_aug
/// invariance part on any input.
MultiViewParts pairwise_parts(const std::vector<Matrix>& views, double beta,
                              PenaltyTarget target = PenaltyTarget::averaged);
double pairwise_loss(const std::vector<Matrix>& views, double beta,
                     PenaltyTarget target = PenaltyTarget::averaged);

/// Centered cross-covariance (Z1 - mean)^T (Z2 - mean) / (n - 1) of two
/// [batch x d] embedding batches.
Matrix cross_covariance(const Matrix& z1, const Matrix& z2);

/// sum_i (C_ii - 1)^2 + beta * sum_{i != j} C_ij^2 on the centered
/// cross-covariance.  Covariance form with no per-column std
/// normalization, so zero-variance columns are fine.
double barlow_twins_loss(const Matrix& z1, const Matrix& z2, double beta);

/// mu-weighted invariance and hinge-variance terms plus the off-diagonal
/// covariance term, both batch sides entering symmetrically.
double vicreg_loss(const Matrix& z1, const Matrix& z2, double mu);

/// Expand ||Z Z^T - W||_F^2 for [n x d] row embeddings Z against a kernel
/// matrix into the parts documented on SpectralContrastiveParts.
SpectralContrastiveParts spectral_contrastive_decomposition(
    const Matrix& z, const KernelMatrix& w_bar);

}  // namespace ssllab
