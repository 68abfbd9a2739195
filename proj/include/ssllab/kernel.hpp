#pragma once

#include <cstdint>

#include "ssllab/graph.hpp"
#include "ssllab/types.hpp"

namespace ssllab {

/// Linear operator between measure-weighted function spaces, stored in the
/// vertex basis.  Adjoints are taken in the stated geometry:
/// <Tf, g>_out = <f, adjoint(T) g>_in.
struct KernelOperator {
  Matrix matrix;       // [n_out x n_in]
  Vector in_measure;   // [n_in]  positive weights
  Vector out_measure;  // [n_out] positive weights

  int n_in() const { return static_cast<int>(matrix.cols()); }
  int n_out() const { return static_cast<int>(matrix.rows()); }
  bool square() const { return n_in() == n_out(); }

  /// diag(1/in) M^T diag(out); measures swap.
  KernelOperator adjoint() const;

  /// Composition this ∘ other (apply other first).
  KernelOperator compose(const KernelOperator& other) const;
};

/// Eigen-decomposition of a self-adjoint operator, eigenvalues descending.
/// Eigenvector columns are orthonormal under `measure`, and
/// sum_j lambda_j phi_j phi_j^T reconstructs the kernel matrix (the operator
/// with the measure factor divided out).
struct SpectralDecomposition {
  Vector eigenvalues;
  Matrix eigenvectors;  // columns
  Vector measure;

  int n() const { return static_cast<int>(eigenvalues.size()); }
};

/// Averaging operator of the graph: maps image functions to view functions,
/// (T f)(x) = sum_i p(i|x) f(i) with the posterior from Bayes' rule.
/// Its adjoint averages view functions over each image's conditional.
KernelOperator forward_operator(const AugmentationGraph& g);

/// Backward-kernel operator on image functions: kernel
/// k(i,j) = sum_x cond[i][x] cond[j][x] / p(x) composed with the prior
/// measure.  Equal to adjoint(T) * T for the averaging operator T.
KernelOperator backward_kernel(const AugmentationGraph& g);

/// Operator view of a symmetric kernel matrix: w * diag(marginal), acting on
/// functions weighted by the marginal measure.
KernelOperator kernel_operator(const KernelMatrix& k);

/// (T - I)^T (T - I) in the measure geometry; T must be square.
/// For self-adjoint PSD T with eigenvalue sqrt(lambda), the result shares
/// eigenvectors with adjoint(T)*T and has eigenvalue (sqrt(lambda) - 1)^2.
KernelOperator invariance_form(const KernelOperator& t_m);

/// Decompose a self-adjoint operator (in == out measure).  Asymmetry beyond
/// 1e-10 relative is an error; below that the matrix is symmetrized.
/// Sign convention: each eigenvector's largest-magnitude component is
/// positive (first such index on ties).
SpectralDecomposition spectral_decompose(const KernelOperator& k);

/// Plain symmetric eigendecomposition of the kernel matrix itself
/// (counting measure); used where the matrix spectrum is the object of
/// interest, e.g. the structural toy adjacency.
SpectralDecomposition spectral_decompose(const KernelMatrix& k);

/// Top-d spectral features G_j = sqrt(lambda_j) phi_j as rows.
/// G^T G is the best rank-d reconstruction of the kernel in the
/// measure-weighted Frobenius norm.  Small negative eigenvalues (>= -1e-9)
/// are clamped to zero; anything lower is an error.
FeatureMap mercer_features(const SpectralDecomposition& s, int d);

/// Mean squared cosine of the principal angles between the row spans of f
/// and g: 1 iff equal spans (when ranks match), 0 for orthogonal spans.
double subspace_alignment(const FeatureMap& f, const FeatureMap& g);

enum class OrthMode { penalty, projection };

struct MinimizeOptions {
  int max_iters = 100000;
  double tol = 1e-14;      // relative objective change at which to stop
  double beta = 4.0;       // penalty weight (penalty mode)
  std::uint64_t seed = 1;  // init
};

/// Minimize the invariance objective sum_i ||T f_i - f_i||^2_rho over d
/// features, either exactly orthonormal in the rho inner product
/// (projection mode: Rayleigh-Ritz subspace iteration) or with a quadratic
/// orthonormality penalty (penalty mode: gradient descent).  Returns the
/// feature rows; with a spectral gap below rank d, the projection-mode
/// result spans the top-d eigenspace of adjoint(T)*T.
FeatureMap minimize_invariance_loss(const KernelOperator& t_m, int d,
                                    OrthMode mode,
                                    const MinimizeOptions& opts = {});

}  // namespace ssllab
