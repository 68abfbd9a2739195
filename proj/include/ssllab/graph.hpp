#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ssllab/types.hpp"

namespace ssllab {

/// Finite augmentation graph: a set of source images, each with a
/// conditional distribution over a shared finite set of augmented views,
/// plus a prior over images and per-view class/group annotations.
struct AugmentationGraph {
  Matrix cond;              // [n_images x n_views], rows sum to 1
  Vector image_prior;       // [n_images], sums to 1
  std::vector<int> labels;  // [n_views] class ids
  std::vector<int> groups;  // [n_views] pixel-similarity group ids

  int n_images() const { return static_cast<int>(cond.rows()); }
  int n_views() const { return static_cast<int>(cond.cols()); }

  /// Throws validation_error on shape mismatch, negative entries, or rows /
  /// prior not summing to 1 (tolerance 1e-12 per element group).
  void validate() const;
};

/// Symmetric vertex-pair kernel over views together with the vertex
/// marginals it was computed under.
struct KernelMatrix {
  Matrix w;         // [n x n] symmetric
  Vector marginal;  // [n] vertex marginals p(x)
  bool normalized = false;

  int n() const { return static_cast<int>(w.rows()); }
};

/// 4-vertex two-class/two-group graph.  Vertex v's conditional weight on
/// vertex u is rho (u==v), mu (same class, other group), nu (other class,
/// same group) or delta (other class, other group); labels (1,1,2,2),
/// groups (1,2,1,2).  Parameters must be nonnegative and sum to 1.
AugmentationGraph build_toy_graph(double rho, double mu, double nu,
                                  double delta);

/// Closed-form eigenvalues of the structural toy matrix, in the order
/// matching eigenvectors [1,1,1,1], [1,1,-1,-1], [1,-1,1,-1], [1,-1,-1,1]:
/// (r+m+n+d, r+m-n-d, r-m+n-d, r-m-n+d).
std::array<double, 4> toy_eigenvalues(double rho, double mu, double nu,
                                      double delta);

/// The structural 4x4 toy kernel with rows (r,m,n,d),(m,r,d,n),(n,d,r,m),
/// (d,n,m,r): the normalized adjacency of the toy graph, whose spectrum is
/// given by toy_eigenvalues.  Marginal is uniform; rows sum to 1, so the
/// matrix is its own degree normalization.
KernelMatrix toy_adjacency(double rho, double mu, double nu, double delta);

/// Block generalization of the toy construction: n_classes x
/// groups_per_class images (one per class/group cell), views_per_image
/// views each.  Conditional mass from image i to the views of image j is
/// within_image / within_class / within_group / background by the same case
/// rule, split over j's views and row-normalized.  jitter > 0 applies
/// seeded multiplicative noise (1 + jitter*u, u ~ U[-1,1)) to each entry
/// before normalization so spectra lose their exact degeneracies; at
/// jitter == 0 the seed is unused and (2, 2, 1, ...) reproduces
/// build_toy_graph exactly.
AugmentationGraph build_block_graph(int n_classes, int groups_per_class,
                                    int views_per_image, double within_image,
                                    double within_class, double within_group,
                                    double background, std::uint64_t seed,
                                    double jitter = 0.0);

/// Dense random valid graph: cond rows drawn uniform and normalized, prior
/// likewise.  Labels/groups alternate so probes are well-posed.
AugmentationGraph random_graph(int n_images, int n_views, std::uint64_t seed);

/// Random self-paired graph (n views == n images) whose image-view joint
/// matrix is symmetric positive semi-definite, so the averaging operator is
/// self-adjoint with nonnegative spectrum.  Built from a normalized Gram
/// matrix B^T B of positive entries.
AugmentationGraph random_symmetric_graph(int n, std::uint64_t seed);

/// View marginals p(x) = sum_i prior_i cond[i][x].
Vector vertex_marginals(const AugmentationGraph& g);

/// Population view co-occurrence matrix J[x][z] = sum_i prior_i cond[i][x]
/// cond[i][z] = cond^T diag(prior) cond.  Symmetric PSD; also the exact
/// second moment E[x x'^T] of two one-hot views of a shared image, which is
/// what the training dynamics see.
Matrix joint_matrix(const AugmentationGraph& g);

/// Similarity kernel w[x][z] = sum_i prior_i cond[i][x] cond[i][z] /
/// (p(x) p(z)).  Throws unreachable_vertex_error when some p(x) == 0.
KernelMatrix adjacency(const AugmentationGraph& g);

/// Symmetric degree normalization D^-1/2 w D^-1/2 with D = diag(row sums).
/// Identity on matrices whose rows already sum to 1.  Throws on zero-degree
/// vertices or nonpositive marginals.
KernelMatrix normalize(const KernelMatrix& k);

/// m view samples per image, row i drawn from cond[i][.].  Stream is keyed
/// by (seed, image index), so tables for different images are independent
/// and the result is reproducible regardless of evaluation order.
Eigen::MatrixXi sample_views(const AugmentationGraph& g, int m,
                             std::uint64_t seed);

/// Empirical joint co-occurrence from m sampled views per image: distinct
/// ordered pairs within each image's sample row, weighted by the prior and
/// averaged over the m(m-1) pairs.  Unbiased for joint_matrix; m >= 2.
Matrix empirical_joint_matrix(const AugmentationGraph& g, int m,
                              std::uint64_t seed);

/// Empirical adjacency: empirical joint divided by empirical marginals
/// (entries hitting an unvisited vertex are left at 0).  Converges to
/// adjacency(g) entrywise as m grows.
KernelMatrix empirical_adjacency(const AugmentationGraph& g, int m,
                                 std::uint64_t seed);

/// Symmetrized empirical conditional-frequency matrix of a self-paired
/// graph (n views == n images): (chat + chat^T)/2 with chat[i][x] =
/// count_i(x)/m.  This is the sampled analogue of the structural toy
/// matrix; its block-position means are the ansatz-experiment estimators.
Matrix empirical_structural_matrix(const AugmentationGraph& g, int m,
                                   std::uint64_t seed);

}  // namespace ssllab
