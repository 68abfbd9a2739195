#include "ssllab/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ssllab/errors.hpp"
#include "ssllab/rng.hpp"

namespace ssllab {

namespace {

constexpr double kSumTol = 1e-12;

void check_sum_one(double sum, const std::string& what) {
  if (std::abs(sum - 1.0) > 1e-9) {
    throw validation_error(what + " must sum to 1, got " +
                           std::to_string(sum));
  }
}

}  // namespace

void AugmentationGraph::validate() const {
  if (cond.rows() == 0 || cond.cols() == 0) {
    throw validation_error("graph: empty conditional table");
  }
  if (image_prior.size() != cond.rows()) {
    throw validation_error("graph: prior length does not match image count");
  }
  if (static_cast<int>(labels.size()) != n_views() ||
      static_cast<int>(groups.size()) != n_views()) {
    throw validation_error("graph: labels/groups length must equal n_views");
  }
  if ((cond.array() < 0).any()) {
    throw validation_error("graph: negative conditional probability");
  }
  if ((image_prior.array() < 0).any()) {
    throw validation_error("graph: negative prior probability");
  }
  for (int i = 0; i < n_images(); ++i) {
    if (std::abs(cond.row(i).sum() - 1.0) > kSumTol * cond.cols()) {
      throw validation_error("graph: cond row " + std::to_string(i) +
                             " sums to " + std::to_string(cond.row(i).sum()));
    }
  }
  if (std::abs(image_prior.sum() - 1.0) > kSumTol * image_prior.size()) {
    throw validation_error("graph: prior sums to " +
                           std::to_string(image_prior.sum()));
  }
}

AugmentationGraph build_toy_graph(double rho, double mu, double nu,
                                  double delta) {
  for (double v : {rho, mu, nu, delta}) {
    if (v < 0) throw validation_error("toy graph: negative case weight");
  }
  check_sum_one(rho + mu + nu + delta, "toy graph case weights");

  AugmentationGraph g;
  g.cond.resize(4, 4);
  g.cond << rho, mu, nu, delta,  //
      mu, rho, delta, nu,        //
      nu, delta, rho, mu,        //
      delta, nu, mu, rho;
  g.image_prior = Vector::Constant(4, 0.25);
  g.labels = {1, 1, 2, 2};
  g.groups = {1, 2, 1, 2};
  g.validate();
  return g;
}

std::array<double, 4> toy_eigenvalues(double rho, double mu, double nu,
                                      double delta) {
  return {rho + mu + nu + delta, rho + mu - nu - delta,
          rho - mu + nu - delta, rho - mu - nu + delta};
}

KernelMatrix toy_adjacency(double rho, double mu, double nu, double delta) {
  AugmentationGraph g = build_toy_graph(rho, mu, nu, delta);
  KernelMatrix k;
  k.w = g.cond;  // structural matrix: rows already sum to 1
  k.marginal = Vector::Constant(4, 0.25);
  k.normalized = true;
  return k;
}

AugmentationGraph build_block_graph(int n_classes, int groups_per_class,
                                    int views_per_image, double within_image,
                                    double within_class, double within_group,
                                    double background, std::uint64_t seed,
                                    double jitter) {
  if (n_classes < 1 || groups_per_class < 1 || views_per_image < 1) {
    throw validation_error("block graph: counts must be positive");
  }
  for (double v : {within_image, within_class, within_group, background}) {
    if (v < 0) throw validation_error("block graph: negative case weight");
  }
  if (within_image + within_class + within_group + background <= 0) {
    throw validation_error("block graph: case weights all zero");
  }
  if (jitter < 0 || jitter >= 1) {
    throw validation_error("block graph: jitter must be in [0, 1)");
  }

  const int n_images = n_classes * groups_per_class;
  const int n_views = n_images * views_per_image;

  AugmentationGraph g;
  g.cond.resize(n_images, n_views);
  g.labels.resize(n_views);
  g.groups.resize(n_views);

  auto cls = [&](int image) { return image / groups_per_class; };
  auto grp = [&](int image) { return image % groups_per_class; };

  for (int j = 0; j < n_images; ++j) {
    for (int v = 0; v < views_per_image; ++v) {
      const int x = j * views_per_image + v;
      g.labels[x] = cls(j) + 1;
      g.groups[x] = grp(j) + 1;
    }
  }

  for (int i = 0; i < n_images; ++i) {
    CounterRng rng(stream_key(seed, static_cast<std::uint64_t>(i)));
    for (int j = 0; j < n_images; ++j) {
      double base;
      if (j == i) {
        base = within_image;
      } else if (cls(j) == cls(i)) {
        base = within_class;
      } else if (grp(j) == grp(i)) {
        base = within_group;
      } else {
        base = background;
      }
      base /= views_per_image;
      for (int v = 0; v < views_per_image; ++v) {
        double w = base;
        if (jitter > 0) {
          w *= 1.0 + jitter * (2.0 * rng.uniform() - 1.0);
        }
        g.cond(i, j * views_per_image + v) = w;
      }
    }
    g.cond.row(i) /= g.cond.row(i).sum();
  }

  g.image_prior = Vector::Constant(n_images, 1.0 / n_images);
  g.validate();
  return g;
}

AugmentationGraph random_graph(int n_images, int n_views,
                               std::uint64_t seed) {
  if (n_images < 1 || n_views < 1) {
    throw validation_error("random graph: counts must be positive");
  }
  AugmentationGraph g;
  g.cond.resize(n_images, n_views);
  for (int i = 0; i < n_images; ++i) {
    CounterRng rng(stream_key(seed, static_cast<std::uint64_t>(i)));
    for (int x = 0; x < n_views; ++x) {
      g.cond(i, x) = 0.05 + rng.uniform();  // bounded away from 0
    }
    g.cond.row(i) /= g.cond.row(i).sum();
  }
  CounterRng prior_rng(stream_key(seed, 0x707269ull));
  g.image_prior.resize(n_images);
  for (int i = 0; i < n_images; ++i) {
    g.image_prior(i) = 0.2 + prior_rng.uniform();
  }
  g.image_prior /= g.image_prior.sum();
  g.labels.resize(n_views);
  g.groups.resize(n_views);
  for (int x = 0; x < n_views; ++x) {
    g.labels[x] = 1 + (x % 2);
    g.groups[x] = 1 + ((x / 2) % 2);
  }
  g.validate();
  return g;
}

AugmentationGraph random_symmetric_graph(int n, std::uint64_t seed) {
  if (n < 2) {
    throw validation_error("symmetric graph: need at least 2 vertices");
  }
  // J = B^T B with positive B is symmetric PSD with positive entries; its
  // rows define prior (row sums) and cond (normalized rows), making the
  // image-view joint symmetric, hence the averaging operator self-adjoint
  // with nonnegative spectrum.
  CounterRng rng(stream_key(seed, 0x73796dull));
  Matrix b(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      b(i, j) = 0.1 + rng.uniform();
    }
  }
  Matrix joint = b.transpose() * b;
  joint /= joint.sum();

  AugmentationGraph g;
  g.image_prior = joint.rowwise().sum();
  g.cond = joint.array().colwise() / g.image_prior.array();
  g.labels.resize(n);
  g.groups.resize(n);
  for (int x = 0; x < n; ++x) {
    g.labels[x] = 1 + (x % 2);
    g.groups[x] = 1 + ((x / 2) % 2);
  }
  g.validate();
  return g;
}

Vector vertex_marginals(const AugmentationGraph& g) {
  return g.cond.transpose() * g.image_prior;
}

Matrix joint_matrix(const AugmentationGraph& g) {
  return g.cond.transpose() * g.image_prior.asDiagonal() * g.cond;
}

KernelMatrix adjacency(const AugmentationGraph& g) {
  g.validate();
  const Vector p = vertex_marginals(g);
  std::vector<int> unreachable;
  for (int x = 0; x < g.n_views(); ++x) {
    if (p(x) <= 0) unreachable.push_back(x);
  }
  if (!unreachable.empty()) {
    std::string msg = "adjacency: unreachable vertices (zero marginal):";
    for (int x : unreachable) msg += " " + std::to_string(x);
    throw unreachable_vertex_error(msg, unreachable);
  }
  KernelMatrix k;
  const Vector inv_p = p.cwiseInverse();
  k.w = inv_p.asDiagonal() * joint_matrix(g) * inv_p.asDiagonal();
  k.w = 0.5 * (k.w + k.w.transpose()).eval();  // exact symmetry
  k.marginal = p;
  return k;
}

KernelMatrix normalize(const KernelMatrix& k) {
  if ((k.marginal.array() <= 0).any()) {
    throw validation_error("normalize: nonpositive marginal");
  }
  const Vector degree = k.w.rowwise().sum();
  for (int x = 0; x < k.n(); ++x) {
    if (degree(x) <= 0) {
      throw validation_error("normalize: zero-degree vertex " +
                             std::to_string(x));
    }
  }
  KernelMatrix out;
  const Vector s = degree.cwiseSqrt().cwiseInverse();
  out.w = s.asDiagonal() * k.w * s.asDiagonal();
  out.w = 0.5 * (out.w + out.w.transpose()).eval();
  out.marginal = k.marginal;
  out.normalized = true;
  return out;
}

Eigen::MatrixXi sample_views(const AugmentationGraph& g, int m,
                             std::uint64_t seed) {
  if (m < 1) throw validation_error("sample_views: m must be >= 1");
  const int n_img = g.n_images();
  const int n_v = g.n_views();
  Eigen::MatrixXi table(n_img, m);
  for (int i = 0; i < n_img; ++i) {
    // cumulative distribution of row i; inverse-cdf sampling
    std::vector<double> cum(n_v);
    double acc = 0;
    for (int x = 0; x < n_v; ++x) {
      acc += g.cond(i, x);
      cum[x] = acc;
    }
    CounterRng rng(stream_key(seed, static_cast<std::uint64_t>(i)));
    for (int j = 0; j < m; ++j) {
      const double u = rng.uniform() * acc;
      auto it = std::upper_bound(cum.begin(), cum.end(), u);
      int x = static_cast<int>(it - cum.begin());
      if (x >= n_v) x = n_v - 1;
      table(i, j) = x;
    }
  }
  return table;
}

namespace {

Matrix joint_from_table(const AugmentationGraph& g, const Eigen::MatrixXi& t) {
  const int m = static_cast<int>(t.cols());
  Matrix j = Matrix::Zero(g.n_views(), g.n_views());
  const double pair_norm = 1.0 / (static_cast<double>(m) * (m - 1));
  for (int i = 0; i < g.n_images(); ++i) {
    const double wi = g.image_prior(i) * pair_norm;
    for (int a = 0; a < m; ++a) {
      for (int b = 0; b < m; ++b) {
        if (a == b) continue;
        j(t(i, a), t(i, b)) += wi;
      }
    }
  }
  return j;
}

}  // namespace

Matrix empirical_joint_matrix(const AugmentationGraph& g, int m,
                              std::uint64_t seed) {
  if (m < 2) {
    throw validation_error("empirical joint: need m >= 2 views per image");
  }
  return joint_from_table(g, sample_views(g, m, seed));
}

KernelMatrix empirical_adjacency(const AugmentationGraph& g, int m,
                                 std::uint64_t seed) {
  if (m < 2) {
    throw validation_error("empirical adjacency: need m >= 2 views per image");
  }
  const Eigen::MatrixXi table = sample_views(g, m, seed);
  const Matrix j = joint_from_table(g, table);
  Vector p_hat = Vector::Zero(g.n_views());
  for (int i = 0; i < g.n_images(); ++i) {
    for (int a = 0; a < m; ++a) {
      p_hat(table(i, a)) += g.image_prior(i) / m;
    }
  }
  KernelMatrix k;
  k.w = Matrix::Zero(g.n_views(), g.n_views());
  for (int x = 0; x < g.n_views(); ++x) {
    if (p_hat(x) <= 0) continue;  // unvisited vertex: row/col stay 0
    for (int z = 0; z < g.n_views(); ++z) {
      if (p_hat(z) <= 0) continue;
      k.w(x, z) = j(x, z) / (p_hat(x) * p_hat(z));
    }
  }
  k.marginal = p_hat;
  return k;
}

Matrix empirical_structural_matrix(const AugmentationGraph& g, int m,
                                   std::uint64_t seed) {
  if (g.n_views() != g.n_images()) {
    throw validation_error(
        "structural estimate: graph must be self-paired "
        "(n_views == n_images)");
  }
  if (m < 1) throw validation_error("structural estimate: m must be >= 1");
  const Eigen::MatrixXi table = sample_views(g, m, seed);
  Matrix chat = Matrix::Zero(g.n_images(), g.n_views());
  for (int i = 0; i < g.n_images(); ++i) {
    for (int a = 0; a < m; ++a) {
      chat(i, table(i, a)) += 1.0 / m;
    }
  }
  return 0.5 * (chat + chat.transpose());
}

}  // namespace ssllab
