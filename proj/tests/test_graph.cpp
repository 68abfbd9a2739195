#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "ssllab/errors.hpp"
#include "ssllab/graph.hpp"
#include "ssllab/io.hpp"
#include "ssllab/rng.hpp"
#include "ssllab/types.hpp"

using namespace ssllab;

namespace {

// Independent numeric oracle: eigenvalues of a symmetric matrix built by
// hand, sorted descending.
Vector eig_descending(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  return es.eigenvalues().reverse();
}

// The 4x4 case-rule matrix, assembled here rather than via the library so
// the two constructions check each other.
Matrix case_rule_matrix(double r, double m, double n, double d) {
  Matrix s(4, 4);
  s << r, m, n, d,  //
      m, r, d, n,   //
      n, d, r, m,   //
      d, n, m, r;
  return s;
}

// Brute-force similarity kernel: explicit sums over images, no matrix
// algebra shared with adjacency().
Matrix adjacency_oracle(const AugmentationGraph& g) {
  const int nv = g.n_views();
  std::vector<double> p(nv, 0.0);
  for (int x = 0; x < nv; ++x) {
    for (int i = 0; i < g.n_images(); ++i) {
      p[x] += g.image_prior(i) * g.cond(i, x);
    }
  }
  Matrix w(nv, nv);
  for (int x = 0; x < nv; ++x) {
    for (int z = 0; z < nv; ++z) {
      double joint = 0.0;
      for (int i = 0; i < g.n_images(); ++i) {
        joint += g.image_prior(i) * g.cond(i, x) * g.cond(i, z);
      }
      w(x, z) = joint / (p[x] * p[z]);
    }
  }
  return w;
}

std::vector<std::array<double, 4>> random_toy_params(int count,
                                                     std::uint64_t seed) {
  std::vector<std::array<double, 4>> out;
  CounterRng rng(stream_key(seed, 0x746f79ull));
  for (int k = 0; k < count; ++k) {
    std::array<double, 4> p{};
    double sum = 0;
    for (double& v : p) {
      v = rng.uniform();
      sum += v;
    }
    for (double& v : p) v /= sum;
    out.push_back(p);
  }
  return out;
}

}  // namespace

TEST_CASE("toy graph structure") {
  const AugmentationGraph g = build_toy_graph(0.4, 0.3, 0.2, 0.1);
  CHECK(g.n_images() == 4);
  CHECK(g.n_views() == 4);
  CHECK(g.labels == std::vector<int>{1, 1, 2, 2});
  CHECK(g.groups == std::vector<int>{1, 2, 1, 2});
  for (int i = 0; i < 4; ++i) {
    CHECK(g.cond.row(i).sum() == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK((g.cond - case_rule_matrix(0.4, 0.3, 0.2, 0.1)).norm() == 0.0);
}

TEST_CASE("toy spectrum matches the closed form") {
  // closed-form eigenvalues against a direct numeric eigendecomposition of
  // the independently assembled case-rule matrix
  for (const auto& [r, m, n, d] : random_toy_params(10, 11)) {
    const Vector numeric = eig_descending(case_rule_matrix(r, m, n, d));
    std::array<double, 4> closed = toy_eigenvalues(r, m, n, d);
    std::sort(closed.begin(), closed.end(), std::greater<>());
    for (int j = 0; j < 4; ++j) {
      CHECK(std::abs(numeric(j) - closed[j]) < 1e-9);
    }
    const KernelMatrix k = toy_adjacency(r, m, n, d);
    CHECK((k.w - case_rule_matrix(r, m, n, d)).norm() == 0.0);
  }
}

TEST_CASE("toy spectrum special cases") {
  // no view overlap: identity kernel, all eigenvalues 1
  const Vector e1 = eig_descending(toy_adjacency(1, 0, 0, 0).w);
  for (int j = 0; j < 4; ++j) CHECK(e1(j) == doctest::Approx(1.0));

  // all-equal weights: rank one
  const Vector e2 = eig_descending(toy_adjacency(0.25, 0.25, 0.25, 0.25).w);
  CHECK(e2(0) == doctest::Approx(1.0));
  for (int j = 1; j < 4; ++j) CHECK(std::abs(e2(j)) < 1e-12);

  // the documented reference point
  const Vector e3 = eig_descending(toy_adjacency(0.4, 0.3, 0.2, 0.1).w);
  const double want[] = {1.0, 0.4, 0.2, 0.0};
  for (int j = 0; j < 4; ++j) CHECK(std::abs(e3(j) - want[j]) < 1e-9);
}

TEST_CASE("toy eigenvectors are the sign patterns") {
  const Matrix s = case_rule_matrix(0.4, 0.3, 0.2, 0.1);
  const double pat[4][4] = {{1, 1, 1, 1},  //
                            {1, 1, -1, -1},
                            {1, -1, 1, -1},
                            {1, -1, -1, 1}};
  const auto lam = toy_eigenvalues(0.4, 0.3, 0.2, 0.1);
  for (int j = 0; j < 4; ++j) {
    Vector v(4);
    for (int i = 0; i < 4; ++i) v(i) = 0.5 * pat[j][i];
    CHECK((s * v - lam[j] * v).norm() < 1e-12);
  }
}

TEST_CASE("toy graph input validation") {
  CHECK_THROWS_AS(build_toy_graph(-0.1, 0.5, 0.4, 0.2), validation_error);
  CHECK_THROWS_AS(build_toy_graph(0.4, 0.3, 0.2, 0.2), validation_error);
}

TEST_CASE("block graph reduces to the toy graph") {
  const AugmentationGraph block =
      build_block_graph(2, 2, 1, 0.4, 0.3, 0.2, 0.1, 99);
  const AugmentationGraph toy = build_toy_graph(0.4, 0.3, 0.2, 0.1);
  // block rows go through an explicit normalization pass, so equality is
  // up to rounding rather than bitwise
  CHECK((block.cond - toy.cond).norm() < 1e-14);
  CHECK((block.image_prior - toy.image_prior).norm() < 1e-14);
  CHECK(block.labels == toy.labels);
  CHECK(block.groups == toy.groups);
}

TEST_CASE("block graph shape and symmetry") {
  const AugmentationGraph g =
      build_block_graph(3, 2, 4, 0.5, 0.25, 0.15, 0.1, 5);
  CHECK(g.n_views() == 24);
  CHECK(g.n_images() == 6);
  for (int i = 0; i < g.n_images(); ++i) {
    CHECK(g.cond.row(i).sum() == doctest::Approx(1.0).epsilon(1e-13));
  }
  // derived kernel symmetric by direct computation
  const Matrix w = adjacency_oracle(g);
  CHECK((w - w.transpose()).cwiseAbs().maxCoeff() < 1e-12);

  // determinism with jitter on
  const AugmentationGraph a =
      build_block_graph(3, 2, 4, 0.5, 0.25, 0.15, 0.1, 5, 0.05);
  const AugmentationGraph b =
      build_block_graph(3, 2, 4, 0.5, 0.25, 0.15, 0.1, 5, 0.05);
  CHECK((a.cond - b.cond).norm() == 0.0);
  const AugmentationGraph c =
      build_block_graph(3, 2, 4, 0.5, 0.25, 0.15, 0.1, 6, 0.05);
  CHECK((a.cond - c.cond).norm() > 0.0);
}

TEST_CASE("block graph validation") {
  CHECK_THROWS_AS(build_block_graph(0, 2, 1, 0.4, 0.3, 0.2, 0.1, 1),
                  validation_error);
  CHECK_THROWS_AS(build_block_graph(2, 2, 1, -0.4, 0.3, 0.2, 0.1, 1),
                  validation_error);
  CHECK_THROWS_AS(build_block_graph(2, 2, 1, 0, 0, 0, 0, 1), validation_error);
  CHECK_THROWS_AS(build_block_graph(2, 2, 1, 0.4, 0.3, 0.2, 0.1, 1, 1.5),
                  validation_error);
}

TEST_CASE("marginals and joint") {
  const AugmentationGraph g = random_graph(6, 9, 42);
  const Vector p = vertex_marginals(g);
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-13));
  const Matrix j = joint_matrix(g);
  CHECK((j - j.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  // row sums of the joint are the marginals
  CHECK((j.rowwise().sum() - p).cwiseAbs().maxCoeff() < 1e-14);
  // PSD (Gram form)
  CHECK(eig_descending(j).minCoeff() > -1e-12);
}

TEST_CASE("adjacency matches the brute-force sum") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const AugmentationGraph g = random_graph(5, 8, seed);
    const KernelMatrix k = adjacency(g);
    CHECK((k.w - adjacency_oracle(g)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((k.marginal - vertex_marginals(g)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(eig_descending(k.w).minCoeff() > -1e-9);
  }
  // toy graph too (block-structured result)
  const AugmentationGraph toy = build_toy_graph(0.4, 0.3, 0.2, 0.1);
  const KernelMatrix k = adjacency(toy);
  CHECK((k.w - adjacency_oracle(toy)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("single uniform image gives a constant kernel") {
  AugmentationGraph g;
  g.cond = Matrix::Constant(1, 5, 0.2);
  g.image_prior = Vector::Ones(1);
  g.labels = {1, 1, 1, 2, 2};
  g.groups = {1, 1, 1, 1, 1};
  const KernelMatrix k = adjacency(g);
  CHECK((k.w.array() - k.w(0, 0)).abs().maxCoeff() < 1e-12);
}

TEST_CASE("adjacency is permutation-equivariant") {
  const AugmentationGraph g = random_graph(4, 7, 17);
  std::vector<int> perm(g.n_views());
  for (int x = 0; x < g.n_views(); ++x) perm[x] = (x + 3) % g.n_views();
  AugmentationGraph h = g;
  for (int x = 0; x < g.n_views(); ++x) {
    h.cond.col(perm[x]) = g.cond.col(x);
    h.labels[perm[x]] = g.labels[x];
    h.groups[perm[x]] = g.groups[x];
  }
  const Matrix wg = adjacency(g).w;
  const Matrix wh = adjacency(h).w;
  for (int x = 0; x < g.n_views(); ++x) {
    for (int z = 0; z < g.n_views(); ++z) {
      CHECK(wh(perm[x], perm[z]) == doctest::Approx(wg(x, z)).epsilon(1e-13));
    }
  }
}

TEST_CASE("unreachable vertices are reported with indices") {
  AugmentationGraph g;
  g.cond.resize(2, 4);
  g.cond << 0.5, 0.5, 0.0, 0.0,  //
      0.5, 0.5, 0.0, 0.0;
  g.image_prior = Vector::Constant(2, 0.5);
  g.labels = {1, 1, 2, 2};
  g.groups = {1, 1, 1, 1};
  try {
    adjacency(g);
    FAIL("expected unreachable_vertex_error");
  } catch (const unreachable_vertex_error& e) {
    CHECK(e.indices == std::vector<int>{2, 3});
  }
}

TEST_CASE("graph validation rejects malformed inputs") {
  AugmentationGraph g = build_toy_graph(0.4, 0.3, 0.2, 0.1);
  AugmentationGraph bad = g;
  bad.cond(0, 0) = -0.1;
  CHECK_THROWS_AS(bad.validate(), validation_error);
  bad = g;
  bad.cond(0, 0) += 0.5;
  CHECK_THROWS_AS(bad.validate(), validation_error);
  bad = g;
  bad.labels.pop_back();
  CHECK_THROWS_AS(bad.validate(), validation_error);
  bad = g;
  bad.image_prior(0) = 0.9;
  CHECK_THROWS_AS(bad.validate(), validation_error);
}

TEST_CASE("normalization") {
  // the case-rule matrix has unit row sums: already normalized
  const KernelMatrix toy = toy_adjacency(0.4, 0.3, 0.2, 0.1);
  const KernelMatrix n1 = normalize(toy);
  CHECK((n1.w - toy.w).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(n1.normalized);

  // spectral radius at most 1 on random kernels
  for (std::uint64_t seed : {4ull, 5ull}) {
    const KernelMatrix k = adjacency(random_graph(6, 10, seed));
    const Vector e = eig_descending(normalize(k).w);
    CHECK(e(0) <= 1.0 + 1e-9);
    CHECK(e(0) == doctest::Approx(1.0).epsilon(1e-9));
  }

  // doubly stochastic input is a fixed point
  KernelMatrix ds;
  ds.w.resize(3, 3);
  ds.w << 0.5, 0.25, 0.25,  //
      0.25, 0.5, 0.25,      //
      0.25, 0.25, 0.5;
  ds.marginal = Vector::Constant(3, 1.0 / 3);
  CHECK((normalize(ds).w - ds.w).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("view sampling") {
  // one-hot rows always return the hot index
  AugmentationGraph g;
  g.cond = Matrix::Identity(3, 3);
  g.image_prior = Vector::Constant(3, 1.0 / 3);
  g.labels = {1, 2, 1};
  g.groups = {1, 1, 1};
  const Eigen::MatrixXi t = sample_views(g, 6, 7);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 6; ++j) CHECK(t(i, j) == i);
  }

  CHECK_THROWS_AS(sample_views(g, 0, 7), validation_error);

  const AugmentationGraph r = random_graph(3, 6, 21);
  const Eigen::MatrixXi a = sample_views(r, 50, 9);
  const Eigen::MatrixXi b = sample_views(r, 50, 9);
  CHECK(a == b);
  CHECK(sample_views(r, 50, 10) != a);
}

TEST_CASE("sampled frequencies approach the conditionals") {
  const AugmentationGraph g = random_graph(4, 6, 33);
  auto l2_err = [&](int m) {
    const Eigen::MatrixXi t = sample_views(g, m, 3);
    Matrix freq = Matrix::Zero(g.n_images(), g.n_views());
    for (int i = 0; i < g.n_images(); ++i) {
      for (int j = 0; j < m; ++j) freq(i, t(i, j)) += 1.0 / m;
    }
    return (freq - g.cond).norm();
  };
  const double e16 = l2_err(16);
  const double e256 = l2_err(256);
  const double e4096 = l2_err(4096);
  CHECK(e256 < e16);
  CHECK(e4096 < e256);
}

TEST_CASE("empirical kernel basics") {
  const AugmentationGraph g = build_toy_graph(0.4, 0.3, 0.2, 0.1);
  CHECK_THROWS_AS(empirical_adjacency(g, 1, 3), validation_error);
  CHECK_THROWS_AS(empirical_joint_matrix(g, 1, 3), validation_error);

  const KernelMatrix a = empirical_adjacency(g, 8, 5);
  const KernelMatrix b = empirical_adjacency(g, 8, 5);
  CHECK((a.w - b.w).norm() == 0.0);

  // empirical joint is symmetric with total mass 1
  const Matrix j = empirical_joint_matrix(g, 8, 5);
  CHECK((j - j.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(j.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("one-hot conditionals make the empirical kernel exact") {
  AugmentationGraph g;
  g.cond = Matrix::Identity(4, 4);
  g.image_prior.resize(4);
  g.image_prior << 0.1, 0.2, 0.3, 0.4;
  g.labels = {1, 1, 2, 2};
  g.groups = {1, 2, 1, 2};
  const KernelMatrix pop = adjacency(g);
  for (int m : {2, 3, 8}) {
    const KernelMatrix emp = empirical_adjacency(g, m, 77);
    CHECK((emp.w - pop.w).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("undersampled kernels are noisier entrywise") {
  const AugmentationGraph g = build_toy_graph(0.4, 0.3, 0.2, 0.1);
  const int n_seeds = 200;
  auto entry_variance = [&](int m) {
    Matrix mean = Matrix::Zero(4, 4);
    Matrix mean_sq = Matrix::Zero(4, 4);
    for (int s = 0; s < n_seeds; ++s) {
      const Matrix w = empirical_adjacency(g, m, stream_key(1234, s)).w;
      mean += w;
      mean_sq += w.cwiseProduct(w);
    }
    mean /= n_seeds;
    mean_sq /= n_seeds;
    return Matrix(mean_sq - mean.cwiseProduct(mean));
  };
  const Matrix v2 = entry_variance(2);
  const Matrix v8 = entry_variance(8);
  for (int x = 0; x < 4; ++x) {
    for (int z = 0; z < 4; ++z) {
      CHECK(v2(x, z) > v8(x, z));
    }
  }
}

TEST_CASE("empirical kernel error shrinks with more views") {
  const AugmentationGraph g = build_toy_graph(0.4, 0.3, 0.2, 0.1);
  const Matrix pop = adjacency(g).w;
  auto mean_err = [&](int m) {
    double acc = 0;
    for (int s = 0; s < 40; ++s) {
      acc += (empirical_adjacency(g, m, stream_key(55, s)).w - pop).norm();
    }
    return acc / 40;
  };
  CHECK(mean_err(64) < mean_err(8));
  CHECK(mean_err(8) < mean_err(2));
}

TEST_CASE("structural estimate averages to the case-rule matrix") {
  const AugmentationGraph g = build_toy_graph(0.4, 0.3, 0.2, 0.1);
  Matrix mean = Matrix::Zero(4, 4);
  const int n_seeds = 400;
  for (int s = 0; s < n_seeds; ++s) {
    mean += empirical_structural_matrix(g, 16, stream_key(88, s));
  }
  mean /= n_seeds;
  CHECK((mean - g.cond).cwiseAbs().maxCoeff() < 0.02);

  AugmentationGraph rect = random_graph(3, 5, 1);
  CHECK_THROWS_AS(empirical_structural_matrix(rect, 4, 1), validation_error);
}

TEST_CASE("graph serialization round-trips exactly") {
  const AugmentationGraph g =
      build_block_graph(2, 2, 3, 0.5, 0.25, 0.15, 0.1, 3, 0.05);
  const std::string path =
      (std::filesystem::temp_directory_path() / "ssllab_graph.txt").string();
  write_graph(g, path);
  const AugmentationGraph h = read_graph(path);
  CHECK((g.cond - h.cond).norm() == 0.0);
  CHECK((g.image_prior - h.image_prior).norm() == 0.0);
  CHECK(g.labels == h.labels);
  CHECK(g.groups == h.groups);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(read_graph("/nonexistent/ssllab.graph"), validation_error);
}
