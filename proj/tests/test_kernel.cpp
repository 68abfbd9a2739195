#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "ssllab/errors.hpp"
#include "ssllab/graph.hpp"
#include "ssllab/kernel.hpp"
#include "ssllab/rng.hpp"
#include "ssllab/types.hpp"

using namespace ssllab;

namespace {

// Backward kernel assembled directly from the graph tables: the similarity
// of two images is the marginal-weighted overlap of their view
// distributions, and the operator weights it by the prior.  Kept free of
// KernelOperator plumbing so it can referee backward_kernel and the
// adjoint-composition route.
Matrix backward_matrix_oracle(const AugmentationGraph& g) {
  const int ni = g.n_images();
  const int nv = g.n_views();
  Vector p = Vector::Zero(nv);
  for (int x = 0; x < nv; ++x) {
    for (int i = 0; i < ni; ++i) p(x) += g.image_prior(i) * g.cond(i, x);
  }
  Matrix b(ni, ni);
  for (int i = 0; i < ni; ++i) {
    for (int j = 0; j < ni; ++j) {
      double acc = 0;
      for (int x = 0; x < nv; ++x) {
        acc += g.cond(i, x) * g.cond(j, x) / p(x);
      }
      b(i, j) = acc * g.image_prior(j);
    }
  }
  return b;
}

Vector random_vector(int n, std::uint64_t key) {
  CounterRng rng(key);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

Matrix random_matrix(int rows, int cols, std::uint64_t key) {
  CounterRng rng(key);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

// Gram-Schmidt orthogonal matrix, independent of the QR used in the library.
Matrix random_orthogonal(int n, std::uint64_t key) {
  Matrix a = random_matrix(n, n, key);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < j; ++k) {
      a.col(j) -= a.col(k).dot(a.col(j)) * a.col(k);
    }
    a.col(j).normalize();
  }
  return a;
}

// Span overlap via explicit orthogonal projectors P = A^T (A A^T)^-1 A.
double alignment_oracle(const Matrix& f, const Matrix& g) {
  auto projector = [](const Matrix& a) {
    return Matrix(a.transpose() * (a * a.transpose()).inverse() * a);
  };
  const double overlap = (projector(f) * projector(g)).trace();
  return overlap / static_cast<double>(std::min(f.rows(), g.rows()));
}

FeatureMap map_of(const Matrix& w) { return FeatureMap{w}; }

}  // namespace

TEST_CASE("forward operator averages and preserves constants") {
  const AugmentationGraph g = random_graph(5, 8, 3);
  const KernelOperator t = forward_operator(g);
  CHECK(t.n_in() == 5);
  CHECK(t.n_out() == 8);
  const Vector c = Vector::Constant(5, 3.7);
  CHECK(((t.matrix * c).array() - 3.7).abs().maxCoeff() < 1e-12);

  // rows of T are Bayes posteriors over images, so they sum to 1
  CHECK((t.matrix.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("adjoint satisfies the weighted inner-product identity") {
  for (std::uint64_t seed : {1ull, 2ull, 9ull}) {
    const AugmentationGraph g = random_graph(6, 9, seed);
    const KernelOperator t = forward_operator(g);
    const KernelOperator a = t.adjoint();
    for (int k = 0; k < 5; ++k) {
      const Vector f = random_vector(t.n_in(), stream_key(seed, 10, k));
      const Vector h = random_vector(t.n_out(), stream_key(seed, 11, k));
      const double lhs = (t.matrix * f).cwiseProduct(h).dot(t.out_measure);
      const double rhs = f.cwiseProduct(a.matrix * h).dot(t.in_measure);
      CHECK(std::abs(lhs - rhs) < 1e-10 * (1 + std::abs(lhs)));
    }
  }
}

TEST_CASE("one-hot conditionals give an invertible selection") {
  AugmentationGraph g;
  g.cond = Matrix::Identity(4, 4);
  g.image_prior.resize(4);
  g.image_prior << 0.1, 0.2, 0.3, 0.4;
  g.labels = {1, 1, 2, 2};
  g.groups = {1, 2, 1, 2};
  const KernelOperator t = forward_operator(g);
  CHECK((t.matrix - Matrix::Identity(4, 4)).norm() < 1e-12);
}

TEST_CASE("backward kernel factorizes through the forward operator") {
  // three routes to the same operator: the library's backward kernel, the
  // adjoint composition, and a from-scratch dense assembly
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const int ni = 2 + static_cast<int>(seed % 7);
    const int nv = 3 + static_cast<int>((3 * seed) % 11);
    const AugmentationGraph g = random_graph(ni, nv, seed);
    const KernelOperator back = backward_kernel(g);
    const KernelOperator t = forward_operator(g);
    const Matrix composed = t.adjoint().compose(t).matrix;
    const Matrix oracle = backward_matrix_oracle(g);
    const double scale = back.matrix.norm();
    CHECK((back.matrix - composed).norm() < 1e-10 * scale);
    CHECK((back.matrix - oracle).norm() < 1e-10 * scale);
    ++checked;
  }
  CHECK(checked == 50);
}

TEST_CASE("backward spectrum lies in the unit interval") {
  for (std::uint64_t seed : {3ull, 7ull}) {
    const AugmentationGraph g = random_graph(6, 9, seed);
    const SpectralDecomposition s = spectral_decompose(backward_kernel(g));
    CHECK(s.eigenvalues(0) <= 1.0 + 1e-9);
    CHECK(s.eigenvalues(s.n() - 1) >= -1e-9);

    // same spectrum as the explicit composition
    const KernelOperator t = forward_operator(g);
    const SpectralDecomposition s2 = spectral_decompose(t.adjoint().compose(t));
    CHECK((s.eigenvalues - s2.eigenvalues).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("single-image graph has a rank-one backward kernel") {
  AugmentationGraph g;
  g.cond = Matrix::Constant(1, 5, 0.2);
  g.image_prior = Vector::Ones(1);
  g.labels = {1, 1, 1, 2, 2};
  g.groups = {1, 1, 1, 1, 1};
  const KernelOperator b = backward_kernel(g);
  CHECK(b.matrix.rows() == 1);
  CHECK(b.matrix(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("spectral decomposition of simple kernels") {
  KernelMatrix ident;
  ident.w = Matrix::Identity(4, 4);
  ident.marginal = Vector::Constant(4, 0.25);
  const SpectralDecomposition s = spectral_decompose(ident);
  for (int j = 0; j < 4; ++j) CHECK(s.eigenvalues(j) == doctest::Approx(1.0));
  // reconstruction, not individual vectors: any orthonormal basis is fine
  Matrix recon = Matrix::Zero(4, 4);
  for (int j = 0; j < 4; ++j) {
    recon += s.eigenvalues(j) * s.eigenvectors.col(j) *
             s.eigenvectors.col(j).transpose();
  }
  CHECK((recon - ident.w).norm() < 1e-8);

  KernelMatrix diag;
  diag.w = Vector(Vector::Zero(3)).asDiagonal();
  diag.w.diagonal() << 3, 2, 1;
  diag.marginal = Vector::Constant(3, 1.0 / 3);
  const SpectralDecomposition sd = spectral_decompose(diag);
  CHECK(sd.eigenvalues(0) == doctest::Approx(3.0));
  CHECK(sd.eigenvalues(1) == doctest::Approx(2.0));
  CHECK(sd.eigenvalues(2) == doctest::Approx(1.0));
  CHECK((sd.eigenvectors - Matrix::Identity(3, 3)).norm() < 1e-12);
}

TEST_CASE("decomposition is measure-orthonormal and reconstructs") {
  for (std::uint64_t seed : {5ull, 6ull}) {
    const AugmentationGraph g = random_graph(6, 9, seed);
    const KernelOperator b = backward_kernel(g);
    const SpectralDecomposition s = spectral_decompose(b);

    // descending order
    for (int j = 1; j < s.n(); ++j) {
      CHECK(s.eigenvalues(j) <= s.eigenvalues(j - 1) + 1e-14);
    }

    // rho-weighted orthonormality of eigenfunctions
    const Matrix gram = s.eigenvectors.transpose() * s.measure.asDiagonal() *
                        s.eigenvectors;
    CHECK((gram - Matrix::Identity(s.n(), s.n())).cwiseAbs().maxCoeff() <
          1e-10);

    // operator matrix reconstruction: sum_j lambda_j phi_j (phi_j rho)^T
    Matrix recon = Matrix::Zero(s.n(), s.n());
    for (int j = 0; j < s.n(); ++j) {
      recon += s.eigenvalues(j) * s.eigenvectors.col(j) *
               (s.measure.cwiseProduct(s.eigenvectors.col(j))).transpose();
    }
    CHECK((recon - b.matrix).norm() < 1e-8 * std::max(1.0, b.matrix.norm()));
  }
}

TEST_CASE("asymmetric input is rejected") {
  KernelMatrix k;
  k.w.resize(2, 2);
  k.w << 1.0, 0.5,  //
      0.2, 1.0;
  k.marginal = Vector::Constant(2, 0.5);
  CHECK_THROWS_AS(spectral_decompose(k), validation_error);
}

TEST_CASE("invariance form maps the spectrum") {
  for (std::uint64_t seed : {1ull, 4ull, 12ull}) {
    const AugmentationGraph g = random_symmetric_graph(8, seed);
    const KernelOperator t = forward_operator(g);
    const KernelOperator form = invariance_form(t);
    const SpectralDecomposition st = spectral_decompose(t.adjoint().compose(t));
    const SpectralDecomposition sf = spectral_decompose(form);

    // eigenvalue map: lambda -> (sqrt(lambda) - 1)^2, which reverses order
    Vector mapped(st.n());
    for (int j = 0; j < st.n(); ++j) {
      const double lam = std::max(0.0, st.eigenvalues(j));
      mapped(j) = (std::sqrt(lam) - 1.0) * (std::sqrt(lam) - 1.0);
    }
    std::sort(mapped.data(), mapped.data() + mapped.size(),
              std::greater<double>());
    CHECK((mapped - sf.eigenvalues).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("invariance form shares eigenspaces per cluster") {
  for (std::uint64_t seed : {2ull, 9ull}) {
    const AugmentationGraph g = random_symmetric_graph(7, seed);
    const KernelOperator t = forward_operator(g);
    const SpectralDecomposition st = spectral_decompose(t.adjoint().compose(t));
    const SpectralDecomposition sf = spectral_decompose(invariance_form(t));

    // pair eigenvalues through the map, then compare the projectors of
    // matched clusters (vectors inside a cluster are non-identifiable)
    const double cluster_tol = 1e-6;
    for (int j = 0; j < st.n(); ++j) {
      const double lam = std::max(0.0, st.eigenvalues(j));
      const double img = (std::sqrt(lam) - 1.0) * (std::sqrt(lam) - 1.0);
      // collect the source cluster around lam and the target cluster
      // around img
      Matrix src(st.n(), 0), dst(st.n(), 0);
      for (int a = 0; a < st.n(); ++a) {
        if (std::abs(st.eigenvalues(a) - lam) < cluster_tol) {
          src.conservativeResize(Eigen::NoChange, src.cols() + 1);
          src.col(src.cols() - 1) = st.eigenvectors.col(a);
        }
        if (std::abs(sf.eigenvalues(a) - img) < cluster_tol) {
          dst.conservativeResize(Eigen::NoChange, dst.cols() + 1);
          dst.col(dst.cols() - 1) = sf.eigenvectors.col(a);
        }
      }
      REQUIRE(src.cols() >= 1);
      REQUIRE(dst.cols() >= src.cols());
      // the source cluster must lie inside the target cluster's span under
      // the rho geometry: components outside it vanish
      const Matrix coef =
          dst.transpose() * st.measure.asDiagonal() * src;  // [dst x src]
      const Matrix resid = src - dst * coef;
      CHECK(resid.cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("invariance form fixed values") {
  // an operator with eigenvalues 1 and 0 maps them to 0 and 1
  KernelOperator t;
  t.matrix = Matrix::Zero(2, 2);
  t.matrix(0, 0) = 1.0;
  t.in_measure = Vector::Constant(2, 0.5);
  t.out_measure = t.in_measure;
  const SpectralDecomposition s = spectral_decompose(invariance_form(t));
  CHECK(s.eigenvalues(0) == doctest::Approx(1.0));
  CHECK(s.eigenvalues(1) == doctest::Approx(0.0));

  KernelOperator rect;
  rect.matrix = Matrix::Zero(3, 2);
  rect.in_measure = Vector::Constant(2, 0.5);
  rect.out_measure = Vector::Constant(3, 1.0 / 3);
  CHECK_THROWS_AS(invariance_form(rect), validation_error);
}

TEST_CASE("mercer features reconstruct the kernel") {
  const KernelMatrix k = adjacency(random_graph(5, 8, 21));
  const SpectralDecomposition s = spectral_decompose(k);
  const FeatureMap full = mercer_features(s, s.n());
  CHECK((full.weights.transpose() * full.weights - k.w).norm() <
        1e-8 * std::max(1.0, k.w.norm()));

  // rank-d truncation matches the numeric truncated eigensum
  const int d = 3;
  const FeatureMap f = mercer_features(s, d);
  Matrix truncated = Matrix::Zero(s.n(), s.n());
  for (int j = 0; j < d; ++j) {
    truncated += std::max(0.0, s.eigenvalues(j)) * s.eigenvectors.col(j) *
                 s.eigenvectors.col(j).transpose();
  }
  CHECK((f.weights.transpose() * f.weights - truncated).norm() < 1e-10);

  CHECK_THROWS_AS(mercer_features(s, 0), validation_error);
  CHECK_THROWS_AS(mercer_features(s, s.n() + 1), validation_error);
}

TEST_CASE("rank-one mercer feature of the toy kernel") {
  const SpectralDecomposition s =
      spectral_decompose(toy_adjacency(0.4, 0.3, 0.2, 0.1));
  const FeatureMap f = mercer_features(s, 1);
  // top pair is eigenvalue 1 with the flat unit vector
  const Matrix outer = f.weights.transpose() * f.weights;
  CHECK((outer.array() - 0.25).abs().maxCoeff() < 1e-10);
}

TEST_CASE("subspace alignment conventions") {
  const Matrix f = random_matrix(4, 10, 101);
  const Matrix r = random_orthogonal(4, 102);
  CHECK(subspace_alignment(map_of(f), map_of(Matrix(r * f))) ==
        doctest::Approx(1.0).epsilon(1e-10));

  // orthogonal complements
  Matrix top = Matrix::Zero(2, 6);
  top(0, 0) = top(1, 1) = 1.0;
  Matrix bottom = Matrix::Zero(2, 6);
  bottom(0, 2) = bottom(1, 3) = 1.0;
  CHECK(subspace_alignment(map_of(top), map_of(bottom)) ==
        doctest::Approx(0.0));

  // one of four rows replaced by an independent direction: overlap ~ 3/4,
  // checked against the explicit projector-trace oracle
  Matrix a = Matrix::Zero(4, 8);
  a(0, 0) = a(1, 1) = a(2, 2) = a(3, 3) = 1.0;
  Matrix b = a;
  b.row(3).setZero();
  b(3, 6) = 1.0;
  const double got = subspace_alignment(map_of(a), map_of(b));
  CHECK(got == doctest::Approx(0.75));
  CHECK(got == doctest::Approx(alignment_oracle(a, b)).epsilon(1e-10));

  // random spans against the oracle
  for (std::uint64_t key : {7ull, 8ull}) {
    const Matrix x = random_matrix(3, 9, key);
    const Matrix y = random_matrix(5, 9, key + 50);
    CHECK(subspace_alignment(map_of(x), map_of(y)) ==
          doctest::Approx(alignment_oracle(x, y)).epsilon(1e-10));
  }

  CHECK_THROWS_AS(
      subspace_alignment(map_of(Matrix::Zero(2, 5)), map_of(random_matrix(2, 5, 1))),
      validation_error);
  CHECK_THROWS_AS(
      subspace_alignment(map_of(random_matrix(2, 5, 1)), map_of(random_matrix(2, 6, 1))),
      validation_error);
}

TEST_CASE("minimizing the invariance objective recovers the top eigenspace") {
  for (std::uint64_t seed : {1ull, 3ull, 5ull}) {
    const AugmentationGraph g = random_symmetric_graph(8, seed);
    const KernelOperator t = forward_operator(g);
    const SpectralDecomposition s = spectral_decompose(t.adjoint().compose(t));

    const int d = 3;
    if (s.eigenvalues(d - 1) - s.eigenvalues(d) <= 1e-3) continue;
    const FeatureMap target{
        Matrix(s.eigenvectors.leftCols(d).transpose())};

    const FeatureMap got = minimize_invariance_loss(t, d, OrthMode::projection);
    CHECK(subspace_alignment(got, target) >= 1.0 - 1e-6);

    // widening the map only covers more of the target span
    double prev = 0.0;
    for (int k = 1; k <= d; ++k) {
      const FeatureMap fk = minimize_invariance_loss(t, k, OrthMode::projection);
      const double a = subspace_alignment(fk, target);
      CHECK(a >= prev - 1e-9);
      prev = a;
    }

    // penalty mode reaches the same span, within looser tolerance
    MinimizeOptions opts;
    opts.beta = 4.0;
    const FeatureMap pen =
        minimize_invariance_loss(t, d, OrthMode::penalty, opts);
    CHECK(subspace_alignment(pen, target) >= 0.99);
  }
}

TEST_CASE("invariance minimizer input validation") {
  const AugmentationGraph g = random_symmetric_graph(5, 2);
  const KernelOperator t = forward_operator(g);
  CHECK_THROWS_AS(minimize_invariance_loss(t, 0, OrthMode::projection),
                  validation_error);
  CHECK_THROWS_AS(minimize_invariance_loss(t, 6, OrthMode::projection),
                  validation_error);
  const KernelOperator rect = forward_operator(random_graph(3, 5, 1));
  CHECK_THROWS_AS(minimize_invariance_loss(rect, 2, OrthMode::projection),
                  validation_error);
}
