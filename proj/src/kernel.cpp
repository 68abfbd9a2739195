#include "ssllab/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ssllab/errors.hpp"
#include "ssllab/rng.hpp"

namespace ssllab {

namespace {

void check_measure(const Vector& m, const char* what) {
  if ((m.array() <= 0).any() || !m.allFinite()) {
    throw validation_error(std::string(what) +
                           ": measure must be strictly positive and finite");
  }
}

/// Flip eigenvector columns so the largest-magnitude component (first such
/// index on ties) is positive.
void apply_sign_convention(Matrix& vecs) {
  for (int j = 0; j < vecs.cols(); ++j) {
    int arg = 0;
    double best = -1;
    for (int i = 0; i < vecs.rows(); ++i) {
      const double a = std::abs(vecs(i, j));
      if (a > best + 1e-15) {
        best = a;
        arg = i;
      }
    }
    if (vecs(arg, j) < 0) vecs.col(j) = -vecs.col(j);
  }
}

/// Decompose the symmetric similarity S = D^1/2 K D^1/2 (D = diag(measure))
/// and map back to measure-orthonormal eigenfunctions of the operator.
SpectralDecomposition decompose_weighted(const Matrix& op, const Vector& rho) {
  const Vector sq = rho.cwiseSqrt();
  const Vector isq = sq.cwiseInverse();
  Matrix s = sq.asDiagonal() * op * isq.asDiagonal();
  const double scale = std::max(1.0, s.norm());
  const double asym = (s - s.transpose()).norm();
  if (asym > 1e-10 * scale) {
    throw validation_error("spectral_decompose: asymmetry " +
                           std::to_string(asym / scale) +
                           " beyond tolerance; upstream operator is not "
                           "self-adjoint");
  }
  s = 0.5 * (s + s.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  if (es.info() != Eigen::Success) {
    throw numeric_error("spectral_decompose: eigensolver failed");
  }

  const int n = static_cast<int>(op.rows());
  SpectralDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  out.measure = rho;
  for (int j = 0; j < n; ++j) {  // ascending -> descending
    out.eigenvalues(j) = es.eigenvalues()(n - 1 - j);
    out.eigenvectors.col(j) = isq.asDiagonal() * es.eigenvectors().col(n - 1 - j);
  }
  apply_sign_convention(out.eigenvectors);
  return out;
}

}  // namespace

KernelOperator KernelOperator::adjoint() const {
  KernelOperator a;
  a.matrix = in_measure.cwiseInverse().asDiagonal() * matrix.transpose() *
             out_measure.asDiagonal();
  a.in_measure = out_measure;
  a.out_measure = in_measure;
  return a;
}

KernelOperator KernelOperator::compose(const KernelOperator& other) const {
  if (n_in() != other.n_out()) {
    throw validation_error("compose: dimension mismatch");
  }
  KernelOperator c;
  c.matrix = matrix * other.matrix;
  c.in_measure = other.in_measure;
  c.out_measure = out_measure;
  return c;
}

KernelOperator forward_operator(const AugmentationGraph& g) {
  g.validate();
  const Vector p = vertex_marginals(g);
  std::vector<int> unreachable;
  for (int x = 0; x < g.n_views(); ++x) {
    if (p(x) <= 0) unreachable.push_back(x);
  }
  if (!unreachable.empty()) {
    std::string msg = "forward_operator: zero-marginal vertices:";
    for (int x : unreachable) msg += " " + std::to_string(x);
    throw unreachable_vertex_error(msg, unreachable);
  }
  if ((g.image_prior.array() <= 0).any()) {
    throw validation_error("forward_operator: prior must be positive");
  }
  KernelOperator t;
  // Bayes: p(i|x) = prior_i cond[i][x] / p(x)
  t.matrix = p.cwiseInverse().asDiagonal() * g.cond.transpose() *
             g.image_prior.asDiagonal();
  t.in_measure = g.image_prior;
  t.out_measure = p;
  return t;
}

KernelOperator backward_kernel(const AugmentationGraph& g) {
  g.validate();
  const Vector p = vertex_marginals(g);
  std::vector<int> unreachable;
  for (int x = 0; x < g.n_views(); ++x) {
    if (p(x) <= 0) unreachable.push_back(x);
  }
  if (!unreachable.empty()) {
    std::string msg = "backward_kernel: zero-marginal vertices:";
    for (int x : unreachable) msg += " " + std::to_string(x);
    throw unreachable_vertex_error(msg, unreachable);
  }
  if ((g.image_prior.array() <= 0).any()) {
    throw validation_error("backward_kernel: prior must be positive");
  }
  KernelOperator b;
  // kernel k(i,j) = sum_x cond[i][x] cond[j][x] / p(x), then the prior
  // measure turns it into an operator on image functions
  Matrix kmat = g.cond * p.cwiseInverse().asDiagonal() * g.cond.transpose();
  kmat = 0.5 * (kmat + kmat.transpose()).eval();
  b.matrix = kmat * g.image_prior.asDiagonal();
  b.in_measure = g.image_prior;
  b.out_measure = g.image_prior;
  return b;
}

KernelOperator kernel_operator(const KernelMatrix& k) {
  check_measure(k.marginal, "kernel_operator");
  KernelOperator op;
  op.matrix = k.w * k.marginal.asDiagonal();
  op.in_measure = k.marginal;
  op.out_measure = k.marginal;
  return op;
}

KernelOperator invariance_form(const KernelOperator& t_m) {
  if (!t_m.square()) {
    throw validation_error(
        "invariance_form: dimension mismatch (operator must be square; "
        "compose with the adjoint first)");
  }
  if ((t_m.in_measure - t_m.out_measure).cwiseAbs().maxCoeff() > 1e-14) {
    throw validation_error(
        "invariance_form: domain and codomain measures differ");
  }
  KernelOperator shifted = t_m;
  shifted.matrix -= Matrix::Identity(t_m.n_in(), t_m.n_in());
  return shifted.adjoint().compose(shifted);
}

SpectralDecomposition spectral_decompose(const KernelOperator& k) {
  if (!k.square()) {
    throw validation_error("spectral_decompose: operator must be square");
  }
  if ((k.in_measure - k.out_measure).cwiseAbs().maxCoeff() > 1e-14) {
    throw validation_error(
        "spectral_decompose: domain and codomain measures differ");
  }
  check_measure(k.in_measure, "spectral_decompose");
  return decompose_weighted(k.matrix, k.in_measure);
}

SpectralDecomposition spectral_decompose(const KernelMatrix& k) {
  return decompose_weighted(k.w, Vector::Ones(k.n()));
}

FeatureMap mercer_features(const SpectralDecomposition& s, int d) {
  if (d < 1 || d > s.n()) {
    throw validation_error("mercer_features: d must be in [1, n]");
  }
  for (int j = 0; j < d; ++j) {
    if (s.eigenvalues(j) < -1e-9) {
      throw validation_error(
          "mercer_features: negative eigenvalue beyond tolerance: " +
          std::to_string(s.eigenvalues(j)));
    }
  }
  FeatureMap f;
  f.weights.resize(d, s.n());
  for (int j = 0; j < d; ++j) {
    const double lam = std::max(0.0, s.eigenvalues(j));
    f.weights.row(j) = std::sqrt(lam) * s.eigenvectors.col(j).transpose();
  }
  return f;
}

namespace {

/// Orthonormal basis of the row span; empty (0 cols) for zero rank.
Matrix row_span_basis(const Matrix& rows) {
  Eigen::JacobiSVD<Matrix> svd(rows, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return Matrix(rows.cols(), 0);
  const double tol = 1e-12 * sv(0);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol && sv(i) > 0) ++rank;
  }
  return svd.matrixV().leftCols(rank);
}

}  // namespace

double subspace_alignment(const FeatureMap& f, const FeatureMap& g) {
  if (f.n() != g.n()) {
    throw validation_error("subspace_alignment: input dimension mismatch");
  }
  const Matrix qf = row_span_basis(f.weights);
  const Matrix qg = row_span_basis(g.weights);
  if (qf.cols() == 0 || qg.cols() == 0) {
    throw validation_error("subspace_alignment: zero-rank input");
  }
  const Matrix cross = qf.transpose() * qg;
  Eigen::JacobiSVD<Matrix> svd(cross);
  const auto& cosines = svd.singularValues();
  const int n_angles = static_cast<int>(
      std::min(qf.cols(), qg.cols()));
  double sum = 0;
  for (int i = 0; i < n_angles; ++i) {
    const double c = std::min(1.0, cosines(i));
    sum += c * c;
  }
  return sum / n_angles;
}

FeatureMap minimize_invariance_loss(const KernelOperator& t_m, int d,
                                    OrthMode mode,
                                    const MinimizeOptions& opts) {
  if (!t_m.square()) {
    throw validation_error(
        "minimize_invariance_loss: operator must be square");
  }
  const int n = t_m.n_in();
  if (d < 1 || d > n) {
    throw validation_error("minimize_invariance_loss: d must be in [1, n]");
  }
  const KernelOperator binv = invariance_form(t_m);
  const Vector rho = t_m.in_measure;
  const Vector sq = rho.cwiseSqrt();
  const Vector isq = sq.cwiseInverse();
  // u = D^1/2 f turns the rho inner product into the Euclidean one
  Matrix s = sq.asDiagonal() * binv.matrix * isq.asDiagonal();
  s = 0.5 * (s + s.transpose()).eval();

  CounterRng rng(stream_key(opts.seed, 0x6d696eull));
  Matrix u(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) u(i, j) = rng.normal();
  }

  auto orth = [](const Matrix& m) {
    Eigen::HouseholderQR<Matrix> qr(m);
    return Matrix(qr.householderQ() * Matrix::Identity(m.rows(), m.cols()));
  };

  if (mode == OrthMode::projection) {
    // subspace iteration on sigma*I - S (Gershgorin shift keeps it PSD and
    // avoids a circular call into the eigensolver); Rayleigh-Ritz rotation
    // each sweep, stop when the summed objective stalls
    const double sigma = s.cwiseAbs().rowwise().sum().maxCoeff() + 1.0;
    const Matrix flipped = sigma * Matrix::Identity(n, n) - s;
    u = orth(u);
    double prev = -1;
    for (int it = 0; it < opts.max_iters; ++it) {
      u = orth(flipped * u);
      const Matrix small = u.transpose() * flipped * u;
      Eigen::SelfAdjointEigenSolver<Matrix> es(small);
      Matrix rot(d, d);
      for (int j = 0; j < d; ++j) rot.col(j) = es.eigenvectors().col(d - 1 - j);
      u = u * rot;
      const double objective = (u.transpose() * s * u).trace();
      if (prev >= 0 &&
          std::abs(prev - objective) <= opts.tol * std::max(1.0, prev)) {
        break;
      }
      prev = objective;
    }
  } else {
    // gradient descent on sum_i u_i^T S u_i + beta ||U^T U - I||_F^2
    u *= 0.1;
    const double lip =
        2.0 * s.cwiseAbs().rowwise().sum().maxCoeff() + 12.0 * opts.beta;
    const double step = 1.0 / lip;
    double prev = -1;
    for (int it = 0; it < opts.max_iters; ++it) {
      const Matrix gram = u.transpose() * u;
      const Matrix grad =
          2.0 * (s * u) +
          4.0 * opts.beta * u * (gram - Matrix::Identity(d, d));
      u -= step * grad;
      if (it % 64 == 0) {
        const double objective =
            (u.transpose() * s * u).trace() +
            opts.beta *
                (u.transpose() * u - Matrix::Identity(d, d)).squaredNorm();
        if (prev >= 0 &&
            std::abs(prev - objective) <= opts.tol * std::max(1.0, prev)) {
          break;
        }
        prev = objective;
      }
    }
  }

  FeatureMap f;
  f.weights = (isq.asDiagonal() * u).transpose();
  return f;
}

}  // namespace ssllab
