#include "ssllab/probe.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <set>
#include <string>

#include "ssllab/errors.hpp"
#include "ssllab/rng.hpp"

namespace ssllab {

namespace {

constexpr double kRidge = 1e-8;

// Seeded Fisher-Yates shuffle of 0..n-1.
std::vector<int> shuffled_indices(int n, std::uint64_t seed) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  CounterRng rng(stream_key(seed, 0x70726f6265ull));
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i) + 1));
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

}  // namespace

ProbeResult linear_probe(const Matrix& features, const std::vector<int>& labels,
                         double train_frac, std::uint64_t seed) {
  const int n = static_cast<int>(features.cols());
  const int d = static_cast<int>(features.rows());
  if (static_cast<int>(labels.size()) != n) {
    throw validation_error("linear_probe: " + std::to_string(labels.size()) +
                           " labels for " + std::to_string(n) + " columns");
  }
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw validation_error("linear_probe: train_frac must lie in (0, 1), got " +
                           std::to_string(train_frac));
  }

  // Class index = position of the label among the sorted distinct labels,
  // so "lower class" ties are lower label values.
  std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) {
    throw validation_error("linear_probe: need at least 2 classes, got " +
                           std::to_string(distinct.size()));
  }
  std::vector<int> classes(distinct.begin(), distinct.end());
  const int n_classes = static_cast<int>(classes.size());
  auto class_of = [&](int label) {
    return static_cast<int>(std::lower_bound(classes.begin(), classes.end(), label) -
                            classes.begin());
  };

  const std::vector<int> order = shuffled_indices(n, seed);
  int n_train = static_cast<int>(std::lround(train_frac * n));
  n_train = std::clamp(n_train, 1, n - 1);

  Matrix x_train(d, n_train);
  Matrix y_train = Matrix::Zero(n_classes, n_train);
  std::vector<bool> seen(n_classes, false);
  for (int k = 0; k < n_train; ++k) {
    const int col = order[k];
    x_train.col(k) = features.col(col);
    const int c = class_of(labels[col]);
    y_train(c, k) = 1.0;
    seen[c] = true;
  }
  for (int c = 0; c < n_classes; ++c) {
    if (!seen[c]) {
      throw validation_error("linear_probe: class " + std::to_string(classes[c]) +
                             " missing from the train split");
    }
  }

  // One-vs-all ridge: W = Y X^T (X X^T + ridge I)^-1.
  Matrix gram = x_train * x_train.transpose();
  gram.diagonal().array() += kRidge;
  Matrix w = gram.ldlt().solve(x_train * y_train.transpose()).transpose();

  int correct = 0;
  for (int k = n_train; k < n; ++k) {
    const int col = order[k];
    Vector scores = w * features.col(col);
    int best = 0;
    for (int c = 1; c < n_classes; ++c) {
      if (scores(c) > scores(best)) best = c;
    }
    if (best == class_of(labels[col])) ++correct;
  }

  ProbeResult result;
  result.accuracy = static_cast<double>(correct) / static_cast<double>(n - n_train);
  result.weights = w;
  return result;
}

}  // namespace ssllab
