#pragma once

#include <cstdint>
#include <vector>

#include "ssllab/types.hpp"

namespace ssllab {

/// Outcome of a linear evaluation.  alignment is not computed here; the
/// experiment drivers fill it in with the feature-vs-eigenspace score
/// when they have the reference spectrum at hand.
struct ProbeResult {
  double accuracy = 0.0;
  Matrix weights;  // [n_classes x d] one-vs-all readout
  double alignment = -1.0;
};

/// Fit a one-vs-all ridge readout (tiny 1e-8 regularizer, no intercept)
/// on a seeded train split of the columns of `features` [d x n] and score
/// accuracy on the held-out columns.  Ties in the class scores break
/// toward the lower class label.  Errors when fewer than 2 distinct
/// labels exist or some class is absent from the train split.
ProbeResult linear_probe(const Matrix& features, const std::vector<int>& labels,
                         double train_frac, std::uint64_t seed);

}  // namespace ssllab
