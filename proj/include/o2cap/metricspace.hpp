#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "o2cap/matrix.hpp"

namespace o2cap {

/// values(i, j) = a_i . b_j. Rows are processed in parallel; each entry is a
/// single fixed-order dot product, so results do not depend on thread count.
Matrix cosine_matrix(const Matrix& a, const Matrix& b);

/// (1 - cos) / 2 clamped to [0, 1], zero diagonal.
Matrix plain_distance(const Matrix& x);

/// k-reciprocal encoding parameters.
struct JaccardParams {
  int k1 = 20;        // reciprocal neighbourhood size
  int k2 = 6;         // local query expansion size
  double lambda = 0;  // weight of the original distance in the blend

  /// Throws ParameterError unless 1 <= k2 <= k1 < n and lambda in [0, 1].
  void validate(std::size_t n) const;
};

/// All-pairs k-reciprocal Jaccard distance, blended as
/// lambda * (1 - cos) / 2 + (1 - lambda) * jaccard. Symmetric, zero diagonal,
/// entries in [0, 1].
///
/// Per point i: the k1-reciprocal set R(i) holds the points among i's k1+1
/// nearest whose own k1+1 nearest contain i. R(i) is expanded with R(c, k1/2)
/// for every c in R(i) sharing more than 2/3 of its members with R(i). The
/// expanded set is encoded as weights exp(-|x_i - x_j|^2) normalized to sum 1,
/// then averaged over i's k2 nearest neighbours. Jaccard distance between two
/// encodings V_i, V_j is 1 - m / (2 - m), m = sum_k min(V_ik, V_jk).
Matrix jaccard_distance(const Matrix& x, const JaccardParams& params);

/// Top-k indices of `sims` in descending order, ties by ascending index,
/// skipping `exclude`. Returns fewer than k when the pool runs out.
std::vector<std::size_t> knn(std::span<const double> sims, std::size_t k,
                             std::span<const std::size_t> exclude = {});

namespace reference {

/// Serial scalar-loop twin of o2cap::cosine_matrix.
Matrix cosine_matrix(const Matrix& a, const Matrix& b);

/// Serial dense twin of o2cap::jaccard_distance (O(n^2) memory for the encodings).
Matrix jaccard_distance(const Matrix& x, const JaccardParams& params);

}  // namespace reference

}  // namespace o2cap
