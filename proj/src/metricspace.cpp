#include "o2cap/metricspace.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "o2cap/error.hpp"

namespace o2cap {

Matrix cosine_matrix(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("cosine_matrix: dimension mismatch");
  Matrix out(a.rows(), b.rows());
  const auto rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto ai = a.row(static_cast<std::size_t>(i));
    auto oi = out.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < b.rows(); ++j) oi[j] = dot(ai, b.row(j));
  }
  return out;
}

Matrix plain_distance(const Matrix& x) {
  Matrix d = cosine_matrix(x, x);
  for (std::size_t i = 0; i < d.rows(); ++i) {
    for (std::size_t j = 0; j < d.cols(); ++j) {
      d(i, j) = i == j ? 0.0 : std::clamp((1.0 - d(i, j)) / 2.0, 0.0, 1.0);
    }
  }
  return d;
}

void JaccardParams::validate(std::size_t n) const {
  if (k1 < 1) throw ParameterError("jaccard: k1 must be >= 1");
  if (static_cast<std::size_t>(k1) >= n)
    throw ParameterError("jaccard: k1 (" + std::to_string(k1) + ") must be smaller than N (" +
                         std::to_string(n) + ")");
  if (k2 < 1 || k2 > k1) throw ParameterError("jaccard: k2 must lie in [1, k1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ParameterError("jaccard: lambda must lie in [0, 1]");
}

std::vector<std::size_t> knn(std::span<const double> sims, std::size_t k,
                             std::span<const std::size_t> exclude) {
  std::vector<char> skip(sims.size(), 0);
  for (std::size_t e : exclude)
    if (e < sims.size()) skip[e] = 1;
  std::vector<std::size_t> pool;
  pool.reserve(sims.size());
  for (std::size_t i = 0; i < sims.size(); ++i)
    if (!skip[i]) pool.push_back(i);
  const std::size_t take = std::min(k, pool.size());
  auto better = [&](std::size_t a, std::size_t b) {
    return sims[a] > sims[b] || (sims[a] == sims[b] && a < b);
  };
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take), pool.end(), better);
  pool.resize(take);
  return pool;
}

namespace {

using SparseRow = std::vector<std::pair<std::size_t, double>>;  // ascending column

// Ordering shared by both implementations: nearest first, ties by index.
struct NearestFirst {
  std::span<const double> dist;
  bool operator()(std::size_t a, std::size_t b) const {
    return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
  }
};

std::vector<std::size_t> reciprocal(const std::vector<std::vector<std::size_t>>& rank, std::size_t i,
                                    std::size_t k) {
  std::vector<std::size_t> out;
  for (std::size_t m = 0; m <= k; ++m) {
    const std::size_t cand = rank[i][m];
    const auto& back = rank[cand];
    if (std::find(back.begin(), back.begin() + static_cast<std::ptrdiff_t>(k + 1), i) !=
        back.begin() + static_cast<std::ptrdiff_t>(k + 1))
      out.push_back(cand);
  }
  return out;
}

std::size_t half_k(int k1) {
  // round-half-to-even, as in the usual re-ranking code
  return static_cast<std::size_t>(std::nearbyint(static_cast<double>(k1) / 2.0));
}

std::vector<std::size_t> expanded_set(const std::vector<std::vector<std::size_t>>& rank, std::size_t i,
                                      int k1) {
  const auto base = reciprocal(rank, i, static_cast<std::size_t>(k1));
  std::vector<std::size_t> sorted_base = base;
  std::sort(sorted_base.begin(), sorted_base.end());
  std::vector<std::size_t> out = base;
  for (std::size_t cand : base) {
    const auto sub = reciprocal(rank, cand, half_k(k1));
    std::size_t shared = 0;
    for (std::size_t s : sub)
      if (std::binary_search(sorted_base.begin(), sorted_base.end(), s)) ++shared;
    if (3 * shared > 2 * sub.size()) out.insert(out.end(), sub.begin(), sub.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Matrix blend(const Matrix& sims, std::span<const double> jac_flat, double lambda) {
  const std::size_t n = sims.rows();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double orig = std::clamp((1.0 - sims(i, j)) / 2.0, 0.0, 1.0);
      out(i, j) = std::clamp(lambda * orig + (1.0 - lambda) * jac_flat[i * n + j], 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace

Matrix jaccard_distance(const Matrix& x, const JaccardParams& params) {
  const std::size_t n = x.rows();
  if (n < 2) throw ParameterError("jaccard: need at least two points");
  params.validate(n);
  const auto k1 = static_cast<std::size_t>(params.k1);
  const auto sn = static_cast<std::ptrdiff_t>(n);

  const Matrix sims = cosine_matrix(x, x);
  Matrix dist(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) dist(i, j) = std::clamp((1.0 - sims(i, j)) / 2.0, 0.0, 1.0);

  std::vector<std::vector<std::size_t>> rank(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t si = 0; si < sn; ++si) {
    const auto i = static_cast<std::size_t>(si);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k1 + 1), order.end(),
                      NearestFirst{dist.row(i)});
    order.resize(k1 + 1);
    rank[i] = std::move(order);
  }

  std::vector<SparseRow> v(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t si = 0; si < sn; ++si) {
    const auto i = static_cast<std::size_t>(si);
    const auto members = expanded_set(rank, i, params.k1);
    SparseRow row;
    double total = 0.0;
    for (std::size_t j : members) {
      const double w = std::exp(-(2.0 - 2.0 * sims(i, j)));
      row.emplace_back(j, w);
      total += w;
    }
    for (auto& [j, w] : row) w /= total;
    v[i] = std::move(row);
  }

  if (params.k2 != 1) {
    const auto k2 = static_cast<std::size_t>(params.k2);
    std::vector<SparseRow> qe(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t si = 0; si < sn; ++si) {
      const auto i = static_cast<std::size_t>(si);
      std::vector<double> acc(n, 0.0);
      std::vector<char> touched(n, 0);
      for (std::size_t m = 0; m < k2; ++m) {
        for (const auto& [j, w] : v[rank[i][m]]) {
          acc[j] += w;
          touched[j] = 1;
        }
      }
      SparseRow row;
      for (std::size_t j = 0; j < n; ++j)
        if (touched[j]) row.emplace_back(j, acc[j] / static_cast<double>(k2));
      qe[i] = std::move(row);
    }
    v = std::move(qe);
  }

  // inverted index: column -> rows holding a non-zero there, with the value
  std::vector<std::vector<std::pair<std::size_t, double>>> inv(n);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [j, w] : v[i]) inv[j].emplace_back(i, w);

  std::vector<double> jac(n * n, 0.0);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t si = 0; si < sn; ++si) {
    const auto i = static_cast<std::size_t>(si);
    std::vector<double> shared(n, 0.0);
    for (const auto& [col, wi] : v[i])
      for (const auto& [j, wj] : inv[col]) shared[j] += std::min(wi, wj);
    for (std::size_t j = 0; j < n; ++j) jac[i * n + j] = 1.0 - shared[j] / (2.0 - shared[j]);
  }
  return blend(sims, jac, params.lambda);
}

namespace reference {

Matrix cosine_matrix(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("cosine_matrix: dimension mismatch");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      out(i, j) = s;
    }
  }
  return out;
}

Matrix jaccard_distance(const Matrix& x, const JaccardParams& params) {
  const std::size_t n = x.rows();
  if (n < 2) throw ParameterError("jaccard: need at least two points");
  params.validate(n);

  const Matrix sims = reference::cosine_matrix(x, x);
  Matrix dist(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) dist(i, j) = std::clamp((1.0 - sims(i, j)) / 2.0, 0.0, 1.0);

  std::vector<std::vector<std::size_t>> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), NearestFirst{dist.row(i)});
    rank[i] = std::move(order);
  }

  Matrix v(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto members = expanded_set(rank, i, params.k1);
    double total = 0.0;
    for (std::size_t j : members) total += std::exp(-(2.0 - 2.0 * sims(i, j)));
    for (std::size_t j : members) v(i, j) = std::exp(-(2.0 - 2.0 * sims(i, j))) / total;
  }

  if (params.k2 != 1) {
    Matrix qe(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t m = 0; m < static_cast<std::size_t>(params.k2); ++m) s += v(rank[i][m], j);
        qe(i, j) = s / static_cast<double>(params.k2);
      }
    }
    v = std::move(qe);
  }

  std::vector<double> jac(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double m = 0.0;
      for (std::size_t k = 0; k < n; ++k) m += std::min(v(i, k), v(j, k));
      jac[i * n + j] = 1.0 - m / (2.0 - m);
    }
  }
  return blend(sims, jac, params.lambda);
}

}  // namespace reference

}  // namespace o2cap
