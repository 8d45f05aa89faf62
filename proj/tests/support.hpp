#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "o2cap/matrix.hpp"

namespace testing {

inline o2cap::Matrix random_unit_rows(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  o2cap::Matrix m(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = m.row(i);
    for (double& v : r) v = g(rng);
    o2cap::normalize(r);
  }
  return m;
}

inline std::vector<double> random_unit(std::size_t d, std::mt19937_64& rng) {
  auto m = random_unit_rows(1, d, rng);
  return {m.row(0).begin(), m.row(0).end()};
}

/// Relative error |a - n| / max(|a|, |n|, floor) between `analytic` and the
/// central-difference gradient of `value` at x (vector 2-norms).
inline double fd_relative_error(const std::function<double(std::span<const double>)>& value,
                                std::span<const double> x, std::span<const double> analytic, double step = 1e-5,
                                double floor = 1e-8) {
  std::vector<double> p(x.begin(), x.end());
  double diff = 0.0, a2 = 0.0, n2 = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double keep = p[k];
    p[k] = keep + step;
    const double up = value(p);
    p[k] = keep - step;
    const double down = value(p);
    p[k] = keep;
    const double numeric = (up - down) / (2.0 * step);
    diff += (analytic[k] - numeric) * (analytic[k] - numeric);
    a2 += analytic[k] * analytic[k];
    n2 += numeric * numeric;
  }
  return std::sqrt(diff) / std::max({std::sqrt(a2), std::sqrt(n2), floor});
}

}  // namespace testing
