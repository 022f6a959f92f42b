#pragma once

#include <cmath>
#include <vector>

#include "perfgat/matrix.hpp"
#include "perfgat/rng.hpp"

namespace testutil {

inline perfgat::num::Matrix random_matrix(perfgat::Rng& rng, std::size_t rows,
                                          std::size_t cols, double scale = 1.0) {
  perfgat::num::Matrix m(rows, cols);
  for (double& v : m.data()) v = scale * rng.normal();
  return m;
}

inline perfgat::num::Vector random_vector(perfgat::Rng& rng, std::size_t len,
                                          double scale = 1.0) {
  perfgat::num::Vector v(len);
  for (std::size_t i = 0; i < len; ++i) v[i] = scale * rng.normal();
  return v;
}

inline double max_abs_diff(const perfgat::num::Matrix& a, const perfgat::num::Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  }
  return m;
}

// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value. Used as a
// statistical oracle on generator output.
inline double ks_two_sample_pvalue(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double d = 0.0;
  std::size_t ia = 0, ib = 0;
  while (ia < a.size() && ib < b.size()) {
    const double x = std::min(a[ia], b[ib]);
    while (ia < a.size() && a[ia] <= x) ++ia;
    while (ib < b.size() && b[ib] <= x) ++ib;
    d = std::max(d, std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb));
  }
  const double ne = na * nb / (na + nb);
  const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    p += 2.0 * (k % 2 == 1 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  }
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace testutil
