#pragma once

#include <algorithm>

#include "ntg/errors.hpp"

namespace ntg {

// C(n, k) evaluated multiplicatively in extended precision. Exact to double
// precision for all population sizes of interest; no overflow for any n that
// fits the state space (long double carries the magnitude).
inline long double binomial(int n, int k) {
  if (k < 0 || k > n || n < 0) return 0.0L;
  k = std::min(k, n - k);
  long double acc = 1.0L;
  for (int i = 1; i <= k; ++i) acc = acc * static_cast<long double>(n - k + i) / i;
  return acc;
}

// Probability of drawing j_ci CI agents and j_t T agents in `draws` draws
// without replacement from a pool holding i_ci CI, i_t T and the rest U.
// Out-of-support combinations return 0.
inline double hypergeom_pmf(int j_ci, int j_t, int draws, int i_ci, int i_t, int pool) {
  if (draws < 0 || pool < draws)
    throw validation_error("hypergeom_pmf: need 0 <= draws <= pool");
  if (i_ci < 0 || i_t < 0 || i_ci + i_t > pool)
    throw validation_error("hypergeom_pmf: pool composition must be nonnegative and fit the pool");
  const int j_u = draws - j_ci - j_t;
  const int i_u = pool - i_ci - i_t;
  if (j_ci < 0 || j_t < 0 || j_u < 0 || j_ci > i_ci || j_t > i_t || j_u > i_u) return 0.0;
  const long double num = binomial(i_ci, j_ci) * binomial(i_t, j_t) * binomial(i_u, j_u);
  return static_cast<double>(num / binomial(pool, draws));
}

}  // namespace ntg
