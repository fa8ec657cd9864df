#ifndef FINSLER_TOPOLOGY_HPP
#define FINSLER_TOPOLOGY_HPP

// Cohomology of the unlabeled cyclic configuration space G(S^{d-1}, r)/Z_r
// with F_r coefficients (r an odd prime) and the orbit-count bounds it yields.

#include <string>
#include <vector>

#include "finsler/errors.hpp"

namespace finsler {

struct CohomologyProfile {
  int d = 0;
  int r = 0;
  std::vector<int> betti;  // degrees 0 .. (r-1)(d-2)+1
  int total = 0;
  int alternating_sum = 0;
  int cat_lower = 0;
  int bound_general = 0;
  int bound_generic = 0;
};

inline bool is_prime(int n) {
  if (n < 2) return false;
  for (int k = 2; k * k <= n; ++k)
    if (n % k == 0) return false;
  return true;
}

inline void check_topology_params(int d, int r) {
  if (d < 3) throw Error(ErrorCode::InvalidParameters, "d must be >= 3, got " + std::to_string(d));
  if (r < 3 || r % 2 == 0 || !is_prime(r))
    throw Error(ErrorCode::InvalidParameters, "r must be an odd prime, got " + std::to_string(r));
}

/// Lusternik-Schnirelmann category lower bound (r-1)(d-2)+1.
inline int cat_lower_bound(int d, int r) {
  check_topology_params(d, r);
  return (r - 1) * (d - 2) + 1;
}

/// Lower bound on the number of Z_r classes of r-periodic orbits; the generic
/// bound assumes the length function is Morse.
inline int orbit_lower_bound(int d, int r, bool generic) {
  check_topology_params(d, r);
  if (!generic) return (r - 1) * (d - 2) + 1;
  return d % 2 == 0 ? (r - 1) * d : (r - 1) * (d - 1);
}

inline CohomologyProfile betti_numbers(int d, int r) {
  check_topology_params(d, r);
  CohomologyProfile prof;
  prof.d = d;
  prof.r = r;
  const int top = (r - 1) * (d - 2) + 1;
  prof.betti.assign(static_cast<std::size_t>(top) + 1, 1);
  // Rank-two degrees: l(d-2), l(d-2)+1 for 1 <= l <= r-2 when d is even;
  // 2l(d-2), 2l(d-2)+1 for 1 <= l <= (r-3)/2 when d is odd.
  const bool even = d % 2 == 0;
  const int count = even ? r - 2 : (r - 3) / 2;
  const int stride = even ? d - 2 : 2 * (d - 2);
  for (int l = 1; l <= count; ++l) {
    prof.betti[static_cast<std::size_t>(l * stride)] = 2;
    prof.betti[static_cast<std::size_t>(l * stride + 1)] = 2;
  }
  for (std::size_t n = 0; n < prof.betti.size(); ++n) {
    prof.total += prof.betti[n];
    prof.alternating_sum += (n % 2 == 0 ? 1 : -1) * prof.betti[n];
  }
  prof.cat_lower = cat_lower_bound(d, r);
  prof.bound_general = orbit_lower_bound(d, r, false);
  prof.bound_generic = orbit_lower_bound(d, r, true);
  return prof;
}

}  // namespace finsler

#endif
