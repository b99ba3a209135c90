#pragma once

// Direct double-loop GAE: A_t = sum_k (gamma lambda)^k delta_{t+k}, stopping
// after the first done at or after t.

#include <cstdint>
#include <vector>

namespace oracle {

inline std::vector<double> gae_double_loop(const std::vector<double>& r,
                                           const std::vector<double>& v,
                                           const std::vector<std::uint8_t>& done,
                                           double gamma, double lambda) {
  const std::size_t n = r.size();
  std::vector<double> delta(n);
  for (std::size_t t = 0; t < n; ++t) {
    delta[t] = r[t] + gamma * v[t + 1] * (done[t] ? 0.0 : 1.0) - v[t];
  }
  std::vector<double> adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double coef = 1.0;
    for (std::size_t k = t; k < n; ++k) {
      adv[t] += coef * delta[k];
      if (done[k]) break;
      coef *= gamma * lambda;
    }
  }
  return adv;
}

}  // namespace oracle
