#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cforest/dataset.hpp"
#include "cforest/kernels.hpp"

namespace testing {

// Random probability rows. With `ties` set, some rows are uniform or carry
// repeated masses so tie-breaking paths are exercised.
inline std::vector<double> random_simplex(std::mt19937_64& eng, std::size_t C, bool ties = false) {
  std::vector<double> p(C);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (ties && C > 1 && unif(eng) < 0.5) {
    if (unif(eng) < 0.5) {
      std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(C));
      return p;
    }
    // a few repeated masses drawn from a short list of dyadic values
    const double choices[] = {0.125, 0.25, 0.0625};
    double total = 0.0;
    for (auto& v : p) {
      v = choices[eng() % 3];
      total += v;
    }
    for (auto& v : p) v /= total;
    return p;
  }
  double total = 0.0;
  for (auto& v : p) {
    v = -std::log(1.0 - unif(eng));
    total += v;
  }
  for (auto& v : p) v /= total;
  return p;
}

inline cforest::Matrix random_prob_matrix(std::mt19937_64& eng, std::size_t rows, std::size_t C, bool ties = false) {
  cforest::Matrix m(rows, C);
  for (std::size_t r = 0; r < rows; ++r) {
    auto p = random_simplex(eng, C, ties);
    std::copy(p.begin(), p.end(), m.row(r).begin());
  }
  return m;
}

inline cforest::Tensor3 random_prob_tensor(std::mt19937_64& eng, std::size_t n, std::size_t n_test, std::size_t C,
                                           bool ties = false) {
  cforest::Tensor3 t(n, n_test, C);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n_test; ++j) {
      auto p = random_simplex(eng, C, ties);
      std::copy(p.begin(), p.end(), t.slice(i, j).begin());
    }
  }
  return t;
}

inline std::vector<double> random_u(std::mt19937_64& eng, std::size_t n) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> u(n);
  for (auto& v : u) v = unif(eng);
  return u;
}

}  // namespace testing
