#pragma once

#include <cstddef>
#include <cstdint>

#include "cforest/dataset.hpp"

namespace cforest {

/// Isotropic Gaussian blobs: labels uniform over n_classes, x = center + std * N(0, I).
/// Centers are fixed by `seed`; sample() draws i.i.d. rows, so train and test
/// sets from one generator are exchangeable.
struct BlobsGenerator {
  int n_classes = 3;
  std::size_t n_features = 2;
  double cluster_std = 1.0;
  double center_box = 5.0;
  std::uint64_t seed = 0;

  Dataset sample(std::size_t n, std::uint64_t draw_seed) const;
};

/// y = w . x + noise * N(0, 1) with x ~ N(0, I) and w fixed by `seed`.
struct LinearGenerator {
  std::size_t n_features = 5;
  double noise = 1.0;
  std::uint64_t seed = 0;

  Dataset sample(std::size_t n, std::uint64_t draw_seed) const;
};

}  // namespace cforest
