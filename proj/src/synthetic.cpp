#include "cforest/synthetic.hpp"

#include "cforest/error.hpp"
#include "cforest/rng.hpp"

namespace cforest {

Dataset BlobsGenerator::sample(std::size_t n, std::uint64_t draw_seed) const {
  require(n_classes >= 1 && n_features >= 1, ErrorCode::InvalidConfig, "blobs need >= 1 class and feature");
  Engine centers_eng = make_engine(seed, Stream::Synthetic, 0);
  Matrix centers(static_cast<std::size_t>(n_classes), n_features);
  for (auto& c : centers.data()) c = center_box * (2.0 * uniform01(centers_eng) - 1.0);

  Engine eng = make_engine(draw_seed, Stream::Synthetic, 1);
  Dataset d;
  d.task = Task::Classification;
  d.n_classes = n_classes;
  d.features = Matrix(n, n_features);
  d.targets.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto cls = uniform_index(eng, static_cast<std::uint64_t>(n_classes));
    d.targets[i] = static_cast<double>(cls);
    for (std::size_t f = 0; f < n_features; ++f) {
      d.features(i, f) = centers(cls, f) + cluster_std * standard_normal(eng);
    }
  }
  return d;
}

Dataset LinearGenerator::sample(std::size_t n, std::uint64_t draw_seed) const {
  require(n_features >= 1, ErrorCode::InvalidConfig, "linear generator needs >= 1 feature");
  Engine w_eng = make_engine(seed, Stream::Synthetic, 0);
  std::vector<double> w(n_features);
  for (auto& v : w) v = standard_normal(w_eng);

  Engine eng = make_engine(draw_seed, Stream::Synthetic, 2);
  Dataset d;
  d.task = Task::Regression;
  d.features = Matrix(n, n_features);
  d.targets.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double y = 0.0;
    for (std::size_t f = 0; f < n_features; ++f) {
      const double x = standard_normal(eng);
      d.features(i, f) = x;
      y += w[f] * x;
    }
    d.targets[i] = y + noise * standard_normal(eng);
  }
  return d;
}

}  // namespace cforest
