#include "cforest/persistence.hpp"

#include <fstream>

namespace cforest {

namespace {

constexpr char kForestMagic[4] = {'C', 'F', 'F', 'M'};
constexpr std::uint32_t kForestVersion = 1;

void write_optional(io::Writer& w, const auto& opt) {
  w.put<std::uint8_t>(opt.has_value());
  w.put<std::int64_t>(opt ? static_cast<std::int64_t>(*opt) : 0);
}

}  // namespace

void write_forest(io::Writer& w, const ForestModel& model) {
  for (char c : kForestMagic) w.put<char>(c);
  w.put<std::uint32_t>(kForestVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(model.task));
  w.put<std::int32_t>(model.n_classes);
  w.put<std::uint64_t>(model.n_features);
  w.put<std::uint64_t>(model.n_train);
  w.put<std::uint64_t>(model.seed);

  const auto& hp = model.hyperparams;
  w.put<std::int32_t>(hp.n_estimators);
  write_optional(w, hp.max_features);
  w.put<std::int32_t>(hp.min_samples_leaf);
  write_optional(w, hp.max_depth);
  write_optional(w, hp.bootstrap_size);

  w.put<std::uint64_t>(model.trees.size());
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    const Tree& tree = model.trees[t];
    w.put<std::uint64_t>(tree.width);
    w.put<std::uint64_t>(tree.n_features);
    w.put<std::uint64_t>(tree.nodes.size());
    for (const auto& nd : tree.nodes) {
      w.put<std::int32_t>(nd.feature);
      w.put<double>(nd.threshold);
      w.put<std::uint32_t>(nd.left);
      w.put<std::uint32_t>(nd.right);
      w.put<std::uint32_t>(nd.value);
    }
    w.put_vector(tree.values);
    std::vector<std::uint64_t> words(model.in_bag[t].words().begin(), model.in_bag[t].words().end());
    w.put_vector(words);
  }
}

ForestModel read_forest(io::Reader& r) {
  for (char c : kForestMagic) {
    if (r.get<char>() != c) fail(ErrorCode::CorruptBundle, "bad forest magic");
  }
  const auto version = r.get<std::uint32_t>();
  require(version == kForestVersion, ErrorCode::CorruptBundle, "unsupported forest version " + std::to_string(version));

  ForestModel model;
  const auto task = r.get<std::uint8_t>();
  require(task <= 1, ErrorCode::CorruptBundle, "bad task tag");
  model.task = static_cast<Task>(task);
  model.n_classes = r.get<std::int32_t>();
  model.n_features = r.get<std::uint64_t>();
  model.n_train = r.get<std::uint64_t>();
  model.seed = r.get<std::uint64_t>();

  auto read_opt = [&r]<typename T>(std::optional<T>& out) {
    const bool has = r.get<std::uint8_t>() != 0;
    const auto v = r.get<std::int64_t>();
    if (has) out = static_cast<T>(v);
  };
  auto& hp = model.hyperparams;
  hp.n_estimators = r.get<std::int32_t>();
  read_opt(hp.max_features);
  hp.min_samples_leaf = r.get<std::int32_t>();
  read_opt(hp.max_depth);
  read_opt(hp.bootstrap_size);

  const auto n_trees = r.get<std::uint64_t>();
  model.trees.resize(n_trees);
  model.in_bag.resize(n_trees);
  for (std::size_t t = 0; t < n_trees; ++t) {
    Tree& tree = model.trees[t];
    tree.width = r.get<std::uint64_t>();
    tree.n_features = r.get<std::uint64_t>();
    const auto n_nodes = r.get<std::uint64_t>();
    require(n_nodes >= 1 && n_nodes < (std::uint64_t{1} << 32), ErrorCode::CorruptBundle, "bad node count");
    tree.nodes.resize(n_nodes);
    for (auto& nd : tree.nodes) {
      nd.feature = r.get<std::int32_t>();
      nd.threshold = r.get<double>();
      nd.left = r.get<std::uint32_t>();
      nd.right = r.get<std::uint32_t>();
      nd.value = r.get<std::uint32_t>();
    }
    tree.values = r.get_vector<double>();
    require(tree.width >= 1 && tree.values.size() % tree.width == 0, ErrorCode::CorruptBundle, "bad leaf values");
    const std::size_t n_leaves = tree.values.size() / tree.width;
    for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
      const auto& nd = tree.nodes[k];
      if (nd.is_leaf()) {
        require(nd.value < n_leaves, ErrorCode::CorruptBundle, "leaf value index out of range");
      } else {
        // preorder: children come after their parent
        require(nd.left > k && nd.left < n_nodes && nd.right > k && nd.right < n_nodes &&
                    static_cast<std::uint64_t>(nd.feature) < model.n_features,
                ErrorCode::CorruptBundle, "bad internal node");
      }
    }
    model.in_bag[t] = Bitmap::from_words(model.n_train, r.get_vector<std::uint64_t>());
  }
  return model;
}

void save_forest(const ForestModel& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  io::Writer w(os);
  write_forest(w, model);
}

ForestModel load_forest(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::IoError, "cannot open " + path.string());
  io::Reader r(is);
  return read_forest(r);
}

}  // namespace cforest
