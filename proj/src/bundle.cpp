#include "cforest/bundle.hpp"

#include <fstream>

#include "cforest/binary_io.hpp"
#include "cforest/persistence.hpp"

namespace cforest {

namespace {

constexpr char kMagic[4] = {'C', 'F', 'R', 'B'};
constexpr char kEnd[4] = {'E', 'N', 'D', '!'};

void put_strings(io::Writer& w, const std::vector<std::string>& v) {
  w.put<std::uint64_t>(v.size());
  for (const auto& s : v) w.put_string(s);
}

std::vector<std::string> get_strings(io::Reader& r) {
  const auto n = r.get<std::uint64_t>();
  require(n < (std::uint64_t{1} << 32), ErrorCode::CorruptBundle, "implausible string count");
  std::vector<std::string> v(n);
  for (auto& s : v) s = r.get_string();
  return v;
}

void put_raps(io::Writer& w, const RapsParams& p) {
  w.put<std::int32_t>(p.k_star);
  w.put<double>(p.lambda_star);
  w.put<std::uint8_t>(p.randomized);
  w.put<std::uint8_t>(p.allow_empty_sets);
}

RapsParams get_raps(io::Reader& r) {
  RapsParams p;
  p.k_star = r.get<std::int32_t>();
  p.lambda_star = r.get<double>();
  p.randomized = r.get<std::uint8_t>() != 0;
  p.allow_empty_sets = r.get<std::uint8_t>() != 0;
  return p;
}

void expect_tag(io::Reader& r, const char (&tag)[4]) {
  for (char c : tag) {
    if (r.get<char>() != c) fail(ErrorCode::CorruptBundle, "bad section tag");
  }
}

}  // namespace

const RapsParams& Bundle::raps() const {
  return std::visit(
      [](const auto& s) -> const RapsParams& {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, SplitConformal>) {
          return s.calibration.raps;
        } else {
          return s.raps;
        }
      },
      state);
}

void write_bundle(std::ostream& os, const Bundle& b) {
  io::Writer w(os);
  for (char c : kMagic) w.put<char>(c);
  w.put<std::uint32_t>(kBundleVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(b.task));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(b.method));
  w.put<std::uint64_t>(b.seed);
  put_strings(w, b.feature_names);
  put_strings(w, b.class_labels);
  put_raps(w, b.raps());

  switch (b.method) {
    case Method::Split: {
      const auto& sc = std::get<SplitConformal>(b.state);
      w.put<std::uint8_t>(static_cast<std::uint8_t>(sc.calibration.score_kind));
      w.put_vector(sc.calibration.sorted_scores);
      write_forest(w, sc.model);
      break;
    }
    case Method::CvPlus: {
      const auto& cv = std::get<CvCalibration>(b.state);
      w.put<std::uint64_t>(cv.K);
      w.put<std::int32_t>(cv.n_classes);
      w.put_vector(cv.fold_of);
      w.put_vector(cv.scores);
      for (const auto& m : cv.fold_models) write_forest(w, m);
      break;
    }
    case Method::JackknifeAfterBootstrap: {
      const auto& jab = std::get<JabCalibration>(b.state);
      w.put<std::uint64_t>(jab.B_tilde);
      std::vector<std::uint64_t> active(jab.active.begin(), jab.active.end());
      w.put_vector(active);
      w.put_vector(jab.scores);
      write_forest(w, jab.model);
      break;
    }
  }
  for (char c : kEnd) w.put<char>(c);
}

Bundle read_bundle(std::istream& is) {
  io::Reader r(is);
  expect_tag(r, kMagic);
  const auto version = r.get<std::uint32_t>();
  require(version == kBundleVersion, ErrorCode::CorruptBundle, "unsupported bundle version " + std::to_string(version));

  Bundle b;
  const auto task = r.get<std::uint8_t>();
  const auto method = r.get<std::uint8_t>();
  require(task <= 1 && method <= 2, ErrorCode::CorruptBundle, "bad task/method tag");
  b.task = static_cast<Task>(task);
  b.method = static_cast<Method>(method);
  b.seed = r.get<std::uint64_t>();
  b.feature_names = get_strings(r);
  b.class_labels = get_strings(r);
  const RapsParams raps = get_raps(r);

  switch (b.method) {
    case Method::Split: {
      SplitConformal sc;
      const auto kind = r.get<std::uint8_t>();
      require(kind <= 2, ErrorCode::CorruptBundle, "bad score kind");
      sc.calibration.score_kind = static_cast<ScoreKind>(kind);
      sc.calibration.sorted_scores = r.get_vector<double>();
      sc.calibration.raps = raps;
      sc.model = read_forest(r);
      b.state = std::move(sc);
      break;
    }
    case Method::CvPlus: {
      CvCalibration cv;
      cv.K = r.get<std::uint64_t>();
      cv.n_classes = r.get<std::int32_t>();
      cv.fold_of = r.get_vector<std::uint32_t>();
      cv.scores = r.get_vector<double>();
      require(cv.K >= 2 && cv.K <= cv.fold_of.size() && cv.scores.size() == cv.fold_of.size(), ErrorCode::CorruptBundle,
              "inconsistent cv section");
      for (auto f : cv.fold_of) require(f < cv.K, ErrorCode::CorruptBundle, "fold index out of range");
      for (std::size_t k = 0; k < cv.K; ++k) cv.fold_models.push_back(read_forest(r));
      cv.task = b.task;
      cv.raps = raps;
      b.state = std::move(cv);
      break;
    }
    case Method::JackknifeAfterBootstrap: {
      JabCalibration jab;
      jab.B_tilde = r.get<std::uint64_t>();
      const auto active = r.get_vector<std::uint64_t>();
      jab.active.assign(active.begin(), active.end());
      jab.scores = r.get_vector<double>();
      jab.model = read_forest(r);
      jab.oob = oob_tree_sets(jab.model);
      jab.raps = raps;
      require(jab.scores.size() == jab.active.size(), ErrorCode::CorruptBundle, "score/active length mismatch");
      for (auto i : jab.active) {
        require(i < jab.model.n_train && !jab.oob.sets[i].empty(), ErrorCode::CorruptBundle, "bad active index");
      }
      b.state = std::move(jab);
      break;
    }
  }
  expect_tag(r, kEnd);
  return b;
}

void save_bundle(const Bundle& bundle, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  write_bundle(os, bundle);
}

Bundle load_bundle(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::IoError, "cannot open " + path.string());
  return read_bundle(is);
}

}  // namespace cforest
