#include <doctest.h>

#include <cmath>

#include "molaff/ingest.hpp"
#include "test_util.hpp"

using namespace molaff;
using namespace molaff::ingest;
using testutil::error_kind;

namespace {

FeatureTable make_table(std::vector<std::string> columns, const std::vector<std::vector<double>>& rows) {
  FeatureTable t;
  t.columns = std::move(columns);
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.columns.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    t.ids.push_back("m" + std::to_string(i));
    for (std::size_t j = 0; j < rows[i].size(); ++j) t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return t;
}

FeatureTable random_table(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  FeatureTable t;
  for (std::size_t j = 0; j < cols; ++j) t.columns.push_back("c" + std::to_string(j));
  t.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    t.ids.push_back("m" + std::to_string(i));
    for (std::size_t j = 0; j < cols; ++j) t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rng.normal();
  }
  return t;
}

std::vector<MoleculeRecord> labeled_records(std::size_t n, std::size_t unlabeled = 0) {
  std::vector<std::string> ids;
  std::map<std::string, double> labels;
  for (std::size_t i = 0; i < n + unlabeled; ++i) {
    ids.push_back("m" + std::to_string(i));
    if (i < n) labels["m" + std::to_string(i)] = static_cast<double>(i);
  }
  return make_records(ids, labels);
}

std::array<std::size_t, 3> counts(const std::vector<MoleculeRecord>& records) {
  std::array<std::size_t, 3> c{};
  for (const auto& r : records) {
    if (r.split != Split::Unlabeled) ++c[static_cast<std::size_t>(r.split)];
  }
  return c;
}

}  // namespace

TEST_CASE("load_feature_table parses ids, columns and values in file order") {
  testutil::TempDir dir("ingest_load");
  auto path = testutil::write_text(dir / "t.csv", "id,a,b\nm3,1,2.5\nm1,-3,4e2\nm2,+0.5,0\n");
  const FeatureTable t = load_feature_table(path);
  CHECK(t.rows() == 3);
  CHECK(t.cols() == 2);
  CHECK(t.ids == std::vector<std::string>{"m3", "m1", "m2"});
  CHECK(t.values(1, 1) == 400.0);
  CHECK(t.values(2, 0) == 0.5);
}

TEST_CASE("load_feature_table rejects malformed input") {
  testutil::TempDir dir("ingest_bad");
  CHECK(error_kind([&] { load_feature_table(dir / "absent.csv"); }) == ErrorKind::MissingFile);

  auto dup = testutil::write_text(dir / "dup.csv", "id,a\nm1,1\nm1,2\n");
  CHECK(error_kind([&] { load_feature_table(dup); }) == ErrorKind::DuplicateId);

  auto text = testutil::write_text(dir / "abc.csv", "id,a,b\nm1,1,2\nm2,3,abc\n");
  try {
    load_feature_table(text);
    FAIL("expected NonNumericCell");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonNumericCell);
    const std::string msg = e.what();
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("'b'") != std::string::npos);
  }

  auto empty = testutil::write_text(dir / "empty.csv", "id,a,b\nm1,1,\nm2,3,4\n");
  CHECK(error_kind([&] { load_feature_table(empty); }) == ErrorKind::EmptyCell);
  const FeatureTable kept = load_feature_table(empty, {.drop_incomplete_rows = true});
  CHECK(kept.ids == std::vector<std::string>{"m2"});

  auto inf = testutil::write_text(dir / "inf.csv", "id,a\nm1,inf\n");
  CHECK(error_kind([&] { load_feature_table(inf); }) == ErrorKind::NonFiniteCell);

  auto no_id = testutil::write_text(dir / "noid.csv", "name,a\nm1,1\n");
  CHECK(error_kind([&] { load_feature_table(no_id); }).has_value());
}

TEST_CASE("prune_correlated drops the later column of a perfectly correlated pair") {
  const FeatureTable t = make_table({"A", "B", "C"}, {{1, 5, 2}, {2, 3, 4}, {3, 9, 6}, {4, 1, 8}});
  const PruneResult r = prune_correlated(t, 0.95);
  CHECK(r.dropped_correlated == std::vector<std::string>{"C"});
  CHECK(r.table.columns == std::vector<std::string>{"A", "B"});
}

TEST_CASE("prune_correlated removes constant columns before the scan") {
  const FeatureTable t = make_table({"k", "A", "B"}, {{7, 1, 2}, {7, 2, 1}, {7, 3, 5}});
  const PruneResult r = prune_correlated(t, 0.95);
  CHECK(r.dropped_constant == std::vector<std::string>{"k"});
  CHECK(r.dropped().size() == 1);
}

TEST_CASE("prune_correlated keeps independent random columns") {
  const FeatureTable t = random_table(200, 12, 99);
  for (Eigen::Index a = 0; a < 12; ++a) {
    for (Eigen::Index b = a + 1; b < 12; ++b) CHECK(std::abs(pearson(t.values.col(a), t.values.col(b))) < 0.95);
  }
  CHECK(prune_correlated(t, 0.95).dropped().empty());
}

TEST_CASE("prune_correlated output never holds a pair above the threshold") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    FeatureTable t = random_table(40, 15, 100 + static_cast<std::uint64_t>(trial));
    // mix columns so many pairs are strongly correlated
    for (Eigen::Index j = 1; j < 15; ++j) {
      const auto src = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(j)));
      const double w = rng.uniform(0.0, 1.0);
      t.values.col(j) = w * t.values.col(src) + (1.0 - w) * t.values.col(j);
    }
    const double threshold = rng.uniform(0.5, 0.95);
    const PruneResult r = prune_correlated(t, threshold);
    for (Eigen::Index a = 0; a < r.table.values.cols(); ++a) {
      for (Eigen::Index b = a + 1; b < r.table.values.cols(); ++b) {
        CHECK(std::abs(pearson(r.table.values.col(a), r.table.values.col(b))) <= threshold);
      }
    }
    CHECK(r.table.cols() + r.dropped().size() == t.cols());
  }
}

TEST_CASE("prune_correlated validates its arguments") {
  const FeatureTable one = make_table({"a"}, {{1}});
  CHECK(error_kind([&] { prune_correlated(one, 0.9); }) == ErrorKind::InsufficientRows);
  const FeatureTable two = make_table({"a"}, {{1}, {2}});
  CHECK(error_kind([&] { prune_correlated(two, 0.0); }) == ErrorKind::InvalidArgument);
  CHECK(error_kind([&] { prune_correlated(two, 1.5); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("standardize uses the population standard deviation") {
  const FeatureTable t = make_table({"x", "k"}, {{1, 5}, {2, 5}, {3, 5}});
  const StandardizeResult r = standardize(t);
  REQUIRE(r.table.columns == std::vector<std::string>{"x"});
  CHECK(r.params.dropped == std::vector<std::string>{"k"});
  const double z = std::sqrt(1.5);
  CHECK(std::abs(r.table.values(0, 0) + z) < 1e-10);
  CHECK(std::abs(r.table.values(1, 0)) < 1e-10);
  CHECK(std::abs(r.table.values(2, 0) - z) < 1e-10);
  CHECK(std::abs(r.table.values(0, 0) + 1.2247) < 1e-4);
}

TEST_CASE("standardize is idempotent on standardized data and refits to zero mean, unit sd") {
  const FeatureTable t = random_table(50, 6, 3);
  const StandardizeResult once = standardize(t);
  const StandardizeResult twice = standardize(once.table);
  CHECK((twice.table.values - once.table.values).cwiseAbs().maxCoeff() < 1e-12);
  for (std::size_t j = 0; j < twice.params.columns.size(); ++j) {
    CHECK(std::abs(twice.params.mean[j]) < 1e-10);
    CHECK(std::abs(twice.params.stddev[j] - 1.0) < 1e-8);
  }
}

TEST_CASE("standardize apply mode reuses parameters and rejects unknown columns") {
  const FeatureTable train = make_table({"a", "b"}, {{1, 2}, {3, 6}, {5, 4}});
  const StandardizeResult fit = standardize(train);
  const FeatureTable held = make_table({"a", "b"}, {{2, 3}, {9, 9}});
  const StandardizeResult a1 = standardize(held, fit.params);
  const StandardizeResult a2 = standardize(held, fit.params);
  CHECK(a1.table.values == a2.table.values);
  CHECK(std::abs(a1.table.values(0, 0) - (2.0 - 3.0) / std::sqrt(8.0 / 3.0)) < 1e-12);

  const FeatureTable extra = make_table({"a", "z"}, {{1, 1}});
  CHECK(error_kind([&] { standardize(extra, fit.params); }) == ErrorKind::MissingColumn);
}

TEST_CASE("scaler parameters survive a JSON round trip") {
  const StandardizeResult fit = standardize(make_table({"a", "k", "b"}, {{1, 0, 2}, {3, 0, 6}, {5, 0, 4}}));
  const ScalerParams back = ScalerParams::from_json(fit.params.to_json());
  CHECK(back.columns == fit.params.columns);
  CHECK(back.mean == fit.params.mean);
  CHECK(back.stddev == fit.params.stddev);
  CHECK(back.dropped == fit.params.dropped);
}

TEST_CASE("split sizes") {
  CHECK(split_sizes(10, {}) == std::array<std::size_t, 3>{6, 2, 2});
  CHECK(split_sizes(829, {}) == std::array<std::size_t, 3>{497, 166, 166});
  CHECK(split_sizes(7, {}) == std::array<std::size_t, 3>{4, 2, 1});  // remainders .2/.4/.4, tie to val
  for (std::size_t n = 3; n < 300; ++n) {
    const auto s = split_sizes(n, {});
    CHECK(s[0] + s[1] + s[2] == n);
  }
}

TEST_CASE("make_split is a seeded partition of the labeled records") {
  const auto records = labeled_records(10, 4);
  const auto a = make_split(records, {}, 7);
  const auto b = make_split(records, {}, 7);
  CHECK(counts(a) == std::array<std::size_t, 3>{6, 2, 2});
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].split == b[i].split);
    CHECK(a[i].id == records[i].id);
    if (!records[i].label) CHECK(a[i].split == Split::Unlabeled);
  }
  const auto c = make_split(records, {}, 8);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs = differs || a[i].split != c[i].split;
  CHECK(differs);

  CHECK(counts(make_split(labeled_records(829), {}, 1)) == std::array<std::size_t, 3>{497, 166, 166});
}

TEST_CASE("make_split needs labeled records") {
  CHECK(error_kind([] { make_split(labeled_records(0, 5), {}, 1); }) == ErrorKind::InsufficientLabels);
  CHECK(error_kind([] { make_split(labeled_records(2), {}, 1); }) == ErrorKind::InsufficientLabels);
}

TEST_CASE("load_labels and load_smiles read id-keyed columns") {
  testutil::TempDir dir("ingest_labels");
  auto labels = testutil::write_text(dir / "l.csv", "id,score\nm1,-7.5\nm2,-8\n");
  const auto l = load_labels(labels);
  CHECK(l.size() == 2);
  CHECK(l.at("m1") == -7.5);
  auto smiles = testutil::write_text(dir / "s.csv", "name,smiles,id\nx,CCO,m1\n");
  CHECK(load_smiles(smiles).at("m1") == "CCO");
  auto no_smiles = testutil::write_text(dir / "n.csv", "id,name\nm1,x\n");
  CHECK(error_kind([&] { load_smiles(no_smiles); }) == ErrorKind::MissingColumn);
}
