#include <doctest.h>

#include <cmath>

#include "molaff/cluster.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace molaff;
using namespace molaff::cluster;
using testutil::error_kind;

namespace {

Matrix random_points(int n, int d, Rng& rng) {
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  return x;
}

Matrix blobs(int count, int per_blob, double spacing, Rng& rng) {
  Matrix x(count * per_blob, 2);
  for (int b = 0; b < count; ++b) {
    for (int p = 0; p < per_blob; ++p) {
      x(b * per_blob + p, 0) = spacing * (b % 5) + rng.normal();
      x(b * per_blob + p, 1) = spacing * (b / 5) + rng.normal();
    }
  }
  return x;
}

Matrix four_points() {
  Matrix x(4, 2);
  x << 0, 0, 0, 1, 10, 10, 10, 11;
  return x;
}

}  // namespace

TEST_CASE("ward examples") {
  Matrix line(4, 1);
  line << 0, 1, 10, 11;
  const ClusterResult two = ward_cluster(line, 2);
  CHECK(two.labels == std::vector<int>{0, 0, 1, 1});
  const ClusterResult all = ward_cluster(line, 4);
  CHECK(all.labels == std::vector<int>{0, 1, 2, 3});
  CHECK(error_kind([&] { ward_cluster(line, 0); }).has_value());
  CHECK(error_kind([&] { ward_cluster(line, 5); }).has_value());
}

TEST_CASE("ward heights are the Ward distance and never decrease") {
  Matrix line(4, 1);
  line << 0, 1, 10, 11;
  const Dendrogram d = ward_linkage(line);
  REQUIRE(d.merges.size() == 3);
  CHECK(std::abs(d.merges[0].height - 1.0) < 1e-12);
  CHECK(std::abs(d.merges[2].height - std::sqrt(2.0 * 100.0)) < 1e-9);
  CHECK(d.merges[2].size == 4);

  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Dendrogram r = ward_linkage(random_points(40, 3, rng));
    for (std::size_t s = 1; s < r.merges.size(); ++s) CHECK(r.merges[s].height >= r.merges[s - 1].height - 1e-12);
  }
}

TEST_CASE("ward matches the naive oracle on random instances") {
  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 5 + static_cast<int>(rng.below(26));
    const Matrix x = random_points(n, 1 + static_cast<int>(rng.below(4)), rng);
    const auto expected = oracle::naive_ward_partitions(x);
    const Dendrogram d = ward_linkage(x);
    for (int k = 1; k <= n; ++k) CHECK(cut(d, k) == expected[static_cast<std::size_t>(k)]);
  }
}

TEST_CASE("cuts are nested") {
  Rng rng(1);
  const Matrix x = random_points(25, 2, rng);
  const Dendrogram d = ward_linkage(x);
  for (int k = 2; k <= 25; ++k) {
    const auto fine = cut(d, k), coarse = cut(d, k - 1);
    // every fine cluster sits inside one coarse cluster
    std::map<int, int> parent;
    for (std::size_t i = 0; i < fine.size(); ++i) {
      auto [it, fresh] = parent.emplace(fine[i], coarse[i]);
      CHECK(it->second == coarse[i]);
    }
  }
}

TEST_CASE("validity indices on the four-point example") {
  const Scores s = score_partition(four_points(), std::vector<int>{0, 0, 1, 1});
  // per-point values: 0.93105, 0.92753, 0.92753, 0.93105
  CHECK(std::abs(s.silhouette - 0.9292895427118657) < 1e-12);
  CHECK(std::abs(s.davies_bouldin - 0.0707) < 5e-4);
  CHECK(std::abs(s.calinski_harabasz - 400.0) < 0.5);
  CHECK(error_kind([] { score_partition(four_points(), std::vector<int>{0, 0, 0, 0}); }).has_value());
}

TEST_CASE("validity indices agree with direct recomputation") {
  Rng rng(31);
  for (int trial = 0; trial < 15; ++trial) {
    const int n = 6 + static_cast<int>(rng.below(90));
    const Matrix x = random_points(n, 1 + static_cast<int>(rng.below(4)), rng);
    const int k = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(n - 1, 8))));
    const auto labels = cut(ward_linkage(x), k);
    const Scores s = score_partition(x, labels);
    const auto d = oracle::direct_scores(x, labels);
    CHECK(std::abs(s.silhouette - d.silhouette) < 1e-10);
    CHECK(std::abs(s.davies_bouldin - d.davies_bouldin) < 1e-10);
    CHECK(std::abs(s.calinski_harabasz - d.calinski_harabasz) < 1e-10 * std::max(1.0, d.calinski_harabasz));
  }
}

TEST_CASE("singleton clusters score zero silhouette") {
  Matrix x(3, 1);
  x << 0, 1, 10;
  const Scores s = score_partition(x, std::vector<int>{0, 0, 1});
  const auto d = oracle::direct_scores(x, {0, 0, 1});
  CHECK(std::abs(s.silhouette - d.silhouette) < 1e-12);
}

TEST_CASE("sweep picks the planted number of blobs") {
  Rng rng(2);
  const SweepResult two = sweep_k(blobs(2, 40, 12.0, rng), 2, 8);
  CHECK(two.chosen_k == 2);
  const SweepResult ten = sweep_k(blobs(10, 30, 10.0, rng), 2, 15);
  CHECK(ten.chosen_k == 10);
  CHECK(ten.entries.size() == 14);
  CHECK(error_kind([&] { sweep_k(four_points(), 1, 3); }).has_value());
  CHECK(error_kind([&] { sweep_k(four_points(), 2, 4); }).has_value());
}

TEST_CASE("choose_k voting and tie-breaks") {
  std::vector<SweepEntry> e(3);
  e[0] = {2, {0.5, 0.4, 100}};
  e[1] = {3, {0.6, 0.5, 90}};
  e[2] = {4, {0.4, 0.3, 80}};
  // silhouette votes 3, DB votes 4, CH votes 2: three-way tie goes to max silhouette
  CHECK(choose_k(e) == 3);
  e[2].scores.calinski_harabasz = 200;  // 4 now wins DB and CH
  CHECK(choose_k(e) == 4);
}

TEST_CASE("medoids minimise summed distance") {
  Matrix line(3, 1);
  line << 0, 1, 2;
  CHECK(select_medoids(line, std::vector<int>{0, 0, 0}) == std::vector<int>{1});
  CHECK(select_medoids(line, std::vector<int>{0, 1, 0})[1] == 1);

  Rng rng(9);
  const Matrix x = random_points(20, 3, rng);
  const std::vector<int> one(20, 0);
  int best = 0;
  double best_sum = 1e300;
  for (int i = 0; i < 20; ++i) {
    double s = 0.0;
    for (int j = 0; j < 20; ++j) s += (x.row(i) - x.row(j)).norm();
    if (s < best_sum) {
      best_sum = s;
      best = i;
    }
  }
  CHECK(select_medoids(x, one)[0] == best);
}

TEST_CASE("pca projection properties") {
  Rng rng(5);
  Matrix x(30, 2);
  for (Eigen::Index i = 0; i < 30; ++i) {
    x(i, 0) = 3.0 * rng.normal();
    x(i, 1) = 0.5 * rng.normal() + 0.3 * x(i, 0);
  }
  const Vector mean = x.colwise().mean().transpose();
  for (Eigen::Index i = 0; i < 30; ++i) x.row(i) -= mean.transpose();
  const Matrix p = pca_project(x, 2);
  for (int i = 0; i < 30; ++i) {
    for (int j = 0; j < 30; ++j) {
      CHECK(std::abs((p.row(i) - p.row(j)).norm() - (x.row(i) - x.row(j)).norm()) < 1e-10);
    }
  }
  const Vector var = p.colwise().squaredNorm().transpose();
  CHECK(var(0) >= var(1));

  Matrix line(10, 2);
  for (int i = 0; i < 10; ++i) line.row(i) << i, 2.0 * i;
  const Matrix q = pca_project(line, 2);
  const double mean2 = q.col(1).mean();
  CHECK((q.col(1).array() - mean2).square().mean() < 1e-12);
  CHECK(error_kind([&] { pca_project(line, 3); }).has_value());
}

TEST_CASE("cluster input appends the standardized prediction once") {
  Matrix fp(3, 2);
  fp << 1, 2, 3, 4, 5, 6;
  Vector pred(3);
  pred << -1, 0, 1;
  const Matrix x = cluster_input(fp, pred);
  CHECK(x.cols() == 3);
  CHECK(x.leftCols(2) == fp);
  CHECK(std::abs(x.col(2).mean()) < 1e-12);
  CHECK(std::abs(x.col(2).squaredNorm() / 3.0 - 1.0) < 1e-12);
}
