#pragma once

#include <optional>
#include <span>
#include <vector>

#include "molaff/types.hpp"

namespace molaff::cluster {

/// One agglomeration step. Leaves are 0..n-1; the cluster formed at step s
/// gets id n+s. `height` is the Ward distance sqrt(2 * increase in SSE).
struct Merge {
  int a = 0;
  int b = 0;
  double height = 0.0;
  int size = 0;
};

struct Dendrogram {
  std::size_t leaves = 0;
  std::vector<Merge> merges;
};

/// Ward agglomeration via Lance-Williams updates on the merge-cost matrix,
/// with a cached nearest neighbour per row. Among equal costs the pair with
/// the lexicographically smallest (i, j) is merged, where a cluster's index
/// is its smallest member row.
Dendrogram ward_linkage(const Matrix& x);

/// Labels after undoing all but the first n-k merges. Labels are numbered by
/// first appearance in row order, so label 0 holds row 0.
std::vector<int> cut(const Dendrogram& dendrogram, int k);

struct Scores {
  double silhouette = 0.0;
  double davies_bouldin = 0.0;
  double calinski_harabasz = 0.0;
};

struct ClusterResult {
  int k = 0;
  std::vector<int> labels;
  Dendrogram dendrogram;
  std::optional<Scores> scores;
  std::vector<int> medoids;  // row index per cluster
};

ClusterResult ward_cluster(const Matrix& x, int k);

/// Euclidean silhouette (singletons score 0), Davies-Bouldin and
/// Calinski-Harabasz. Needs at least two clusters.
Scores score_partition(const Matrix& x, std::span<const int> labels);

struct SweepEntry {
  int k = 0;
  Scores scores;
};

struct SweepResult {
  std::vector<SweepEntry> entries;
  int chosen_k = 0;
  Dendrogram dendrogram;
};

/// Cuts one dendrogram at every K in [k_min, k_max] and picks the K that wins
/// most of {max silhouette, min Davies-Bouldin, max Calinski-Harabasz}. Ties
/// go to higher silhouette, then lower Davies-Bouldin, then smaller K.
SweepResult sweep_k(const Matrix& x, int k_min, int k_max);

int choose_k(std::span<const SweepEntry> entries);

/// Row minimising summed Euclidean distance to its cluster, per cluster
/// label 0..K-1. Ties go to the smaller row index.
std::vector<int> select_medoids(const Matrix& x, std::span<const int> labels);

/// Projection of centered rows onto the leading principal axes, each axis
/// signed so its largest-magnitude loading is positive.
Matrix pca_project(const Matrix& x, int dims = 2);

/// [fingerprint | z-scored predicted affinity]. A constant prediction vector
/// contributes a zero column.
Matrix cluster_input(const Matrix& fingerprints, const Vector& predicted);

}  // namespace molaff::cluster
