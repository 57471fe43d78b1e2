#include "molaff/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "molaff/error.hpp"
#include "molaff/parallel.hpp"

namespace molaff::cluster {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class WardMerger {
 public:
  explicit WardMerger(const Matrix& x)
      : n_(static_cast<std::size_t>(x.rows())),
        cost_(x.rows(), x.rows()),
        size_(n_, 1),
        node_(n_),
        active_(n_, true),
        nn_(n_, -1),
        nn_cost_(n_, kInf) {
    parallel_for(n_, [&](std::size_t ui) {
      const auto i = static_cast<Eigen::Index>(ui);
      for (Eigen::Index j = i + 1; j < x.rows(); ++j) cost_(i, j) = 0.5 * (x.row(i) - x.row(j)).squaredNorm();
    });
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < i; ++j) cost_(i, j) = cost_(j, i);
    }
    std::iota(node_.begin(), node_.end(), 0);
    for (std::size_t i = 0; i < n_; ++i) refresh(i);
  }

  Dendrogram run() {
    Dendrogram d;
    d.leaves = n_;
    for (std::size_t step = 0; step + 1 < n_; ++step) {
      std::size_t i = n_;
      for (std::size_t k = 0; k < n_; ++k) {
        if (active_[k] && nn_[k] >= 0 && (i == n_ || nn_cost_[k] < nn_cost_[i])) i = k;
      }
      const auto j = static_cast<std::size_t>(nn_[i]);
      const double merged_cost = cost_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      merge(i, j);
      Merge m;
      m.a = std::min(node_[i], node_[j]);
      m.b = std::max(node_[i], node_[j]);
      m.height = std::sqrt(2.0 * std::max(0.0, merged_cost));
      m.size = size_[i];
      node_[i] = static_cast<int>(n_ + step);
      d.merges.push_back(m);
    }
    return d;
  }

 private:
  double& at(std::size_t a, std::size_t b) { return cost_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)); }

  // Nearest active partner with a larger index.
  void refresh(std::size_t i) {
    nn_[i] = -1;
    nn_cost_[i] = kInf;
    for (std::size_t j = i + 1; j < n_; ++j) {
      if (active_[j] && (nn_[i] < 0 || at(i, j) < nn_cost_[i])) {
        nn_[i] = static_cast<int>(j);
        nn_cost_[i] = at(i, j);
      }
    }
  }

  // Merges j into i (i < j) with Lance-Williams updates, then repairs the cache.
  void merge(std::size_t i, std::size_t j) {
    const double ni = size_[i], nj = size_[j];
    const double cij = at(i, j);
    for (std::size_t k = 0; k < n_; ++k) {
      if (!active_[k] || k == i || k == j) continue;
      const double nk = size_[k];
      const double updated = ((ni + nk) * at(i, k) + (nj + nk) * at(j, k) - nk * cij) / (ni + nj + nk);
      at(i, k) = updated;
      at(k, i) = updated;
    }
    active_[j] = false;
    size_[i] += size_[j];

    for (std::size_t k = 0; k < n_; ++k) {
      if (!active_[k] || k == i) continue;
      if (k < i) {
        if (nn_[k] == static_cast<int>(i) || nn_[k] == static_cast<int>(j)) {
          refresh(k);
        } else {
          const double c = at(k, i);
          if (c < nn_cost_[k] || (c == nn_cost_[k] && static_cast<int>(i) < nn_[k])) {
            nn_[k] = static_cast<int>(i);
            nn_cost_[k] = c;
          }
        }
      } else if (k < j && nn_[k] == static_cast<int>(j)) {
        refresh(k);
      }
    }
    refresh(i);
  }

  std::size_t n_;
  Matrix cost_;
  std::vector<int> size_;
  std::vector<int> node_;
  std::vector<bool> active_;
  std::vector<int> nn_;
  std::vector<double> nn_cost_;
};

int count_clusters(std::span<const int> labels) {
  int k = 0;
  for (int l : labels) {
    if (l < 0) throw Error(ErrorKind::InvalidArgument, "cluster labels must be non-negative");
    k = std::max(k, l + 1);
  }
  std::vector<bool> seen(static_cast<std::size_t>(k), false);
  for (int l : labels) seen[static_cast<std::size_t>(l)] = true;
  if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
    throw Error(ErrorKind::InvalidArgument, "cluster labels must cover 0..K-1 with no empty cluster");
  }
  return k;
}

Matrix pairwise_distances(const Matrix& x) {
  const Eigen::Index n = x.rows();
  Matrix d(n, n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t ui) {
    const auto i = static_cast<Eigen::Index>(ui);
    d(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = (x.row(i) - x.row(j)).norm();
  });
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) d(i, j) = d(j, i);
  }
  return d;
}

double silhouette(const Matrix& dist, std::span<const int> labels, int k) {
  const std::size_t n = labels.size();
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  std::vector<double> per_point(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    const auto own = static_cast<std::size_t>(labels[i]);
    if (counts[own] == 1) return;
    std::vector<double> sums(static_cast<std::size_t>(k), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      sums[static_cast<std::size_t>(labels[j])] += dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    const double a = sums[own] / (counts[own] - 1);
    double b = kInf;
    for (std::size_t c = 0; c < sums.size(); ++c) {
      if (c != own) b = std::min(b, sums[c] / counts[c]);
    }
    const double denom = std::max(a, b);
    per_point[i] = denom > 0.0 ? (b - a) / denom : 0.0;
  });
  return std::accumulate(per_point.begin(), per_point.end(), 0.0) / static_cast<double>(n);
}

Scores centroid_scores(const Matrix& x, std::span<const int> labels, int k) {
  const Eigen::Index d = x.cols();
  const auto n = static_cast<double>(labels.size());
  Matrix centroids = Matrix::Zero(k, d);
  std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    centroids.row(labels[i]) += x.row(static_cast<Eigen::Index>(i));
    counts[static_cast<std::size_t>(labels[i])] += 1.0;
  }
  for (int c = 0; c < k; ++c) centroids.row(c) /= counts[static_cast<std::size_t>(c)];
  const Eigen::RowVectorXd overall = x.colwise().mean();

  std::vector<double> scatter(static_cast<std::size_t>(k), 0.0);
  double within = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto diff = x.row(static_cast<Eigen::Index>(i)) - centroids.row(labels[i]);
    scatter[static_cast<std::size_t>(labels[i])] += diff.norm();
    within += diff.squaredNorm();
  }
  double between = 0.0;
  for (int c = 0; c < k; ++c) {
    scatter[static_cast<std::size_t>(c)] /= counts[static_cast<std::size_t>(c)];
    between += counts[static_cast<std::size_t>(c)] * (centroids.row(c) - overall).squaredNorm();
  }

  double db = 0.0;
  for (int i = 0; i < k; ++i) {
    double worst = 0.0;
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      const double sep = (centroids.row(i) - centroids.row(j)).norm();
      const double ratio = sep > 0.0 ? (scatter[static_cast<std::size_t>(i)] + scatter[static_cast<std::size_t>(j)]) / sep : kInf;
      worst = std::max(worst, ratio);
    }
    db += worst;
  }

  Scores s;
  s.davies_bouldin = db / k;
  s.calinski_harabasz = within > 0.0 ? (between / (k - 1)) / (within / (n - k)) : kInf;
  return s;
}

}  // namespace

Dendrogram ward_linkage(const Matrix& x) {
  if (x.rows() < 1) throw Error(ErrorKind::InsufficientRows, "ward linkage on an empty matrix");
  return WardMerger(x).run();
}

std::vector<int> cut(const Dendrogram& dendrogram, int k) {
  const std::size_t n = dendrogram.leaves;
  if (k < 1 || static_cast<std::size_t>(k) > n) {
    throw Error(ErrorKind::InvalidArgument, "K=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int v) {
    while (parent[static_cast<std::size_t>(v)] != v) {
      parent[static_cast<std::size_t>(v)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
      v = parent[static_cast<std::size_t>(v)];
    }
    return v;
  };
  std::vector<int> leaf_of(n + dendrogram.merges.size());
  std::iota(leaf_of.begin(), leaf_of.begin() + static_cast<std::ptrdiff_t>(n), 0);
  const std::size_t steps = n - static_cast<std::size_t>(k);
  for (std::size_t s = 0; s < steps; ++s) {
    const Merge& m = dendrogram.merges[s];
    const int ra = find(leaf_of[static_cast<std::size_t>(m.a)]);
    const int rb = find(leaf_of[static_cast<std::size_t>(m.b)]);
    parent[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
    leaf_of[n + s] = std::min(ra, rb);
  }
  std::vector<int> labels(n, -1);
  std::vector<int> label_of_root(n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto root = static_cast<std::size_t>(find(static_cast<int>(i)));
    if (label_of_root[root] < 0) label_of_root[root] = next++;
    labels[i] = label_of_root[root];
  }
  return labels;
}

ClusterResult ward_cluster(const Matrix& x, int k) {
  if (k < 1 || k > x.rows()) {
    throw Error(ErrorKind::InvalidArgument, "K=" + std::to_string(k) + " outside [1, " + std::to_string(x.rows()) + "]");
  }
  ClusterResult r;
  r.k = k;
  r.dendrogram = ward_linkage(x);
  r.labels = cut(r.dendrogram, k);
  r.medoids = select_medoids(x, r.labels);
  if (k >= 2) r.scores = score_partition(x, r.labels);
  return r;
}

Scores score_partition(const Matrix& x, std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != x.rows()) throw Error(ErrorKind::ShapeMismatch, "labels/rows mismatch");
  const int k = count_clusters(labels);
  if (k < 2) throw Error(ErrorKind::InvalidArgument, "validity indices need at least 2 clusters");
  Scores s = centroid_scores(x, labels, k);
  s.silhouette = silhouette(pairwise_distances(x), labels, k);
  return s;
}

int choose_k(std::span<const SweepEntry> entries) {
  if (entries.empty()) throw Error(ErrorKind::InvalidArgument, "empty sweep");
  std::size_t best_s = 0, best_db = 0, best_ch = 0;
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].scores.silhouette > entries[best_s].scores.silhouette) best_s = i;
    if (entries[i].scores.davies_bouldin < entries[best_db].scores.davies_bouldin) best_db = i;
    if (entries[i].scores.calinski_harabasz > entries[best_ch].scores.calinski_harabasz) best_ch = i;
  }
  std::vector<int> votes(entries.size(), 0);
  ++votes[best_s];
  ++votes[best_db];
  ++votes[best_ch];
  std::size_t chosen = 0;
  for (std::size_t i = 1; i < entries.size(); ++i) {
    const auto& a = entries[i].scores;
    const auto& b = entries[chosen].scores;
    if (votes[i] != votes[chosen]) {
      if (votes[i] > votes[chosen]) chosen = i;
    } else if (a.silhouette != b.silhouette) {
      if (a.silhouette > b.silhouette) chosen = i;
    } else if (a.davies_bouldin < b.davies_bouldin) {
      chosen = i;
    }
  }
  return entries[chosen].k;
}

SweepResult sweep_k(const Matrix& x, int k_min, int k_max) {
  if (k_min < 2 || k_max < k_min || k_max >= x.rows()) {
    throw Error(ErrorKind::InvalidArgument, "K range [" + std::to_string(k_min) + ", " + std::to_string(k_max) +
                                                "] invalid for " + std::to_string(x.rows()) + " rows");
  }
  SweepResult result;
  result.dendrogram = ward_linkage(x);
  const Matrix dist = pairwise_distances(x);
  for (int k = k_min; k <= k_max; ++k) {
    const auto labels = cut(result.dendrogram, k);
    SweepEntry e;
    e.k = k;
    e.scores = centroid_scores(x, labels, k);
    e.scores.silhouette = silhouette(dist, labels, k);
    result.entries.push_back(e);
  }
  result.chosen_k = choose_k(result.entries);
  return result;
}

std::vector<int> select_medoids(const Matrix& x, std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != x.rows()) throw Error(ErrorKind::ShapeMismatch, "labels/rows mismatch");
  const int k = count_clusters(labels);
  std::vector<std::vector<int>> members(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));
  std::vector<int> medoids(static_cast<std::size_t>(k));
  parallel_for(static_cast<std::size_t>(k), [&](std::size_t c) {
    const auto& m = members[c];
    double best = kInf;
    for (int i : m) {
      double total = 0.0;
      for (int j : m) total += (x.row(i) - x.row(j)).norm();
      if (total < best) {
        best = total;
        medoids[c] = i;
      }
    }
  });
  return medoids;
}

Matrix pca_project(const Matrix& x, int dims) {
  if (dims < 1 || dims > x.cols()) {
    throw Error(ErrorKind::InvalidArgument, "PCA dims=" + std::to_string(dims) + " exceeds " + std::to_string(x.cols()) + " columns");
  }
  if (x.rows() < dims) throw Error(ErrorKind::InsufficientRows, "PCA needs at least dims rows");
  const Matrix centered = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(x.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  // Eigenvalues ascend; take the last `dims` columns in reverse.
  Eigen::MatrixXd axes(x.cols(), dims);
  for (int c = 0; c < dims; ++c) {
    Eigen::VectorXd v = eig.eigenvectors().col(x.cols() - 1 - c);
    Eigen::Index arg = 0;
    for (Eigen::Index r = 1; r < v.size(); ++r) {
      if (std::abs(v(r)) > std::abs(v(arg))) arg = r;
    }
    if (v(arg) < 0.0) v = -v;
    axes.col(c) = v;
  }
  return centered * axes;
}

Matrix cluster_input(const Matrix& fingerprints, const Vector& predicted) {
  if (fingerprints.rows() != predicted.size()) throw Error(ErrorKind::ShapeMismatch, "fingerprints/predictions length mismatch");
  Matrix out(fingerprints.rows(), fingerprints.cols() + 1);
  out.leftCols(fingerprints.cols()) = fingerprints;
  const double mean = predicted.mean();
  const double sd = std::sqrt((predicted.array() - mean).square().mean());
  if (sd > 0.0) {
    out.col(fingerprints.cols()) = (predicted.array() - mean) / sd;
  } else {
    out.col(fingerprints.cols()).setZero();
  }
  return out;
}

}  // namespace molaff::cluster
