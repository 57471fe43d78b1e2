#pragma once

#include <span>
#include <string>
#include <vector>

#include "molaff/ingest.hpp"
#include "molaff/types.hpp"

namespace molaff::simgraph {

using Adjacency = std::vector<std::vector<int>>;

/// Undirected molecular similarity graph with node data for semi-supervised
/// training. Neighbor lists are sorted ascending and contain no self-loops.
struct SimilarityGraph {
  std::vector<std::string> ids;
  Adjacency adjacency;
  /// Similarity of each adjacency entry (parallel to `adjacency`); metadata only.
  std::vector<std::vector<double>> edge_similarity;
  /// Each node's own top-K selection before symmetrisation.
  Adjacency selected;

  Matrix features;
  std::vector<bool> labeled;
  std::vector<double> labels;  // 0 where unlabeled
  std::vector<ingest::Split> split;

  std::size_t size() const { return ids.size(); }
  std::size_t edge_count() const;

  /// Node indices whose split equals `s`.
  std::vector<int> mask(ingest::Split s) const;
};

double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// Dense pairwise cosine similarity; exactly symmetric. Throws ZeroVector if
/// any row is all zeros.
Matrix similarity_matrix(const Matrix& rows, const std::vector<std::string>& ids = {});

/// For each node, every other node whose similarity is at least the K-th
/// largest similarity of that node (ties at the boundary are all included).
Adjacency select_top_k(const Matrix& similarity, int k);

/// Topology from raw fingerprints; node data is left empty.
SimilarityGraph build_similarity_graph(const ingest::FeatureTable& fingerprints, int k);

/// Fills features, labels and split from a descriptor table (matched by id)
/// and split-assigned records (matched by id; absent ids are unlabeled).
void attach_node_data(SimilarityGraph& graph, const ingest::FeatureTable& features,
                      const std::vector<ingest::MoleculeRecord>& records);

/// Connected components, each a sorted list of node indices, ordered by their
/// smallest member.
std::vector<std::vector<int>> connected_components(const Adjacency& adjacency);

/// Removes components with no labeled node. Survivors keep their order.
SimilarityGraph prune_unlabeled_components(const SimilarityGraph& graph);

/// `src_id,dst_id,similarity` with src_id < dst_id, rows sorted.
std::string edge_list_csv(const SimilarityGraph& graph);

}  // namespace molaff::simgraph
