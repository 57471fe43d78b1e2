#include "molaff/simgraph.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <unordered_map>

#include "molaff/csv.hpp"
#include "molaff/error.hpp"
#include "molaff/parallel.hpp"

namespace molaff::simgraph {

std::size_t SimilarityGraph::edge_count() const {
  std::size_t twice = 0;
  for (const auto& nbrs : adjacency) twice += nbrs.size();
  return twice / 2;
}

std::vector<int> SimilarityGraph::mask(ingest::Split s) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == s) out.push_back(static_cast<int>(i));
  }
  return out;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw Error(ErrorKind::ShapeMismatch, "cosine similarity of unequal lengths");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw Error(ErrorKind::ZeroVector, "cosine similarity of a zero vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

Matrix similarity_matrix(const Matrix& rows, const std::vector<std::string>& ids) {
  const Eigen::Index n = rows.rows();
  Vector norms = rows.rowwise().norm();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (norms(i) == 0.0) {
      const std::string who = static_cast<std::size_t>(i) < ids.size() ? ids[static_cast<std::size_t>(i)] : std::to_string(i);
      throw Error(ErrorKind::ZeroVector, "fingerprint of '" + who + "' is all zeros");
    }
  }
  Matrix unit = rows;
  for (Eigen::Index i = 0; i < n; ++i) unit.row(i) /= norms(i);

  Matrix sim(n, n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t ui) {
    const auto i = static_cast<Eigen::Index>(ui);
    sim(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      sim(i, j) = std::clamp(unit.row(i).dot(unit.row(j)), -1.0, 1.0);
    }
  });
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) sim(i, j) = sim(j, i);
  }
  return sim;
}

Adjacency select_top_k(const Matrix& similarity, int k) {
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "K must be at least 1");
  const auto n = static_cast<std::size_t>(similarity.rows());
  Adjacency selected(n);
  parallel_for(n, [&](std::size_t i) {
    std::vector<double> others;
    others.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) others.push_back(similarity(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    if (others.empty()) return;
    const std::size_t rank = std::min<std::size_t>(static_cast<std::size_t>(k), others.size());
    std::nth_element(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(rank - 1), others.end(),
                     std::greater<>());
    const double cutoff = others[rank - 1];
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && similarity(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) >= cutoff) {
        selected[i].push_back(static_cast<int>(j));
      }
    }
  });
  return selected;
}

SimilarityGraph build_similarity_graph(const ingest::FeatureTable& fingerprints, int k) {
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "K must be at least 1");
  if (fingerprints.rows() < 2) throw Error(ErrorKind::InsufficientRows, "similarity graph needs at least 2 nodes");

  const Matrix sim = similarity_matrix(fingerprints.values, fingerprints.ids);
  SimilarityGraph g;
  g.ids = fingerprints.ids;
  g.selected = select_top_k(sim, k);

  const std::size_t n = g.ids.size();
  g.adjacency.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    for (int j : g.selected[i]) {
      g.adjacency[i].push_back(j);
      g.adjacency[static_cast<std::size_t>(j)].push_back(static_cast<int>(i));
    }
  }
  g.edge_similarity.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    auto& nbrs = g.adjacency[i];
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    for (int j : nbrs) g.edge_similarity[i].push_back(sim(static_cast<Eigen::Index>(i), j));
  }
  g.labeled.assign(n, false);
  g.labels.assign(n, 0.0);
  g.split.assign(n, ingest::Split::Unlabeled);
  return g;
}

void attach_node_data(SimilarityGraph& graph, const ingest::FeatureTable& features,
                      const std::vector<ingest::MoleculeRecord>& records) {
  graph.features = features.select_rows(graph.ids).values;
  std::unordered_map<std::string, const ingest::MoleculeRecord*> by_id;
  for (const auto& r : records) by_id.emplace(r.id, &r);
  const std::size_t n = graph.size();
  graph.labeled.assign(n, false);
  graph.labels.assign(n, 0.0);
  graph.split.assign(n, ingest::Split::Unlabeled);
  for (std::size_t i = 0; i < n; ++i) {
    auto it = by_id.find(graph.ids[i]);
    if (it == by_id.end() || !it->second->label) continue;
    graph.labeled[i] = true;
    graph.labels[i] = *it->second->label;
    graph.split[i] = it->second->split;
  }
}

std::vector<std::vector<int>> connected_components(const Adjacency& adjacency) {
  const std::size_t n = adjacency.size();
  std::vector<bool> seen(n, false);
  std::vector<std::vector<int>> components;
  for (std::size_t s = 0; s < n; ++s) {
    if (seen[s]) continue;
    std::vector<int> comp{static_cast<int>(s)};
    seen[s] = true;
    for (std::size_t k = 0; k < comp.size(); ++k) {
      for (int u : adjacency[static_cast<std::size_t>(comp[k])]) {
        if (!seen[static_cast<std::size_t>(u)]) {
          seen[static_cast<std::size_t>(u)] = true;
          comp.push_back(u);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    components.push_back(std::move(comp));
  }
  return components;
}

SimilarityGraph prune_unlabeled_components(const SimilarityGraph& graph) {
  const std::size_t n = graph.size();
  std::vector<bool> keep(n, false);
  for (const auto& comp : connected_components(graph.adjacency)) {
    const bool any_label = std::any_of(comp.begin(), comp.end(), [&](int v) { return graph.labeled[static_cast<std::size_t>(v)]; });
    if (any_label) {
      for (int v : comp) keep[static_cast<std::size_t>(v)] = true;
    }
  }
  std::vector<int> remap(n, -1);
  std::vector<std::size_t> survivors;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) {
      remap[i] = static_cast<int>(survivors.size());
      survivors.push_back(i);
    }
  }
  if (survivors.empty()) throw Error(ErrorKind::NoLabeledNodes, "graph has no labeled nodes");

  SimilarityGraph out;
  const bool has_features = graph.features.rows() == static_cast<Eigen::Index>(n);
  if (has_features) out.features.resize(static_cast<Eigen::Index>(survivors.size()), graph.features.cols());
  auto remap_list = [&](const std::vector<int>& list) {
    std::vector<int> mapped;
    for (int v : list) {
      if (remap[static_cast<std::size_t>(v)] >= 0) mapped.push_back(remap[static_cast<std::size_t>(v)]);
    }
    return mapped;
  };
  for (std::size_t k = 0; k < survivors.size(); ++k) {
    const std::size_t i = survivors[k];
    out.ids.push_back(graph.ids[i]);
    out.adjacency.push_back(remap_list(graph.adjacency[i]));
    out.edge_similarity.push_back(graph.edge_similarity.empty() ? std::vector<double>{} : graph.edge_similarity[i]);
    out.selected.push_back(graph.selected.empty() ? std::vector<int>{} : remap_list(graph.selected[i]));
    out.labeled.push_back(graph.labeled[i]);
    out.labels.push_back(graph.labels[i]);
    out.split.push_back(graph.split[i]);
    if (has_features) out.features.row(static_cast<Eigen::Index>(k)) = graph.features.row(static_cast<Eigen::Index>(i));
  }
  return out;
}

std::string edge_list_csv(const SimilarityGraph& graph) {
  std::vector<std::tuple<std::string, std::string, double>> edges;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    for (std::size_t e = 0; e < graph.adjacency[i].size(); ++e) {
      const auto j = static_cast<std::size_t>(graph.adjacency[i][e]);
      if (graph.ids[i] < graph.ids[j]) {
        const double s = graph.edge_similarity.empty() ? 0.0 : graph.edge_similarity[i][e];
        edges.emplace_back(graph.ids[i], graph.ids[j], s);
      }
    }
  }
  std::sort(edges.begin(), edges.end());
  std::string out;
  csv::Writer w(out);
  w.row({"src_id", "dst_id", "similarity"});
  for (const auto& [a, b, s] : edges) w.row({a, b, csv::format_double(s)});
  return out;
}

}  // namespace molaff::simgraph
