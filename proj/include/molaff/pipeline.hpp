#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "molaff/config.hpp"
#include "molaff/simgraph.hpp"
#include "molaff/smiles.hpp"

namespace molaff::pipeline {

/// Receives non-fatal warnings (skipped steps, dropped rows).
using WarningSink = std::function<void(const std::string&)>;

/// Test R² values reported alongside results for comparison with the
/// published model table.
struct ReferenceScore {
  const char* model;
  double r2;
};
inline constexpr ReferenceScore kReferenceR2[] = {{"ridge", 0.53}, {"decision_tree", 0.54}, {"svr", 0.58},
                                                   {"random_forest", 0.60}, {"dnn", 0.62}, {"gcn", 0.66}};

/// Each stage reads its inputs from the config and earlier artifacts in
/// config.output_dir, writes its own artifacts there and returns a summary
/// (also written as JSON).
nlohmann::ordered_json run_preprocess(const PipelineConfig& config, const WarningSink& warn = {});
nlohmann::ordered_json run_train(const PipelineConfig& config, const WarningSink& warn = {});
nlohmann::ordered_json run_cluster(const PipelineConfig& config, const WarningSink& warn = {});
nlohmann::ordered_json run_benchmark(const PipelineConfig& config, const WarningSink& warn = {});
nlohmann::ordered_json run_stats(const PipelineConfig& config, const WarningSink& warn = {});

/// Graph for one fingerprint source over the preprocessed descriptors, with
/// split-assigned labels attached and unlabeled components removed.
struct GraphData {
  simgraph::SimilarityGraph graph;
  ingest::FeatureTable fingerprints;  // rows aligned with graph.ids
  std::size_t candidates = 0;         // molecules with both fingerprint and descriptors
  std::size_t zero_fingerprints = 0;
  std::size_t pruned = 0;
};

GraphData build_graph(const PipelineConfig& config, const FingerprintSource& source,
                      const ingest::FeatureTable& descriptors, const std::vector<ingest::MoleculeRecord>& records,
                      const WarningSink& warn = {});

/// Split-assigned records over the preprocessed descriptor ids.
std::vector<ingest::MoleculeRecord> split_records(const PipelineConfig& config,
                                                  const ingest::FeatureTable& descriptors);

/// Structural stats CSV for a molecules table; failures go to `warn`.
std::string structural_stats_csv(const std::vector<std::string>& ids,
                                 const std::map<std::string, std::string>& smiles, const WarningSink& warn,
                                 std::vector<std::optional<smiles::StructuralStats>>* stats = nullptr);

}  // namespace molaff::pipeline
