#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "molaff/baselines.hpp"
#include "molaff/gnn.hpp"
#include "molaff/ingest.hpp"

namespace molaff {

struct FingerprintSource {
  std::string name;
  std::filesystem::path path;
};

struct PipelineConfig {
  std::uint64_t seed = 42;

  /// The first fingerprint builds the graph for train and cluster; benchmark
  /// iterates over all of them.
  std::vector<FingerprintSource> fingerprints;
  std::filesystem::path descriptors;
  std::filesystem::path labels;
  std::filesystem::path molecules;  // optional

  int k_edges = 4;
  double correlation_threshold = 0.95;
  ingest::SplitRatios split;
  gnn::TrainConfig model;
  int k_min = 2;
  int k_max = 15;

  int cv_folds = 10;
  std::vector<std::pair<baselines::Kind, baselines::Grid>> grids;
  baselines::MlpConfig mlp;

  std::filesystem::path output_dir = "out";

  /// Parses a JSON config. Relative paths resolve against the file's directory.
  static PipelineConfig load(const std::filesystem::path& path);
  static PipelineConfig from_json(const nlohmann::ordered_json& j, const std::filesystem::path& base_dir);

  /// Range checks on every numeric field; throws InvalidConfig.
  void validate() const;

  /// Effective configuration, written next to the artifacts.
  nlohmann::ordered_json to_json() const;

  /// Seed propagated into model, split, folds and MLP settings.
  void set_seed(std::uint64_t s);

  baselines::BaselineSpec baseline_spec(baselines::Kind kind) const;
};

/// Help text listing every key with its default.
std::string config_reference();

}  // namespace molaff
