#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "molaff/types.hpp"

namespace molaff::ingest {

/// Row-aligned numeric table: one row per molecule, one column per feature.
struct FeatureTable {
  std::vector<std::string> ids;
  std::vector<std::string> columns;
  Matrix values;

  std::size_t rows() const { return ids.size(); }
  std::size_t cols() const { return columns.size(); }

  /// Row index of `id`, if present.
  std::optional<std::size_t> find(const std::string& id) const;

  /// Rows re-ordered (and possibly subset) to follow `ids`; every id must exist.
  FeatureTable select_rows(const std::vector<std::string>& ids) const;

  /// Throws on shape mismatch, duplicate ids or columns, or non-finite cells.
  void validate() const;
};

enum class Split { Train, Val, Test, Unlabeled };

std::string_view to_string(Split split);

struct MoleculeRecord {
  std::string id;
  std::string smiles;
  std::optional<double> label;
  Split split = Split::Unlabeled;
};

struct ScalerParams {
  std::vector<std::string> columns;
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<std::string> dropped;

  nlohmann::json to_json() const;
  static ScalerParams from_json(const nlohmann::json& j);
};

struct LoadOptions {
  bool drop_incomplete_rows = false;
};

FeatureTable load_feature_table(const std::filesystem::path& path, const LoadOptions& options = {});

/// Reads an `id,score` file. Ids must be unique; scores finite.
std::map<std::string, double> load_labels(const std::filesystem::path& path);

/// Reads an `id,smiles` file (extra columns ignored).
std::map<std::string, std::string> load_smiles(const std::filesystem::path& path);

/// One record per id; molecules absent from `labels` are unlabeled.
std::vector<MoleculeRecord> make_records(const std::vector<std::string>& ids,
                                         const std::map<std::string, double>& labels,
                                         const std::map<std::string, std::string>& smiles = {});

struct PruneResult {
  FeatureTable table;
  std::vector<std::string> dropped_constant;
  std::vector<std::string> dropped_correlated;

  std::vector<std::string> dropped() const;
};

/// Drops zero-variance columns, then scans columns in order and drops any
/// column whose |Pearson r| with an already retained column exceeds
/// `threshold`. The earlier column of a violating pair always survives.
PruneResult prune_correlated(const FeatureTable& table, double threshold);

/// Pearson correlation of two equally sized columns; 0 if either is constant.
double pearson(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

struct StandardizeResult {
  FeatureTable table;
  ScalerParams params;
};

/// Without `params`: fits per-column mean and population standard deviation,
/// drops zero-variance columns and transforms. With `params`: applies them
/// unchanged; columns listed in `params.dropped` are removed.
StandardizeResult standardize(const FeatureTable& table, const std::optional<ScalerParams>& params = std::nullopt);

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

/// Partition sizes for `n` labeled records: floors of n*ratio, with the
/// leftover records going to the largest fractional parts (train first on ties).
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios);

/// Assigns train/val/test to labeled records via a seeded shuffle. Unlabeled
/// records keep Split::Unlabeled. Record order is preserved.
std::vector<MoleculeRecord> make_split(std::vector<MoleculeRecord> records, const SplitRatios& ratios,
                                       std::uint64_t seed);

std::string write_feature_table_csv(const FeatureTable& table);

}  // namespace molaff::ingest
