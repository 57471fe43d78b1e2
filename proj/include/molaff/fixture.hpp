#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "molaff/ingest.hpp"

namespace molaff::fixture {

/// Synthetic PFAS-like dataset with planted structure. Molecules belong to a
/// community (shared label level and fingerprint pattern) inside a family
/// (shared fingerprint block and head group). Descriptors carry the label
/// through heavy per-molecule noise, so averaging over graph neighbours
/// recovers signal that a per-row model cannot.
struct FixtureConfig {
  int families = 5;
  int communities_per_family = 12;
  int community_size = 10;
  int family_bits = 8;
  int shared_bits = 12;
  int signal_descriptors = 16;
  double descriptor_noise = 1.0;
  double label_fraction = 0.3;
  double label_offset = -7.0;
  std::uint64_t seed = 1;
};

struct Fixture {
  ingest::FeatureTable fingerprints;         // count-style
  ingest::FeatureTable binary_fingerprints;  // presence bits plus noise bits
  ingest::FeatureTable descriptors;
  std::map<std::string, double> labels;      // the labeled subset
  std::map<std::string, std::string> smiles;
  std::vector<double> truth;                 // label for every molecule
  std::vector<int> family;
  std::vector<int> community;
};

Fixture make_fixture(const FixtureConfig& config);

/// Writes fingerprints.csv, fingerprints_binary.csv, descriptors.csv,
/// labels.csv, molecules.csv and a ready-to-run config.json into `dir`.
void write_fixture(const Fixture& fixture, const std::filesystem::path& dir, std::uint64_t seed);

}  // namespace molaff::fixture
