#include "molaff/fixture.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "molaff/csv.hpp"
#include "molaff/random.hpp"

namespace molaff::fixture {

namespace {

std::string molecule_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "m%04d", i);
  return buf;
}

std::string pfas_smiles(int family, int chain) {
  static const char* heads[] = {"OC(=O)", "OS(=O)(=O)", "NS(=O)(=O)", "OCC", "CCOC(=O)", "OP(=O)(O)OCC"};
  std::string s = heads[family % 6];
  for (int c = 1; c < chain; ++c) s += "C(F)(F)";
  s += "C(F)(F)F";
  return s;
}

}  // namespace

Fixture make_fixture(const FixtureConfig& config) {
  Rng rng(config.seed);
  const int n_comm = config.families * config.communities_per_family;
  const int n = n_comm * config.community_size;
  const int fp_dims = config.families * config.family_bits + config.shared_bits;

  std::vector<std::vector<int>> pattern(static_cast<std::size_t>(n_comm), std::vector<int>(static_cast<std::size_t>(config.shared_bits)));
  std::vector<double> level(static_cast<std::size_t>(n_comm));
  for (int c = 0; c < n_comm; ++c) {
    for (auto& b : pattern[static_cast<std::size_t>(c)]) b = static_cast<int>(rng.below(5));
    level[static_cast<std::size_t>(c)] = rng.normal();
  }
  Vector direction(config.signal_descriptors);
  for (Eigen::Index j = 0; j < direction.size(); ++j) direction(j) = rng.normal();
  direction.normalize();

  Fixture fx;
  fx.fingerprints.values = Matrix::Zero(n, fp_dims);
  const int binary_dims = config.families * config.family_bits + 4 * config.shared_bits + 8;
  fx.binary_fingerprints.values = Matrix::Zero(n, binary_dims);
  const int extra_desc = 5;
  fx.descriptors.values = Matrix::Zero(n, config.signal_descriptors + extra_desc);

  for (int i = 0; i < n; ++i) {
    const int comm = i / config.community_size;
    const int fam = comm / config.communities_per_family;
    const std::string id = molecule_id(i);
    fx.fingerprints.ids.push_back(id);
    fx.binary_fingerprints.ids.push_back(id);
    fx.descriptors.ids.push_back(id);
    fx.family.push_back(fam);
    fx.community.push_back(comm);

    for (int b = 0; b < config.family_bits; ++b) {
      fx.fingerprints.values(i, fam * config.family_bits + b) = 4.0 + (rng.uniform01() < 0.3 ? 1.0 : 0.0);
    }
    for (int b = 0; b < config.shared_bits; ++b) {
      const double u = rng.uniform01();
      const double jitter = u < 0.1 ? -1.0 : (u > 0.9 ? 1.0 : 0.0);
      fx.fingerprints.values(i, config.families * config.family_bits + b) =
          std::max(0.0, pattern[static_cast<std::size_t>(comm)][static_cast<std::size_t>(b)] + jitter);
    }
    // thermometer bits: shared count c sets c of its four bits
    const int family_dims = config.families * config.family_bits;
    for (int b = 0; b < family_dims; ++b) fx.binary_fingerprints.values(i, b) = fx.fingerprints.values(i, b) > 0.0 ? 1.0 : 0.0;
    for (int b = 0; b < config.shared_bits; ++b) {
      for (int level = 0; level < 4; ++level) {
        fx.binary_fingerprints.values(i, family_dims + 4 * b + level) =
            fx.fingerprints.values(i, family_dims + b) > level ? 1.0 : 0.0;
      }
    }
    for (int b = 0; b < 8; ++b) fx.binary_fingerprints.values(i, binary_dims - 8 + b) = rng.uniform01() < 0.2 ? 1.0 : 0.0;

    const double signal = level[static_cast<std::size_t>(comm)] + 0.1 * rng.normal();
    fx.truth.push_back(config.label_offset + signal);
    for (int j = 0; j < config.signal_descriptors; ++j) {
      fx.descriptors.values(i, j) = signal * direction(j) + config.descriptor_noise * rng.normal();
    }
    const int base = config.signal_descriptors;
    fx.descriptors.values(i, base) = 2.0 * fx.descriptors.values(i, 0) + 1.0;  // redundant copy
    fx.descriptors.values(i, base + 1) = 3.5;                                   // constant
    for (int j = 2; j < extra_desc; ++j) fx.descriptors.values(i, base + j) = rng.normal();

    fx.smiles.emplace(id, pfas_smiles(fam, 3 + comm % 8));
  }

  for (int b = 0; b < fp_dims; ++b) fx.fingerprints.columns.push_back("fp" + std::to_string(b));
  for (int b = 0; b < binary_dims; ++b) fx.binary_fingerprints.columns.push_back("bit" + std::to_string(b));
  for (int j = 0; j < config.signal_descriptors; ++j) fx.descriptors.columns.push_back("desc" + std::to_string(j));
  fx.descriptors.columns.insert(fx.descriptors.columns.end(), {"desc0_scaled", "const", "noise0", "noise1", "noise2"});

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<int>(order));
  const auto labeled = static_cast<std::size_t>(config.label_fraction * n + 0.5);
  for (std::size_t k = 0; k < labeled; ++k) {
    const int i = order[k];
    fx.labels.emplace(molecule_id(i), fx.truth[static_cast<std::size_t>(i)]);
  }
  return fx;
}

void write_fixture(const Fixture& fixture, const std::filesystem::path& dir, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  csv::write_file(dir / "fingerprints.csv", ingest::write_feature_table_csv(fixture.fingerprints));
  csv::write_file(dir / "fingerprints_binary.csv", ingest::write_feature_table_csv(fixture.binary_fingerprints));
  csv::write_file(dir / "descriptors.csv", ingest::write_feature_table_csv(fixture.descriptors));

  std::string labels;
  csv::Writer lw(labels);
  lw.row({"id", "score"});
  for (const auto& [id, score] : fixture.labels) lw.row({id, csv::format_double(score)});
  csv::write_file(dir / "labels.csv", labels);

  std::string molecules;
  csv::Writer mw(molecules);
  mw.row({"id", "smiles"});
  for (const auto& id : fixture.fingerprints.ids) mw.row({id, fixture.smiles.at(id)});
  csv::write_file(dir / "molecules.csv", molecules);

  nlohmann::ordered_json config = {
      {"seed", seed},
      {"paths",
       {{"fingerprints",
         nlohmann::ordered_json::array({{{"name", "count"}, {"path", "fingerprints.csv"}},
                                        {{"name", "binary"}, {"path", "fingerprints_binary.csv"}}})},
        {"descriptors", "descriptors.csv"},
        {"labels", "labels.csv"},
        {"molecules", "molecules.csv"}}},
      {"output_dir", "out"}};
  csv::write_file(dir / "config.json", config.dump(2) + "\n");
}

}  // namespace molaff::fixture
