#include <doctest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "molaff/config.hpp"
#include "molaff/csv.hpp"
#include "molaff/fixture.hpp"
#include "molaff/pipeline.hpp"
#include "test_util.hpp"

using namespace molaff;
using testutil::error_kind;
using testutil::read_text;
using testutil::write_text;
namespace fs = std::filesystem;

namespace {

using ojson = nlohmann::ordered_json;

/// Small fixture plus a config tuned for test speed.
fs::path small_fixture(const fs::path& dir, std::uint64_t seed = 3) {
  fixture::FixtureConfig fc;
  fc.families = 3;
  fc.communities_per_family = 4;
  fc.community_size = 8;
  fc.label_fraction = 0.5;
  fc.seed = seed;
  fixture::write_fixture(fixture::make_fixture(fc), dir, seed);
  ojson cfg = ojson::parse(read_text(dir / "config.json"));
  cfg["model"] = {{"hidden", {16, 16}}, {"max_epochs", 40}, {"patience", 10}};
  cfg["cluster"] = {{"k_min", 2}, {"k_max", 6}};
  cfg["baselines"] = {{"folds", 3},
                      {"mlp_epochs", 10},
                      {"ridge", {{"alpha", {0.1, 10}}}},
                      {"tree", {{"max_depth", {2}}}},
                      {"mlp", {{"hidden_width", {8}}}}};
  write_text(dir / "config.json", cfg.dump(2));
  return dir / "config.json";
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MOLAFF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t data_rows(const fs::path& csv_path) { return csv::read(csv_path).rows.size(); }

std::string header(const fs::path& csv_path) {
  const std::string text = read_text(csv_path);
  return text.substr(0, text.find('\n'));
}

}  // namespace

TEST_CASE("config defaults, path resolution and validation") {
  testutil::TempDir dir("cfg");
  const ojson minimal = {{"paths", {{"fingerprints", "fp.csv"}, {"descriptors", "d.csv"}, {"labels", "sub/l.csv"}}}};
  const PipelineConfig c = PipelineConfig::from_json(minimal, dir.path());
  CHECK(c.k_edges == 4);
  CHECK(c.correlation_threshold == 0.95);
  CHECK(c.split.train == 0.6);
  CHECK(c.k_min == 2);
  CHECK(c.k_max == 15);
  CHECK(c.cv_folds == 10);
  CHECK(c.model.hidden == std::vector<int>{128, 128});
  CHECK(c.labels == dir.path() / "sub/l.csv");
  CHECK(c.fingerprints.front().name == "fingerprint");
  CHECK(c.output_dir == dir.path() / "out");

  auto with = [&](const char* section, ojson value) {
    ojson j = minimal;
    j[section] = std::move(value);
    return error_kind([&] { PipelineConfig::from_json(j, dir.path()); });
  };
  CHECK(with("graph", {{"k_edges", 0}}) == ErrorKind::InvalidConfig);
  CHECK(with("preprocess", {{"correlation_threshold", 1.5}}) == ErrorKind::InvalidConfig);
  CHECK(with("split", {{"train", 0.5}}) == ErrorKind::InvalidConfig);
  CHECK(with("cluster", {{"k_min", 1}}) == ErrorKind::InvalidConfig);
  CHECK(with("model", {{"dropout", -0.1}}) == ErrorKind::InvalidConfig);
  CHECK(with("bogus", 1) == ErrorKind::InvalidConfig);
  CHECK(error_kind([&] { PipelineConfig::load(dir / "absent.json"); }) == ErrorKind::MissingFile);
  write_text(dir / "broken.json", "{ not json");
  CHECK(error_kind([&] { PipelineConfig::load(dir / "broken.json"); }) == ErrorKind::InvalidConfig);
  CHECK(config_reference().find("k_edges") != std::string::npos);
}

TEST_CASE("preprocess reports the dropped duplicate column and is byte-stable") {
  testutil::TempDir dir("pre");
  write_text(dir / "d.csv", "id,a,b,c,d,e\nm1,1,5,2,0,3\nm2,2,3,4,1,1\nm3,3,9,6,0,2\nm4,4,1,8,1,5\nm5,0,2,0,0,4\n");
  write_text(dir / "l.csv", "id,score\nm1,1\nm2,2\nm3,3\n");
  write_text(dir / "fp.csv", "id,x\nm1,1\n");
  const ojson j = {{"paths", {{"fingerprints", "fp.csv"}, {"descriptors", "d.csv"}, {"labels", "l.csv"}}}};
  const PipelineConfig c = PipelineConfig::from_json(j, dir.path());
  const auto summary = pipeline::run_preprocess(c);
  CHECK(summary["columns_before"] == 5);
  CHECK(summary["dropped_correlated"] == 1);
  CHECK(summary["columns_after"] == 4);
  CHECK(data_rows(c.output_dir / "pruned_columns.csv") == 1);
  CHECK(read_text(c.output_dir / "pruned_columns.csv").find("c,correlated") != std::string::npos);

  const std::string first = read_text(c.output_dir / "descriptors_std.csv") + read_text(c.output_dir / "scaler.json");
  pipeline::run_preprocess(c);
  CHECK(first == read_text(c.output_dir / "descriptors_std.csv") + read_text(c.output_dir / "scaler.json"));
}

TEST_CASE("stages need the artifacts of earlier stages") {
  testutil::TempDir dir("order");
  const PipelineConfig c = PipelineConfig::load(small_fixture(dir.path()));
  try {
    pipeline::run_train(c);
    FAIL("train without preprocess");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingArtifact);
    CHECK(std::string(e.what()).find("molaff preprocess") != std::string::npos);
  }
  pipeline::run_preprocess(c);
  try {
    pipeline::run_cluster(c);
    FAIL("cluster without train");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingArtifact);
    CHECK(std::string(e.what()).find("molaff train") != std::string::npos);
  }
}

TEST_CASE("end-to-end stages on a small fixture") {
  testutil::TempDir dir("e2e");
  const PipelineConfig c = PipelineConfig::load(small_fixture(dir.path()));
  pipeline::run_preprocess(c);
  const auto metrics = pipeline::run_train(c);
  for (const char* f : {"model.json", "train_history.csv", "metrics.json", "graph_edges.csv", "split.csv"}) {
    CHECK_MESSAGE(fs::exists(c.output_dir / f), f);
  }
  CHECK(metrics["reference_r2"]["gcn"] == 0.66);
  CHECK(metrics["reference_r2"]["ridge"] == 0.53);
  CHECK(metrics["splits"]["test"]["r2"].is_number());

  const auto clustered = pipeline::run_cluster(c);
  const int k = clustered["chosen_k"];
  CHECK(data_rows(c.output_dir / "medoids.csv") == static_cast<std::size_t>(k));
  CHECK(data_rows(c.output_dir / "cluster_sweep.csv") == 5);
  CHECK(header(c.output_dir / "projection.csv") == "id,pc1,pc2,cluster");
  CHECK(header(c.output_dir / "medoids.csv") == "cluster,id,smiles,predicted");
  CHECK(fs::exists(c.output_dir / "structural_stats.csv"));
  CHECK(fs::exists(c.output_dir / "cluster_groups.csv"));
  CHECK(fs::exists(c.output_dir / "cluster_chains.csv"));
  CHECK(data_rows(c.output_dir / "cluster_groups.csv") == static_cast<std::size_t>(k));

  pipeline::run_benchmark(c);
  const csv::Document bench = csv::read(c.output_dir / "benchmark.csv");
  REQUIRE(bench.rows.size() == 8);
  const char* order[] = {"ridge", "tree", "mlp", "gcn"};
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(bench.rows[i][0] == order[i % 4]);
    CHECK(bench.rows[i][1] == (i < 4 ? "count" : "binary"));
    CHECK_FALSE(bench.rows[i][2].empty());
  }
  CHECK(read_text(c.output_dir / "benchmark_report.md").find("0.66") != std::string::npos);
}

TEST_CASE("changing the seed changes the history but not the schema") {
  testutil::TempDir dir("seed");
  PipelineConfig c = PipelineConfig::load(small_fixture(dir.path()));
  pipeline::run_preprocess(c);
  pipeline::run_train(c);
  const std::string a = read_text(c.output_dir / "train_history.csv");
  c.set_seed(c.seed + 1);
  pipeline::run_train(c);
  const std::string b = read_text(c.output_dir / "train_history.csv");
  CHECK(a != b);
  CHECK(a.substr(0, a.find('\n')) == b.substr(0, b.find('\n')));
}

TEST_CASE("cluster skips structural statistics without a SMILES column") {
  testutil::TempDir dir("nosmiles");
  PipelineConfig c = PipelineConfig::load(small_fixture(dir.path()));
  write_text(c.molecules, "id,name\nm0000,x\n");
  pipeline::run_preprocess(c);
  pipeline::run_train(c);
  std::vector<std::string> warnings;
  const auto summary = pipeline::run_cluster(c, [&](const std::string& w) { warnings.push_back(w); });
  CHECK(summary["structural_stats"] == false);
  CHECK_FALSE(fs::exists(c.output_dir / "structural_stats.csv"));
  CHECK(fs::exists(c.output_dir / "medoids.csv"));
  REQUIRE_FALSE(warnings.empty());
  CHECK(warnings.front().find("skipped") != std::string::npos);
}

TEST_CASE("stats command writes one row per parsed molecule") {
  testutil::TempDir dir("stats");
  write_text(dir / "m.csv", "id,smiles\na,OC(=O)C(F)(F)F\nb,C(((\nc,CCO\n");
  const ojson j = {{"paths", {{"fingerprints", "fp.csv"}, {"descriptors", "d.csv"}, {"labels", "l.csv"}, {"molecules", "m.csv"}}}};
  const PipelineConfig c = PipelineConfig::from_json(j, dir.path());
  std::vector<std::string> warnings;
  const auto s = pipeline::run_stats(c, [&](const std::string& w) { warnings.push_back(w); });
  CHECK(s["failed"] == 1);
  CHECK(warnings.size() == 1);
  CHECK(data_rows(c.output_dir / "structural_stats.csv") == 2);
}

TEST_CASE("CLI exit codes") {
  testutil::TempDir dir("cli");
  const fs::path cfg = small_fixture(dir.path());
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("preprocess") == 2);
  CHECK(run_cli("preprocess --config " + (dir / "absent.json").string()) == 2);
  CHECK(run_cli("train --config " + cfg.string()) == 2);  // preprocess artifacts missing

  fs::rename(dir / "labels.csv", dir / "labels.bak");
  CHECK(run_cli("preprocess --config " + cfg.string()) == 2);
  fs::rename(dir / "labels.bak", dir / "labels.csv");

  const fs::path out = dir / "elsewhere";
  CHECK(run_cli("preprocess --config " + cfg.string() + " --out " + out.string()) == 0);
  CHECK(fs::exists(out / "descriptors_std.csv"));
  CHECK(run_cli("train --config " + cfg.string() + " --out " + out.string() + " --seed 9") == 0);
  CHECK(ojson::parse(read_text(out / "metrics.json"))["seed"] == 9);

  write_text(out / "model.json", "{\"format\": \"molaff-sage\", \"version\": 7}");
  CHECK(run_cli("cluster --config " + cfg.string() + " --out " + out.string()) == 2);
}
