// molaff: PFAS affinity pipeline driver.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "molaff/config.hpp"
#include "molaff/error.hpp"
#include "molaff/pipeline.hpp"

namespace {

int fail(int code, const std::string& msg) {
  std::cerr << "molaff: error: " << msg << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised GraphSAGE affinity regression and Ward clustering for PFAS.\n" +
               molaff::config_reference() + "\nMOLAFF_THREADS caps internal parallelism.\n"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;

  const std::pair<const char*, const char*> commands[] = {
      {"preprocess", "prune correlated descriptors and standardize them"},
      {"train", "build the similarity graph and train the graph model"},
      {"cluster", "predict every molecule, sweep K for Ward clustering, write reports"},
      {"benchmark", "compare ridge, tree, MLP and graph model on every fingerprint"},
      {"stats", "structural statistics from the molecules file"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "pipeline config (JSON)")->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out_dir, "override output_dir");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    molaff::PipelineConfig config = molaff::PipelineConfig::load(config_path);
    if (seed) config.set_seed(*seed);
    if (!out_dir.empty()) config.output_dir = out_dir;
    auto warn = [](const std::string& msg) { std::cerr << "molaff: warning: " << msg << "\n"; };

    nlohmann::ordered_json summary;
    if (command == "preprocess") summary = molaff::pipeline::run_preprocess(config, warn);
    else if (command == "train") summary = molaff::pipeline::run_train(config, warn);
    else if (command == "cluster") summary = molaff::pipeline::run_cluster(config, warn);
    else if (command == "benchmark") summary = molaff::pipeline::run_benchmark(config, warn);
    else summary = molaff::pipeline::run_stats(config, warn);
    std::cout << summary.dump(2) << "\n";
    return 0;
  } catch (const molaff::Error& e) {
    return fail(molaff::is_user_error(e.kind()) ? 2 : 1, e.what());
  } catch (const std::exception& e) {
    return fail(1, e.what());
  }
}
