// Writes the synthetic planted-structure dataset and a config to run on it.

#include <iostream>

#include <CLI11.hpp>

#include "molaff/error.hpp"
#include "molaff/fixture.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic PFAS-like fixture."};
  std::string dir;
  std::uint64_t seed = 1;
  double label_fraction = 0.3;
  app.add_option("dir", dir, "output directory")->required();
  app.add_option("--seed", seed, "generator seed (also written into config.json)");
  app.add_option("--label-fraction", label_fraction, "share of molecules with a label")->check(CLI::Range(0.01, 1.0));
  CLI11_PARSE(app, argc, argv);

  try {
    molaff::fixture::FixtureConfig cfg;
    cfg.seed = seed;
    cfg.label_fraction = label_fraction;
    molaff::fixture::write_fixture(molaff::fixture::make_fixture(cfg), dir, seed);
  } catch (const std::exception& e) {
    std::cerr << "molaff_fixture: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
