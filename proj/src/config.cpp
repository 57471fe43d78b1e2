#include "molaff/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "molaff/error.hpp"

namespace molaff {

namespace {

using ojson = nlohmann::ordered_json;

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorKind::InvalidConfig, msg); }

const ojson* section(const ojson& j, const char* key) {
  if (!j.contains(key)) return nullptr;
  const ojson& s = j.at(key);
  if (!s.is_object()) bad(std::string("section '") + key + "' must be an object");
  return &s;
}

template <typename T>
void read(const ojson* s, const char* key, T& out) {
  if (!s || !s->contains(key)) return;
  try {
    out = s->at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    bad(std::string("key '") + key + "' has the wrong type");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

void reject_unknown(const ojson& obj, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) bad("unknown key '" + key + "' in " + where);
  }
}

baselines::Grid parse_grid(const ojson& g, const std::string& where) {
  if (!g.is_object()) bad(where + " grid must be an object of arrays");
  baselines::Grid grid;
  for (const auto& [key, values] : g.items()) {
    if (!values.is_array() || values.empty()) bad(where + " grid entry '" + key + "' must be a non-empty array");
    std::vector<double> v;
    for (const auto& x : values) {
      if (!x.is_number()) bad(where + " grid entry '" + key + "' must hold numbers");
      v.push_back(x.get<double>());
    }
    grid.emplace_back(key, std::move(v));
  }
  return grid;
}

ojson grid_json(const baselines::Grid& grid) {
  ojson out = ojson::object();
  for (const auto& [key, values] : grid) out[key] = values;
  return out;
}

}  // namespace

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingFile, "config file not found: " + path.string());
  ojson j;
  try {
    j = ojson::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    bad("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j, path.parent_path());
}

PipelineConfig PipelineConfig::from_json(const ojson& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) bad("config root must be an object");
  reject_unknown(j, {"seed", "paths", "graph", "preprocess", "split", "model", "cluster", "baselines", "output_dir"},
                 "config");
  PipelineConfig c;
  read(&j, "seed", c.seed);

  const ojson* paths = section(j, "paths");
  if (!paths) bad("missing 'paths' section");
  reject_unknown(*paths, {"fingerprints", "descriptors", "labels", "molecules"}, "paths");
  if (!paths->contains("fingerprints")) bad("paths.fingerprints is required");
  const ojson& fps = paths->at("fingerprints");
  if (fps.is_string()) {
    c.fingerprints.push_back({"fingerprint", resolve(base_dir, fps.get<std::string>())});
  } else if (fps.is_array() && !fps.empty()) {
    for (const auto& e : fps) {
      if (e.is_string()) {
        const std::filesystem::path p = resolve(base_dir, e.get<std::string>());
        c.fingerprints.push_back({p.stem().string(), p});
      } else if (e.is_object() && e.contains("path") && e.at("path").is_string()) {
        std::string name = e.value("name", std::filesystem::path(e.at("path").get<std::string>()).stem().string());
        c.fingerprints.push_back({name, resolve(base_dir, e.at("path").get<std::string>())});
      } else {
        bad("paths.fingerprints entries must be strings or {name, path} objects");
      }
    }
  } else {
    bad("paths.fingerprints must be a path or a non-empty array");
  }
  for (const char* key : {"descriptors", "labels"}) {
    if (!paths->contains(key) || !paths->at(key).is_string()) bad(std::string("paths.") + key + " is required");
  }
  c.descriptors = resolve(base_dir, paths->at("descriptors").get<std::string>());
  c.labels = resolve(base_dir, paths->at("labels").get<std::string>());
  if (paths->contains("molecules")) {
    if (!paths->at("molecules").is_string()) bad("paths.molecules must be a string");
    c.molecules = resolve(base_dir, paths->at("molecules").get<std::string>());
  }

  read(section(j, "graph"), "k_edges", c.k_edges);
  read(section(j, "preprocess"), "correlation_threshold", c.correlation_threshold);
  const ojson* split = section(j, "split");
  read(split, "train", c.split.train);
  read(split, "val", c.split.val);
  read(split, "test", c.split.test);

  if (const ojson* model = section(j, "model")) {
    nlohmann::json plain = nlohmann::json::parse(model->dump());
    try {
      c.model = gnn::TrainConfig::from_json(plain);
    } catch (const Error& e) {
      bad(std::string("model: ") + e.what());
    }
  }

  const ojson* cluster = section(j, "cluster");
  read(cluster, "k_min", c.k_min);
  read(cluster, "k_max", c.k_max);

  if (const ojson* b = section(j, "baselines")) {
    reject_unknown(*b, {"folds", "ridge", "tree", "mlp", "mlp_epochs", "mlp_batch_size"}, "baselines");
    read(b, "folds", c.cv_folds);
    read(b, "mlp_epochs", c.mlp.epochs);
    read(b, "mlp_batch_size", c.mlp.batch_size);
    for (const char* key : {"ridge", "tree", "mlp"}) {
      if (b->contains(key)) c.grids.emplace_back(baselines::parse_kind(key), parse_grid(b->at(key), key));
    }
  }

  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string()) bad("output_dir must be a string");
    c.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
  } else {
    c.output_dir = base_dir / "out";
  }
  c.set_seed(c.seed);
  c.validate();
  return c;
}

void PipelineConfig::set_seed(std::uint64_t s) {
  seed = s;
  model.seed = s;
  mlp.seed = s;
}

void PipelineConfig::validate() const {
  if (fingerprints.empty()) bad("at least one fingerprint file is required");
  for (std::size_t i = 0; i < fingerprints.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      if (fingerprints[k].name == fingerprints[i].name) bad("duplicate fingerprint name '" + fingerprints[i].name + "'");
    }
  }
  if (k_edges < 1) bad("graph.k_edges must be >= 1");
  if (!(correlation_threshold > 0.0 && correlation_threshold <= 1.0)) {
    bad("preprocess.correlation_threshold must be in (0, 1]");
  }
  for (double r : {split.train, split.val, split.test}) {
    if (!(r >= 0.0 && r <= 1.0)) bad("split ratios must be in [0, 1]");
  }
  if (split.train <= 0.0) bad("split.train must be positive");
  if (std::abs(split.train + split.val + split.test - 1.0) > 1e-9) bad("split ratios must sum to 1");
  if (k_min < 2 || k_max < k_min) bad("cluster range needs 2 <= k_min <= k_max");
  if (cv_folds < 2) bad("baselines.folds must be >= 2");
  if (mlp.epochs < 1 || mlp.batch_size < 1) bad("baselines MLP epochs and batch size must be >= 1");
}

baselines::BaselineSpec PipelineConfig::baseline_spec(baselines::Kind kind) const {
  baselines::BaselineSpec spec;
  spec.kind = kind;
  spec.folds = cv_folds;
  spec.seed = seed;
  spec.mlp = mlp;
  spec.grid = baselines::BaselineSpec::default_grid(kind);
  for (const auto& [k, g] : grids) {
    if (k == kind) spec.grid = g;
  }
  return spec;
}

ojson PipelineConfig::to_json() const {
  ojson fps = ojson::array();
  for (const auto& f : fingerprints) fps.push_back({{"name", f.name}, {"path", f.path.string()}});
  ojson b = {{"folds", cv_folds}, {"mlp_epochs", mlp.epochs}, {"mlp_batch_size", mlp.batch_size}};
  for (baselines::Kind kind : {baselines::Kind::Ridge, baselines::Kind::Tree, baselines::Kind::Mlp}) {
    b[std::string(baselines::to_string(kind))] = grid_json(baseline_spec(kind).grid);
  }
  return {{"seed", seed},
          {"paths",
           {{"fingerprints", fps},
            {"descriptors", descriptors.string()},
            {"labels", labels.string()},
            {"molecules", molecules.string()}}},
          {"graph", {{"k_edges", k_edges}}},
          {"preprocess", {{"correlation_threshold", correlation_threshold}}},
          {"split", {{"train", split.train}, {"val", split.val}, {"test", split.test}}},
          {"model", ojson::parse(model.to_json().dump())},
          {"cluster", {{"k_min", k_min}, {"k_max", k_max}}},
          {"baselines", b},
          {"output_dir", output_dir.string()}};
}

std::string config_reference() {
  std::ostringstream out;
  out << "Config file (JSON). Relative paths resolve against the config's directory.\n"
         "  seed                               42     drives split, weights, dropout, folds\n"
         "  paths.fingerprints                 required; path or [{name, path}, ...], first builds the graph\n"
         "  paths.descriptors                  required; CSV with an id column\n"
         "  paths.labels                       required; CSV with id and score columns\n"
         "  paths.molecules                    optional; CSV with id and smiles columns\n"
         "  graph.k_edges                      4\n"
         "  preprocess.correlation_threshold   0.95   in (0, 1]\n"
         "  split.train / val / test           0.6 / 0.2 / 0.2\n"
         "  model.hidden                       [128, 128]\n"
         "  model.activation                   \"relu\"  or \"leaky_relu\"\n"
         "  model.leaky_slope                  0.01\n"
         "  model.dropout                      0.2\n"
         "  model.batch_norm                   true\n"
         "  model.bn_momentum                  0.1\n"
         "  model.bn_epsilon                   1e-5\n"
         "  model.max_epochs                   1000\n"
         "  model.patience                     50\n"
         "  model.learning_rate                0.001\n"
         "  cluster.k_min / k_max              2 / 15\n"
         "  baselines.folds                    10\n"
         "  baselines.mlp_epochs               200\n"
         "  baselines.mlp_batch_size           32\n"
         "  baselines.ridge                    {\"alpha\": [0.01, 0.1, 1, 10, 100, 1000]}\n"
         "  baselines.tree                     {\"max_depth\": [2, 4, 6, 8], \"min_samples_leaf\": [1, 3, 5, 10]}\n"
         "  baselines.mlp                      {\"hidden_layers\": [1, 2], \"hidden_width\": [32, 64],\n"
         "                                      \"learning_rate\": [0.001, 0.01]}\n"
         "  output_dir                         \"out\"\n";
  return out.str();
}

}  // namespace molaff
