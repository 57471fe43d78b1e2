#include "molaff/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "molaff/baselines.hpp"
#include "molaff/cluster.hpp"
#include "molaff/csv.hpp"
#include "molaff/error.hpp"
#include "molaff/gnn.hpp"
#include "molaff/ingest.hpp"

namespace molaff::pipeline {

namespace {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

void emit(const WarningSink& warn, const std::string& msg) {
  if (warn) warn(msg);
}

void write_json(const fs::path& path, const ojson& j) { csv::write_file(path, j.dump(2) + "\n"); }

ojson read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingArtifact, path.string() + " could not be read");
  try {
    return ojson::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::MissingArtifact, path.string() + " is corrupt: " + e.what());
  }
}

void require_artifact(const fs::path& path, const char* stage) {
  if (!fs::exists(path)) {
    throw Error(ErrorKind::MissingArtifact, path.filename().string() + " not found in " + path.parent_path().string() +
                                                "; run `molaff " + stage + "` first");
  }
}

ingest::FeatureTable load_preprocessed(const PipelineConfig& config) {
  const fs::path path = config.output_dir / "descriptors_std.csv";
  require_artifact(path, "preprocess");
  require_artifact(config.output_dir / "scaler.json", "preprocess");
  return ingest::load_feature_table(path);
}

std::map<std::string, double> load_labels_checked(const fs::path& path) {
  if (!fs::exists(path)) {
    throw Error(ErrorKind::MissingFile, "labels file not found: " + path.string() +
                                            "; without labels every molecule is unlabeled and nothing can be trained");
  }
  return ingest::load_labels(path);
}

std::optional<double> safe_r2(const Vector& pred, const simgraph::SimilarityGraph& g, const std::vector<int>& mask) {
  if (mask.size() < 2) return std::nullopt;
  std::vector<double> p, t;
  for (int i : mask) {
    p.push_back(pred(i));
    t.push_back(g.labels[static_cast<std::size_t>(i)]);
  }
  try {
    return gnn::r2_score(p, t);
  } catch (const Error&) {
    return std::nullopt;
  }
}

ojson optional_number(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

std::string params_string(const baselines::Params& params) {
  std::string out;
  for (const auto& [k, v] : params) {
    if (!out.empty()) out += ';';
    out += k + '=' + csv::format_double(v);
  }
  return out;
}

ojson reference_json() {
  ojson ref = ojson::object();
  for (const auto& r : kReferenceR2) ref[r.model] = r.r2;
  return ref;
}

Matrix select(const Matrix& x, const std::vector<int>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

Vector select(const std::vector<double>& y, const std::vector<int>& rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = y[static_cast<std::size_t>(rows[i])];
  return out;
}

std::map<std::string, std::string> load_smiles_optional(const PipelineConfig& config, const WarningSink& warn) {
  if (config.molecules.empty()) {
    emit(warn, "no molecules file configured; structural statistics skipped");
    return {};
  }
  if (!fs::exists(config.molecules)) {
    emit(warn, "molecules file " + config.molecules.string() + " not found; structural statistics skipped");
    return {};
  }
  try {
    return ingest::load_smiles(config.molecules);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::MissingColumn) throw;
    emit(warn, std::string(e.what()) + "; structural statistics skipped");
    return {};
  }
}

}  // namespace

std::vector<ingest::MoleculeRecord> split_records(const PipelineConfig& config,
                                                  const ingest::FeatureTable& descriptors) {
  auto labels = load_labels_checked(config.labels);
  auto records = ingest::make_records(descriptors.ids, labels);
  return ingest::make_split(std::move(records), config.split, config.seed);
}

GraphData build_graph(const PipelineConfig& config, const FingerprintSource& source,
                      const ingest::FeatureTable& descriptors, const std::vector<ingest::MoleculeRecord>& records,
                      const WarningSink& warn) {
  const ingest::FeatureTable fp = ingest::load_feature_table(source.path);
  GraphData out;
  std::vector<std::string> keep;
  for (std::size_t i = 0; i < fp.rows(); ++i) {
    if (!descriptors.find(fp.ids[i])) continue;
    ++out.candidates;
    if (fp.values.row(static_cast<Eigen::Index>(i)).squaredNorm() == 0.0) {
      ++out.zero_fingerprints;
      continue;
    }
    keep.push_back(fp.ids[i]);
  }
  if (out.zero_fingerprints > 0) {
    emit(warn, std::to_string(out.zero_fingerprints) + " molecule(s) with an all-zero " + source.name +
                   " fingerprint were left out of the graph");
  }
  if (keep.size() < 2) {
    throw Error(ErrorKind::InsufficientRows, "fingerprint " + source.name + " shares fewer than 2 usable molecules with the descriptors");
  }
  const ingest::FeatureTable fp_kept = fp.select_rows(keep);
  simgraph::SimilarityGraph g = simgraph::build_similarity_graph(fp_kept, config.k_edges);
  simgraph::attach_node_data(g, descriptors, records);
  out.graph = simgraph::prune_unlabeled_components(g);
  out.pruned = g.size() - out.graph.size();
  out.fingerprints = fp_kept.select_rows(out.graph.ids);
  return out;
}

std::string structural_stats_csv(const std::vector<std::string>& ids,
                                 const std::map<std::string, std::string>& smiles_by_id, const WarningSink& warn,
                                 std::vector<std::optional<smiles::StructuralStats>>* stats) {
  std::string text;
  csv::Writer w(text);
  std::vector<std::string> header{"id", "longest_cf_chain", "n_fluorinated_carbons"};
  for (smiles::Group g : smiles::kAllGroups) header.emplace_back(smiles::to_string(g));
  w.row(header);
  if (stats) stats->assign(ids.size(), std::nullopt);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = smiles_by_id.find(ids[i]);
    if (it == smiles_by_id.end()) continue;
    smiles::StructuralStats s;
    try {
      s = smiles::structural_stats(smiles::parse_smiles(it->second));
    } catch (const Error& e) {
      emit(warn, "molecule " + ids[i] + " skipped: " + e.what());
      continue;
    }
    std::vector<std::string> row{ids[i], std::to_string(s.longest_cf_chain), std::to_string(s.n_fluorinated_carbons)};
    for (smiles::Group g : smiles::kAllGroups) row.push_back(s.functional_groups.contains(g) ? "1" : "0");
    w.row(row);
    if (stats) (*stats)[i] = s;
  }
  return text;
}

ojson run_preprocess(const PipelineConfig& config, const WarningSink& warn) {
  const auto labels = load_labels_checked(config.labels);
  const ingest::FeatureTable table = ingest::load_feature_table(config.descriptors);
  std::size_t labeled = 0;
  for (const auto& id : table.ids) labeled += labels.count(id);
  if (labeled == 0) {
    throw Error(ErrorKind::InsufficientLabels, "no id in " + config.labels.string() + " matches a descriptor row");
  }
  if (labeled < labels.size()) {
    emit(warn, std::to_string(labels.size() - labeled) + " label(s) have no descriptor row and are ignored");
  }

  const ingest::PruneResult pruned = ingest::prune_correlated(table, config.correlation_threshold);
  const ingest::StandardizeResult std_result = ingest::standardize(pruned.table);

  fs::create_directories(config.output_dir);
  csv::write_file(config.output_dir / "descriptors_std.csv", ingest::write_feature_table_csv(std_result.table));
  write_json(config.output_dir / "scaler.json", ojson::parse(std_result.params.to_json().dump()));

  std::string report;
  csv::Writer w(report);
  w.row({"column", "reason"});
  for (const auto& c : pruned.dropped_constant) w.row({c, "constant"});
  for (const auto& c : pruned.dropped_correlated) w.row({c, "correlated"});
  for (const auto& c : std_result.params.dropped) w.row({c, "zero_variance"});
  csv::write_file(config.output_dir / "pruned_columns.csv", report);

  ojson summary = {{"rows", table.rows()},
                   {"labeled_rows", labeled},
                   {"columns_before", table.cols()},
                   {"dropped_constant", pruned.dropped_constant.size()},
                   {"dropped_correlated", pruned.dropped_correlated.size()},
                   {"dropped_zero_variance", std_result.params.dropped.size()},
                   {"columns_after", std_result.table.cols()},
                   {"correlation_threshold", config.correlation_threshold}};
  write_json(config.output_dir / "preprocess_summary.json", summary);
  return summary;
}

ojson run_train(const PipelineConfig& config, const WarningSink& warn) {
  const ingest::FeatureTable descriptors = load_preprocessed(config);
  const auto records = split_records(config, descriptors);
  const FingerprintSource& source = config.fingerprints.front();
  const GraphData gd = build_graph(config, source, descriptors, records, warn);
  const auto& g = gd.graph;

  const gnn::TrainResult result = gnn::train(g, config.model);
  const Vector pred = gnn::predict(result.model, g);

  write_json(config.output_dir / "model.json", ojson::parse(result.model.to_json().dump()));
  csv::write_file(config.output_dir / "train_history.csv", result.history.to_csv());
  csv::write_file(config.output_dir / "graph_edges.csv", simgraph::edge_list_csv(g));

  std::string split_text;
  csv::Writer sw(split_text);
  sw.row({"id", "split"});
  for (const auto& r : records) sw.row({r.id, std::string(ingest::to_string(r.split))});
  csv::write_file(config.output_dir / "split.csv", split_text);

  ojson splits = ojson::object();
  for (ingest::Split s : {ingest::Split::Train, ingest::Split::Val, ingest::Split::Test}) {
    const auto mask = g.mask(s);
    std::optional<double> mse;
    if (!mask.empty()) mse = gnn::masked_mse(std::span(pred.data(), static_cast<std::size_t>(pred.size())), g.labels, mask);
    splits[std::string(ingest::to_string(s))] = {
        {"count", mask.size()}, {"mse", optional_number(mse)}, {"r2", optional_number(safe_r2(pred, g, mask))}};
  }
  ojson metrics = {{"fingerprint", source.name},
                   {"seed", config.seed},
                   {"nodes", g.size()},
                   {"edges", g.edge_count()},
                   {"pruned_nodes", gd.pruned},
                   {"epochs_run", result.history.train_mse.size()},
                   {"best_epoch", result.history.best_epoch + 1},
                   {"splits", splits},
                   {"reference_r2", reference_json()}};
  write_json(config.output_dir / "metrics.json", metrics);
  return metrics;
}

ojson run_cluster(const PipelineConfig& config, const WarningSink& warn) {
  const ingest::FeatureTable descriptors = load_preprocessed(config);
  const fs::path model_path = config.output_dir / "model.json";
  require_artifact(model_path, "train");
  const gnn::SageModel model = gnn::SageModel::from_json(nlohmann::json::parse(read_json(model_path).dump()));

  const auto records = split_records(config, descriptors);
  const GraphData gd = build_graph(config, config.fingerprints.front(), descriptors, records, warn);
  const auto& g = gd.graph;
  if (model.input_dim() != g.features.cols()) {
    throw Error(ErrorKind::InvalidArgument, "model.json expects " + std::to_string(model.input_dim()) +
                                                " features but the descriptors have " +
                                                std::to_string(g.features.cols()) + "; rerun `molaff train`");
  }
  const Vector pred = gnn::predict(model, g);
  const Matrix x = cluster::cluster_input(gd.fingerprints.values, pred);
  const int n = static_cast<int>(g.size());
  const int k_max = std::min(config.k_max, n - 1);
  if (k_max < config.k_min) {
    throw Error(ErrorKind::InsufficientRows, std::to_string(n) + " molecules are too few for K >= " + std::to_string(config.k_min));
  }
  if (k_max < config.k_max) emit(warn, "cluster.k_max lowered to " + std::to_string(k_max));

  const cluster::SweepResult sweep = cluster::sweep_k(x, config.k_min, k_max);
  const std::vector<int> labels = cluster::cut(sweep.dendrogram, sweep.chosen_k);
  const std::vector<int> medoids = cluster::select_medoids(x, labels);
  const Matrix proj = cluster::pca_project(x, 2);
  const auto smiles_by_id = load_smiles_optional(config, warn);
  const fs::path& dir = config.output_dir;

  {
    std::string t;
    csv::Writer w(t);
    w.row({"k", "silhouette", "davies_bouldin", "calinski_harabasz", "chosen"});
    for (const auto& e : sweep.entries) {
      w.row({std::to_string(e.k), csv::format_double(e.scores.silhouette), csv::format_double(e.scores.davies_bouldin),
             csv::format_double(e.scores.calinski_harabasz), e.k == sweep.chosen_k ? "1" : "0"});
    }
    csv::write_file(dir / "cluster_sweep.csv", t);
  }
  {
    std::string pt, ct, qt;
    csv::Writer pw(pt), cw(ct), qw(qt);
    pw.row({"id", "predicted", "label", "split"});
    cw.row({"id", "cluster"});
    qw.row({"id", "pc1", "pc2", "cluster"});
    for (int i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      const std::string c = std::to_string(labels[u]);
      pw.row({g.ids[u], csv::format_double(pred(i)), g.labeled[u] ? csv::format_double(g.labels[u]) : "",
              std::string(ingest::to_string(g.split[u]))});
      cw.row({g.ids[u], c});
      qw.row({g.ids[u], csv::format_double(proj(i, 0)), csv::format_double(proj(i, 1)), c});
    }
    csv::write_file(dir / "predictions.csv", pt);
    csv::write_file(dir / "clusters.csv", ct);
    csv::write_file(dir / "projection.csv", qt);
  }
  {
    std::string t;
    csv::Writer w(t);
    w.row({"cluster", "id", "smiles", "predicted"});
    for (std::size_t c = 0; c < medoids.size(); ++c) {
      const auto r = static_cast<std::size_t>(medoids[c]);
      auto it = smiles_by_id.find(g.ids[r]);
      w.row({std::to_string(c), g.ids[r], it == smiles_by_id.end() ? "" : it->second,
             csv::format_double(pred(medoids[c]))});
    }
    csv::write_file(dir / "medoids.csv", t);
  }

  std::vector<int> sizes(static_cast<std::size_t>(sweep.chosen_k), 0);
  for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
  ojson clusters = ojson::array();
  for (int c = 0; c < sweep.chosen_k; ++c) {
    const auto u = static_cast<std::size_t>(c);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      if (labels[static_cast<std::size_t>(i)] == c) sum += pred(i);
    }
    clusters.push_back({{"cluster", c},
                        {"size", sizes[u]},
                        {"medoid", g.ids[static_cast<std::size_t>(medoids[u])]},
                        {"mean_predicted", sum / sizes[u]}});
  }
  ojson summary = {{"nodes", n}, {"chosen_k", sweep.chosen_k}, {"clusters", clusters}, {"structural_stats", false}};

  if (!smiles_by_id.empty()) {
    std::vector<std::optional<smiles::StructuralStats>> stats;
    csv::write_file(dir / "structural_stats.csv", structural_stats_csv(g.ids, smiles_by_id, warn, &stats));

    std::string gt;
    csv::Writer gw(gt);
    std::vector<std::string> header{"cluster", "size", "with_stats"};
    for (smiles::Group grp : smiles::kAllGroups) header.emplace_back(smiles::to_string(grp));
    gw.row(header);
    std::map<std::pair<int, int>, int> chain_counts, fc_counts;
    for (int c = 0; c < sweep.chosen_k; ++c) {
      std::array<int, smiles::kAllGroups.size()> counts{};
      int with_stats = 0;
      for (int i = 0; i < n; ++i) {
        const auto& s = stats[static_cast<std::size_t>(i)];
        if (labels[static_cast<std::size_t>(i)] != c || !s) continue;
        ++with_stats;
        for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += s->functional_groups.contains(smiles::kAllGroups[k]);
        ++chain_counts[{c, s->longest_cf_chain}];
        ++fc_counts[{c, s->n_fluorinated_carbons}];
      }
      std::vector<std::string> row{std::to_string(c), std::to_string(sizes[static_cast<std::size_t>(c)]),
                                   std::to_string(with_stats)};
      for (int v : counts) row.push_back(std::to_string(v));
      gw.row(row);
    }
    csv::write_file(dir / "cluster_groups.csv", gt);

    std::string dt;
    csv::Writer dw(dt);
    dw.row({"cluster", "metric", "value", "count"});
    for (int c = 0; c < sweep.chosen_k; ++c) {
      for (const auto& [key, count] : chain_counts) {
        if (key.first == c) dw.row({std::to_string(c), "longest_cf_chain", std::to_string(key.second), std::to_string(count)});
      }
      for (const auto& [key, count] : fc_counts) {
        if (key.first == c) dw.row({std::to_string(c), "n_fluorinated_carbons", std::to_string(key.second), std::to_string(count)});
      }
    }
    csv::write_file(dir / "cluster_chains.csv", dt);
    summary["structural_stats"] = true;
  }
  write_json(dir / "cluster_summary.json", summary);
  return summary;
}

ojson run_benchmark(const PipelineConfig& config, const WarningSink& warn) {
  const ingest::FeatureTable descriptors = load_preprocessed(config);
  const auto records = split_records(config, descriptors);

  struct Row {
    std::string model, fingerprint;
    std::optional<double> r2;
    std::optional<double> cv_mse;
    std::string params;
  };
  std::vector<Row> rows;
  ojson per_fp = ojson::array();

  for (const auto& source : config.fingerprints) {
    const GraphData gd = build_graph(config, source, descriptors, records, warn);
    const auto& g = gd.graph;
    std::vector<int> fit_rows = g.mask(ingest::Split::Train);
    const auto val_rows = g.mask(ingest::Split::Val);
    fit_rows.insert(fit_rows.end(), val_rows.begin(), val_rows.end());
    std::sort(fit_rows.begin(), fit_rows.end());
    const auto test_rows = g.mask(ingest::Split::Test);
    if (fit_rows.size() < static_cast<std::size_t>(config.cv_folds) || test_rows.size() < 2) {
      throw Error(ErrorKind::InsufficientLabels, "fingerprint " + source.name + " leaves " +
                                                     std::to_string(fit_rows.size()) + " fit rows and " +
                                                     std::to_string(test_rows.size()) + " test rows");
    }

    const ingest::FeatureTable fp_std = ingest::standardize(gd.fingerprints).table;
    Matrix features(static_cast<Eigen::Index>(g.size()), g.features.cols() + fp_std.values.cols());
    features << g.features, fp_std.values;
    const Matrix x_fit = select(features, fit_rows);
    const Vector y_fit = select(g.labels, fit_rows);
    const Matrix x_test = select(features, test_rows);
    const Vector y_test = select(g.labels, test_rows);

    for (baselines::Kind kind : {baselines::Kind::Ridge, baselines::Kind::Tree, baselines::Kind::Mlp}) {
      const auto fit = baselines::grid_search_cv(config.baseline_spec(kind), x_fit, y_fit, &x_test, &y_test);
      rows.push_back({std::string(baselines::to_string(kind)), source.name, fit.test_r2,
                      fit.cv_mse[fit.best_index], params_string(fit.best_params)});
    }
    const gnn::TrainResult gcn = gnn::train(g, config.model);
    rows.push_back({"gcn", source.name, gcn.history.test_r2, std::nullopt, ""});
    per_fp.push_back({{"fingerprint", source.name},
                      {"nodes", g.size()},
                      {"edges", g.edge_count()},
                      {"fit_rows", fit_rows.size()},
                      {"test_rows", test_rows.size()},
                      {"baseline_features", features.cols()}});
  }

  std::string t;
  csv::Writer w(t);
  w.row({"model", "fingerprint", "r2_test", "cv_mse", "best_params"});
  for (const auto& r : rows) {
    w.row({r.model, r.fingerprint, r.r2 ? csv::format_double(*r.r2) : "", r.cv_mse ? csv::format_double(*r.cv_mse) : "",
           r.params});
  }
  csv::write_file(config.output_dir / "benchmark.csv", t);

  std::ostringstream md;
  md << "# Benchmark\n\nTest R² on a shared split (seed " << config.seed << "). Baselines are tuned by "
     << config.cv_folds << "-fold cross-validation on train and validation rows.\n\n"
     << "| model | fingerprint | test R² | CV MSE | parameters |\n|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    md << "| " << r.model << " | " << r.fingerprint << " | " << (r.r2 ? csv::format_double(*r.r2) : "n/a") << " | "
       << (r.cv_mse ? csv::format_double(*r.cv_mse) : "") << " | " << r.params << " |\n";
  }
  md << "\n## Published reference (test R²)\n\n| model | R² |\n|---|---|\n";
  for (const auto& ref : kReferenceR2) md << "| " << ref.model << " | " << csv::format_double(ref.r2) << " |\n";
  csv::write_file(config.output_dir / "benchmark_report.md", md.str());

  ojson results = ojson::array();
  for (const auto& r : rows) {
    results.push_back({{"model", r.model}, {"fingerprint", r.fingerprint}, {"r2_test", optional_number(r.r2)}});
  }
  ojson summary = {{"seed", config.seed}, {"fingerprints", per_fp}, {"results", results}, {"reference_r2", reference_json()}};
  write_json(config.output_dir / "benchmark_summary.json", summary);
  return summary;
}

ojson run_stats(const PipelineConfig& config, const WarningSink& warn) {
  if (config.molecules.empty()) throw Error(ErrorKind::InvalidConfig, "paths.molecules is required for `stats`");
  const auto smiles_by_id = ingest::load_smiles(config.molecules);
  std::vector<std::string> ids;
  for (const auto& [id, s] : smiles_by_id) ids.push_back(id);
  std::vector<std::optional<smiles::StructuralStats>> stats;
  fs::create_directories(config.output_dir);
  csv::write_file(config.output_dir / "structural_stats.csv", structural_stats_csv(ids, smiles_by_id, warn, &stats));
  std::size_t ok = 0;
  for (const auto& s : stats) ok += s.has_value();
  return {{"molecules", ids.size()}, {"parsed", ok}, {"failed", ids.size() - ok}};
}

}  // namespace molaff::pipeline
