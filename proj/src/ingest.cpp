#include "molaff/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "molaff/csv.hpp"
#include "molaff/error.hpp"
#include "molaff/random.hpp"

namespace molaff::ingest {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_number(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::string cell_ref(const std::filesystem::path& path, std::size_t line, const std::string& column) {
  return path.string() + ": line " + std::to_string(line) + ", column '" + column + "'";
}

void check_unique(const std::vector<std::string>& names, ErrorKind kind, const std::string& what) {
  std::unordered_set<std::string> seen;
  for (const auto& name : names) {
    if (!seen.insert(name).second) throw Error(kind, what + " '" + name + "'");
  }
}

}  // namespace

std::optional<std::size_t> FeatureTable::find(const std::string& id) const {
  auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

FeatureTable FeatureTable::select_rows(const std::vector<std::string>& wanted) const {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ids.size(); ++i) index.emplace(ids[i], i);
  FeatureTable out;
  out.ids = wanted;
  out.columns = columns;
  out.values.resize(static_cast<Eigen::Index>(wanted.size()), values.cols());
  for (std::size_t r = 0; r < wanted.size(); ++r) {
    auto it = index.find(wanted[r]);
    if (it == index.end()) throw Error(ErrorKind::MissingColumn, "no row for id '" + wanted[r] + "'");
    out.values.row(static_cast<Eigen::Index>(r)) = values.row(static_cast<Eigen::Index>(it->second));
  }
  return out;
}

void FeatureTable::validate() const {
  if (static_cast<std::size_t>(values.rows()) != ids.size() ||
      static_cast<std::size_t>(values.cols()) != columns.size()) {
    throw Error(ErrorKind::ShapeMismatch, "feature matrix shape does not match ids/columns");
  }
  check_unique(ids, ErrorKind::DuplicateId, "duplicate id");
  check_unique(columns, ErrorKind::DuplicateColumn, "duplicate column");
  if (!values.allFinite()) throw Error(ErrorKind::NonFiniteCell, "feature table contains NaN or Inf");
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    case Split::Unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

nlohmann::json ScalerParams::to_json() const {
  return {{"columns", columns}, {"mean", mean}, {"std", stddev}, {"dropped", dropped}};
}

ScalerParams ScalerParams::from_json(const nlohmann::json& j) {
  ScalerParams p;
  try {
    p.columns = j.at("columns").get<std::vector<std::string>>();
    p.mean = j.at("mean").get<std::vector<double>>();
    p.stddev = j.at("std").get<std::vector<double>>();
    p.dropped = j.at("dropped").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("scaler params: ") + e.what());
  }
  if (p.mean.size() != p.columns.size() || p.stddev.size() != p.columns.size()) {
    throw Error(ErrorKind::InvalidConfig, "scaler params: columns/mean/std lengths differ");
  }
  for (double s : p.stddev) {
    if (!(s > 0.0)) throw Error(ErrorKind::InvalidConfig, "scaler params: non-positive std");
  }
  return p;
}

FeatureTable load_feature_table(const std::filesystem::path& path, const LoadOptions& options) {
  const csv::Document doc = csv::read(path);
  if (doc.header.empty() || trim(doc.header[0]) != "id") {
    throw Error(ErrorKind::MalformedCsv, path.string() + ": first column must be 'id'");
  }
  FeatureTable table;
  for (std::size_t c = 1; c < doc.header.size(); ++c) table.columns.emplace_back(trim(doc.header[c]));
  check_unique(table.columns, ErrorKind::DuplicateColumn, path.string() + ": duplicate column");

  const std::size_t ncols = table.columns.size();
  std::vector<double> cells;
  cells.reserve(doc.rows.size() * ncols);
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    const auto& row = doc.rows[r];
    const std::size_t line = doc.line_numbers[r];
    std::string id(trim(row[0]));
    if (id.empty()) throw Error(ErrorKind::EmptyCell, cell_ref(path, line, "id"));

    bool incomplete = false;
    std::vector<double> parsed(ncols);
    for (std::size_t c = 0; c < ncols; ++c) {
      const std::string_view raw = trim(row[c + 1]);
      if (raw.empty()) {
        if (!options.drop_incomplete_rows) throw Error(ErrorKind::EmptyCell, cell_ref(path, line, table.columns[c]));
        incomplete = true;
        break;
      }
      auto value = parse_number(raw);
      if (!value) {
        throw Error(ErrorKind::NonNumericCell,
                    cell_ref(path, line, table.columns[c]) + ": '" + std::string(raw) + "'");
      }
      if (!std::isfinite(*value)) throw Error(ErrorKind::NonFiniteCell, cell_ref(path, line, table.columns[c]));
      parsed[c] = *value;
    }
    if (incomplete) continue;
    if (!seen.insert(id).second) throw Error(ErrorKind::DuplicateId, path.string() + ": duplicate id '" + id + "'");
    table.ids.push_back(std::move(id));
    cells.insert(cells.end(), parsed.begin(), parsed.end());
  }
  table.values = Eigen::Map<Matrix>(cells.data(), static_cast<Eigen::Index>(table.ids.size()),
                                    static_cast<Eigen::Index>(ncols));
  table.validate();
  return table;
}

std::map<std::string, double> load_labels(const std::filesystem::path& path) {
  const csv::Document doc = csv::read(path);
  if (doc.header.size() < 2 || trim(doc.header[0]) != "id") {
    throw Error(ErrorKind::MalformedCsv, path.string() + ": expected header 'id,score'");
  }
  std::map<std::string, double> labels;
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    std::string id(trim(doc.rows[r][0]));
    auto value = parse_number(doc.rows[r][1]);
    if (!value) {
      throw Error(ErrorKind::NonNumericCell, cell_ref(path, doc.line_numbers[r], doc.header[1]));
    }
    if (!std::isfinite(*value)) throw Error(ErrorKind::NonFiniteCell, cell_ref(path, doc.line_numbers[r], doc.header[1]));
    if (!labels.emplace(id, *value).second) {
      throw Error(ErrorKind::DuplicateId, path.string() + ": duplicate id '" + id + "'");
    }
  }
  return labels;
}

std::map<std::string, std::string> load_smiles(const std::filesystem::path& path) {
  const csv::Document doc = csv::read(path);
  std::size_t id_col = doc.header.size(), smiles_col = doc.header.size();
  for (std::size_t c = 0; c < doc.header.size(); ++c) {
    if (trim(doc.header[c]) == "id") id_col = c;
    if (trim(doc.header[c]) == "smiles") smiles_col = c;
  }
  if (id_col == doc.header.size()) throw Error(ErrorKind::MissingColumn, path.string() + ": no 'id' column");
  if (smiles_col == doc.header.size()) throw Error(ErrorKind::MissingColumn, path.string() + ": no 'smiles' column");
  std::map<std::string, std::string> out;
  for (const auto& row : doc.rows) {
    std::string id(trim(row[id_col]));
    if (!out.emplace(id, std::string(trim(row[smiles_col]))).second) {
      throw Error(ErrorKind::DuplicateId, path.string() + ": duplicate id '" + id + "'");
    }
  }
  return out;
}

std::vector<MoleculeRecord> make_records(const std::vector<std::string>& ids,
                                         const std::map<std::string, double>& labels,
                                         const std::map<std::string, std::string>& smiles) {
  std::vector<MoleculeRecord> records;
  records.reserve(ids.size());
  for (const auto& id : ids) {
    MoleculeRecord rec;
    rec.id = id;
    if (auto it = smiles.find(id); it != smiles.end()) rec.smiles = it->second;
    if (auto it = labels.find(id); it != labels.end()) rec.label = it->second;
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<std::string> PruneResult::dropped() const {
  std::vector<std::string> all = dropped_constant;
  all.insert(all.end(), dropped_correlated.begin(), dropped_correlated.end());
  return all;
}

double pearson(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  const Vector ca = a.array() - a.mean();
  const Vector cb = b.array() - b.mean();
  const double na = ca.norm();
  const double nb = cb.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return ca.dot(cb) / (na * nb);
}

namespace {

bool is_constant(const Eigen::Ref<const Vector>& col) {
  return (col.array() == col(0)).all();
}

}  // namespace

PruneResult prune_correlated(const FeatureTable& table, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "correlation threshold must be in (0, 1]");
  }
  if (table.rows() < 2) throw Error(ErrorKind::InsufficientRows, "correlation pruning needs at least 2 rows");

  PruneResult result;
  std::vector<Eigen::Index> candidates;
  for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
    if (is_constant(table.values.col(c))) {
      result.dropped_constant.push_back(table.columns[static_cast<std::size_t>(c)]);
    } else {
      candidates.push_back(c);
    }
  }

  // Unit-norm centered columns so that r is a plain dot product.
  const auto n = table.values.rows();
  Eigen::MatrixXd unit(n, static_cast<Eigen::Index>(candidates.size()));
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    Vector col = table.values.col(candidates[k]);
    col.array() -= col.mean();
    unit.col(static_cast<Eigen::Index>(k)) = col / col.norm();
  }

  std::vector<Eigen::Index> kept;  // indices into `unit`
  for (Eigen::Index k = 0; k < unit.cols(); ++k) {
    bool redundant = false;
    for (Eigen::Index j : kept) {
      if (std::abs(unit.col(j).dot(unit.col(k))) > threshold) {
        redundant = true;
        break;
      }
    }
    if (redundant) {
      result.dropped_correlated.push_back(table.columns[static_cast<std::size_t>(candidates[static_cast<std::size_t>(k)])]);
    } else {
      kept.push_back(k);
    }
  }

  result.table.ids = table.ids;
  result.table.values.resize(n, static_cast<Eigen::Index>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const Eigen::Index src = candidates[static_cast<std::size_t>(kept[i])];
    result.table.columns.push_back(table.columns[static_cast<std::size_t>(src)]);
    result.table.values.col(static_cast<Eigen::Index>(i)) = table.values.col(src);
  }
  return result;
}

StandardizeResult standardize(const FeatureTable& table, const std::optional<ScalerParams>& given) {
  StandardizeResult result;
  result.table.ids = table.ids;
  const auto n = table.values.rows();

  if (!given) {
    if (n < 1) throw Error(ErrorKind::InsufficientRows, "cannot fit scaler on an empty table");
    std::vector<Eigen::Index> kept;
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
      const auto col = table.values.col(c);
      const double mu = col.mean();
      const double sigma = std::sqrt((col.array() - mu).square().sum() / static_cast<double>(n));
      const std::string& name = table.columns[static_cast<std::size_t>(c)];
      if (!(sigma > 0.0) || is_constant(col)) {
        result.params.dropped.push_back(name);
        continue;
      }
      kept.push_back(c);
      result.params.columns.push_back(name);
      result.params.mean.push_back(mu);
      result.params.stddev.push_back(sigma);
    }
    result.table.columns = result.params.columns;
    result.table.values.resize(n, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t i = 0; i < kept.size(); ++i) {
      result.table.values.col(static_cast<Eigen::Index>(i)) =
          (table.values.col(kept[i]).array() - result.params.mean[i]) / result.params.stddev[i];
    }
    return result;
  }

  const ScalerParams& params = *given;
  std::unordered_map<std::string, std::size_t> fitted;
  for (std::size_t i = 0; i < params.columns.size(); ++i) fitted.emplace(params.columns[i], i);
  const std::unordered_set<std::string> dropped(params.dropped.begin(), params.dropped.end());

  std::vector<std::pair<Eigen::Index, std::size_t>> mapping;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    const std::string& name = table.columns[c];
    if (auto it = fitted.find(name); it != fitted.end()) {
      mapping.emplace_back(static_cast<Eigen::Index>(c), it->second);
    } else if (!dropped.contains(name)) {
      throw Error(ErrorKind::MissingColumn, "column '" + name + "' not present in scaler params");
    }
  }
  result.params = params;
  result.table.values.resize(n, static_cast<Eigen::Index>(mapping.size()));
  for (std::size_t i = 0; i < mapping.size(); ++i) {
    const auto [src, p] = mapping[i];
    result.table.columns.push_back(table.columns[static_cast<std::size_t>(src)]);
    result.table.values.col(static_cast<Eigen::Index>(i)) =
        (table.values.col(src).array() - params.mean[p]) / params.stddev[p];
  }
  return result;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios) {
  const std::array<double, 3> r{ratios.train, ratios.val, ratios.test};
  for (double x : r) {
    if (!(x >= 0.0)) throw Error(ErrorKind::InvalidArgument, "split ratios must be non-negative");
  }
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) throw Error(ErrorKind::InvalidArgument, "split ratios must sum to 1");

  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = static_cast<double>(n) * r[i];
    // Guard against 0.6*10 = 5.999... style representation error.
    const double floored = std::floor(exact + 1e-9);
    sizes[i] = static_cast<std::size_t>(floored);
    frac[i] = std::max(0.0, exact - floored);
    assigned += sizes[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; assigned < n; k = (k + 1) % 3, ++assigned) ++sizes[order[k]];
  return sizes;
}

std::vector<MoleculeRecord> make_split(std::vector<MoleculeRecord> records, const SplitRatios& ratios,
                                       std::uint64_t seed) {
  std::vector<std::size_t> labeled;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].label) {
      labeled.push_back(i);
    } else {
      records[i].split = Split::Unlabeled;
    }
  }
  if (labeled.size() < 3) {
    throw Error(ErrorKind::InsufficientLabels,
                "need at least 3 labeled records to split, have " + std::to_string(labeled.size()));
  }
  const auto sizes = split_sizes(labeled.size(), ratios);
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(labeled));
  for (std::size_t k = 0; k < labeled.size(); ++k) {
    Split s = k < sizes[0] ? Split::Train : (k < sizes[0] + sizes[1] ? Split::Val : Split::Test);
    records[labeled[k]].split = s;
  }
  return records;
}

std::string write_feature_table_csv(const FeatureTable& table) {
  std::string out;
  csv::Writer w(out);
  csv::Row header{"id"};
  header.insert(header.end(), table.columns.begin(), table.columns.end());
  w.row(header);
  for (std::size_t r = 0; r < table.rows(); ++r) {
    csv::Row row{table.ids[r]};
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
      row.push_back(csv::format_double(table.values(static_cast<Eigen::Index>(r), c)));
    }
    w.row(row);
  }
  return out;
}

}  // namespace molaff::ingest
