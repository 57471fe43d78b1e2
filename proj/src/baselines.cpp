#include "molaff/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "molaff/error.hpp"
#include "molaff/parallel.hpp"
#include "molaff/random.hpp"

namespace molaff::baselines {

Vector RidgeModel::predict(const Matrix& x) const {
  Vector out = x * weights;
  out.array() += intercept;
  return out;
}

RidgeModel fit_ridge(const Matrix& x, const Vector& y, double alpha) {
  if (x.rows() != y.size()) throw Error(ErrorKind::ShapeMismatch, "ridge: rows(X) != len(y)");
  if (x.rows() < 2) throw Error(ErrorKind::InsufficientRows, "ridge needs at least 2 rows");
  if (!(alpha >= 0.0)) throw Error(ErrorKind::InvalidArgument, "ridge alpha must be >= 0");

  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const Matrix xc = x.rowwise() - x_mean;
  const Vector yc = y.array() - y_mean;

  RidgeModel model;
  const bool dual = xc.cols() > xc.rows();
  // Dual form w = Xc' (Xc Xc' + aI)^-1 yc is cheaper when features outnumber rows.
  Eigen::MatrixXd gram = dual ? Eigen::MatrixXd(xc * xc.transpose()) : Eigen::MatrixXd(xc.transpose() * xc);
  gram.diagonal().array() += alpha;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success || (alpha == 0.0 && llt.rcond() < 1e-12)) {
    throw Error(ErrorKind::SingularSystem, "ridge normal equations are singular; use alpha > 0");
  }
  if (dual) {
    model.weights = xc.transpose() * llt.solve(yc);
  } else {
    model.weights = llt.solve(Vector(xc.transpose() * yc));
  }
  model.intercept = y_mean - x_mean.dot(model.weights);
  return model;
}

int RegressionTree::leaf_of(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  int node = 0;
  while (!nodes[static_cast<std::size_t>(node)].is_leaf()) {
    const TreeNode& n = nodes[static_cast<std::size_t>(node)];
    node = row(n.feature) <= n.threshold ? n.left : n.right;
  }
  return node;
}

Vector RegressionTree::predict(const Matrix& x) const {
  Vector out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out(i) = nodes[static_cast<std::size_t>(leaf_of(x.row(i)))].value;
  }
  return out;
}

int RegressionTree::depth() const {
  std::function<int(int)> walk = [&](int node) -> int {
    const TreeNode& n = nodes[static_cast<std::size_t>(node)];
    if (n.is_leaf()) return 0;
    return 1 + std::max(walk(n.left), walk(n.right));
  };
  return nodes.empty() ? 0 : walk(0);
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const Vector& y, int max_depth, int min_leaf)
      : x_(x), y_(y), max_depth_(max_depth), min_leaf_(std::max(1, min_leaf)) {}

  RegressionTree build() {
    std::vector<int> all(static_cast<std::size_t>(x_.rows()));
    std::iota(all.begin(), all.end(), 0);
    grow(all, 0);
    return std::move(tree_);
  }

 private:
  int grow(const std::vector<int>& idx, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    const auto m = static_cast<int>(idx.size());
    double mean = 0.0;
    for (int i : idx) mean += y_(i);
    mean /= static_cast<double>(m);
    tree_.nodes[static_cast<std::size_t>(id)].value = mean;
    tree_.nodes[static_cast<std::size_t>(id)].samples = m;

    const bool constant = std::all_of(idx.begin(), idx.end(), [&](int i) { return y_(i) == y_(idx.front()); });
    if (depth >= max_depth_ || m < 2 * min_leaf_ || constant) return id;

    // Residuals about the node mean keep the running sums well conditioned.
    double parent_sse = 0.0;
    for (int i : idx) parent_sse += (y_(i) - mean) * (y_(i) - mean);

    double best_cost = std::numeric_limits<double>::infinity();
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<int> order(idx);
    for (Eigen::Index f = 0; f < x_.cols(); ++f) {
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return x_(a, f) < x_(b, f); });
      std::vector<double> prefix(static_cast<std::size_t>(m) + 1, 0.0), prefix_sq(static_cast<std::size_t>(m) + 1, 0.0);
      for (int k = 0; k < m; ++k) {
        const double r = y_(order[static_cast<std::size_t>(k)]) - mean;
        prefix[static_cast<std::size_t>(k) + 1] = prefix[static_cast<std::size_t>(k)] + r;
        prefix_sq[static_cast<std::size_t>(k) + 1] = prefix_sq[static_cast<std::size_t>(k)] + r * r;
      }
      const double total = prefix.back(), total_sq = prefix_sq.back();
      for (int s = min_leaf_; s <= m - min_leaf_; ++s) {
        const double lo = x_(order[static_cast<std::size_t>(s) - 1], f);
        const double hi = x_(order[static_cast<std::size_t>(s)], f);
        if (!(lo < hi)) continue;
        const double nl = s, nr = m - s;
        const double sl = prefix[static_cast<std::size_t>(s)], sql = prefix_sq[static_cast<std::size_t>(s)];
        const double cost = (sql - sl * sl / nl) + ((total_sq - sql) - (total - sl) * (total - sl) / nr);
        if (cost < best_cost) {
          best_cost = cost;
          best_feature = static_cast<int>(f);
          double t = lo + (hi - lo) / 2.0;
          if (!(t < hi)) t = lo;
          best_threshold = t;
        }
      }
    }
    if (best_feature < 0 || !(best_cost < parent_sse * (1.0 - 1e-12))) return id;

    std::vector<int> left, right;
    for (int i : idx) (x_(i, best_feature) <= best_threshold ? left : right).push_back(i);
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    TreeNode& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  const Matrix& x_;
  const Vector& y_;
  int max_depth_;
  int min_leaf_;
  RegressionTree tree_;
};

}  // namespace

RegressionTree fit_tree(const Matrix& x, const Vector& y, int max_depth, int min_samples_leaf) {
  if (x.rows() != y.size()) throw Error(ErrorKind::ShapeMismatch, "tree: rows(X) != len(y)");
  if (x.rows() < 1) throw Error(ErrorKind::InsufficientRows, "tree needs at least 1 row");
  if (max_depth < 0 || min_samples_leaf < 1) {
    throw Error(ErrorKind::InvalidArgument, "tree: max_depth >= 0 and min_samples_leaf >= 1 required");
  }
  return TreeBuilder(x, y, max_depth, min_samples_leaf).build();
}

Vector MlpModel::predict(const Matrix& x) const {
  return gnn::model_forward(network, x, {}, gnn::Mode::Eval);
}

MlpFit fit_mlp(const Matrix& x, const Vector& y, const MlpConfig& config) {
  if (x.rows() != y.size()) throw Error(ErrorKind::ShapeMismatch, "mlp: rows(X) != len(y)");
  if (config.batch_size < 1) throw Error(ErrorKind::InvalidArgument, "mlp: batch size must be positive");
  if (x.rows() < config.batch_size) throw Error(ErrorKind::InsufficientRows, "mlp: fewer rows than batch size");

  gnn::TrainConfig layer_config;
  layer_config.hidden = config.hidden;
  layer_config.activation = config.activation;
  layer_config.leaky_slope = config.leaky_slope;
  layer_config.dropout = config.dropout;
  layer_config.batch_norm = config.batch_norm;

  Rng rng(config.seed);
  MlpFit fit;
  fit.model.network = gnn::SageModel::init(x.cols(), layer_config, false, rng);
  fit.model.network.head_bias = y.mean();
  gnn::SageModel& net = fit.model.network;

  gnn::AdamState adam;
  const gnn::AdamConfig adam_config{config.learning_rate, 0.9, 0.999, 1e-8};
  std::vector<int> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<int>(order));
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const auto rows = static_cast<Eigen::Index>(stop - start);
      // Batch statistics of a single row are degenerate.
      if (rows < 2 && config.batch_norm) continue;
      Matrix xb(rows, x.cols());
      std::vector<double> yb(static_cast<std::size_t>(rows));
      std::vector<int> mask(static_cast<std::size_t>(rows));
      for (Eigen::Index r = 0; r < rows; ++r) {
        const int src = order[start + static_cast<std::size_t>(r)];
        xb.row(r) = x.row(src);
        yb[static_cast<std::size_t>(r)] = y(src);
        mask[static_cast<std::size_t>(r)] = static_cast<int>(r);
      }
      gnn::ForwardCache cache;
      const Vector pred = gnn::model_forward(net, xb, {}, gnn::Mode::Train, &rng, &cache);
      for (std::size_t l = 0; l < net.layers.size(); ++l) gnn::update_running_stats(net.layers[l], cache.layers[l], 0.1);
      const std::vector<double> pv(pred.data(), pred.data() + pred.size());
      loss_sum += gnn::masked_mse(pv, yb, mask);
      ++batches;
      gnn::Gradients grads = gnn::backward(net, cache, pred, {}, yb, mask);
      auto params = gnn::parameter_blocks(net);
      auto gblocks = gnn::gradient_blocks(grads);
      gnn::adam_step(params, gblocks, adam, adam_config);
    }
    fit.loss_curve.push_back(batches ? loss_sum / batches : 0.0);
  }
  return fit;
}

std::string_view to_string(Kind kind) {
  switch (kind) {
    case Kind::Ridge: return "ridge";
    case Kind::Tree: return "tree";
    case Kind::Mlp: return "mlp";
  }
  return "";
}

Kind parse_kind(std::string_view name) {
  if (name == "ridge") return Kind::Ridge;
  if (name == "tree") return Kind::Tree;
  if (name == "mlp") return Kind::Mlp;
  throw Error(ErrorKind::InvalidConfig, "unknown baseline '" + std::string(name) + "'");
}

Grid BaselineSpec::default_grid(Kind kind) {
  switch (kind) {
    case Kind::Ridge:
      return {{"alpha", {0.01, 0.1, 1.0, 10.0, 100.0, 1000.0}}};
    case Kind::Tree:
      return {{"max_depth", {2, 4, 6, 8}}, {"min_samples_leaf", {1, 3, 5, 10}}};
    case Kind::Mlp:
      return {{"hidden_layers", {1, 2}}, {"hidden_width", {32, 64}}, {"learning_rate", {1e-3, 1e-2}}};
  }
  return {};
}

std::vector<Params> expand_grid(const Grid& grid) {
  std::vector<Params> out{Params{}};
  for (const auto& [name, values] : grid) {
    if (values.empty()) throw Error(ErrorKind::InvalidConfig, "grid entry '" + name + "' has no values");
    std::vector<Params> next;
    for (const auto& partial : out) {
      for (double v : values) {
        Params p = partial;
        p.emplace_back(name, v);
        next.push_back(std::move(p));
      }
    }
    out = std::move(next);
  }
  return out;
}

std::vector<int> kfold_assignment(std::size_t rows, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorKind::InvalidArgument, "need at least 2 folds");
  if (static_cast<std::size_t>(folds) > rows) {
    throw Error(ErrorKind::InsufficientRows, std::to_string(folds) + " folds requested for " + std::to_string(rows) + " rows");
  }
  std::vector<int> perm(rows);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span<int>(perm));
  std::vector<int> fold(rows);
  const std::size_t base = rows / static_cast<std::size_t>(folds);
  const std::size_t extra = rows % static_cast<std::size_t>(folds);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < static_cast<std::size_t>(folds); ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    for (std::size_t k = 0; k < size; ++k) fold[static_cast<std::size_t>(perm[pos++])] = static_cast<int>(f);
  }
  return fold;
}

Vector predict(const Regressor& model, const Matrix& x) {
  return std::visit([&](const auto& m) { return m.predict(x); }, model);
}

Regressor fit_candidate(const BaselineSpec& spec, const Params& params, const Matrix& x, const Vector& y) {
  auto unknown = [&](const std::string& name) {
    return Error(ErrorKind::InvalidConfig, "unknown " + std::string(to_string(spec.kind)) + " hyperparameter '" + name + "'");
  };
  switch (spec.kind) {
    case Kind::Ridge: {
      double alpha = 1.0;
      for (const auto& [name, v] : params) {
        if (name == "alpha") alpha = v;
        else throw unknown(name);
      }
      return fit_ridge(x, y, alpha);
    }
    case Kind::Tree: {
      int depth = 4, leaf = 1;
      for (const auto& [name, v] : params) {
        if (name == "max_depth") depth = static_cast<int>(v);
        else if (name == "min_samples_leaf") leaf = static_cast<int>(v);
        else throw unknown(name);
      }
      return fit_tree(x, y, depth, leaf);
    }
    case Kind::Mlp: {
      MlpConfig config = spec.mlp;
      int layers = static_cast<int>(config.hidden.size());
      int width = config.hidden.empty() ? 64 : config.hidden.front();
      for (const auto& [name, v] : params) {
        if (name == "hidden_layers") layers = static_cast<int>(v);
        else if (name == "hidden_width") width = static_cast<int>(v);
        else if (name == "learning_rate") config.learning_rate = v;
        else if (name == "dropout") config.dropout = v;
        else if (name == "batch_norm") config.batch_norm = v != 0.0;
        else if (name == "batch_size") config.batch_size = static_cast<int>(v);
        else if (name == "epochs") config.epochs = static_cast<int>(v);
        else if (name == "activation") config.activation = v != 0.0 ? gnn::Activation::LeakyRelu : gnn::Activation::Relu;
        else throw unknown(name);
      }
      config.hidden.assign(static_cast<std::size_t>(std::max(0, layers)), width);
      config.batch_size = std::min<int>(config.batch_size, static_cast<int>(x.rows()));
      return fit_mlp(x, y, config).model;
    }
  }
  throw unknown("?");
}

FitResult grid_search_cv(const BaselineSpec& spec, const Matrix& x, const Vector& y, const Matrix* x_test,
                         const Vector* y_test) {
  if (x.rows() != y.size()) throw Error(ErrorKind::ShapeMismatch, "grid search: rows(X) != len(y)");
  const Grid grid = spec.grid.empty() ? BaselineSpec::default_grid(spec.kind) : spec.grid;
  FitResult result;
  result.candidates = expand_grid(grid);
  const auto fold = kfold_assignment(static_cast<std::size_t>(x.rows()), spec.folds, spec.seed);

  const std::size_t folds = static_cast<std::size_t>(spec.folds);
  std::vector<double> fold_mse(result.candidates.size() * folds, 0.0);
  parallel_for(fold_mse.size(), [&](std::size_t task) {
    const std::size_t c = task / folds;
    const int f = static_cast<int>(task % folds);
    std::vector<Eigen::Index> tr, va;
    for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? va : tr).push_back(static_cast<Eigen::Index>(i));
    const Matrix xtr = x(tr, Eigen::all), xva = x(va, Eigen::all);
    const Vector ytr = y(tr), yva = y(va);
    const Regressor model = fit_candidate(spec, result.candidates[c], xtr, ytr);
    fold_mse[task] = (predict(model, xva) - yva).squaredNorm() / static_cast<double>(va.size());
  });

  result.cv_mse.assign(result.candidates.size(), 0.0);
  for (std::size_t c = 0; c < result.candidates.size(); ++c) {
    double sum = 0.0;
    for (std::size_t f = 0; f < folds; ++f) sum += fold_mse[c * folds + f];
    result.cv_mse[c] = sum / static_cast<double>(folds);
    if (result.cv_mse[c] < result.cv_mse[result.best_index]) result.best_index = c;
  }
  result.best_params = result.candidates[result.best_index];
  result.model = fit_candidate(spec, result.best_params, x, y);
  if (x_test && y_test && y_test->size() >= 2) {
    const Vector pred = predict(result.model, *x_test);
    try {
      result.test_r2 = gnn::r2_score(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())),
                                     std::span<const double>(y_test->data(), static_cast<std::size_t>(y_test->size())));
    } catch (const Error&) {
      result.test_r2.reset();
    }
  }
  return result;
}

}  // namespace molaff::baselines
