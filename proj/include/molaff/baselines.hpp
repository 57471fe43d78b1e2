#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "molaff/gnn.hpp"
#include "molaff/types.hpp"

namespace molaff::baselines {

struct RidgeModel {
  Vector weights;
  double intercept = 0.0;

  Vector predict(const Matrix& x) const;
};

/// Minimises ||y - Xw - c||^2 + alpha ||w||^2 with an unpenalised intercept.
RidgeModel fit_ridge(const Matrix& x, const Vector& y, double alpha);

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;  // rows with x[feature] <= threshold go left
  int left = -1;
  int right = -1;
  double value = 0.0;
  int samples = 0;

  bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  /// Index of the leaf reached by `row`.
  int leaf_of(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  Vector predict(const Matrix& x) const;
  int depth() const;
};

/// CART regression tree minimising summed child squared error.
RegressionTree fit_tree(const Matrix& x, const Vector& y, int max_depth, int min_samples_leaf);

struct MlpConfig {
  std::vector<int> hidden{64};
  gnn::Activation activation = gnn::Activation::Relu;
  double leaky_slope = 0.01;
  double dropout = 0.0;
  bool batch_norm = false;
  double learning_rate = 1e-3;
  int epochs = 200;
  int batch_size = 32;
  std::uint64_t seed = 0;
};

struct MlpModel {
  gnn::SageModel network;

  Vector predict(const Matrix& x) const;
};

struct MlpFit {
  MlpModel model;
  std::vector<double> loss_curve;  // mean minibatch MSE per epoch
};

/// Dense network with one output, trained by minibatch Adam on MSE. Shares
/// the layer, batch-norm, dropout and optimizer code of the graph model.
MlpFit fit_mlp(const Matrix& x, const Vector& y, const MlpConfig& config);

enum class Kind { Ridge, Tree, Mlp };

std::string_view to_string(Kind kind);
Kind parse_kind(std::string_view name);

/// Ordered hyperparameter grid; candidates enumerate with the last entry
/// varying fastest.
using Grid = std::vector<std::pair<std::string, std::vector<double>>>;
using Params = std::vector<std::pair<std::string, double>>;

struct BaselineSpec {
  Kind kind = Kind::Ridge;
  Grid grid;
  int folds = 10;
  std::uint64_t seed = 0;
  MlpConfig mlp;  // settings not covered by the grid

  /// Grid used when none is configured.
  static Grid default_grid(Kind kind);
};

std::vector<Params> expand_grid(const Grid& grid);

/// Fold index per row from a seeded permutation; sizes differ by at most one.
std::vector<int> kfold_assignment(std::size_t rows, int folds, std::uint64_t seed);

using Regressor = std::variant<RidgeModel, RegressionTree, MlpModel>;

Vector predict(const Regressor& model, const Matrix& x);

/// Fits one candidate. Unknown parameter names throw InvalidConfig.
Regressor fit_candidate(const BaselineSpec& spec, const Params& params, const Matrix& x, const Vector& y);

struct FitResult {
  std::vector<Params> candidates;
  std::vector<double> cv_mse;
  std::size_t best_index = 0;
  Params best_params;
  Regressor model;
  std::optional<double> test_r2;
};

/// Grid search by k-fold CV on (x, y); ties go to the earlier candidate. The
/// winner is refit on all rows and scored on the test set when given.
FitResult grid_search_cv(const BaselineSpec& spec, const Matrix& x, const Vector& y,
                         const Matrix* x_test = nullptr, const Vector* y_test = nullptr);

}  // namespace molaff::baselines
