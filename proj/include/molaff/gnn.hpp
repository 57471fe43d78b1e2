#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "molaff/random.hpp"
#include "molaff/simgraph.hpp"
#include "molaff/types.hpp"

namespace molaff::gnn {

using simgraph::Adjacency;

enum class Activation { Relu, LeakyRelu };
enum class Mode { Train, Eval };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

/// One GraphSAGE layer: linear(self) + linear(mean of neighbors) + bias,
/// then batch norm, activation and dropout, in that order.
struct SageLayer {
  Matrix w_self;   // out x in
  Matrix w_neigh;  // out x in; 0 x 0 when the model does not aggregate
  Vector bias;
  Vector gamma;
  Vector beta;
  Vector running_mean;
  Vector running_var;
  Activation activation = Activation::Relu;
  double leaky_slope = 0.01;
  double dropout = 0.0;
  bool batch_norm = true;

  Eigen::Index in() const { return w_self.cols(); }
  Eigen::Index out() const { return w_self.rows(); }
  bool has_neighbors() const { return w_neigh.size() > 0; }
};

struct TrainConfig {
  std::vector<int> hidden{128, 128};
  Activation activation = Activation::Relu;
  double leaky_slope = 0.01;
  double dropout = 0.2;
  bool batch_norm = true;
  double bn_momentum = 0.1;
  double bn_epsilon = 1e-5;
  int max_epochs = 1000;
  int patience = 50;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct SageModel {
  std::vector<SageLayer> layers;
  Vector head_weights;
  double head_bias = 0.0;
  bool aggregate = true;
  double bn_epsilon = 1e-5;

  /// Glorot-uniform weights, zero biases, identity batch norm.
  static SageModel init(Eigen::Index input_dim, const TrainConfig& config, bool aggregate, Rng& rng);

  Eigen::Index input_dim() const { return layers.empty() ? head_weights.size() : layers.front().in(); }

  /// Throws ShapeMismatch if consecutive shapes do not chain.
  void validate() const;

  static constexpr int kFormatVersion = 1;
  nlohmann::json to_json() const;
  static SageModel from_json(const nlohmann::json& j);
};

struct LayerCache {
  Matrix input;
  Matrix aggregated;
  Matrix normalized;  // x-hat of batch norm (train mode)
  Matrix pre_activation;
  Matrix dropout_mask;  // scaled keep mask; empty when dropout is off
  Vector batch_mean;
  Vector batch_var;
  Vector inv_std;
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  Matrix last_hidden;
};

/// Row v is the mean of the rows of N(v); isolated nodes get zeros.
Matrix aggregate_mean(const Matrix& features, const Adjacency& adjacency);

/// Adjoint of aggregate_mean: routes each row's gradient back to the
/// neighbors it averaged, scaled by 1/|N(v)|.
Matrix aggregate_mean_adjoint(const Matrix& grad, const Adjacency& adjacency);

/// Train mode uses batch statistics over all rows and, when p > 0, draws an
/// inverted-dropout mask from `rng`. Running statistics are not touched here;
/// see update_running_stats.
Matrix layer_forward(const SageLayer& layer, const Matrix& h_self, const Matrix& h_neigh, Mode mode,
                     double bn_epsilon = 1e-5, Rng* rng = nullptr, LayerCache* cache = nullptr);

/// Momentum update of a layer's running mean/variance from a train-mode cache.
void update_running_stats(SageLayer& layer, const LayerCache& cache, double momentum);

/// Forward pass over all nodes. `adjacency` is ignored when the model does
/// not aggregate. Returns one prediction per row of `features`.
Vector model_forward(const SageModel& model, const Matrix& features, const Adjacency& adjacency, Mode mode,
                     Rng* rng = nullptr, ForwardCache* cache = nullptr);

double masked_mse(std::span<const double> pred, std::span<const double> labels, std::span<const int> mask);

double r2_score(std::span<const double> pred, std::span<const double> truth);

struct LayerGradients {
  Matrix w_self;
  Matrix w_neigh;
  Vector bias;
  Vector gamma;
  Vector beta;
};

struct Gradients {
  std::vector<LayerGradients> layers;
  Vector head_weights;
  double head_bias = 0.0;
};

/// Exact gradients of masked_mse with respect to every parameter, given the
/// cache of a train-mode forward pass over the same inputs.
Gradients backward(const SageModel& model, const ForwardCache& cache, const Vector& predictions,
                   const Adjacency& adjacency, std::span<const double> labels, std::span<const int> mask);

/// Parameter blocks in a fixed order shared with gradient_blocks.
std::vector<std::span<double>> parameter_blocks(SageModel& model);
std::vector<std::span<double>> gradient_blocks(Gradients& grads);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
};

/// One bias-corrected Adam update. State is sized lazily on first use.
void adam_step(std::span<const std::span<double>> params, std::span<const std::span<double>> grads,
               AdamState& state, const AdamConfig& config);

struct TrainHistory {
  std::vector<double> train_mse;
  std::vector<double> val_mse;
  int best_epoch = -1;  // 0-based; -1 when no epoch ran
  std::optional<double> test_mse;
  std::optional<double> test_r2;

  std::string to_csv() const;
};

struct TrainResult {
  SageModel model;
  TrainHistory history;
};

/// Full-graph transductive training: loss on the train split only, early
/// stopping on validation MSE, returns the best-validation model.
TrainResult train(const simgraph::SimilarityGraph& graph, const TrainConfig& config);

/// Eval-mode predictions for every node.
Vector predict(const SageModel& model, const simgraph::SimilarityGraph& graph);

}  // namespace molaff::gnn
