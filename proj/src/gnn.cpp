#include "molaff/gnn.hpp"

#include <cmath>
#include <limits>

#include "molaff/csv.hpp"
#include "molaff/error.hpp"

namespace molaff::gnn {

namespace {

Matrix glorot(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  }
  return m;
}

std::vector<double> to_vec(const Matrix& m) { return {m.data(), m.data() + m.size()}; }
std::vector<double> to_vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Matrix matrix_from(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols, const char* what) {
  const auto data = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw Error(ErrorKind::ShapeMismatch, std::string("model file: ") + what + " has wrong size");
  }
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

Vector vector_from(const nlohmann::json& j, Eigen::Index size, const char* what) {
  const auto data = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != size) {
    throw Error(ErrorKind::ShapeMismatch, std::string("model file: ") + what + " has wrong size");
  }
  return Eigen::Map<const Vector>(data.data(), size);
}

double activation_slope(const SageLayer& layer) {
  return layer.activation == Activation::LeakyRelu ? layer.leaky_slope : 0.0;
}

Vector column_sums(const Matrix& m) { return m.colwise().sum().transpose(); }

}  // namespace

std::string_view to_string(Activation a) { return a == Activation::Relu ? "relu" : "leaky_relu"; }

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::Relu;
  if (name == "leaky_relu") return Activation::LeakyRelu;
  throw Error(ErrorKind::InvalidConfig, "unknown activation '" + std::string(name) + "'");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"hidden", hidden},
          {"activation", to_string(activation)},
          {"leaky_slope", leaky_slope},
          {"dropout", dropout},
          {"batch_norm", batch_norm},
          {"bn_momentum", bn_momentum},
          {"bn_epsilon", bn_epsilon},
          {"max_epochs", max_epochs},
          {"patience", patience},
          {"learning_rate", learning_rate},
          {"beta1", beta1},
          {"beta2", beta2},
          {"adam_epsilon", adam_epsilon},
          {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.hidden = j.value("hidden", c.hidden);
    c.activation = parse_activation(j.value("activation", std::string(to_string(c.activation))));
    c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
    c.dropout = j.value("dropout", c.dropout);
    c.batch_norm = j.value("batch_norm", c.batch_norm);
    c.bn_momentum = j.value("bn_momentum", c.bn_momentum);
    c.bn_epsilon = j.value("bn_epsilon", c.bn_epsilon);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("model config: ") + e.what());
  }
  for (int h : c.hidden) {
    if (h < 1) throw Error(ErrorKind::InvalidConfig, "hidden widths must be positive");
  }
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw Error(ErrorKind::InvalidConfig, "dropout must be in [0, 1)");
  if (c.max_epochs < 0 || c.patience < 1) throw Error(ErrorKind::InvalidConfig, "epochs must be >= 0, patience >= 1");
  if (!(c.learning_rate > 0.0)) throw Error(ErrorKind::InvalidConfig, "learning rate must be positive");
  if (!(c.bn_momentum > 0.0 && c.bn_momentum <= 1.0)) throw Error(ErrorKind::InvalidConfig, "bn_momentum must be in (0, 1]");
  return c;
}

SageModel SageModel::init(Eigen::Index input_dim, const TrainConfig& config, bool aggregate, Rng& rng) {
  SageModel model;
  model.aggregate = aggregate;
  model.bn_epsilon = config.bn_epsilon;
  Eigen::Index in = input_dim;
  for (int width : config.hidden) {
    SageLayer layer;
    const Eigen::Index out = width;
    layer.w_self = glorot(out, in, rng);
    if (aggregate) layer.w_neigh = glorot(out, in, rng);
    layer.bias = Vector::Zero(out);
    layer.gamma = Vector::Ones(out);
    layer.beta = Vector::Zero(out);
    layer.running_mean = Vector::Zero(out);
    layer.running_var = Vector::Ones(out);
    layer.activation = config.activation;
    layer.leaky_slope = config.leaky_slope;
    layer.dropout = config.dropout;
    layer.batch_norm = config.batch_norm;
    model.layers.push_back(std::move(layer));
    in = out;
  }
  model.head_weights = glorot(in, 1, rng).col(0);
  model.head_bias = 0.0;
  return model;
}

void SageModel::validate() const {
  Eigen::Index in = input_dim();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const SageLayer& layer = layers[l];
    const Eigen::Index out = layer.out();
    const bool ok = layer.in() == in && layer.bias.size() == out && layer.gamma.size() == out &&
                    layer.beta.size() == out && layer.running_mean.size() == out &&
                    layer.running_var.size() == out &&
                    (aggregate ? (layer.w_neigh.rows() == out && layer.w_neigh.cols() == in) : layer.w_neigh.size() == 0);
    if (!ok) throw Error(ErrorKind::ShapeMismatch, "layer " + std::to_string(l) + " shapes are inconsistent");
    if ((layer.running_var.array() < 0.0).any()) {
      throw Error(ErrorKind::ShapeMismatch, "layer " + std::to_string(l) + " has negative running variance");
    }
    in = out;
  }
  if (head_weights.size() != in) throw Error(ErrorKind::ShapeMismatch, "head input does not match last layer");
}

nlohmann::json SageModel::to_json() const {
  nlohmann::json js_layers = nlohmann::json::array();
  for (const auto& layer : layers) {
    js_layers.push_back({{"in", layer.in()},
                         {"out", layer.out()},
                         {"activation", to_string(layer.activation)},
                         {"leaky_slope", layer.leaky_slope},
                         {"dropout", layer.dropout},
                         {"batch_norm", layer.batch_norm},
                         {"w_self", to_vec(layer.w_self)},
                         {"w_neigh", to_vec(layer.w_neigh)},
                         {"bias", to_vec(layer.bias)},
                         {"gamma", to_vec(layer.gamma)},
                         {"beta", to_vec(layer.beta)},
                         {"running_mean", to_vec(layer.running_mean)},
                         {"running_var", to_vec(layer.running_var)}});
  }
  return {{"format", "molaff-sage"},
          {"version", kFormatVersion},
          {"aggregate", aggregate},
          {"bn_epsilon", bn_epsilon},
          {"input_dim", input_dim()},
          {"layers", js_layers},
          {"head", {{"in", head_weights.size()}, {"weights", to_vec(head_weights)}, {"bias", head_bias}}}};
}

SageModel SageModel::from_json(const nlohmann::json& j) {
  SageModel model;
  try {
    const int version = j.at("version").get<int>();
    if (version != kFormatVersion) {
      throw Error(ErrorKind::UnsupportedVersion, "model format version " + std::to_string(version) +
                                                     " (supported: " + std::to_string(kFormatVersion) + ")");
    }
    model.aggregate = j.at("aggregate").get<bool>();
    model.bn_epsilon = j.value("bn_epsilon", 1e-5);
    for (const auto& jl : j.at("layers")) {
      SageLayer layer;
      const auto in = jl.at("in").get<Eigen::Index>();
      const auto out = jl.at("out").get<Eigen::Index>();
      layer.activation = parse_activation(jl.at("activation").get<std::string>());
      layer.leaky_slope = jl.at("leaky_slope").get<double>();
      layer.dropout = jl.at("dropout").get<double>();
      layer.batch_norm = jl.at("batch_norm").get<bool>();
      layer.w_self = matrix_from(jl.at("w_self"), out, in, "w_self");
      if (model.aggregate) layer.w_neigh = matrix_from(jl.at("w_neigh"), out, in, "w_neigh");
      layer.bias = vector_from(jl.at("bias"), out, "bias");
      layer.gamma = vector_from(jl.at("gamma"), out, "gamma");
      layer.beta = vector_from(jl.at("beta"), out, "beta");
      layer.running_mean = vector_from(jl.at("running_mean"), out, "running_mean");
      layer.running_var = vector_from(jl.at("running_var"), out, "running_var");
      model.layers.push_back(std::move(layer));
    }
    const auto& head = j.at("head");
    model.head_weights = vector_from(head.at("weights"), head.at("in").get<Eigen::Index>(), "head weights");
    model.head_bias = head.at("bias").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("model file: ") + e.what());
  }
  model.validate();
  return model;
}

Matrix aggregate_mean(const Matrix& features, const Adjacency& adjacency) {
  Matrix out = Matrix::Zero(features.rows(), features.cols());
  for (std::size_t v = 0; v < adjacency.size(); ++v) {
    const auto& nbrs = adjacency[v];
    if (nbrs.empty()) continue;
    auto row = out.row(static_cast<Eigen::Index>(v));
    for (int u : nbrs) row += features.row(u);
    row /= static_cast<double>(nbrs.size());
  }
  return out;
}

Matrix aggregate_mean_adjoint(const Matrix& grad, const Adjacency& adjacency) {
  Matrix out = Matrix::Zero(grad.rows(), grad.cols());
  for (std::size_t v = 0; v < adjacency.size(); ++v) {
    const auto& nbrs = adjacency[v];
    if (nbrs.empty()) continue;
    const double scale = 1.0 / static_cast<double>(nbrs.size());
    for (int u : nbrs) out.row(u) += scale * grad.row(static_cast<Eigen::Index>(v));
  }
  return out;
}

Matrix layer_forward(const SageLayer& layer, const Matrix& h_self, const Matrix& h_neigh, Mode mode,
                     double bn_epsilon, Rng* rng, LayerCache* cache) {
  if (h_self.cols() != layer.in()) throw Error(ErrorKind::ShapeMismatch, "layer input width mismatch");
  if (layer.has_neighbors() && (h_neigh.rows() != h_self.rows() || h_neigh.cols() != layer.in())) {
    throw Error(ErrorKind::ShapeMismatch, "aggregated input shape mismatch");
  }
  const Eigen::Index n = h_self.rows();

  Matrix z = h_self * layer.w_self.transpose();
  if (layer.has_neighbors()) z.noalias() += h_neigh * layer.w_neigh.transpose();
  z.rowwise() += layer.bias.transpose();

  Matrix y;
  if (!layer.batch_norm) {
    y = std::move(z);
  } else if (mode == Mode::Train) {
    const Vector mean = column_sums(z) / static_cast<double>(n);
    z.rowwise() -= mean.transpose();
    const Vector var = column_sums(z.array().square().matrix()) / static_cast<double>(n);
    const Vector inv_std = (var.array() + bn_epsilon).rsqrt();
    Matrix xhat = z * inv_std.asDiagonal();
    y = xhat * layer.gamma.asDiagonal();
    y.rowwise() += layer.beta.transpose();
    if (cache) {
      cache->batch_mean = mean;
      cache->batch_var = var;
      cache->inv_std = inv_std;
      cache->normalized = std::move(xhat);
    }
  } else {
    const Vector scale = layer.gamma.array() * (layer.running_var.array() + bn_epsilon).rsqrt();
    z.rowwise() -= layer.running_mean.transpose();
    y = z * scale.asDiagonal();
    y.rowwise() += layer.beta.transpose();
  }

  const double slope = activation_slope(layer);
  Matrix out = y.unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });

  if (mode == Mode::Train && layer.dropout > 0.0) {
    if (!rng) throw Error(ErrorKind::InvalidArgument, "train-mode dropout needs a random generator");
    const double keep_scale = 1.0 / (1.0 - layer.dropout);
    Matrix mask(out.rows(), out.cols());
    for (Eigen::Index i = 0; i < mask.rows(); ++i) {
      for (Eigen::Index j = 0; j < mask.cols(); ++j) mask(i, j) = rng->uniform01() < layer.dropout ? 0.0 : keep_scale;
    }
    out.array() *= mask.array();
    if (cache) cache->dropout_mask = std::move(mask);
  } else if (cache) {
    cache->dropout_mask.resize(0, 0);
  }

  if (cache) {
    cache->input = h_self;
    cache->aggregated = layer.has_neighbors() ? h_neigh : Matrix();
    cache->pre_activation = std::move(y);
  }
  return out;
}

void update_running_stats(SageLayer& layer, const LayerCache& cache, double momentum) {
  if (!layer.batch_norm || cache.batch_mean.size() == 0) return;
  const auto n = static_cast<double>(cache.input.rows());
  const Vector unbiased = n > 1.0 ? Vector(cache.batch_var * (n / (n - 1.0))) : cache.batch_var;
  layer.running_mean = (1.0 - momentum) * layer.running_mean + momentum * cache.batch_mean;
  layer.running_var = (1.0 - momentum) * layer.running_var + momentum * unbiased;
}

Vector model_forward(const SageModel& model, const Matrix& features, const Adjacency& adjacency, Mode mode,
                     Rng* rng, ForwardCache* cache) {
  if (features.cols() != model.input_dim()) {
    throw Error(ErrorKind::ShapeMismatch, "node features have width " + std::to_string(features.cols()) +
                                              ", model expects " + std::to_string(model.input_dim()));
  }
  if (model.aggregate && adjacency.size() != static_cast<std::size_t>(features.rows())) {
    throw Error(ErrorKind::ShapeMismatch, "adjacency does not cover every feature row");
  }
  if (cache) cache->layers.assign(model.layers.size(), {});
  Matrix h = features;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const SageLayer& layer = model.layers[l];
    const Matrix agg = model.aggregate ? aggregate_mean(h, adjacency) : Matrix();
    h = layer_forward(layer, h, agg, mode, model.bn_epsilon, rng, cache ? &cache->layers[l] : nullptr);
  }
  Vector pred = h * model.head_weights;
  pred.array() += model.head_bias;
  if (cache) cache->last_hidden = std::move(h);
  return pred;
}

double masked_mse(std::span<const double> pred, std::span<const double> labels, std::span<const int> mask) {
  if (mask.empty()) throw Error(ErrorKind::EmptyMask, "masked MSE over an empty mask");
  double sum = 0.0;
  for (int v : mask) {
    const double d = pred[static_cast<std::size_t>(v)] - labels[static_cast<std::size_t>(v)];
    sum += d * d;
  }
  return sum / static_cast<double>(mask.size());
}

double r2_score(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw Error(ErrorKind::ShapeMismatch, "r2: length mismatch");
  if (truth.size() < 2) throw Error(ErrorKind::InsufficientRows, "r2 needs at least 2 values");
  double mean = 0.0;
  for (double t : truth) mean += t;
  mean /= static_cast<double>(truth.size());
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
  }
  if (ss_tot == 0.0) throw Error(ErrorKind::ZeroVariance, "r2 undefined for constant truth");
  return 1.0 - ss_res / ss_tot;
}

Gradients backward(const SageModel& model, const ForwardCache& cache, const Vector& predictions,
                   const Adjacency& adjacency, std::span<const double> labels, std::span<const int> mask) {
  if (mask.empty()) throw Error(ErrorKind::EmptyMask, "backward over an empty mask");
  const Eigen::Index n = predictions.size();

  Vector d_pred = Vector::Zero(n);
  const double scale = 2.0 / static_cast<double>(mask.size());
  for (int v : mask) d_pred(v) = scale * (predictions(v) - labels[static_cast<std::size_t>(v)]);

  Gradients grads;
  grads.head_weights = cache.last_hidden.transpose() * d_pred;
  grads.head_bias = d_pred.sum();
  grads.layers.resize(model.layers.size());

  Matrix d_h = d_pred * model.head_weights.transpose();
  for (std::size_t li = model.layers.size(); li-- > 0;) {
    const SageLayer& layer = model.layers[li];
    const LayerCache& c = cache.layers[li];
    LayerGradients& g = grads.layers[li];

    if (c.dropout_mask.size() > 0) d_h.array() *= c.dropout_mask.array();
    const double slope = activation_slope(layer);
    d_h.array() *= c.pre_activation.array().unaryExpr([slope](double x) { return x > 0.0 ? 1.0 : slope; });

    Matrix d_z;
    if (layer.batch_norm) {
      g.gamma = column_sums((d_h.array() * c.normalized.array()).matrix());
      g.beta = column_sums(d_h);
      const Matrix d_xhat = d_h * layer.gamma.asDiagonal();
      const Vector sum_dxhat = column_sums(d_xhat);
      const Vector sum_dxhat_xhat = column_sums((d_xhat.array() * c.normalized.array()).matrix());
      const double rows = static_cast<double>(n);
      d_z = rows * d_xhat;
      d_z.rowwise() -= sum_dxhat.transpose();
      d_z.array() -= c.normalized.array().rowwise() * sum_dxhat_xhat.transpose().array();
      d_z = d_z * (c.inv_std / rows).asDiagonal();
    } else {
      g.gamma = Vector::Zero(layer.out());
      g.beta = Vector::Zero(layer.out());
      d_z = std::move(d_h);
    }

    g.w_self = d_z.transpose() * c.input;
    g.bias = column_sums(d_z);
    if (layer.has_neighbors()) g.w_neigh = d_z.transpose() * c.aggregated;

    if (li > 0) {
      d_h = d_z * layer.w_self;
      if (layer.has_neighbors()) d_h += aggregate_mean_adjoint(d_z * layer.w_neigh, adjacency);
    }
  }
  return grads;
}

std::vector<std::span<double>> parameter_blocks(SageModel& model) {
  std::vector<std::span<double>> blocks;
  for (auto& layer : model.layers) {
    blocks.emplace_back(layer.w_self.data(), static_cast<std::size_t>(layer.w_self.size()));
    blocks.emplace_back(layer.w_neigh.data(), static_cast<std::size_t>(layer.w_neigh.size()));
    blocks.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
    blocks.emplace_back(layer.gamma.data(), static_cast<std::size_t>(layer.gamma.size()));
    blocks.emplace_back(layer.beta.data(), static_cast<std::size_t>(layer.beta.size()));
  }
  blocks.emplace_back(model.head_weights.data(), static_cast<std::size_t>(model.head_weights.size()));
  blocks.emplace_back(&model.head_bias, 1);
  return blocks;
}

std::vector<std::span<double>> gradient_blocks(Gradients& grads) {
  std::vector<std::span<double>> blocks;
  for (auto& g : grads.layers) {
    blocks.emplace_back(g.w_self.data(), static_cast<std::size_t>(g.w_self.size()));
    blocks.emplace_back(g.w_neigh.data(), static_cast<std::size_t>(g.w_neigh.size()));
    blocks.emplace_back(g.bias.data(), static_cast<std::size_t>(g.bias.size()));
    blocks.emplace_back(g.gamma.data(), static_cast<std::size_t>(g.gamma.size()));
    blocks.emplace_back(g.beta.data(), static_cast<std::size_t>(g.beta.size()));
  }
  blocks.emplace_back(grads.head_weights.data(), static_cast<std::size_t>(grads.head_weights.size()));
  blocks.emplace_back(&grads.head_bias, 1);
  return blocks;
}

void adam_step(std::span<const std::span<double>> params, std::span<const std::span<double>> grads,
               AdamState& state, const AdamConfig& config) {
  if (params.size() != grads.size()) throw Error(ErrorKind::ShapeMismatch, "adam: parameter/gradient block count");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw Error(ErrorKind::ShapeMismatch, "adam: state does not match parameters");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    const auto& p = params[b];
    const auto& g = grads[b];
    if (p.size() != g.size() || state.m[b].size() != p.size()) throw Error(ErrorKind::ShapeMismatch, "adam: block size");
    auto& m = state.m[b];
    auto& v = state.v[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

std::string TrainHistory::to_csv() const {
  std::string out;
  csv::Writer w(out);
  w.row({"epoch", "train_mse", "val_mse"});
  for (std::size_t e = 0; e < train_mse.size(); ++e) {
    w.row({std::to_string(e + 1), csv::format_double(train_mse[e]), csv::format_double(val_mse[e])});
  }
  return out;
}

namespace {

std::vector<double> gather(const Vector& values, const std::vector<int>& mask) {
  std::vector<double> out;
  out.reserve(mask.size());
  for (int v : mask) out.push_back(values(v));
  return out;
}

std::vector<double> gather(const std::vector<double>& values, const std::vector<int>& mask) {
  std::vector<double> out;
  out.reserve(mask.size());
  for (int v : mask) out.push_back(values[static_cast<std::size_t>(v)]);
  return out;
}

}  // namespace

TrainResult train(const simgraph::SimilarityGraph& graph, const TrainConfig& config) {
  const auto train_mask = graph.mask(ingest::Split::Train);
  const auto val_mask = graph.mask(ingest::Split::Val);
  const auto test_mask = graph.mask(ingest::Split::Test);
  if (train_mask.empty()) throw Error(ErrorKind::InsufficientLabels, "graph has no training nodes");
  if (graph.features.rows() != static_cast<Eigen::Index>(graph.size())) {
    throw Error(ErrorKind::ShapeMismatch, "graph has no node features attached");
  }
  // Early stopping falls back to training loss when there is no validation split.
  const auto& select_mask = val_mask.empty() ? train_mask : val_mask;

  Rng rng(config.seed);
  TrainResult result;
  result.model = SageModel::init(graph.features.cols(), config, true, rng);
  double label_mean = 0.0;
  for (int v : train_mask) label_mean += graph.labels[static_cast<std::size_t>(v)];
  result.model.head_bias = label_mean / static_cast<double>(train_mask.size());

  SageModel current = result.model;
  AdamState adam;
  const AdamConfig adam_config{config.learning_rate, config.beta1, config.beta2, config.adam_epsilon};
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    ForwardCache cache;
    const Vector pred = model_forward(current, graph.features, graph.adjacency, Mode::Train, &rng, &cache);
    for (std::size_t l = 0; l < current.layers.size(); ++l) {
      update_running_stats(current.layers[l], cache.layers[l], config.bn_momentum);
    }
    Gradients grads = backward(current, cache, pred, graph.adjacency, graph.labels, train_mask);
    auto params = parameter_blocks(current);
    auto gblocks = gradient_blocks(grads);
    adam_step(params, gblocks, adam, adam_config);

    const Vector eval = predict(current, graph);
    const std::vector<double> eval_vec(eval.data(), eval.data() + eval.size());
    const double train_mse = masked_mse(eval_vec, graph.labels, train_mask);
    const double val_mse = masked_mse(eval_vec, graph.labels, select_mask);
    result.history.train_mse.push_back(train_mse);
    result.history.val_mse.push_back(val_mse);

    if (val_mse < best_val) {
      best_val = val_mse;
      result.history.best_epoch = epoch;
      result.model = current;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }

  if (!test_mask.empty()) {
    const Vector pred = predict(result.model, graph);
    const auto p = gather(pred, test_mask);
    const auto t = gather(graph.labels, test_mask);
    const std::vector<double> all(pred.data(), pred.data() + pred.size());
    result.history.test_mse = masked_mse(all, graph.labels, test_mask);
    try {
      result.history.test_r2 = r2_score(p, t);
    } catch (const Error&) {
      result.history.test_r2.reset();
    }
  }
  return result;
}

Vector predict(const SageModel& model, const simgraph::SimilarityGraph& graph) {
  return model_forward(model, graph.features, graph.adjacency, Mode::Eval);
}

}  // namespace molaff::gnn
