#include <doctest.h>

#include <cmath>
#include <set>

#include "molaff/baselines.hpp"
#include "test_util.hpp"

using namespace molaff;
using namespace molaff::baselines;
using testutil::error_kind;

namespace {

Matrix column(std::initializer_list<double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

/// Minimises the ridge objective by plain gradient descent.
std::pair<Vector, double> ridge_by_descent(const Matrix& x, const Vector& y, double alpha) {
  Vector w = Vector::Zero(x.cols());
  double c = 0.0;
  const double lipschitz = 2.0 * ((x.transpose() * x).eigenvalues().real().maxCoeff() + alpha + x.rows());
  const double step = 1.0 / lipschitz;
  for (int it = 0; it < 200000; ++it) {
    const Vector r = x * w + Vector::Constant(x.rows(), c) - y;
    const Vector gw = 2.0 * x.transpose() * r + 2.0 * alpha * w;
    const double gc = 2.0 * r.sum();
    w -= step * gw;
    c -= step * gc;
    if (gw.norm() + std::abs(gc) < 1e-12) break;
  }
  return {w, c};
}

void check_tree_nodes(const RegressionTree& tree, int min_leaf) {
  for (const auto& node : tree.nodes) CHECK(node.samples >= min_leaf);
}

}  // namespace

TEST_CASE("ridge closed-form examples") {
  const RidgeModel exact = fit_ridge(column({0, 1, 2, 3}), vec({1, 3, 5, 7}), 0.0);
  CHECK(std::abs(exact.weights(0) - 2.0) < 1e-10);
  CHECK(std::abs(exact.intercept - 1.0) < 1e-10);

  const RidgeModel shrunk = fit_ridge(column({0, 1, 2, 3}), vec({1, 3, 5, 7}), 1e9);
  CHECK(shrunk.weights.norm() < 1e-6);
  CHECK(std::abs(shrunk.intercept - 4.0) < 1e-6);

  const RidgeModel scalar = fit_ridge(column({-0.5, 0.5}), vec({-0.5, 0.5}), 1.0);
  CHECK(std::abs(scalar.weights(0) - 1.0 / 3.0) < 1e-12);
}

TEST_CASE("ridge with alpha 0 on collinear columns is singular") {
  Matrix x(4, 2);
  x << 1, 2, 2, 4, 3, 6, 4, 8;
  CHECK(error_kind([&] { fit_ridge(x, vec({1, 2, 3, 4}), 0.0); }) == ErrorKind::SingularSystem);
  CHECK_NOTHROW(fit_ridge(x, vec({1, 2, 3, 4}), 0.1));
}

TEST_CASE("ridge agrees with gradient descent on random instances") {
  Rng rng(17);
  for (int trial = 0; trial < 8; ++trial) {
    const auto n = static_cast<Eigen::Index>(5 + rng.below(15));
    const auto d = static_cast<Eigen::Index>(1 + rng.below(8));  // includes d > n cases
    Matrix x(n, d);
    Vector y(n);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < n; ++i) y(i) = rng.normal() + 3.0;
    const double alpha = rng.uniform(0.1, 5.0);
    const RidgeModel closed = fit_ridge(x, y, alpha);
    const auto [w, c] = ridge_by_descent(x, y, alpha);
    CHECK((closed.weights - w).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(std::abs(closed.intercept - c) < 1e-6);
  }
}

TEST_CASE("tree examples") {
  const RegressionTree flat = fit_tree(column({0, 1, 2, 3}), vec({4, 4, 4, 4}), 5, 1);
  CHECK(flat.nodes.size() == 1);
  CHECK(flat.nodes[0].value == 4.0);

  const RegressionTree stump = fit_tree(column({0, 1, 2, 3}), vec({0, 0, 10, 10}), 1, 1);
  REQUIRE(stump.nodes.size() == 3);
  CHECK(stump.nodes[0].feature == 0);
  CHECK(stump.nodes[0].threshold > 1.0);
  CHECK(stump.nodes[0].threshold < 2.0);
  CHECK(stump.predict(column({0.5, 2.5})) == vec({0, 10}));

  const RegressionTree root = fit_tree(column({0, 1, 2, 3}), vec({1, 2, 3, 6}), 0, 1);
  CHECK(root.nodes.size() == 1);
  CHECK(root.nodes[0].value == 3.0);
}

TEST_CASE("tree ties go to the lowest feature index") {
  Matrix x(4, 2);
  x << 0, 0, 1, 1, 2, 2, 3, 3;  // identical columns
  const RegressionTree t = fit_tree(x, vec({0, 0, 5, 5}), 1, 1);
  CHECK(t.nodes[0].feature == 0);
}

TEST_CASE("tree respects min_samples_leaf and leaves predict their means") {
  Rng rng(3);
  Matrix x(60, 3);
  Vector y(60);
  for (Eigen::Index i = 0; i < 60; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = rng.normal();
    y(i) = x(i, 0) > 0 ? 2.0 + rng.normal() * 0.1 : rng.normal() * 0.1;
  }
  for (int min_leaf : {1, 3, 7}) {
    const RegressionTree t = fit_tree(x, y, 6, min_leaf);
    check_tree_nodes(t, min_leaf);
    std::map<int, std::pair<double, int>> sums;
    for (Eigen::Index i = 0; i < 60; ++i) {
      auto& s = sums[t.leaf_of(x.row(i))];
      s.first += y(i);
      s.second += 1;
    }
    const Vector p = t.predict(x);
    for (Eigen::Index i = 0; i < 60; ++i) {
      const auto& s = sums[t.leaf_of(x.row(i))];
      CHECK(std::abs(p(i) - s.first / s.second) < 1e-12);
    }
  }
}

TEST_CASE("mlp fits linear data and is reproducible") {
  Rng rng(10);
  Matrix x(80, 2);
  Vector y(80);
  for (Eigen::Index i = 0; i < 80; ++i) {
    x(i, 0) = rng.uniform(-1, 1);
    x(i, 1) = rng.uniform(-1, 1);
    y(i) = 1.5 * x(i, 0) - 0.7 * x(i, 1) + 0.2;
  }
  MlpConfig cfg;
  cfg.hidden = {8};
  cfg.epochs = 500;
  cfg.batch_size = 16;
  cfg.learning_rate = 1e-2;
  cfg.seed = 2;
  const MlpFit a = fit_mlp(x, y, cfg);
  const Vector p = a.model.predict(x);
  const std::vector<double> pv(p.data(), p.data() + p.size()), yv(y.data(), y.data() + y.size());
  CHECK(gnn::r2_score(pv, yv) > 0.99);
  const MlpFit b = fit_mlp(x, y, cfg);
  CHECK(a.loss_curve == b.loss_curve);

  cfg.epochs = 0;
  const MlpFit none = fit_mlp(x, y, cfg);
  CHECK(none.loss_curve.empty());
  CHECK(none.model.predict(x).allFinite());
}

TEST_CASE("kfold assignment partitions the rows") {
  const auto folds = kfold_assignment(23, 5, 9);
  std::vector<int> sizes(5, 0);
  for (int f : folds) ++sizes[static_cast<std::size_t>(f)];
  CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);
  CHECK(folds == kfold_assignment(23, 5, 9));
  CHECK(error_kind([] { kfold_assignment(3, 5, 1); }).has_value());
}

TEST_CASE("grid expansion varies the last key fastest") {
  const auto c = expand_grid({{"a", {1, 2}}, {"b", {10, 20, 30}}});
  REQUIRE(c.size() == 6);
  CHECK(c[0] == Params{{"a", 1}, {"b", 10}});
  CHECK(c[1] == Params{{"a", 1}, {"b", 20}});
  CHECK(c[3] == Params{{"a", 2}, {"b", 10}});
}

TEST_CASE("grid search examples") {
  Rng rng(4);
  Matrix x(40, 2);
  Vector y(40);
  for (Eigen::Index i = 0; i < 40; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = rng.normal();
    y(i) = 3.0 * x(i, 0) - x(i, 1) + 0.01 * rng.normal();
  }
  BaselineSpec spec;
  spec.kind = Kind::Ridge;
  spec.folds = 5;
  spec.seed = 1;

  spec.grid = {{"alpha", {0.5}}};
  CHECK(grid_search_cv(spec, x, y).best_index == 0);

  spec.grid = {{"alpha", {1e6, 1e-6}}};
  const FitResult r = grid_search_cv(spec, x, y, &x, &y);
  CHECK(r.best_params == Params{{"alpha", 1e-6}});
  REQUIRE(r.test_r2.has_value());
  CHECK(*r.test_r2 > 0.99);

  spec.grid = {{"alpha", {2.0, 2.0}}};
  const FitResult tie = grid_search_cv(spec, x, y);
  CHECK(tie.cv_mse[0] == tie.cv_mse[1]);
  CHECK(tie.best_index == 0);

  spec.folds = 41;
  CHECK(error_kind([&] { grid_search_cv(spec, x, y); }).has_value());

  spec.folds = 5;
  spec.grid = {{"gamma", {1.0}}};
  CHECK(error_kind([&] { grid_search_cv(spec, x, y); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("grid search is identical across thread counts") {
  Rng rng(8);
  Matrix x(50, 3);
  Vector y(50);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < 50; ++i) y(i) = x(i, 0) * x(i, 1) + rng.normal() * 0.1;
  BaselineSpec spec;
  spec.kind = Kind::Mlp;
  spec.folds = 4;
  spec.seed = 5;
  spec.mlp.epochs = 20;
  spec.grid = {{"hidden_width", {4, 8}}};
  ::setenv("MOLAFF_THREADS", "1", 1);
  const FitResult a = grid_search_cv(spec, x, y);
  ::setenv("MOLAFF_THREADS", "3", 1);
  const FitResult b = grid_search_cv(spec, x, y);
  ::unsetenv("MOLAFF_THREADS");
  CHECK(a.cv_mse == b.cv_mse);
}
