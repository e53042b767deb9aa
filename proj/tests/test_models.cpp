#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "sigbench/models/gaussian.hpp"
#include "sigbench/models/linear.hpp"
#include "sigbench/models/tree.hpp"
#include "sigbench/rng.hpp"
#include "sigbench/signals.hpp"
#include "sigbench/synthetic.hpp"
#include "sigbench/transforms.hpp"

using namespace sigbench;
using data::FeatureKind;
using data::FeatureMatrix;

namespace {

FeatureMatrix dense_matrix(std::vector<std::vector<double>> rows) {
  FeatureMatrix X;
  X.kind = FeatureKind::RawPixels;
  X.rows = rows.size();
  X.cols = rows[0].size();
  for (const auto& r : rows) X.dense.insert(X.dense.end(), r.begin(), r.end());
  return X;
}

// Two spherical Gaussian blobs with a wide margin; the Bayes rule errs with
// negligible probability.
std::pair<FeatureMatrix, std::vector<int>> blob_data(std::size_t n, double sep,
                                                     std::uint64_t seed, int dims = 6) {
  Rng rng(seed);
  FeatureMatrix X;
  X.kind = FeatureKind::RawPixels;
  X.rows = n;
  X.cols = dims;
  X.dense.resize(n * dims);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(rng.next_below(2));
    for (int j = 0; j < dims; ++j)
      X.dense[i * dims + j] = rng.gaussian() + (y[i] ? sep : 0.0);
  }
  return {X, y};
}

std::pair<FeatureMatrix, std::vector<int>> image_features(const data::LabeledImageSet& set) {
  return {data::to_features(set), set.labels};
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), 1e-6);
}

}  // namespace

TEST_CASE("accuracy metric") {
  CHECK(models::accuracy({1, 2, 3}, {1, 2, 3}) == 1.0);
  CHECK(models::accuracy({1, 2, 3}, {0, 0, 0}) == 0.0);
  CHECK(models::accuracy({1, 2, 3, 4}, {1, 2, 3, 0}) == 0.75);
  CHECK_THROWS(models::accuracy({1}, {1, 2}));
  CHECK_THROWS(models::accuracy({}, {}));
}

TEST_CASE("tree: XOR is fit exactly at depth 2") {
  const auto X = dense_matrix({{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  const std::vector<int> y = {0, 1, 1, 0};
  const auto tree = models::fit_tree(X, y, 2, {});
  CHECK(tree->predict(X) == y);
  CHECK(tree->depth() == 2);
}

TEST_CASE("tree: single-class data is a single leaf") {
  const auto X = dense_matrix({{1, 2}, {3, 4}, {5, 6}});
  const std::vector<int> y = {1, 1, 1};
  const auto tree = models::fit_tree(X, y, 3, {});
  CHECK(tree->nodes().size() == 1);
  CHECK(tree->nodes()[0].leaf_class == 1);
  CHECK(tree->predict(X) == y);
}

TEST_CASE("tree: empty data is rejected") {
  FeatureMatrix X;
  X.kind = FeatureKind::RawPixels;
  CHECK_THROWS(models::fit_tree(X, {}, 2, {}));
}

TEST_CASE("tree interpolation: consistent data reaches 100% train accuracy") {
  Rng rng(5);
  FeatureMatrix X;
  X.kind = FeatureKind::RawPixels;
  X.rows = 300;
  X.cols = 8;
  X.dense.resize(X.rows * X.cols);
  for (auto& v : X.dense) v = rng.next_double();  // almost surely distinct rows
  std::vector<int> y(X.rows);
  for (auto& v : y) v = static_cast<int>(rng.next_below(4));

  const auto tree = models::fit_tree(X, y, 4, {});
  CHECK(models::accuracy(tree->predict(X), y) == 1.0);
}

TEST_CASE("tree on one-pixel injected images: exact and focused on the signal") {
  auto train = data::make_synthetic_images(800, 41);
  auto test = data::make_synthetic_images(300, 42);
  const auto scheme = signals::make_one_pixel();
  const auto [Xtr, ytr] = image_features(signals::inject(train, scheme));
  const auto [Xte, yte] = image_features(signals::inject(test, scheme));

  const auto tree = models::fit_tree(Xtr, ytr, 10, {});
  CHECK(models::accuracy(tree->predict(Xte), yte) == 1.0);

  // every split is on the injected coordinate (channel 0, row 16, col 16)
  const std::int32_t signal_col = (0 * 32 + 16) * 32 + 16;
  int internal = 0;
  for (const auto& node : tree->nodes()) {
    if (node.is_leaf()) continue;
    ++internal;
    CHECK(node.split_feature == signal_col);
  }
  CHECK(internal >= 4);  // ten classes cannot separate in fewer splits
  CHECK(tree->depth() <= 9);
}

TEST_CASE("forest: single non-random tree equals the plain tree") {
  auto set = data::make_synthetic_images(300, 43);
  const auto [X, y] = image_features(set);
  models::ForestParams fp;
  fp.n_trees = 1;
  fp.tree.extra_random = false;
  fp.seed = 11;
  const auto forest = models::fit_forest(X, y, 10, fp);
  models::TreeParams tp;
  tp.extra_random = false;
  tp.seed = derive_seed(11, 0);  // the forest's per-tree derivation
  const auto tree = models::fit_tree(X, y, 10, tp);
  CHECK(forest->predict(X) == tree->predict(X));
}

TEST_CASE("forest: pattern-pixels signal solved exactly; seeded determinism") {
  auto train = data::make_synthetic_images(600, 44);
  auto test = data::make_synthetic_images(300, 45);
  const auto scheme = signals::make_pattern_pixels();
  const auto [Xtr, ytr] = image_features(signals::inject(train, scheme));
  const auto [Xte, yte] = image_features(signals::inject(test, scheme));

  models::ForestParams fp;
  fp.n_trees = 50;
  fp.seed = 7;
  const auto forest = models::fit_forest(Xtr, ytr, 10, fp);
  CHECK(models::accuracy(forest->predict(Xte), yte) == 1.0);

  const auto again = models::fit_forest(Xtr, ytr, 10, fp);
  CHECK(forest->predict(Xte) == again->predict(Xte));

  std::ostringstream a, b;
  forest->save(a);
  again->save(b);
  CHECK(a.str() == b.str());

  fp.n_trees = 0;
  CHECK_THROWS(models::fit_forest(Xtr, ytr, 10, fp));
}

TEST_CASE("gaussian variants: separable blobs are solved") {
  const auto [Xtr, ytr] = blob_data(2000, 8.0, 50);
  const auto [Xte, yte] = blob_data(1000, 8.0, 51);
  for (auto variant : {models::GaussianVariant::NaiveBayes, models::GaussianVariant::Lda,
                       models::GaussianVariant::Qda}) {
    models::GaussianParams p;
    p.variant = variant;
    const auto model = models::fit_gaussian_generative(Xtr, ytr, 2, p);
    CHECK(models::accuracy(model->predict(Xte), yte) >= 0.99);
  }
}

TEST_CASE("gaussian variants: identical class distributions score near chance") {
  Rng rng(52);
  auto sample = [&](std::size_t n) {
    FeatureMatrix X;
    X.kind = FeatureKind::RawPixels;
    X.rows = n;
    X.cols = 4;
    X.dense.resize(n * 4);
    for (auto& v : X.dense) v = rng.gaussian();
    std::vector<int> y(n);
    for (auto& v : y) v = static_cast<int>(rng.next_below(4));
    return std::pair{X, y};
  };
  const auto [Xtr, ytr] = sample(4000);
  const auto [Xte, yte] = sample(2000);

  for (auto variant : {models::GaussianVariant::NaiveBayes, models::GaussianVariant::Lda,
                       models::GaussianVariant::Qda}) {
    models::GaussianParams p;
    p.variant = variant;
    const auto model = models::fit_gaussian_generative(Xtr, ytr, 4, p);
    const double acc = models::accuracy(model->predict(Xte), yte);
    CHECK(acc >= 0.25 - 0.05);
    CHECK(acc <= 0.25 + 0.05);
  }
}

TEST_CASE("gaussian sanity: variants approach the Bayes rate on in-family data") {
  // 2 classes in 2-D with shared unit covariance, means 1.6 apart: all
  // three variants are consistent estimators for this family.
  const double sep = 1.6;
  Rng rng(53);
  auto sample = [&](std::size_t n) {
    FeatureMatrix X;
    X.kind = FeatureKind::RawPixels;
    X.rows = n;
    X.cols = 2;
    X.dense.resize(2 * n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(rng.next_below(2));
      X.dense[2 * i] = rng.gaussian() + (y[i] ? sep : 0.0);
      X.dense[2 * i + 1] = rng.gaussian();
    }
    return std::pair{X, y};
  };
  const auto [Xtr, ytr] = sample(10000);
  const auto [Xte, yte] = sample(10000);

  // Bayes rule for the true generative model: threshold at sep/2.
  std::size_t bayes_hits = 0;
  for (std::size_t i = 0; i < Xte.rows; ++i)
    bayes_hits += (Xte.dense[2 * i] > sep / 2 ? 1 : 0) == yte[i];
  const double bayes = double(bayes_hits) / double(Xte.rows);

  for (auto variant : {models::GaussianVariant::NaiveBayes, models::GaussianVariant::Lda,
                       models::GaussianVariant::Qda}) {
    models::GaussianParams p;
    p.variant = variant;
    const auto model = models::fit_gaussian_generative(Xtr, ytr, 2, p);
    const double acc = models::accuracy(model->predict(Xte), yte);
    CHECK(std::abs(acc - bayes) <= 0.02);
  }
}

TEST_CASE("gaussian preconditions") {
  const auto X = dense_matrix({{0, 0}, {1, 1}, {2, 2}});
  const std::vector<int> y = {0, 0, 1};  // class 1 has a single sample
  models::GaussianParams p;
  CHECK_THROWS(models::fit_gaussian_generative(X, y, 2, p));
}

TEST_CASE("qda solves multiple-locations at desk scale") {
  auto train = data::make_synthetic_images(1500, 54);
  auto test = data::make_synthetic_images(500, 55);
  const auto scheme = signals::make_multiple_locations(10, 3);
  const auto [Xtr, ytr] = image_features(signals::inject(train, scheme));
  const auto [Xte, yte] = image_features(signals::inject(test, scheme));

  models::GaussianParams p;
  p.variant = models::GaussianVariant::Qda;
  const auto model = models::fit_gaussian_generative(Xtr, ytr, 10, p);
  CHECK(models::accuracy(model->predict(Xte), yte) >= 0.95);
}

TEST_CASE("linear softmax: separable data is fit") {
  const auto X = dense_matrix({{0, 0}, {0, 1}, {4, 4}, {5, 5}, {4, 5}});
  const std::vector<int> y = {0, 0, 1, 1, 1};
  models::LinearSoftmaxParams p;
  p.lr = 0.5;
  p.epochs = 200;
  p.batch = 5;
  const auto model = models::fit_linear_softmax(X, y, 2, p);
  CHECK(models::accuracy(model->predict(X), y) == 1.0);
}

TEST_CASE("linear softmax gradient check on a 5x4 problem") {
  Rng rng(60);
  FeatureMatrix X;
  X.kind = FeatureKind::RawPixels;
  X.rows = 5;
  X.cols = 4;
  X.dense.resize(20);
  for (auto& v : X.dense) v = rng.gaussian();
  const std::vector<int> y = {0, 2, 1, 0, 2};

  models::LinearSoftmaxModel model;
  model.K_ = 3;
  model.D_ = 4;
  model.weights.resize(12);
  model.bias.resize(3);
  for (auto& v : model.weights) v = 0.5 * rng.gaussian();
  for (auto& v : model.bias) v = 0.1 * rng.gaussian();

  std::vector<double> dw, db;
  models::linear_softmax_loss_grad(X, y, model, &dw, &db);

  const double h = 1e-6;
  double max_rel = 0.0;
  auto probe = [&](std::vector<double>& param, const std::vector<double>& grad) {
    for (std::size_t j = 0; j < param.size(); ++j) {
      const double keep = param[j];
      param[j] = keep + h;
      const double up = models::linear_softmax_loss_grad(X, y, model, nullptr, nullptr);
      param[j] = keep - h;
      const double dn = models::linear_softmax_loss_grad(X, y, model, nullptr, nullptr);
      param[j] = keep;
      max_rel = std::max(max_rel, rel_err((up - dn) / (2 * h), grad[j]));
    }
  };
  probe(model.weights, dw);
  probe(model.bias, db);
  CHECK(max_rel <= 1e-5);
}

TEST_CASE("linear softmax learns the orthogonal-noise code") {
  auto train = data::make_synthetic_images(1000, 61);
  auto test = data::make_synthetic_images(400, 62);
  const auto scheme =
      signals::make_noise(signals::generate_noise_basis(10, train.dim(), 0.5, 8));
  const auto [Xtr, ytr] = image_features(signals::inject(train, scheme));
  const auto [Xte, yte] = image_features(signals::inject(test, scheme));

  models::LinearSoftmaxParams p;
  p.epochs = 30;
  const auto model = models::fit_linear_softmax(Xtr, ytr, 10, p);
  CHECK(models::accuracy(model->predict(Xte), yte) >= 0.9);
}

TEST_CASE("linear softmax divergence is reported") {
  const auto X = dense_matrix({{1e3, 1e3}, {-1e3, -1e3}});
  const std::vector<int> y = {0, 1};
  models::LinearSoftmaxParams p;
  p.lr = 1e12;
  p.epochs = 50;
  CHECK_THROWS_WITH_AS(models::fit_linear_softmax(X, y, 2, p),
                       doctest::Contains("learning rate"), std::runtime_error);
}

TEST_CASE("shallow nn gradient check, both activations") {
  Rng rng(63);
  FeatureMatrix X;
  X.kind = FeatureKind::RawPixels;
  X.rows = 4;
  X.cols = 12;
  X.dense.resize(48);
  for (auto& v : X.dense) v = rng.gaussian();
  const std::vector<int> y = {0, 2, 1, 1};

  for (auto act : {models::ShallowActivation::Relu, models::ShallowActivation::MaxPairs}) {
    models::ShallowNnModel model;
    model.K_ = 3;
    model.D_ = 12;
    model.hidden = 6;
    model.activation = act;
    model.w1.resize(std::size_t(model.pre_units()) * 12);
    model.b1.resize(model.pre_units());
    model.w2.resize(3 * 6);
    model.b2.resize(3);
    for (auto& v : model.w1) v = 0.4 * rng.gaussian();
    for (auto& v : model.b1) v = 0.1 * rng.gaussian();
    for (auto& v : model.w2) v = 0.4 * rng.gaussian();
    for (auto& v : model.b2) v = 0.1 * rng.gaussian();

    models::ShallowNnGrads grads;
    models::shallow_nn_loss_grad(X, y, model, &grads);

    const double h = 1e-6;
    double max_rel = 0.0;
    auto probe = [&](std::vector<double>& param, const std::vector<double>& grad) {
      for (std::size_t j = 0; j < param.size(); ++j) {
        const double keep = param[j];
        param[j] = keep + h;
        const double up = models::shallow_nn_loss_grad(X, y, model, nullptr);
        param[j] = keep - h;
        const double dn = models::shallow_nn_loss_grad(X, y, model, nullptr);
        param[j] = keep;
        max_rel = std::max(max_rel, rel_err((up - dn) / (2 * h), grad[j]));
      }
    };
    probe(model.w1, grads.dw1);
    probe(model.b1, grads.db1);
    probe(model.w2, grads.dw2);
    probe(model.b2, grads.db2);
    CHECK(max_rel <= 1e-4);
  }
}

TEST_CASE("shallow nn learns the mean code") {
  auto train = data::normalize(data::make_synthetic_images(1000, 64),
                               data::NormalizeMode::ZeroMean);
  auto test = data::normalize(data::make_synthetic_images(400, 65),
                              data::NormalizeMode::ZeroMean);
  const auto scheme = signals::make_mean();
  const auto [Xtr, ytr] = image_features(signals::inject(train, scheme));
  const auto [Xte, yte] = image_features(signals::inject(test, scheme));

  models::ShallowNnParams p;
  p.epochs = 20;
  const auto model = models::fit_shallow_nn(Xtr, ytr, 10, p);
  CHECK(models::accuracy(model->predict(Xte), yte) >= 0.9);
}

TEST_CASE("argmax invariance: positive scaling of logits keeps predictions") {
  auto set = data::make_synthetic_images(200, 66);
  const auto [X, y] = image_features(set);
  models::LinearSoftmaxParams p;
  p.epochs = 3;
  auto model = models::fit_linear_softmax(X, y, 10, p);
  const auto before = model->predict(X);
  for (auto& w : model->weights) w *= 7.5;
  for (auto& b : model->bias) b *= 7.5;
  CHECK(model->predict(X) == before);

  models::ShallowNnParams sp;
  sp.epochs = 2;
  auto nn = models::fit_shallow_nn(X, y, 10, sp);
  const auto nn_before = nn->predict(X);
  for (auto& w : nn->w2) w *= 3.0;
  for (auto& b : nn->b2) b *= 3.0;
  CHECK(nn->predict(X) == nn_before);
}

TEST_CASE("model artifacts round-trip through the versioned format") {
  auto images = data::make_synthetic_images(250, 67);
  const auto [X, y] = image_features(images);
  auto text = data::make_synthetic_text(250, 68);
  const auto Xt = data::to_features(text);

  const auto dir = std::filesystem::temp_directory_path() / "sigbench_models";
  std::filesystem::create_directories(dir);

  std::vector<std::unique_ptr<models::Model>> zoo;
  zoo.push_back(models::fit_tree(X, y, 10, {}));
  models::ForestParams fp;
  fp.n_trees = 5;
  zoo.push_back(models::fit_forest(X, y, 10, fp));
  models::GaussianParams gp;
  zoo.push_back(models::fit_gaussian_generative(X, y, 10, gp));
  gp.variant = models::GaussianVariant::Lda;
  zoo.push_back(models::fit_gaussian_generative(X, y, 10, gp));
  gp.variant = models::GaussianVariant::Qda;
  zoo.push_back(models::fit_gaussian_generative(X, y, 10, gp));
  models::LinearSoftmaxParams lp;
  lp.epochs = 2;
  zoo.push_back(models::fit_linear_softmax(X, y, 10, lp));
  models::ShallowNnParams sp;
  sp.epochs = 1;
  zoo.push_back(models::fit_shallow_nn(X, y, 10, sp));
  zoo.push_back(models::fit_tree(Xt, text.labels, text.num_classes, {}));

  int idx = 0;
  for (const auto& model : zoo) {
    const auto file = dir / ("model_" + std::to_string(idx++) + ".bin");
    models::save_model(*model, file);
    const auto loaded = models::load_model(file);
    CHECK(loaded->kind() == model->kind());
    const auto& Xref = model->feature_dim() == Xt.cols ? Xt : X;
    CHECK(loaded->predict(Xref) == model->predict(Xref));
  }
}

TEST_CASE("predict rejects mismatched feature dimensions") {
  auto set = data::make_synthetic_images(100, 69);
  const auto [X, y] = image_features(set);
  const auto tree = models::fit_tree(X, y, 10, {});
  const auto bad = dense_matrix({{1.0, 2.0}});
  CHECK_THROWS(tree->predict(bad));
}

TEST_CASE("trees on one-hot text features: mnemonic and length are exact") {
  auto train = data::make_synthetic_text(1500, 70);
  auto test = data::make_synthetic_text(500, 71);

  {
    const auto scheme = signals::make_mnemonic();
    const auto Xtr = data::to_features(signals::inject(train, scheme));
    const auto Xte = data::to_features(signals::inject(test, scheme));
    const auto tree = models::fit_tree(Xtr, train.labels, train.num_classes, {});
    CHECK(models::accuracy(tree->predict(Xte), test.labels) == 1.0);
  }
  {
    const auto scheme = signals::make_length_encoding(train.num_classes);
    const auto Xtr = data::to_features(signals::inject(train, scheme));
    const auto Xte = data::to_features(signals::inject(test, scheme));
    const auto tree = models::fit_tree(Xtr, train.labels, train.num_classes, {});
    CHECK(models::accuracy(tree->predict(Xte), test.labels) >= 0.99);
  }
}
