#pragma once

#include <cstdint>

#include "sigbench/models/model.hpp"

namespace sigbench::models {

struct LinearSoftmaxParams {
  double lr = 0.05;
  int epochs = 30;
  int batch = 64;
  double l2 = 0.0;
  std::uint64_t seed = 0;
};

enum class ShallowActivation { Relu, MaxPairs };

struct ShallowNnParams {
  int hidden = 128;  // hidden outputs; max_pairs uses 2*hidden pre-activations
  ShallowActivation activation = ShallowActivation::MaxPairs;
  double lr = 0.05;
  double momentum = 0.9;
  int epochs = 20;
  int batch = 64;
  double l2 = 0.0;
  std::uint64_t seed = 0;
};

class LinearSoftmaxModel final : public Model {
 public:
  std::string kind() const override { return "linear_softmax"; }
  int num_classes() const override { return K_; }
  std::size_t feature_dim() const override { return D_; }
  std::vector<int> predict(const data::FeatureMatrix& X) const override;
  void save(std::ostream& out) const override;
  static std::unique_ptr<LinearSoftmaxModel> load_payload(std::istream& in);

  // Row-major [K, D] weights and [K] bias.
  std::vector<double> weights;
  std::vector<double> bias;
  int K_ = 0;
  std::size_t D_ = 0;
};

class ShallowNnModel final : public Model {
 public:
  std::string kind() const override { return "shallow_nn"; }
  int num_classes() const override { return K_; }
  std::size_t feature_dim() const override { return D_; }
  std::vector<int> predict(const data::FeatureMatrix& X) const override;
  void save(std::ostream& out) const override;
  static std::unique_ptr<ShallowNnModel> load_payload(std::istream& in);

  std::vector<double> w1, b1;  // [P, D], [P] pre-activations
  std::vector<double> w2, b2;  // [K, H], [K]
  ShallowActivation activation = ShallowActivation::Relu;
  int hidden = 0;  // H; P = H (relu) or 2H (max_pairs)
  int K_ = 0;
  std::size_t D_ = 0;

  int pre_units() const { return activation == ShallowActivation::Relu ? hidden : 2 * hidden; }
};

struct ShallowNnGrads {
  std::vector<double> dw1, db1, dw2, db2;
};

// Mean cross-entropy and analytic parameter gradients at the given state.
// The trainers consume these per mini-batch; the finite-difference checks
// verify the same code path.
double linear_softmax_loss_grad(const data::FeatureMatrix& X, const std::vector<int>& y,
                                const LinearSoftmaxModel& model, std::vector<double>* dw,
                                std::vector<double>* db);
double shallow_nn_loss_grad(const data::FeatureMatrix& X, const std::vector<int>& y,
                            const ShallowNnModel& model, ShallowNnGrads* grads);

// Single-layer softmax classifier trained by mini-batch gradient descent on
// cross-entropy. Covers both the "Logistic Regression" and "Shallow Linear
// NN (Perceptron)" competitors.
std::unique_ptr<LinearSoftmaxModel> fit_linear_softmax(const data::FeatureMatrix& X,
                                                       const std::vector<int>& y, int num_classes,
                                                       const LinearSoftmaxParams& params);

// One hidden layer, softmax output, SGD with momentum. The max_pairs
// activation takes the elementwise max over consecutive pre-activation
// pairs.
std::unique_ptr<ShallowNnModel> fit_shallow_nn(const data::FeatureMatrix& X,
                                               const std::vector<int>& y, int num_classes,
                                               const ShallowNnParams& params);

}  // namespace sigbench::models
