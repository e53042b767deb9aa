#pragma once

#include <memory>
#include <string>
#include <vector>

#include "sigbench/cnn/layers.hpp"
#include "sigbench/models/model.hpp"

namespace sigbench::cnn {

// A layer stack with a softmax cross-entropy head. Shapes are chained and
// checked at build time, before any training.
template <typename T>
class Network {
 public:
  Shape input_shape;
  std::vector<std::unique_ptr<Layer<T>>> layers;

  // Validates the shape chain and returns the per-layer output shapes.
  std::vector<Shape> validate() const {
    std::vector<Shape> shapes;
    Shape cur = input_shape;
    for (const auto& layer : layers) {
      cur = layer->output_shape(cur);
      shapes.push_back(cur);
    }
    if (shapes.empty() || shapes.back().size() != 1)
      throw std::invalid_argument("network must end in a logit vector");
    return shapes;
  }

  int logit_count() const { return validate().back()[0]; }

  std::size_t param_count() const {
    std::size_t total = 0;
    for (const auto& layer : layers) total += layer->param_count();
    return total;
  }

  std::vector<std::string> describe() const {
    std::vector<std::string> out;
    Shape cur = input_shape;
    out.push_back("input " + shape_str(cur));
    for (const auto& layer : layers) {
      cur = layer->output_shape(cur);
      out.push_back(layer->describe() + " -> " + shape_str(cur));
    }
    out.push_back("softmax");
    return out;
  }

  void init(std::uint64_t seed) {
    validate();
    Rng rng(seed);
    for (auto& layer : layers) layer->init_params(rng);
  }

  void collect(std::vector<TensorRef<T>>& refs) {
    for (auto& layer : layers) layer->collect(refs);
  }

  // Runs the stack; activations are retained for a following backward().
  const Batch<T>& forward(const Batch<T>& input, bool train) {
    if (input.dims != input_shape)
      throw std::invalid_argument("batch shape " + shape_str(input.dims) +
                                  " does not match network input " + shape_str(input_shape));
    acts_.resize(layers.size());
    const Batch<T>* cur = &input;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i]->forward(*cur, acts_[i], train);
      cur = &acts_[i];
    }
    return *cur;
  }

  // Softmax probabilities for the cached logits.
  void probabilities(std::vector<T>& probs) const {
    const Batch<T>& logits = acts_.back();
    const int K = logits.dims[0];
    probs.resize(logits.n * K);
    for (std::size_t i = 0; i < logits.n; ++i) {
      const T* z = logits.item(i);
      T mx = z[0];
      for (int k = 1; k < K; ++k) mx = std::max(mx, z[k]);
      double sum = 0.0;
      for (int k = 0; k < K; ++k) sum += std::exp(double(z[k] - mx));
      for (int k = 0; k < K; ++k)
        probs[i * K + k] = static_cast<T>(std::exp(double(z[k] - mx)) / sum);
    }
  }

  // Mean cross-entropy of the cached forward against `labels`, plus a full
  // backward pass that fills every parameter gradient.
  double loss_and_backward(const Batch<T>& input, const std::vector<int>& labels) {
    const Batch<T>& logits = acts_.back();
    const int K = logits.dims[0];
    if (labels.size() != logits.n) throw std::invalid_argument("label count mismatch");

    Batch<T> dlogits;
    dlogits.resize(logits.n, logits.dims);
    double loss = 0.0;
    for (std::size_t i = 0; i < logits.n; ++i) {
      const T* z = logits.item(i);
      T* dz = dlogits.item(i);
      T mx = z[0];
      for (int k = 1; k < K; ++k) mx = std::max(mx, z[k]);
      double sum = 0.0;
      for (int k = 0; k < K; ++k) sum += std::exp(double(z[k] - mx));
      const double logsum = std::log(sum) + double(mx);
      loss += logsum - double(z[labels[i]]);
      for (int k = 0; k < K; ++k) {
        const double p = std::exp(double(z[k]) - logsum);
        dz[k] = static_cast<T>((p - (k == labels[i] ? 1.0 : 0.0)) / double(logits.n));
      }
    }
    loss /= double(logits.n);

    grads_.resize(layers.size());
    const Batch<T>* g = &dlogits;
    for (std::size_t i = layers.size(); i-- > 0;) {
      const Batch<T>& in = i == 0 ? input : acts_[i - 1];
      layers[i]->backward(in, acts_[i], *g, grads_[i]);
      g = &grads_[i];
    }
    return loss;
  }

  const Batch<T>& logits() const { return acts_.back(); }

 private:
  std::vector<Batch<T>> acts_;
  std::vector<Batch<T>> grads_;
};

enum class ImageCnnVariant { Plain, Residual };

struct ImageCnnOptions {
  ImageCnnVariant variant = ImageCnnVariant::Residual;
  int width_multiplier = 1;
  int num_classes = 10;
  int channels = 3;
  int height = 32;
  int width = 32;
};

struct TextCnnOptions {
  int num_classes = 5;
  int vocab = 71;  // alphabet + PAD
  int length = 1014;
};

// conv3x3xC -> BN -> ReLU -> 2 residual blocks (C) -> maxpool2 ->
// conv3x3x2C -> BN -> ReLU -> 2 residual blocks (2C) -> maxpool2 ->
// flatten -> dense(K), with C = 16 * width_multiplier. The plain variant
// removes only the shortcuts.
template <typename T>
Network<T> build_image_cnn(const ImageCnnOptions& opts) {
  if (opts.width_multiplier < 1) throw std::invalid_argument("width multiplier must be >= 1");
  const int c1 = 16 * opts.width_multiplier;
  const int c2 = 32 * opts.width_multiplier;
  const bool shortcut = opts.variant == ImageCnnVariant::Residual;

  Network<T> net;
  net.input_shape = {opts.channels, opts.height, opts.width};
  net.layers.push_back(std::make_unique<Conv2d<T>>(opts.channels, c1, 3, false));
  net.layers.push_back(std::make_unique<BatchNormLite<T>>(c1));
  net.layers.push_back(std::make_unique<Relu<T>>());
  net.layers.push_back(std::make_unique<ResidualBlock<T>>(c1, 2, shortcut));
  net.layers.push_back(std::make_unique<ResidualBlock<T>>(c1, 2, shortcut));
  net.layers.push_back(std::make_unique<MaxPool2d<T>>(2));
  net.layers.push_back(std::make_unique<Conv2d<T>>(c1, c2, 3, false));
  net.layers.push_back(std::make_unique<BatchNormLite<T>>(c2));
  net.layers.push_back(std::make_unique<Relu<T>>());
  net.layers.push_back(std::make_unique<ResidualBlock<T>>(c2, 2, shortcut));
  net.layers.push_back(std::make_unique<ResidualBlock<T>>(c2, 2, shortcut));
  net.layers.push_back(std::make_unique<MaxPool2d<T>>(2));
  net.layers.push_back(std::make_unique<Flatten<T>>());
  const int flat = c2 * (opts.height / 4) * (opts.width / 4);
  net.layers.push_back(std::make_unique<Dense<T>>(flat, opts.num_classes));
  net.validate();
  return net;
}

// conv1d(k=7,64) -> ReLU -> maxpool3 -> conv1d(k=7,64) -> ReLU -> maxpool3
// -> conv1d(k=3,64) -> ReLU -> global maxpool -> dense(64) -> ReLU ->
// dense(K). The input is a symbol-id row; the first layer convolves its
// one-hot encoding implicitly.
template <typename T>
Network<T> build_text_cnn(const TextCnnOptions& opts) {
  Network<T> net;
  net.input_shape = {opts.length};
  net.layers.push_back(std::make_unique<CharConv1d<T>>(opts.vocab, 64, 7));
  net.layers.push_back(std::make_unique<Relu<T>>());
  net.layers.push_back(std::make_unique<MaxPool1d<T>>(3));
  net.layers.push_back(std::make_unique<Conv1d<T>>(64, 64, 7));
  net.layers.push_back(std::make_unique<Relu<T>>());
  net.layers.push_back(std::make_unique<MaxPool1d<T>>(3));
  net.layers.push_back(std::make_unique<Conv1d<T>>(64, 64, 3));
  net.layers.push_back(std::make_unique<Relu<T>>());
  net.layers.push_back(std::make_unique<GlobalMaxPool1d<T>>());
  net.layers.push_back(std::make_unique<Dense<T>>(64, 64));
  net.layers.push_back(std::make_unique<Relu<T>>());
  net.layers.push_back(std::make_unique<Dense<T>>(64, opts.num_classes));
  net.validate();
  return net;
}

// Trained-network wrapper satisfying the shared fit/predict contract.
// Image rows arrive as flattened pixels; text rows arrive as one-hot
// features and are folded back to symbol ids.
class CnnModel final : public models::Model {
 public:
  enum class InputKind { Images, Text };

  CnnModel(Network<float> net, InputKind input_kind, ImageCnnOptions image_opts,
           TextCnnOptions text_opts)
      : net_(std::move(net)),
        input_kind_(input_kind),
        image_opts_(image_opts),
        text_opts_(text_opts) {}

  std::string kind() const override { return "cnn"; }
  int num_classes() const override {
    return input_kind_ == InputKind::Images ? image_opts_.num_classes : text_opts_.num_classes;
  }
  std::size_t feature_dim() const override;
  std::vector<int> predict(const data::FeatureMatrix& X) const override;
  void save(std::ostream& out) const override;
  static std::unique_ptr<CnnModel> load_payload(std::istream& in);

  Network<float>& network() { return net_; }
  InputKind input_kind() const { return input_kind_; }

 private:
  mutable Network<float> net_;  // forward caches activations
  InputKind input_kind_;
  ImageCnnOptions image_opts_;
  TextCnnOptions text_opts_;
};

}  // namespace sigbench::cnn
