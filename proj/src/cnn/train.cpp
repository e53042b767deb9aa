#include "sigbench/cnn/train.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <omp.h>

#include "sigbench/rng.hpp"

namespace sigbench::cnn {
namespace {

using data::LabeledImageSet;
using data::LabeledTextSet;

void fill_batch(const LabeledImageSet& set, const std::size_t* idx, std::size_t n,
                Batch<float>& b) {
  b.resize(n, {set.channels, set.height, set.width});
  const std::size_t dim = set.dim();
  for (std::size_t i = 0; i < n; ++i) {
    const double* src = set.image(idx[i]);
    float* dst = b.item(i);
    for (std::size_t j = 0; j < dim; ++j) dst[j] = static_cast<float>(src[j]);
  }
}

void fill_batch(const LabeledTextSet& set, const std::size_t* idx, std::size_t n,
                Batch<float>& b) {
  b.resize(n, {set.max_len});
  for (std::size_t i = 0; i < n; ++i) {
    const std::int16_t* src = set.row(idx[i]);
    float* dst = b.item(i);
    for (int t = 0; t < set.max_len; ++t) dst[t] = static_cast<float>(src[t]);
  }
}

struct SgdState {
  std::vector<std::vector<float>> velocity;

  explicit SgdState(const std::vector<TensorRef<float>>& refs) {
    velocity.resize(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i)
      if (refs[i].trainable) velocity[i].assign(refs[i].value->size(), 0.0f);
  }

  void step(std::vector<TensorRef<float>>& refs, double lr, double momentum, double wd) {
    for (std::size_t i = 0; i < refs.size(); ++i) {
      if (!refs[i].trainable) continue;
      auto& p = *refs[i].value;
      auto& g = *refs[i].grad;
      auto& v = velocity[i];
      const float decay = refs[i].decay ? static_cast<float>(wd) : 0.0f;
      const float flr = static_cast<float>(lr);
      const float fm = static_cast<float>(momentum);
      for (std::size_t j = 0; j < p.size(); ++j) {
        v[j] = fm * v[j] - flr * (g[j] + decay * p[j]);
        p[j] += v[j];
      }
    }
  }
};

double lr_at(const TrainConfig& config, int epoch) {
  double lr = config.lr;
  for (double m : config.decay_milestones)
    if (epoch >= static_cast<int>(m * config.epochs)) lr *= config.decay_factor;
  return lr;
}

std::size_t correct_in_batch(const Batch<float>& logits, const std::vector<int>& labels,
                             std::size_t offset, std::size_t n) {
  const int K = logits.dims[0];
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const float* z = logits.item(i);
    int best = 0;
    for (int k = 1; k < K; ++k)
      if (z[k] > z[best]) best = k;
    hits += best == labels[offset + i];
  }
  return hits;
}

template <typename SetT>
double evaluate_set(Network<float>& net, const SetT& set, int batch) {
  std::vector<std::size_t> idx(set.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Batch<float> input;
  std::size_t hits = 0;
  for (std::size_t start = 0; start < set.size(); start += batch) {
    const std::size_t n = std::min<std::size_t>(batch, set.size() - start);
    fill_batch(set, idx.data() + start, n, input);
    const Batch<float>& logits = net.forward(input, false);
    const int K = logits.dims[0];
    for (std::size_t i = 0; i < n; ++i) {
      const float* z = logits.item(i);
      int best = 0;
      for (int k = 1; k < K; ++k)
        if (z[k] > z[best]) best = k;
      hits += best == set.labels[start + i];
    }
  }
  return double(hits) / double(set.size());
}

template <typename SetT>
std::vector<EpochStat> train_core(Network<float>& net, const SetT& train, const SetT& test,
                                  const TrainConfig& config) {
  if (config.epochs < 1 || config.lr <= 0.0) throw std::invalid_argument("bad train config");
  if (config.threads > 0) omp_set_num_threads(config.threads);

  net.init(derive_seed(config.seed, 0x5eed));
  std::vector<TensorRef<float>> refs;
  net.collect(refs);
  SgdState sgd(refs);

  std::vector<EpochStat> curve;
  Batch<float> input;
  std::vector<int> batch_labels;
  const std::size_t n = train.size();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng order_rng(derive_seed(config.seed, 0xe90c + static_cast<std::uint64_t>(epoch)));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    order_rng.shuffle(order);

    const double lr = lr_at(config, epoch);
    double loss_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t start = 0; start < n; start += config.batch) {
      const std::size_t bsz = std::min<std::size_t>(config.batch, n - start);
      fill_batch(train, order.data() + start, bsz, input);
      batch_labels.resize(bsz);
      for (std::size_t i = 0; i < bsz; ++i) batch_labels[i] = train.labels[order[start + i]];

      const Batch<float>& logits = net.forward(input, true);
      hits += correct_in_batch(logits, batch_labels, 0, bsz);
      const double loss = net.loss_and_backward(input, batch_labels);
      loss_sum += loss * double(bsz);
      if (!std::isfinite(loss))
        throw std::runtime_error("cnn training diverged (loss is not finite)");
      sgd.step(refs, lr, config.momentum, config.weight_decay);
    }

    EpochStat stat;
    stat.epoch = epoch + 1;
    stat.loss = loss_sum / double(n);
    stat.train_acc = double(hits) / double(n);
    const bool last = epoch + 1 == config.epochs;
    if (last || (config.eval_every > 0 && (epoch + 1) % config.eval_every == 0))
      stat.test_acc = evaluate_set(net, test, 256);
    curve.push_back(stat);
  }
  return curve;
}

}  // namespace

CnnTrainResult train_image_cnn(const ImageCnnOptions& arch, const LabeledImageSet& train,
                               const LabeledImageSet& test, const TrainConfig& config) {
  if (train.channels != arch.channels || train.height != arch.height ||
      train.width != arch.width || train.num_classes > arch.num_classes)
    throw std::invalid_argument("training set does not match the network input shape");
  Network<float> net = build_image_cnn<float>(arch);
  CnnTrainResult result;
  result.curve = train_core(net, train, test, config);
  result.model = std::make_unique<CnnModel>(std::move(net), CnnModel::InputKind::Images, arch,
                                            TextCnnOptions{});
  return result;
}

CnnTrainResult train_text_cnn(const TextCnnOptions& arch, const LabeledTextSet& train,
                              const LabeledTextSet& test, const TrainConfig& config) {
  if (train.max_len != arch.length || train.num_symbols() != arch.vocab ||
      train.num_classes > arch.num_classes)
    throw std::invalid_argument("training set does not match the network input shape");
  Network<float> net = build_text_cnn<float>(arch);
  CnnTrainResult result;
  result.curve = train_core(net, train, test, config);
  result.model = std::make_unique<CnnModel>(std::move(net), CnnModel::InputKind::Text,
                                            ImageCnnOptions{}, arch);
  return result;
}

double evaluate(CnnModel& model, const LabeledImageSet& set, int batch) {
  return evaluate_set(model.network(), set, batch);
}

double evaluate(CnnModel& model, const LabeledTextSet& set, int batch) {
  return evaluate_set(model.network(), set, batch);
}

void write_curve_csv(const std::vector<EpochStat>& curve, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot open for writing: " + file.string());
  out << "epoch,train_acc,test_acc,loss\n";
  char line[128];
  for (const EpochStat& s : curve) {
    if (s.test_acc >= 0.0)
      std::snprintf(line, sizeof line, "%d,%.6f,%.6f,%.6f\n", s.epoch, s.train_acc, s.test_acc,
                    s.loss);
    else
      std::snprintf(line, sizeof line, "%d,%.6f,,%.6f\n", s.epoch, s.train_acc, s.loss);
    out << line;
  }
}

}  // namespace sigbench::cnn
