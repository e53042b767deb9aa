#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "sigbench/cnn/network.hpp"
#include "sigbench/dataset.hpp"

namespace sigbench::cnn {

struct TrainConfig {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int batch = 64;
  int epochs = 20;
  std::vector<double> decay_milestones{0.5, 0.75};  // fractions of epochs
  double decay_factor = 0.1;
  std::uint64_t seed = 0;
  int threads = 0;     // 0 = runtime default
  int eval_every = 1;  // test accuracy cadence; 0 = final epoch only
};

struct EpochStat {
  int epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  double test_acc = -1.0;  // negative = not evaluated this epoch
};

struct CnnTrainResult {
  std::unique_ptr<CnnModel> model;
  std::vector<EpochStat> curve;
};

// Mini-batch SGD with momentum, weight decay and step lr decay.
// Deterministic per seed and bit-identical for any worker thread count.
CnnTrainResult train_image_cnn(const ImageCnnOptions& arch, const data::LabeledImageSet& train,
                               const data::LabeledImageSet& test, const TrainConfig& config);
CnnTrainResult train_text_cnn(const TextCnnOptions& arch, const data::LabeledTextSet& train,
                              const data::LabeledTextSet& test, const TrainConfig& config);

double evaluate(CnnModel& model, const data::LabeledImageSet& set, int batch = 256);
double evaluate(CnnModel& model, const data::LabeledTextSet& set, int batch = 256);

// epoch, train_acc, test_acc, loss
void write_curve_csv(const std::vector<EpochStat>& curve, const std::filesystem::path& file);

}  // namespace sigbench::cnn
