#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sigbench/cnn/train.hpp"
#include "sigbench/harness/config.hpp"
#include "sigbench/models/gaussian.hpp"
#include "sigbench/models/linear.hpp"
#include "sigbench/models/tree.hpp"
#include "sigbench/signals.hpp"

namespace sigbench::harness {

enum class Modality { Images, Text };

struct DatasetSpec {
  Modality modality = Modality::Images;
  std::string train_path;  // CIFAR binary / container / CSV; empty = synthesize
  std::string test_path;
  bool synthesize = false;
  std::size_t synth_train = 4000;
  std::size_t synth_test = 1000;
  int num_classes = 10;
  double fraction = 1.0;      // classical-model subsample
  double cnn_fraction = 1.0;  // CNN subsample (fractions are per model group)
  std::uint64_t seed = 42;
  bool zero_mean = false;  // forced on for the mean scheme
};

// Effective per-family parameters for every model the harness can run.
struct ModelParams {
  models::TreeParams tree;
  models::ForestParams forest;
  models::GaussianParams nb{.variant = models::GaussianVariant::NaiveBayes};
  models::GaussianParams lda{.variant = models::GaussianVariant::Lda};
  models::GaussianParams qda{.variant = models::GaussianVariant::Qda};
  models::LinearSoftmaxParams linear;
  models::ShallowNnParams shallow_relu{.activation = models::ShallowActivation::Relu};
  models::ShallowNnParams shallow_max{.activation = models::ShallowActivation::MaxPairs};
  cnn::ImageCnnOptions image_arch;
  cnn::TextCnnOptions text_arch;
  cnn::TrainConfig cnn_train;
};

struct ExperimentSpec {
  DatasetSpec dataset;
  std::string scheme_name = "clean";  // "clean" or a signals kind name
  std::optional<signals::SignalScheme> scheme;
  std::vector<std::string> model_names;
  ModelParams params;
  std::uint64_t master_seed = 42;
  std::string config_text;  // canonical config; hashed into every row
};

struct ResultRow {
  std::string scheme;
  std::string model;
  double train_acc = -1.0;
  double test_acc = -1.0;
  double decode_oracle_acc = -1.0;  // negative = not applicable (clean)
  double linf = 0.0;
  double runtime_s = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string error;  // non-empty = failed cell, with the failing stage named
};

struct ResultsTable {
  std::string scheme;
  std::vector<ResultRow> rows;
};

struct SuiteSummaryRow {
  std::string scheme;
  std::string best_model;
  double best_test_acc = -1.0;
  double decode_oracle_acc = -1.0;
};

struct SuiteResult {
  std::vector<ResultsTable> tables;
  std::vector<SuiteSummaryRow> summary;
};

// The model names the harness knows how to fit.
const std::vector<std::string>& known_model_names();

// Composes data -> signal -> models for one scheme, scoring every
// requested model; failed cells carry their error instead of aborting the
// table.
ResultsTable run_experiment(const ExperimentSpec& spec);

// Cross product of configured schemes x models with a best-model summary.
SuiteResult run_suite(const Config& config);

// Parses the [dataset]/[signals]/[models.*]/[cnn]/[train] sections shared
// by the suite and single-cell runs; validates against unknown keys.
ExperimentSpec spec_from_config(const Config& config);

// Builds a scheme by name with the configured defaults (scale, norm, seed,
// class count, image geometry).
signals::SignalScheme build_scheme(const std::string& name, int num_classes,
                                   double scale, double noise_norm, std::uint64_t seed,
                                   std::size_t image_dim);

enum class ReportFormat { Csv, Markdown, Both };

std::vector<SuiteSummaryRow> summarize(const std::vector<ResultsTable>& tables);

// CSV is the machine-readable record (stable column order, '.' decimal);
// Markdown mirrors the comparison-table layout.
void emit_report(const std::vector<ResultsTable>& tables, ReportFormat format,
                 const std::filesystem::path& out_dir);

}  // namespace sigbench::harness
