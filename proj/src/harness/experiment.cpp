#include "sigbench/harness/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "sigbench/data_io.hpp"
#include "sigbench/rng.hpp"
#include "sigbench/synthetic.hpp"
#include "sigbench/transforms.hpp"

namespace sigbench::harness {
namespace {

using data::LabeledImageSet;
using data::LabeledTextSet;

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::uint64_t fnv64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::pair<LabeledImageSet, LabeledImageSet> load_images(const DatasetSpec& ds) {
  if (ds.synthesize || ds.train_path.empty()) {
    data::ImageSynthParams p;
    p.num_classes = ds.num_classes;
    LabeledImageSet all =
        data::make_synthetic_images(ds.synth_train + ds.synth_test, ds.seed, p);
    LabeledImageSet train = all, test = all;
    const std::size_t n = ds.synth_train, dim = all.dim();
    train.labels.assign(all.labels.begin(), all.labels.begin() + n);
    train.pixels.assign(all.pixels.begin(), all.pixels.begin() + n * dim);
    test.labels.assign(all.labels.begin() + n, all.labels.end());
    test.pixels.assign(all.pixels.begin() + n * dim, all.pixels.end());
    train.provenance += "-train";
    test.provenance += "-test";
    return {std::move(train), std::move(test)};
  }
  auto train = data::load_any_set(ds.train_path);
  auto test = data::load_any_set(ds.test_path);
  if (!train.images || !test.images)
    throw std::runtime_error("dataset paths do not hold image sets");
  return {std::move(*train.images), std::move(*test.images)};
}

std::pair<LabeledTextSet, LabeledTextSet> load_text_sets(const DatasetSpec& ds) {
  if (ds.synthesize || ds.train_path.empty()) {
    data::TextSynthParams p;
    p.num_classes = ds.num_classes;
    LabeledTextSet all = data::make_synthetic_text(ds.synth_train + ds.synth_test, ds.seed, p);
    LabeledTextSet train = all, test = all;
    const std::size_t n = ds.synth_train;
    train.labels.assign(all.labels.begin(), all.labels.begin() + n);
    train.symbols.assign(all.symbols.begin(), all.symbols.begin() + n * all.max_len);
    test.labels.assign(all.labels.begin() + n, all.labels.end());
    test.symbols.assign(all.symbols.begin() + n * all.max_len, all.symbols.end());
    train.provenance += "-train";
    test.provenance += "-test";
    return {std::move(train), std::move(test)};
  }
  auto load_one = [&](const std::string& path) {
    if (path.size() > 4 && path.substr(path.size() - 4) == ".csv") {
      data::TextLoadOptions opts;
      opts.num_classes = ds.num_classes;
      return data::load_text(path, data::default_alphabet(), opts);
    }
    return data::load_text_set(path);
  };
  return {load_one(ds.train_path), load_one(ds.test_path)};
}

struct FittedCell {
  std::unique_ptr<models::Model> model;
  double train_acc = -1.0;
  double test_acc = -1.0;
};

}  // namespace

const std::vector<std::string>& known_model_names() {
  static const std::vector<std::string> names = {
      "tree",           "forest",          "gaussian_nb", "lda", "qda",
      "linear_softmax", "shallow_nn_relu", "shallow_nn_max", "cnn"};
  return names;
}

signals::SignalScheme build_scheme(const std::string& name, int num_classes, double scale,
                                   double noise_norm, std::uint64_t seed,
                                   std::size_t image_dim) {
  using namespace signals;
  const SignalKind kind = kind_from_name(name);
  switch (kind) {
    case SignalKind::OnePixel: return make_one_pixel(scale);
    case SignalKind::PatternPixels: return make_pattern_pixels(scale);
    case SignalKind::RandomPixel: return make_random_pixel(derive_seed(seed, 0x21), scale);
    case SignalKind::MultipleLocations:
      return make_multiple_locations(num_classes, derive_seed(seed, 0x22));
    case SignalKind::Noise:
      return make_noise(
          generate_noise_basis(num_classes, image_dim, noise_norm, derive_seed(seed, 0x23)));
    case SignalKind::Mean: return make_mean(scale);
    case SignalKind::Mnemonic: return make_mnemonic();
    case SignalKind::LengthEncoding: return make_length_encoding(num_classes);
    case SignalKind::PatternChar: return make_pattern_char();
  }
  throw std::invalid_argument("unknown scheme name: " + name);
}

namespace {

// Runs one classical model on prepared features.
FittedCell fit_classical(const std::string& name, const data::FeatureMatrix& Xtr,
                         const std::vector<int>& ytr, const data::FeatureMatrix& Xte,
                         const std::vector<int>& yte, int K, const ModelParams& params,
                         std::uint64_t cell_seed) {
  FittedCell cell;
  if (name == "tree") {
    models::TreeParams p = params.tree;
    p.seed = cell_seed;
    cell.model = models::fit_tree(Xtr, ytr, K, p);
  } else if (name == "forest") {
    models::ForestParams p = params.forest;
    p.seed = cell_seed;
    cell.model = models::fit_forest(Xtr, ytr, K, p);
  } else if (name == "gaussian_nb") {
    cell.model = models::fit_gaussian_generative(Xtr, ytr, K, params.nb);
  } else if (name == "lda") {
    cell.model = models::fit_gaussian_generative(Xtr, ytr, K, params.lda);
  } else if (name == "qda") {
    cell.model = models::fit_gaussian_generative(Xtr, ytr, K, params.qda);
  } else if (name == "linear_softmax") {
    models::LinearSoftmaxParams p = params.linear;
    p.seed = cell_seed;
    cell.model = models::fit_linear_softmax(Xtr, ytr, K, p);
  } else if (name == "shallow_nn_relu" || name == "shallow_nn_max") {
    models::ShallowNnParams p =
        name == "shallow_nn_relu" ? params.shallow_relu : params.shallow_max;
    p.seed = cell_seed;
    cell.model = models::fit_shallow_nn(Xtr, ytr, K, p);
  } else {
    throw std::invalid_argument("unknown model name: " + name);
  }
  cell.train_acc = models::accuracy(cell.model->predict(Xtr), ytr);
  cell.test_acc = models::accuracy(cell.model->predict(Xte), yte);
  return cell;
}

template <typename SetT>
struct PreparedData {
  SetT cls_train, cls_test;        // classical-model subsets (injected)
  SetT cls_test_original;          // decode-oracle reference
  SetT cnn_train, cnn_test;        // CNN subsets (injected)
  double decode_acc = -1.0;
  double linf = 0.0;
};

template <typename SetT>
PreparedData<SetT> prepare(const SetT& full_train, const SetT& full_test,
                           const ExperimentSpec& spec) {
  const DatasetSpec& ds = spec.dataset;
  PreparedData<SetT> out;
  SetT cls_train = ds.fraction < 1.0
                       ? data::subsample(full_train, ds.fraction, derive_seed(ds.seed, 0x51))
                       : full_train;
  SetT cls_test = ds.fraction < 1.0
                      ? data::subsample(full_test, ds.fraction, derive_seed(ds.seed, 0x52))
                      : full_test;
  SetT cnn_train = ds.cnn_fraction < 1.0
                       ? data::subsample(full_train, ds.cnn_fraction, derive_seed(ds.seed, 0x53))
                       : full_train;
  SetT cnn_test = ds.cnn_fraction < 1.0
                      ? data::subsample(full_test, ds.cnn_fraction, derive_seed(ds.seed, 0x54))
                      : full_test;

  out.cls_test_original = cls_test;
  if (spec.scheme) {
    out.cls_train = signals::inject(cls_train, *spec.scheme);
    out.cls_test = signals::inject(cls_test, *spec.scheme);
    out.cnn_train = signals::inject(cnn_train, *spec.scheme);
    out.cnn_test = signals::inject(cnn_test, *spec.scheme);
    const auto decoded = signals::decode_signal(out.cls_test, *spec.scheme,
                                                &out.cls_test_original);
    out.decode_acc = decoded.accuracy(out.cls_test.labels);
    out.linf = signals::perturbation_stats(out.cls_test_original, out.cls_test).linf;
  } else {
    out.cls_train = std::move(cls_train);
    out.cls_test = std::move(cls_test);
    out.cnn_train = std::move(cnn_train);
    out.cnn_test = std::move(cnn_test);
  }
  return out;
}

template <typename SetT>
ResultsTable run_prepared(const ExperimentSpec& spec, const PreparedData<SetT>& prep) {
  ResultsTable table;
  table.scheme = spec.scheme_name;

  const int K = prep.cls_train.num_classes;
  std::optional<data::FeatureMatrix> Xtr, Xte;
  auto features = [&]() {
    if (!Xtr) {
      Xtr = data::to_features(prep.cls_train);
      Xte = data::to_features(prep.cls_test);
    }
  };

  for (const std::string& name : spec.model_names) {
    ResultRow row;
    row.scheme = spec.scheme_name;
    row.model = name;
    row.decode_oracle_acc = prep.decode_acc;
    row.linf = prep.linf;
    row.seed = derive_seed(spec.master_seed, fnv64(spec.scheme_name + "/" + name));
    row.config_hash = config_hash(spec.config_text + "\ncell = \"" + spec.scheme_name + "/" +
                                  name + "\"\n");
    const auto t0 = std::chrono::steady_clock::now();
    std::string stage = "fit " + name;
    try {
      if (name == "cnn") {
        cnn::TrainConfig tc = spec.params.cnn_train;
        tc.seed = row.seed;
        if constexpr (std::is_same_v<SetT, LabeledImageSet>) {
          cnn::ImageCnnOptions arch = spec.params.image_arch;
          arch.num_classes = std::max(arch.num_classes, K);
          auto res = cnn::train_image_cnn(arch, prep.cnn_train, prep.cnn_test, tc);
          row.train_acc = res.curve.back().train_acc;
          row.test_acc = res.curve.back().test_acc;
        } else {
          cnn::TextCnnOptions arch = spec.params.text_arch;
          arch.num_classes = std::max(arch.num_classes, K);
          arch.length = prep.cnn_train.max_len;
          arch.vocab = prep.cnn_train.num_symbols();
          auto res = cnn::train_text_cnn(arch, prep.cnn_train, prep.cnn_test, tc);
          row.train_acc = res.curve.back().train_acc;
          row.test_acc = res.curve.back().test_acc;
        }
      } else {
        stage = "featurize";
        features();
        stage = "fit " + name;
        FittedCell cell = fit_classical(name, *Xtr, prep.cls_train.labels, *Xte,
                                        prep.cls_test.labels, K, spec.params, row.seed);
        row.train_acc = cell.train_acc;
        row.test_acc = cell.test_acc;
      }
    } catch (const std::exception& e) {
      row.error = stage + ": " + e.what();
    }
    row.runtime_s = elapsed_s(t0);
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace

ResultsTable run_experiment(const ExperimentSpec& spec) {
  if (spec.scheme && signals::is_image_kind(spec.scheme->kind) !=
                         (spec.dataset.modality == Modality::Images))
    throw std::invalid_argument("scheme " + spec.scheme_name +
                                " does not match the dataset modality");
  if (spec.dataset.modality == Modality::Images) {
    auto [train, test] = load_images(spec.dataset);
    const auto mode =
        spec.dataset.zero_mean || (spec.scheme && spec.scheme->kind == signals::SignalKind::Mean)
            ? data::NormalizeMode::ZeroMean
            : data::NormalizeMode::UnitInterval;
    train = data::normalize(train, mode);
    test = data::normalize(test, mode);
    return run_prepared(spec, prepare(train, test, spec));
  }
  auto [train, test] = load_text_sets(spec.dataset);
  return run_prepared(spec, prepare(train, test, spec));
}

namespace {

void check_known_keys(const Config& config) {
  static const std::set<std::string> exact = {
      "dataset.kind", "dataset.train_path", "dataset.test_path", "dataset.synthesize",
      "dataset.train", "dataset.test", "dataset.classes", "dataset.seed", "dataset.fraction",
      "dataset.cnn_fraction", "dataset.zero_mean",
      "scheme.name",
      "suite.schemes", "suite.models", "suite.seed",
      "signals.scale", "signals.noise_norm", "signals.seed",
      "models.tree.max_depth", "models.tree.min_leaf", "models.tree.feature_subsample",
      "models.forest.n_trees", "models.forest.max_depth", "models.forest.min_leaf",
      "models.forest.feature_subsample",
      "models.gaussian_nb.epsilon_scale",
      "models.lda.epsilon_scale",
      "models.qda.epsilon_scale", "models.qda.span_only",
      "models.linear_softmax.lr", "models.linear_softmax.epochs",
      "models.linear_softmax.batch", "models.linear_softmax.l2",
      "models.shallow_nn.hidden", "models.shallow_nn.lr", "models.shallow_nn.momentum",
      "models.shallow_nn.epochs", "models.shallow_nn.batch", "models.shallow_nn.l2",
      "cnn.variant", "cnn.width_multiplier",
      "train.lr", "train.momentum", "train.weight_decay", "train.batch", "train.epochs",
      "train.eval_every", "train.threads", "train.decay_factor", "train.decay_milestones",
  };
  std::vector<std::string> unknown;
  for (const std::string& key : config.keys())
    if (!exact.count(key)) unknown.push_back(key);
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw std::runtime_error(msg);
  }
}

}  // namespace

ExperimentSpec spec_from_config(const Config& config) {
  check_known_keys(config);
  ExperimentSpec spec;
  spec.config_text = config.canonical();

  const std::string kind = config.get_string("dataset.kind", "images");
  if (kind == "images") spec.dataset.modality = Modality::Images;
  else if (kind == "text") spec.dataset.modality = Modality::Text;
  else throw std::runtime_error("dataset.kind must be \"images\" or \"text\"");

  spec.dataset.train_path = config.get_string("dataset.train_path", "");
  spec.dataset.test_path = config.get_string("dataset.test_path", "");
  spec.dataset.synthesize = config.get_bool("dataset.synthesize", spec.dataset.train_path.empty());
  spec.dataset.synth_train = static_cast<std::size_t>(config.get_int("dataset.train", 4000));
  spec.dataset.synth_test = static_cast<std::size_t>(config.get_int("dataset.test", 1000));
  spec.dataset.num_classes = static_cast<int>(
      config.get_int("dataset.classes", spec.dataset.modality == Modality::Images ? 10 : 5));
  spec.dataset.seed = static_cast<std::uint64_t>(config.get_int("dataset.seed", 42));
  spec.dataset.fraction = config.get_double("dataset.fraction", 1.0);
  spec.dataset.cnn_fraction = config.get_double("dataset.cnn_fraction", 1.0);
  spec.dataset.zero_mean = config.get_bool("dataset.zero_mean", false);

  spec.master_seed = static_cast<std::uint64_t>(config.get_int("suite.seed", 42));

  ModelParams& p = spec.params;
  p.tree.max_depth = static_cast<int>(config.get_int("models.tree.max_depth", -1));
  p.tree.min_leaf = static_cast<int>(config.get_int("models.tree.min_leaf", 1));
  p.tree.feature_subsample =
      static_cast<std::size_t>(config.get_int("models.tree.feature_subsample", 0));
  p.forest.n_trees = static_cast<int>(config.get_int("models.forest.n_trees", 50));
  p.forest.tree.extra_random = true;
  p.forest.tree.max_depth = static_cast<int>(config.get_int("models.forest.max_depth", -1));
  p.forest.tree.min_leaf = static_cast<int>(config.get_int("models.forest.min_leaf", 1));
  p.forest.tree.feature_subsample =
      static_cast<std::size_t>(config.get_int("models.forest.feature_subsample", 0));
  p.nb.epsilon_scale = config.get_double("models.gaussian_nb.epsilon_scale", 1e-6);
  p.lda.epsilon_scale = config.get_double("models.lda.epsilon_scale", 1e-6);
  p.qda.epsilon_scale = config.get_double("models.qda.epsilon_scale", 1e-6);
  p.qda.span_only = config.get_bool("models.qda.span_only", false);
  p.linear.lr = config.get_double("models.linear_softmax.lr", 0.05);
  p.linear.epochs = static_cast<int>(config.get_int("models.linear_softmax.epochs", 30));
  p.linear.batch = static_cast<int>(config.get_int("models.linear_softmax.batch", 64));
  p.linear.l2 = config.get_double("models.linear_softmax.l2", 0.0);
  for (auto* sp : {&p.shallow_relu, &p.shallow_max}) {
    sp->hidden = static_cast<int>(config.get_int("models.shallow_nn.hidden", 128));
    sp->lr = config.get_double("models.shallow_nn.lr", 0.05);
    sp->momentum = config.get_double("models.shallow_nn.momentum", 0.9);
    sp->epochs = static_cast<int>(config.get_int("models.shallow_nn.epochs", 20));
    sp->batch = static_cast<int>(config.get_int("models.shallow_nn.batch", 64));
    sp->l2 = config.get_double("models.shallow_nn.l2", 0.0);
  }
  const std::string variant = config.get_string("cnn.variant", "residual");
  if (variant == "residual") p.image_arch.variant = cnn::ImageCnnVariant::Residual;
  else if (variant == "plain") p.image_arch.variant = cnn::ImageCnnVariant::Plain;
  else throw std::runtime_error("cnn.variant must be \"residual\" or \"plain\"");
  p.image_arch.width_multiplier = static_cast<int>(config.get_int("cnn.width_multiplier", 1));
  p.image_arch.num_classes = spec.dataset.num_classes;
  p.text_arch.num_classes = spec.dataset.num_classes;
  p.cnn_train.lr = config.get_double("train.lr", 0.1);
  p.cnn_train.momentum = config.get_double("train.momentum", 0.9);
  p.cnn_train.weight_decay = config.get_double("train.weight_decay", 1e-4);
  p.cnn_train.batch = static_cast<int>(config.get_int("train.batch", 64));
  p.cnn_train.epochs = static_cast<int>(config.get_int("train.epochs", 20));
  p.cnn_train.eval_every = static_cast<int>(config.get_int("train.eval_every", 1));
  p.cnn_train.threads = static_cast<int>(config.get_int("train.threads", 0));
  p.cnn_train.decay_factor = config.get_double("train.decay_factor", 0.1);
  if (config.has("train.decay_milestones"))
    p.cnn_train.decay_milestones = config.get_double_array("train.decay_milestones");

  spec.model_names = config.get_string_array("suite.models");
  if (spec.model_names.empty()) spec.model_names = {"tree"};
  for (const auto& name : spec.model_names)
    if (std::find(known_model_names().begin(), known_model_names().end(), name) ==
        known_model_names().end())
      throw std::runtime_error("unknown model name in config: " + name);

  const std::string scheme_name = config.get_string("scheme.name", "clean");
  spec.scheme_name = scheme_name;
  if (scheme_name != "clean") {
    const double scale = config.get_double("signals.scale", 1e-3);
    const double noise_norm = config.get_double("signals.noise_norm", 0.5);
    const auto sig_seed = static_cast<std::uint64_t>(config.get_int("signals.seed", 7));
    const std::size_t image_dim = 3 * 32 * 32;
    spec.scheme = build_scheme(scheme_name, spec.dataset.num_classes, scale, noise_norm,
                               sig_seed, image_dim);
  }
  return spec;
}

SuiteResult run_suite(const Config& config) {
  ExperimentSpec base = spec_from_config(config);
  std::vector<std::string> schemes = config.get_string_array("suite.schemes");
  if (schemes.empty()) schemes = {"clean"};

  SuiteResult result;
  for (const std::string& scheme_name : schemes) {
    ExperimentSpec spec = base;
    spec.scheme_name = scheme_name;
    if (scheme_name != "clean") {
      const double scale = config.get_double("signals.scale", 1e-3);
      const double noise_norm = config.get_double("signals.noise_norm", 0.5);
      const auto sig_seed = static_cast<std::uint64_t>(config.get_int("signals.seed", 7));
      spec.scheme =
          build_scheme(scheme_name, spec.dataset.num_classes, scale, noise_norm, sig_seed,
                       3 * 32 * 32);
    } else {
      spec.scheme.reset();
    }
    result.tables.push_back(run_experiment(spec));
  }
  result.summary = summarize(result.tables);
  return result;
}

std::vector<SuiteSummaryRow> summarize(const std::vector<ResultsTable>& tables) {
  std::vector<SuiteSummaryRow> out;
  for (const ResultsTable& table : tables) {
    SuiteSummaryRow row;
    row.scheme = table.scheme;
    for (const ResultRow& r : table.rows) {
      if (!r.error.empty()) continue;
      row.decode_oracle_acc = r.decode_oracle_acc;
      // Ties resolve by model-name order, i.e. the first strictly-better
      // accuracy wins.
      if (r.test_acc > row.best_test_acc) {
        row.best_test_acc = r.test_acc;
        row.best_model = r.model;
      }
    }
    out.push_back(row);
  }
  return out;
}

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  return out + "\"";
}

std::string fmt_acc(double v) {
  if (v < 0.0) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

void emit_report(const std::vector<ResultsTable>& tables, ReportFormat format,
                 const std::filesystem::path& out_dir) {
  if (tables.empty()) throw std::invalid_argument("no tables to report");
  std::filesystem::create_directories(out_dir);

  if (format == ReportFormat::Csv || format == ReportFormat::Both) {
    std::ofstream csv(out_dir / "results.csv", std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write results.csv");
    csv << "scheme,model,train_acc,test_acc,decode_oracle_acc,linf,runtime_s,seed,"
           "config_hash,error\n";
    for (const ResultsTable& table : tables) {
      for (const ResultRow& r : table.rows) {
        csv << csv_escape(r.scheme) << ',' << csv_escape(r.model) << ',' << fmt_acc(r.train_acc)
            << ',' << fmt_acc(r.test_acc) << ',' << fmt_acc(r.decode_oracle_acc) << ','
            << fmt_g(r.linf) << ',' << fmt_g(r.runtime_s) << ',' << r.seed << ','
            << r.config_hash << ',' << csv_escape(r.error) << "\n";
      }
    }
  }

  if (format == ReportFormat::Markdown || format == ReportFormat::Both) {
    std::ofstream md(out_dir / "results.md", std::ios::binary);
    if (!md) throw std::runtime_error("cannot write results.md");
    md << "| Truth signal | Model | Train acc | Test acc | Decode oracle | Linf |\n";
    md << "|---|---|---|---|---|---|\n";
    for (const ResultsTable& table : tables) {
      for (const ResultRow& r : table.rows) {
        md << "| " << r.scheme << " | " << r.model << " | " << fmt_acc(r.train_acc) << " | "
           << (r.error.empty() ? fmt_acc(r.test_acc) : "failed: " + r.error) << " | "
           << fmt_acc(r.decode_oracle_acc) << " | " << fmt_g(r.linf) << " |\n";
      }
    }
    md << "\n| Truth signal | Best model | Test acc |\n|---|---|---|\n";
    for (const SuiteSummaryRow& s : summarize(tables))
      md << "| " << s.scheme << " | " << s.best_model << " | " << fmt_acc(s.best_test_acc)
         << " |\n";
  }
}

}  // namespace sigbench::harness
