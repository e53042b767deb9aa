#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sigbench/data_io.hpp"
#include "sigbench/harness/experiment.hpp"
#include "sigbench/rng.hpp"
#include "sigbench/synthetic.hpp"
#include "sigbench/transforms.hpp"

namespace {

using namespace sigbench;

harness::Config load_config(const std::string& path, std::uint64_t seed_override,
                            double fraction_override) {
  harness::Config cfg =
      path.empty() ? harness::Config::parse_string("") : harness::Config::parse_file(path);
  if (seed_override != 0) cfg.set_number("dataset.seed", double(seed_override));
  if (fraction_override > 0.0) cfg.set_number("dataset.fraction", fraction_override);
  return cfg;
}

harness::ReportFormat parse_format(const std::string& f) {
  if (f == "csv") return harness::ReportFormat::Csv;
  if (f == "markdown") return harness::ReportFormat::Markdown;
  if (f == "both") return harness::ReportFormat::Both;
  throw CLI::ValidationError("--format must be csv, markdown or both");
}

int cmd_gen_data(const std::string& kind, const std::string& out_dir, std::size_t n_train,
                 std::size_t n_test, int classes, std::uint64_t seed) {
  std::filesystem::create_directories(out_dir);
  if (kind == "images") {
    data::ImageSynthParams p;
    p.num_classes = classes;
    auto all = data::make_synthetic_images(n_train + n_test, seed, p);
    data::LabeledImageSet train = all, test = all;
    const std::size_t dim = all.dim();
    train.labels.assign(all.labels.begin(), all.labels.begin() + n_train);
    train.pixels.assign(all.pixels.begin(), all.pixels.begin() + n_train * dim);
    test.labels.assign(all.labels.begin() + n_train, all.labels.end());
    test.pixels.assign(all.pixels.begin() + n_train * dim, all.pixels.end());
    data::save_cifar10(train, std::filesystem::path(out_dir) / "train.bin");
    data::save_cifar10(test, std::filesystem::path(out_dir) / "test.bin");
    std::printf("wrote %zu train / %zu test images (CIFAR-10 binary layout) to %s\n",
                train.size(), test.size(), out_dir.c_str());
  } else if (kind == "text") {
    data::TextSynthParams p;
    p.num_classes = classes;
    auto all = data::make_synthetic_text(n_train + n_test, seed, p);
    data::LabeledTextSet train = all, test = all;
    train.labels.assign(all.labels.begin(), all.labels.begin() + n_train);
    train.symbols.assign(all.symbols.begin(), all.symbols.begin() + n_train * all.max_len);
    test.labels.assign(all.labels.begin() + n_train, all.labels.end());
    test.symbols.assign(all.symbols.begin() + n_train * all.max_len, all.symbols.end());
    data::save_text_csv(train, std::filesystem::path(out_dir) / "train.csv");
    data::save_text_csv(test, std::filesystem::path(out_dir) / "test.csv");
    std::printf("wrote %zu train / %zu test documents (CSV) to %s\n", train.size(), test.size(),
                out_dir.c_str());
  } else {
    std::fprintf(stderr, "--kind must be images or text\n");
    return 1;
  }
  return 0;
}

int cmd_inject(const harness::Config& cfg, const std::string& in_path,
               const std::string& out_path, const std::string& out_dir) {
  harness::ExperimentSpec spec = harness::spec_from_config(cfg);
  if (!spec.scheme) throw std::runtime_error("inject needs [scheme] name in the config");

  std::filesystem::create_directories(out_dir);
  auto any = data::load_any_set(in_path);
  if (any.images) {
    auto set = data::normalize(*any.images,
                               spec.scheme->kind == signals::SignalKind::Mean
                                   ? data::NormalizeMode::ZeroMean
                                   : data::NormalizeMode::UnitInterval);
    auto injected = signals::inject(set, *spec.scheme);
    data::save_image_set(injected, out_path);
    const auto rep = signals::perturbation_stats(set, injected);
    std::printf("injected %s into %zu images: linf=%.6g max_l2=%.6g changed<=%zu\n",
                spec.scheme_name.c_str(), injected.size(), rep.linf, rep.l2, rep.changed_coords);
    if (spec.scheme->kind == signals::SignalKind::Noise)
      spec.scheme->basis.save(std::filesystem::path(out_dir) / "noise_basis.bin");
  } else {
    auto injected = signals::inject(*any.text, *spec.scheme);
    data::save_text_set(injected, out_path);
    const auto rep = signals::perturbation_stats(*any.text, injected);
    std::printf("injected %s into %zu documents: changed<=%zu positions\n",
                spec.scheme_name.c_str(), injected.size(), rep.changed_coords);
  }
  return 0;
}

int cmd_decode(const harness::Config& cfg, const std::string& in_path,
               const std::string& ref_path) {
  harness::ExperimentSpec spec = harness::spec_from_config(cfg);
  if (!spec.scheme) throw std::runtime_error("decode needs [scheme] name in the config");
  auto any = data::load_any_set(in_path);
  signals::DecodeResult res;
  std::vector<int> truth;
  if (any.images) {
    std::optional<data::LabeledImageSet> ref;
    if (!ref_path.empty()) ref = data::load_image_set(ref_path);
    res = signals::decode_signal(*any.images, *spec.scheme, ref ? &*ref : nullptr);
    truth = any.images->labels;
  } else {
    std::optional<data::LabeledTextSet> ref;
    if (!ref_path.empty()) ref = data::load_text_set(ref_path);
    res = signals::decode_signal(*any.text, *spec.scheme, ref ? &*ref : nullptr);
    truth = any.text->labels;
  }
  std::printf("decode accuracy %.6f (strict %.6f), ambiguous %zu of %zu\n", res.accuracy(truth),
              res.strict_accuracy(truth), res.ambiguity_count(), truth.size());
  return 0;
}

int cmd_train(const harness::Config& cfg, const std::string& out_dir,
              const std::string& format) {
  harness::ExperimentSpec spec = harness::spec_from_config(cfg);
  auto table = harness::run_experiment(spec);
  harness::emit_report({table}, parse_format(format), out_dir);
  for (const auto& r : table.rows) {
    if (r.error.empty())
      std::printf("%-20s %-16s train %.4f test %.4f decode %s (%.1fs)\n", r.scheme.c_str(),
                  r.model.c_str(), r.train_acc, r.test_acc,
                  r.decode_oracle_acc >= 0 ? std::to_string(r.decode_oracle_acc).c_str() : "-",
                  r.runtime_s);
    else
      std::printf("%-20s %-16s FAILED: %s\n", r.scheme.c_str(), r.model.c_str(),
                  r.error.c_str());
  }
  std::printf("report written to %s\n", out_dir.c_str());
  return 0;
}

int cmd_suite(const harness::Config& cfg, const std::string& out_dir,
              const std::string& format) {
  auto result = harness::run_suite(cfg);
  harness::emit_report(result.tables, parse_format(format), out_dir);
  for (const auto& s : result.summary)
    std::printf("%-20s best %-16s test %.4f\n", s.scheme.c_str(), s.best_model.c_str(),
                s.best_test_acc);
  std::printf("report written to %s\n", out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"signal-injection codec and model benchmark harness"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", format = "both";
  std::uint64_t seed = 0;
  double fraction = -1.0;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* opt = cmd->add_option("--config", config_path, "config file (TOML-style)");
    if (needs_config) opt->required();
    cmd->add_option("--seed", seed, "override dataset.seed");
    cmd->add_option("--fraction", fraction, "override dataset.fraction");
    cmd->add_option("--out-dir", out_dir, "output directory");
    cmd->add_option("--format", format, "report format: csv|markdown|both");
  };

  // gen-data
  std::string gen_kind = "images", gen_out = "data";
  std::size_t gen_train = 4000, gen_test = 1000;
  int gen_classes = 0;
  std::uint64_t gen_seed = 42;
  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset in the standard formats");
  gen->add_option("--kind", gen_kind, "images|text")->required();
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--train", gen_train, "training items");
  gen->add_option("--test", gen_test, "test items");
  gen->add_option("--classes", gen_classes, "class count (default 10 images / 5 text)");
  gen->add_option("--seed", gen_seed, "generator seed");

  // inject
  std::string in_path, out_path, ref_path;
  auto* inject = app.add_subcommand("inject", "embed a signal scheme into a dataset");
  add_common(inject, true);
  inject->add_option("--in", in_path, "input dataset file")->required();
  inject->add_option("--out", out_path, "output dataset file")->required();

  // decode
  auto* decode = app.add_subcommand("decode", "run the decode oracle on a dataset");
  add_common(decode, true);
  decode->add_option("--in", in_path, "injected dataset file")->required();
  decode->add_option("--reference", ref_path, "original dataset (noise / pattern_char oracle)");

  // train
  auto* train = app.add_subcommand("train", "run one scheme x model-list cell");
  add_common(train, true);

  // suite
  auto* suite = app.add_subcommand("suite", "run the full schemes x models grid");
  add_common(suite, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      if (gen_classes == 0) gen_classes = gen_kind == "text" ? 5 : 10;
      return cmd_gen_data(gen_kind, gen_out, gen_train, gen_test, gen_classes, gen_seed);
    }
    const harness::Config cfg = load_config(config_path, seed, fraction);
    if (inject->parsed()) return cmd_inject(cfg, in_path, out_path, out_dir);
    if (decode->parsed()) return cmd_decode(cfg, in_path, ref_path);
    if (train->parsed()) return cmd_train(cfg, out_dir, format);
    if (suite->parsed()) return cmd_suite(cfg, out_dir, format);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
