#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "sigbench/dataset.hpp"

namespace sigbench::models {

// Uniform fit/predict contract shared by the classical learners and the
// CNN wrapper. Models are immutable after fitting and safe for concurrent
// predict calls. Prediction ties always resolve to the lowest class index.
class Model {
 public:
  virtual ~Model() = default;
  virtual std::string kind() const = 0;
  virtual int num_classes() const = 0;
  virtual std::size_t feature_dim() const = 0;
  virtual std::vector<int> predict(const data::FeatureMatrix& X) const = 0;
  virtual void save(std::ostream& out) const = 0;
};

// Versioned binary artifact: magic, format version, kind tag, payload.
void save_model(const Model& model, const std::filesystem::path& file);
std::unique_ptr<Model> load_model(std::istream& in);
std::unique_ptr<Model> load_model(const std::filesystem::path& file);

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth);

// Shared guard: every predict() implementation calls this first.
void check_features(const Model& model, const data::FeatureMatrix& X);

}  // namespace sigbench::models
