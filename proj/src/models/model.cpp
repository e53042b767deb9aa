#include "sigbench/models/model.hpp"

#include <fstream>
#include <stdexcept>

#include "sigbench/binio.hpp"
#include "sigbench/cnn/network.hpp"
#include "sigbench/models/linear.hpp"
#include "sigbench/models/tree.hpp"

namespace sigbench::models {
namespace {
constexpr char kMagic[4] = {'S', 'B', 'M', 'D'};
constexpr std::uint32_t kFormatVersion = 1;
}  // namespace

namespace detail {
// Defined in gaussian.cpp; returns nullptr for foreign kinds.
std::unique_ptr<Model> load_gaussian_payload(const std::string& kind, std::istream& in);
}  // namespace detail

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw std::invalid_argument("accuracy needs two equal-length non-empty label arrays");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return double(hits) / double(pred.size());
}

void check_features(const Model& model, const data::FeatureMatrix& X) {
  if (X.cols != model.feature_dim())
    throw std::invalid_argument("feature dimension " + std::to_string(X.cols) +
                                " does not match model dimension " +
                                std::to_string(model.feature_dim()));
}

void save_model(const Model& model, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + file.string());
  out.write(kMagic, 4);
  bin::write_u32(out, kFormatVersion);
  bin::write_string(out, model.kind());
  model.save(out);
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

std::unique_ptr<Model> load_model(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string_view(magic, 4) != std::string_view(kMagic, 4))
    throw std::runtime_error("not a model artifact");
  const std::uint32_t version = bin::read_u32(in);
  if (version != kFormatVersion)
    throw std::runtime_error("unsupported model format version " + std::to_string(version));
  const std::string kind = bin::read_string(in);
  if (kind == "tree") return DecisionTreeModel::load_payload(in);
  if (kind == "forest") return ForestModel::load_payload(in);
  if (kind == "linear_softmax") return LinearSoftmaxModel::load_payload(in);
  if (kind == "shallow_nn") return ShallowNnModel::load_payload(in);
  if (kind == "cnn") return cnn::CnnModel::load_payload(in);
  if (auto m = detail::load_gaussian_payload(kind, in)) return m;
  throw std::runtime_error("unknown model kind in artifact: " + kind);
}

std::unique_ptr<Model> load_model(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + file.string());
  return load_model(in);
}

}  // namespace sigbench::models
