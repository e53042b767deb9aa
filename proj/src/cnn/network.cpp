#include "sigbench/cnn/network.hpp"

#include <mutex>

#include "sigbench/binio.hpp"

namespace sigbench::cnn {
namespace {

std::mutex predict_mutex;

void logits_to_labels(const Batch<float>& logits, std::vector<int>& out, std::size_t offset) {
  const int K = logits.dims[0];
  for (std::size_t i = 0; i < logits.n; ++i) {
    const float* z = logits.item(i);
    int best = 0;
    for (int k = 1; k < K; ++k)
      if (z[k] > z[best]) best = k;
    out[offset + i] = best;
  }
}

}  // namespace

std::size_t CnnModel::feature_dim() const {
  if (input_kind_ == InputKind::Images)
    return std::size_t(image_opts_.channels) * image_opts_.height * image_opts_.width;
  return std::size_t(text_opts_.length) * text_opts_.vocab;  // one-hot columns
}

std::vector<int> CnnModel::predict(const data::FeatureMatrix& X) const {
  models::check_features(*this, X);
  // Forward passes reuse the network's activation caches, so concurrent
  // predict calls serialize here.
  std::lock_guard<std::mutex> lock(predict_mutex);

  std::vector<int> out(X.rows);
  const std::size_t batch = 256;
  Batch<float> input;
  for (std::size_t start = 0; start < X.rows; start += batch) {
    const std::size_t n = std::min(batch, X.rows - start);
    if (input_kind_ == InputKind::Images) {
      input.resize(n, {image_opts_.channels, image_opts_.height, image_opts_.width});
      for (std::size_t i = 0; i < n; ++i) {
        const double* row = X.row(start + i);
        float* dst = input.item(i);
        for (std::size_t j = 0; j < X.cols; ++j) dst[j] = static_cast<float>(row[j]);
      }
    } else {
      // One-hot column index = position * vocab + symbol.
      input.resize(n, {text_opts_.length});
      for (std::size_t i = 0; i < n; ++i) {
        const auto act = X.active_row(start + i);
        float* dst = input.item(i);
        for (int t = 0; t < text_opts_.length; ++t)
          dst[t] = static_cast<float>(act[t] - std::int32_t(t) * text_opts_.vocab);
      }
    }
    const Batch<float>& logits = net_.forward(input, false);
    logits_to_labels(logits, out, start);
  }
  return out;
}

void CnnModel::save(std::ostream& out) const {
  bin::write_u32(out, input_kind_ == InputKind::Images ? 0 : 1);
  bin::write_u32(out, image_opts_.variant == ImageCnnVariant::Residual ? 1 : 0);
  bin::write_u32(out, static_cast<std::uint32_t>(image_opts_.width_multiplier));
  bin::write_u32(out, static_cast<std::uint32_t>(image_opts_.num_classes));
  bin::write_u32(out, static_cast<std::uint32_t>(image_opts_.channels));
  bin::write_u32(out, static_cast<std::uint32_t>(image_opts_.height));
  bin::write_u32(out, static_cast<std::uint32_t>(image_opts_.width));
  bin::write_u32(out, static_cast<std::uint32_t>(text_opts_.num_classes));
  bin::write_u32(out, static_cast<std::uint32_t>(text_opts_.vocab));
  bin::write_u32(out, static_cast<std::uint32_t>(text_opts_.length));

  std::vector<TensorRef<float>> refs;
  net_.collect(refs);
  bin::write_u32(out, static_cast<std::uint32_t>(refs.size()));
  for (const auto& r : refs) bin::write_pod_vector(out, *r.value);
}

std::unique_ptr<CnnModel> CnnModel::load_payload(std::istream& in) {
  const InputKind kind = bin::read_u32(in) == 0 ? InputKind::Images : InputKind::Text;
  ImageCnnOptions img;
  img.variant = bin::read_u32(in) == 1 ? ImageCnnVariant::Residual : ImageCnnVariant::Plain;
  img.width_multiplier = static_cast<int>(bin::read_u32(in));
  img.num_classes = static_cast<int>(bin::read_u32(in));
  img.channels = static_cast<int>(bin::read_u32(in));
  img.height = static_cast<int>(bin::read_u32(in));
  img.width = static_cast<int>(bin::read_u32(in));
  TextCnnOptions txt;
  txt.num_classes = static_cast<int>(bin::read_u32(in));
  txt.vocab = static_cast<int>(bin::read_u32(in));
  txt.length = static_cast<int>(bin::read_u32(in));

  Network<float> net = kind == InputKind::Images ? build_image_cnn<float>(img)
                                                 : build_text_cnn<float>(txt);
  std::vector<TensorRef<float>> refs;
  net.collect(refs);
  const std::uint32_t count = bin::read_u32(in);
  if (count != refs.size()) throw std::runtime_error("cnn artifact parameter list mismatch");
  for (auto& r : refs) {
    auto values = bin::read_pod_vector<float>(in);
    if (values.size() != r.value->size())
      throw std::runtime_error("cnn artifact tensor size mismatch for " + r.name);
    *r.value = std::move(values);
  }
  return std::make_unique<CnnModel>(std::move(net), kind, img, txt);
}

}  // namespace sigbench::cnn
