#include "sigbench/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sigbench/rng.hpp"

namespace sigbench::data {
namespace {

// Shared stratified index selector. Returns the chosen indices in original
// order so fraction 1.0 is the identity.
std::vector<std::size_t> stratified_indices(const std::vector<int>& labels, int num_classes,
                                            double fraction, std::uint64_t seed) {
  if (fraction <= 0.0 || fraction > 1.0)
    throw std::invalid_argument("subsample fraction must be in (0, 1]");
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  for (int c = 0; c < num_classes; ++c) {
    auto& idx = by_class[c];
    if (idx.empty())
      throw std::invalid_argument("class " + std::to_string(c) + " has no samples to draw from");
    const auto want = static_cast<std::size_t>(std::llround(fraction * double(idx.size())));
    if (want == 0)
      throw std::invalid_argument("fraction " + std::to_string(fraction) +
                                  " leaves class " + std::to_string(c) + " empty");
    rng.shuffle(idx);
    chosen.insert(chosen.end(), idx.begin(), idx.begin() + want);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace

LabeledImageSet normalize(const LabeledImageSet& set, NormalizeMode mode) {
  LabeledImageSet out = set;
  const double maxv = set.pixels.empty()
                          ? 0.0
                          : *std::max_element(set.pixels.begin(), set.pixels.end());
  if (maxv > 1.0 + 1e-9) {  // byte-valued input
    for (double& v : out.pixels) v /= 255.0;
  }
  if (mode == NormalizeMode::ZeroMean) {
    const std::size_t dim = out.dim();
    for (std::size_t i = 0; i < out.size(); ++i) {
      double* img = out.image(i);
      const double mean = std::accumulate(img, img + dim, 0.0) / double(dim);
      for (std::size_t j = 0; j < dim; ++j) img[j] -= mean;
    }
  }
  return out;
}

LabeledImageSet subsample(const LabeledImageSet& set, double fraction, std::uint64_t seed) {
  const auto idx = stratified_indices(set.labels, set.num_classes, fraction, seed);
  LabeledImageSet out;
  out.channels = set.channels;
  out.height = set.height;
  out.width = set.width;
  out.num_classes = set.num_classes;
  out.provenance = set.provenance;
  const std::size_t dim = set.dim();
  out.pixels.reserve(idx.size() * dim);
  out.labels.reserve(idx.size());
  for (std::size_t i : idx) {
    out.labels.push_back(set.labels[i]);
    out.pixels.insert(out.pixels.end(), set.image(i), set.image(i) + dim);
  }
  return out;
}

LabeledTextSet subsample(const LabeledTextSet& set, double fraction, std::uint64_t seed) {
  const auto idx = stratified_indices(set.labels, set.num_classes, fraction, seed);
  LabeledTextSet out;
  out.max_len = set.max_len;
  out.num_classes = set.num_classes;
  out.alphabet = set.alphabet;
  out.provenance = set.provenance;
  out.symbols.reserve(idx.size() * set.max_len);
  out.labels.reserve(idx.size());
  for (std::size_t i : idx) {
    out.labels.push_back(set.labels[i]);
    out.symbols.insert(out.symbols.end(), set.row(i), set.row(i) + set.max_len);
  }
  return out;
}

LabeledImageSet make_blank_set(std::size_t n, int num_classes, std::uint64_t seed) {
  (void)seed;  // labels are round-robin by contract; the seed is reserved
  if (n < static_cast<std::size_t>(num_classes))
    throw std::invalid_argument("blank set needs at least one image per class");
  LabeledImageSet out;
  out.num_classes = num_classes;
  out.provenance = "blank";
  out.pixels.assign(n * out.dim(), 0.0);
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.labels[i] = static_cast<int>(i % num_classes);
  return out;
}

FeatureMatrix to_features(const LabeledImageSet& set) {
  FeatureMatrix fm;
  fm.kind = FeatureKind::RawPixels;
  fm.rows = set.size();
  fm.cols = set.dim();
  fm.dense = set.pixels;  // already [N, C*H*W] row-major
  return fm;
}

FeatureMatrix to_features(const LabeledTextSet& set) {
  FeatureMatrix fm;
  fm.kind = FeatureKind::OneHotChars;
  fm.rows = set.size();
  fm.active_per_row = static_cast<std::size_t>(set.max_len);
  const int channels = set.num_symbols();  // 71: alphabet + PAD
  fm.cols = fm.active_per_row * channels;
  fm.active.resize(fm.rows * fm.active_per_row);
  for (std::size_t i = 0; i < fm.rows; ++i) {
    const std::int16_t* row = set.row(i);
    for (int t = 0; t < set.max_len; ++t)
      fm.active[i * fm.active_per_row + t] = static_cast<std::int32_t>(t) * channels + row[t];
  }
  return fm;
}

}  // namespace sigbench::data
