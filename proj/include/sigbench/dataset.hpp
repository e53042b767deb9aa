#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sigbench::data {

// N images as a [N, C, H, W] row-major tensor with integer class labels.
// Immutable by convention once built: transforms return new sets.
struct LabeledImageSet {
  int channels = 3;
  int height = 32;
  int width = 32;
  int num_classes = 10;
  std::vector<double> pixels;  // size() * dim()
  std::vector<int> labels;
  std::string provenance;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  double* image(std::size_t i) { return pixels.data() + i * dim(); }
  const double* image(std::size_t i) const { return pixels.data() + i * dim(); }
  double& at(std::size_t i, int c, int y, int x) {
    return pixels[i * dim() + (static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double at(std::size_t i, int c, int y, int x) const {
    return pixels[i * dim() + (static_cast<std::size_t>(c) * height + y) * width + x];
  }

  void validate() const;
};

// N fixed-length symbol sequences over a 70-char alphabet plus PAD.
// Symbol ids 0..69 index the alphabet; pad_id() == 70 marks positions
// beyond the end of the document.
struct LabeledTextSet {
  int max_len = 1014;
  int num_classes = 0;
  std::string alphabet;  // 70 characters, space included
  std::vector<std::int16_t> symbols;  // size() * max_len
  std::vector<int> labels;
  std::string provenance;

  std::size_t size() const { return labels.size(); }
  int pad_id() const { return static_cast<int>(alphabet.size()); }
  int num_symbols() const { return static_cast<int>(alphabet.size()) + 1; }
  std::int16_t* row(std::size_t i) { return symbols.data() + i * max_len; }
  const std::int16_t* row(std::size_t i) const { return symbols.data() + i * max_len; }

  int symbol_id(char c) const {
    auto p = alphabet.find(c);
    return p == std::string::npos ? -1 : static_cast<int>(p);
  }

  void validate() const;
};

// The default 70-character alphabet: 26 letters, 10 digits, 32 punctuation
// marks, space and newline.
const std::string& default_alphabet();

enum class FeatureKind { RawPixels, OneHotChars };

// Model-facing feature view. Raw pixels are held densely; one-hot text
// rows are held as the list of active column indices (exactly max_len
// ones per row), which keeps 20k x 71994 matrices representable.
struct FeatureMatrix {
  FeatureKind kind = FeatureKind::RawPixels;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t active_per_row = 0;  // OneHotChars only

  std::vector<double> dense;          // RawPixels: rows*cols
  std::vector<std::int32_t> active;   // OneHotChars: rows*active_per_row

  const double* row(std::size_t r) const { return dense.data() + r * cols; }
  std::span<const std::int32_t> active_row(std::size_t r) const {
    return {active.data() + r * active_per_row, active_per_row};
  }
  double value(std::size_t r, std::size_t c) const {
    if (kind == FeatureKind::RawPixels) return dense[r * cols + c];
    for (auto j : active_row(r))
      if (static_cast<std::size_t>(j) == c) return 1.0;
    return 0.0;
  }
};

struct format_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace sigbench::data
