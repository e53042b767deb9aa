#include "sigbench/dataset.hpp"

#include <cmath>

namespace sigbench::data {

void LabeledImageSet::validate() const {
  if (labels.empty()) throw format_error("image set is empty");
  if (pixels.size() != size() * dim()) throw format_error("pixel buffer / label count mismatch");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw format_error("label " + std::to_string(labels[i]) + " out of range at item " +
                         std::to_string(i));
  }
  for (double v : pixels)
    if (!std::isfinite(v)) throw format_error("non-finite pixel value");
}

void LabeledTextSet::validate() const {
  if (labels.empty()) throw format_error("text set is empty");
  if (symbols.size() != size() * static_cast<std::size_t>(max_len))
    throw format_error("symbol buffer / label count mismatch");
  const int pad = pad_id();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw format_error("label out of range at row " + std::to_string(i));
    bool seen_pad = false;
    for (int t = 0; t < max_len; ++t) {
      const int s = symbols[i * max_len + t];
      if (s < 0 || s > pad) throw format_error("symbol id out of range at row " + std::to_string(i));
      if (s == pad) seen_pad = true;
      else if (seen_pad) throw format_error("PAD before document symbol at row " + std::to_string(i));
    }
  }
}

const std::string& default_alphabet() {
  // 26 letters + 10 digits + 32 punctuation + space + newline = 70.
  static const std::string kAlphabet =
      "abcdefghijklmnopqrstuvwxyz"
      "0123456789"
      "-,;.!?:'\"/\\|_@#$%^&*~`+=<>()[]{}"
      " \n";
  return kAlphabet;
}

}  // namespace sigbench::data
