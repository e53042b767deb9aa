#pragma once

#include <cstdint>

#include "sigbench/dataset.hpp"

namespace sigbench::data {

// Class-structured random images in the CIFAR-10 shape, used as a
// deterministic stand-in substrate when the real dataset files are not
// available. Each class owns a set of jittered color blobs on top of a
// global luminance ramp plus per-pixel noise; values are quantized to the
// byte grid so the sets behave exactly like loader output.
struct ImageSynthParams {
  int num_classes = 10;
  int blobs_per_class = 3;
  double blob_amplitude = 55.0;  // bytes
  double noise_amplitude = 26.0; // bytes, uniform
  double ramp_lo = 28.0;
  double ramp_hi = 212.0;
  double center_jitter = 3.0;    // pixels
};

LabeledImageSet make_synthetic_images(std::size_t n, std::uint64_t seed,
                                      const ImageSynthParams& params = {});

// Synthetic 5-class documents over the 70-char alphabet: a seeded lexicon
// with per-class marker words, occasional digits and punctuation. Lengths
// follow a clipped Gaussian in characters.
struct TextSynthParams {
  int num_classes = 5;
  int lexicon_size = 220;
  int markers_per_class = 14;
  double marker_boost = 9.0;   // sampling weight multiplier for class markers
  double mean_words = 62.0;
  double sd_words = 18.0;
  int max_len = 1014;
};

LabeledTextSet make_synthetic_text(std::size_t n, std::uint64_t seed,
                                   const TextSynthParams& params = {});

}  // namespace sigbench::data
