#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sigbench/dataset.hpp"

namespace sigbench::signals {

// The nine label-encoding schemes. The first six act on images, the last
// three on character sequences.
enum class SignalKind {
  OnePixel,
  PatternPixels,
  RandomPixel,
  MultipleLocations,
  Noise,
  Mean,
  Mnemonic,
  LengthEncoding,
  PatternChar,
};

enum class SignalCategory { LowDimensional, Global, MovingTarget };

SignalCategory category_of(SignalKind kind);
std::string kind_name(SignalKind kind);
SignalKind kind_from_name(const std::string& name);
bool is_image_kind(SignalKind kind);

// Class c is written into the data as code c+1 so that code 0 never
// collides with zero-valued background.
inline int class_code(int label) { return label + 1; }

struct PixelCoord {
  int channel = 0;
  int row = 0;
  int col = 0;
  bool operator==(const PixelCoord&) const = default;
};

// K mutually orthogonal equal-norm vectors in flattened pixel space.
struct NoiseBasis {
  int num_classes = 0;
  std::size_t dim = 0;
  double norm = 0.0;
  std::vector<double> vectors;  // [K, D] row-major

  const double* row(int c) const { return vectors.data() + static_cast<std::size_t>(c) * dim; }
  void save(const std::filesystem::path& file) const;
  static NoiseBasis load(const std::filesystem::path& file);
};

NoiseBasis generate_noise_basis(int num_classes, std::size_t dim, double norm,
                                std::uint64_t seed);

// Full parameterization of one encoding; enough both to inject and to
// decode. Only the fields relevant to `kind` are meaningful.
struct SignalScheme {
  SignalKind kind = SignalKind::OnePixel;
  double scale = 1e-3;
  std::uint64_t seed = 0;

  PixelCoord location{0, 16, 16};                       // OnePixel
  std::vector<std::array<PixelCoord, 2>> pair_map;      // MultipleLocations, per class
  std::vector<double> value_grid;                       // MultipleLocations
  NoiseBasis basis;                                     // Noise
  std::vector<int> length_map;                          // LengthEncoding, per class
  std::array<int, 3> char_positions{49, 149, 199};      // PatternChar

  SignalCategory category() const { return category_of(kind); }
};

// Scheme builders with the documented defaults.
SignalScheme make_one_pixel(double scale = 1e-3, PixelCoord location = {0, 16, 16});
SignalScheme make_pattern_pixels(double scale = 1e-3);
SignalScheme make_random_pixel(std::uint64_t seed, double scale = 1e-3);
SignalScheme make_multiple_locations(int num_classes, std::uint64_t seed);
SignalScheme make_noise(NoiseBasis basis);
SignalScheme make_mean(double coeff = 1e-3);
SignalScheme make_mnemonic();
SignalScheme make_length_encoding(int num_classes);
SignalScheme make_pattern_char(std::array<int, 3> positions = {49, 149, 199});

// Disjoint per-class coordinate pairs at Chebyshev distance >= 16. The two
// ends sit on a diagonal so they land in different zones of typical image
// luminance, keeping accidental value collisions rare.
std::vector<std::array<PixelCoord, 2>> default_pair_map(int num_classes, int height, int width,
                                                        std::uint64_t seed);

// Per-class target lengths 764 + 50*code: codes 1..5 -> 814..1014.
std::vector<int> default_length_map(int num_classes, int max_len = 1014);

// The k/255 grid for k = 1..255.
std::vector<double> byte_value_grid();

// Injectors. All are pure: they return a new set and never mutate input.
data::LabeledImageSet inject_one_pixel(const data::LabeledImageSet& set, PixelCoord location,
                                       double scale);
data::LabeledImageSet inject_pattern_pixels(const data::LabeledImageSet& set, double scale);
data::LabeledImageSet inject_random_pixel(const data::LabeledImageSet& set, double scale,
                                          std::uint64_t seed);
data::LabeledImageSet inject_multiple_locations(
    const data::LabeledImageSet& set, const std::vector<std::array<PixelCoord, 2>>& pair_map,
    const std::vector<double>& value_grid, std::uint64_t seed);
data::LabeledImageSet inject_noise(const data::LabeledImageSet& set, const NoiseBasis& basis);
data::LabeledImageSet inject_mean(const data::LabeledImageSet& set, double coeff = 1e-3);
data::LabeledTextSet inject_mnemonic(const data::LabeledTextSet& set);
data::LabeledTextSet inject_length(const data::LabeledTextSet& set,
                                   const std::vector<int>& length_map);
data::LabeledTextSet inject_pattern_char(const data::LabeledTextSet& set,
                                         std::array<int, 3> positions = {49, 149, 199});

// Scheme-dispatched injection.
data::LabeledImageSet inject(const data::LabeledImageSet& set, const SignalScheme& scheme);
data::LabeledTextSet inject(const data::LabeledTextSet& set, const SignalScheme& scheme);

// Non-learning decode oracle: inverts the encoding directly. `ambiguous[i]`
// marks items whose decoding was not unique (MultipleLocations collisions,
// PatternChar partial bits); ties resolve to the lowest class index.
struct DecodeResult {
  std::vector<int> labels;
  std::vector<std::uint8_t> ambiguous;

  std::size_t ambiguity_count() const;
  double accuracy(const std::vector<int>& truth) const;
  // Accuracy counting every ambiguous item as a miss; equals 1 minus the
  // collision rate for MultipleLocations.
  double strict_accuracy(const std::vector<int>& truth) const;
};

DecodeResult decode_signal(const data::LabeledImageSet& set, const SignalScheme& scheme,
                           const data::LabeledImageSet* reference = nullptr);
DecodeResult decode_signal(const data::LabeledTextSet& set, const SignalScheme& scheme,
                           const data::LabeledTextSet* reference = nullptr);

// Best achievable accuracy of the PatternChar partial code, brute-forced
// from the posterior over observed space/non-space triples with natural
// space frequencies estimated on `reference`.
double pattern_char_bayes_rate(const data::LabeledTextSet& reference,
                               std::array<int, 3> positions = {49, 149, 199});

// Aggregates are maxima over the per-image statistics.
struct PerturbationReport {
  double linf = 0.0;
  double l2 = 0.0;
  std::size_t changed_coords = 0;
  std::vector<double> per_image_linf;
  std::vector<double> per_image_l2;
  std::vector<std::size_t> per_image_changed;
};

PerturbationReport perturbation_stats(const data::LabeledImageSet& original,
                                      const data::LabeledImageSet& injected);
PerturbationReport perturbation_stats(const data::LabeledTextSet& original,
                                      const data::LabeledTextSet& injected);

}  // namespace sigbench::signals
