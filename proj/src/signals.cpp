#include "sigbench/signals.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "sigbench/rng.hpp"

namespace sigbench::signals {
namespace {

using data::LabeledImageSet;
using data::LabeledTextSet;

constexpr char kBasisMagic[4] = {'S', 'B', 'N', 'B'};

std::size_t coord_index(const LabeledImageSet& set, PixelCoord p) {
  if (p.channel < 0 || p.channel >= set.channels || p.row < 0 || p.row >= set.height ||
      p.col < 0 || p.col >= set.width)
    throw std::invalid_argument("pixel coordinate out of bounds");
  return (static_cast<std::size_t>(p.channel) * set.height + p.row) * set.width + p.col;
}

int chebyshev(PixelCoord a, PixelCoord b) {
  return std::max(std::abs(a.row - b.row), std::abs(a.col - b.col));
}

void require_unit_interval(const LabeledImageSet& set, const char* op) {
  for (double v : set.pixels)
    if (v < -1e-9 || v > 1.0 + 1e-9)
      throw std::invalid_argument(std::string(op) + " expects a unit-interval normalized set");
}

// MSB-first binary expansion of the class code over `bits` positions.
std::vector<int> code_bits(int code, int bits) {
  std::vector<int> out(bits);
  for (int b = 0; b < bits; ++b) out[b] = (code >> (bits - 1 - b)) & 1;
  return out;
}

int digit_symbol(const LabeledTextSet& set, int code) {
  const int id = set.symbol_id(static_cast<char>('0' + code));
  if (id < 0) throw std::invalid_argument("alphabet has no digit character for code");
  return id;
}

}  // namespace

SignalCategory category_of(SignalKind kind) {
  switch (kind) {
    case SignalKind::OnePixel:
    case SignalKind::PatternPixels:
    case SignalKind::Mnemonic:
    case SignalKind::PatternChar:
      return SignalCategory::LowDimensional;
    case SignalKind::Noise:
    case SignalKind::LengthEncoding:
    case SignalKind::Mean:
      return SignalCategory::Global;
    case SignalKind::RandomPixel:
    case SignalKind::MultipleLocations:
      return SignalCategory::MovingTarget;
  }
  throw std::logic_error("unknown signal kind");
}

std::string kind_name(SignalKind kind) {
  switch (kind) {
    case SignalKind::OnePixel: return "one_pixel";
    case SignalKind::PatternPixels: return "pattern_pixels";
    case SignalKind::RandomPixel: return "random_pixel";
    case SignalKind::MultipleLocations: return "multiple_locations";
    case SignalKind::Noise: return "noise";
    case SignalKind::Mean: return "mean";
    case SignalKind::Mnemonic: return "mnemonic";
    case SignalKind::LengthEncoding: return "length_encoding";
    case SignalKind::PatternChar: return "pattern_char";
  }
  throw std::logic_error("unknown signal kind");
}

SignalKind kind_from_name(const std::string& name) {
  for (SignalKind k : {SignalKind::OnePixel, SignalKind::PatternPixels, SignalKind::RandomPixel,
                       SignalKind::MultipleLocations, SignalKind::Noise, SignalKind::Mean,
                       SignalKind::Mnemonic, SignalKind::LengthEncoding, SignalKind::PatternChar})
    if (kind_name(k) == name) return k;
  throw std::invalid_argument("unknown signal kind: " + name);
}

bool is_image_kind(SignalKind kind) {
  switch (kind) {
    case SignalKind::Mnemonic:
    case SignalKind::LengthEncoding:
    case SignalKind::PatternChar:
      return false;
    default:
      return true;
  }
}

void NoiseBasis::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + file.string());
  out.write(kBasisMagic, 4);
  const std::uint32_t version = 1;
  const std::uint32_t k = static_cast<std::uint32_t>(num_classes);
  const std::uint64_t d = dim;
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&k), 4);
  out.write(reinterpret_cast<const char*>(&d), 8);
  out.write(reinterpret_cast<const char*>(&norm), 8);
  out.write(reinterpret_cast<const char*>(vectors.data()),
            static_cast<std::streamsize>(vectors.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

NoiseBasis NoiseBasis::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + file.string());
  char magic[4];
  std::uint32_t version = 0, k = 0;
  std::uint64_t d = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&k), 4);
  in.read(reinterpret_cast<char*>(&d), 8);
  NoiseBasis basis;
  in.read(reinterpret_cast<char*>(&basis.norm), 8);
  if (!in || std::memcmp(magic, kBasisMagic, 4) != 0 || version != 1)
    throw std::runtime_error("not a noise basis file: " + file.string());
  basis.num_classes = static_cast<int>(k);
  basis.dim = d;
  basis.vectors.resize(static_cast<std::size_t>(k) * d);
  in.read(reinterpret_cast<char*>(basis.vectors.data()),
          static_cast<std::streamsize>(basis.vectors.size() * sizeof(double)));
  if (!in) throw std::runtime_error("truncated noise basis file: " + file.string());
  return basis;
}

NoiseBasis generate_noise_basis(int num_classes, std::size_t dim, double norm,
                                std::uint64_t seed) {
  if (num_classes < 1 || norm <= 0.0) throw std::invalid_argument("need K >= 1 and norm > 0");
  if (static_cast<std::size_t>(num_classes) > dim)
    throw std::invalid_argument("cannot fit " + std::to_string(num_classes) +
                                " orthogonal vectors in dimension " + std::to_string(dim));
  NoiseBasis basis;
  basis.num_classes = num_classes;
  basis.dim = dim;
  basis.norm = norm;
  basis.vectors.assign(static_cast<std::size_t>(num_classes) * dim, 0.0);

  Rng rng(seed);
  std::vector<double> v(dim);
  for (int i = 0; i < num_classes; ++i) {
    bool accepted = false;
    for (int attempt = 0; attempt < 16 && !accepted; ++attempt) {
      for (double& x : v) x = rng.gaussian();
      // Modified Gram-Schmidt, two passes for orthogonality at the 1e-9
      // relative level the basis contract requires.
      for (int pass = 0; pass < 2; ++pass) {
        for (int j = 0; j < i; ++j) {
          const double* u = basis.row(j);
          double dot = 0.0;
          for (std::size_t t = 0; t < dim; ++t) dot += v[t] * u[t];
          for (std::size_t t = 0; t < dim; ++t) v[t] -= dot * u[t];
        }
      }
      const double len = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
      if (len > 1e-9 * std::sqrt(double(dim))) {
        double* out = basis.vectors.data() + static_cast<std::size_t>(i) * dim;
        for (std::size_t t = 0; t < dim; ++t) out[t] = v[t] / len;
        accepted = true;
      }
    }
    if (!accepted)
      throw std::runtime_error("noise basis generation failed: samples numerically dependent");
  }
  for (double& x : basis.vectors) x *= norm;
  return basis;
}

SignalScheme make_one_pixel(double scale, PixelCoord location) {
  SignalScheme s;
  s.kind = SignalKind::OnePixel;
  s.scale = scale;
  s.location = location;
  return s;
}

SignalScheme make_pattern_pixels(double scale) {
  SignalScheme s;
  s.kind = SignalKind::PatternPixels;
  s.scale = scale;
  return s;
}

SignalScheme make_random_pixel(std::uint64_t seed, double scale) {
  SignalScheme s;
  s.kind = SignalKind::RandomPixel;
  s.scale = scale;
  s.seed = seed;
  return s;
}

SignalScheme make_multiple_locations(int num_classes, std::uint64_t seed) {
  SignalScheme s;
  s.kind = SignalKind::MultipleLocations;
  s.seed = seed;
  s.pair_map = default_pair_map(num_classes, 32, 32, derive_seed(seed, 0x9a17));
  s.value_grid = byte_value_grid();
  return s;
}

SignalScheme make_noise(NoiseBasis basis) {
  SignalScheme s;
  s.kind = SignalKind::Noise;
  s.basis = std::move(basis);
  return s;
}

SignalScheme make_mean(double coeff) {
  SignalScheme s;
  s.kind = SignalKind::Mean;
  s.scale = coeff;
  return s;
}

SignalScheme make_mnemonic() {
  SignalScheme s;
  s.kind = SignalKind::Mnemonic;
  return s;
}

SignalScheme make_length_encoding(int num_classes) {
  SignalScheme s;
  s.kind = SignalKind::LengthEncoding;
  s.length_map = default_length_map(num_classes);
  return s;
}

SignalScheme make_pattern_char(std::array<int, 3> positions) {
  SignalScheme s;
  s.kind = SignalKind::PatternChar;
  s.char_positions = positions;
  return s;
}

std::vector<std::array<PixelCoord, 2>> default_pair_map(int num_classes, int height, int width,
                                                        std::uint64_t seed) {
  constexpr int kMinDistance = 16;
  const int offset = kMinDistance + 1;
  if (height <= offset || width <= offset)
    throw std::invalid_argument("image too small for distant pixel pairs");
  Rng rng(seed);
  std::vector<std::array<PixelCoord, 2>> pairs;
  std::vector<PixelCoord> used;
  for (int c = 0; c < num_classes; ++c) {
    for (int attempt = 0;; ++attempt) {
      if (attempt >= 1000)
        throw std::runtime_error("could not place disjoint pixel pairs for all classes");
      PixelCoord a{0, rng.next_int(0, height - 1 - offset), rng.next_int(0, width - 1 - offset)};
      PixelCoord b{0, a.row + offset, a.col + offset};
      const bool clash = std::any_of(used.begin(), used.end(), [&](PixelCoord p) {
        return p == a || p == b;
      });
      if (!clash) {
        pairs.push_back({a, b});
        used.push_back(a);
        used.push_back(b);
        break;
      }
    }
  }
  return pairs;
}

std::vector<int> default_length_map(int num_classes, int max_len) {
  std::vector<int> map(num_classes);
  for (int c = 0; c < num_classes; ++c) map[c] = 764 + 50 * class_code(c);
  for (int len : map)
    if (len > max_len)
      throw std::invalid_argument("default length map exceeds the symbol window");
  return map;
}

std::vector<double> byte_value_grid() {
  std::vector<double> grid(255);
  for (int k = 1; k <= 255; ++k) grid[k - 1] = k / 255.0;
  return grid;
}

LabeledImageSet inject_one_pixel(const LabeledImageSet& set, PixelCoord location, double scale) {
  require_unit_interval(set, "inject_one_pixel");
  const std::size_t idx = coord_index(set, location);
  LabeledImageSet out = set;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.image(i)[idx] = class_code(out.labels[i]) * scale;
  return out;
}

LabeledImageSet inject_pattern_pixels(const LabeledImageSet& set, double scale) {
  // 4-bit corner encoding holds class codes 1..15.
  if (set.num_classes > 15)
    throw std::invalid_argument("pattern pixels encode at most 15 classes in 4 corner bits");
  require_unit_interval(set, "inject_pattern_pixels");
  const std::size_t corners[4] = {
      coord_index(set, {0, 0, 0}),
      coord_index(set, {0, 0, set.width - 1}),
      coord_index(set, {0, set.height - 1, 0}),
      coord_index(set, {0, set.height - 1, set.width - 1}),
  };
  LabeledImageSet out = set;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto bits = code_bits(class_code(out.labels[i]), 4);
    double* img = out.image(i);
    for (int b = 0; b < 4; ++b) img[corners[b]] = bits[b] ? scale : 0.0;
  }
  return out;
}

LabeledImageSet inject_random_pixel(const LabeledImageSet& set, double scale,
                                    std::uint64_t seed) {
  require_unit_interval(set, "inject_random_pixel");
  LabeledImageSet out = set;
  Rng rng(seed);
  const std::size_t dim = set.dim();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t idx = static_cast<std::size_t>(rng.next_below(dim));
    out.image(i)[idx] = class_code(out.labels[i]) * scale;
  }
  return out;
}

LabeledImageSet inject_multiple_locations(
    const LabeledImageSet& set, const std::vector<std::array<PixelCoord, 2>>& pair_map,
    const std::vector<double>& value_grid, std::uint64_t seed) {
  if (pair_map.size() != static_cast<std::size_t>(set.num_classes))
    throw std::invalid_argument("pair map must provide one pair per class");
  if (value_grid.empty()) throw std::invalid_argument("value grid is empty");
  std::vector<std::size_t> seen;
  for (const auto& pair : pair_map) {
    if (chebyshev(pair[0], pair[1]) < 16)
      throw std::invalid_argument("pair pixels must be at Chebyshev distance >= 16");
    for (const PixelCoord& p : pair) {
      const std::size_t idx = coord_index(set, p);
      if (std::find(seen.begin(), seen.end(), idx) != seen.end())
        throw std::invalid_argument("pixel pairs overlap across classes");
      seen.push_back(idx);
    }
  }
  LabeledImageSet out = set;
  Rng rng(seed);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& pair = pair_map[out.labels[i]];
    const double v = value_grid[rng.next_below(value_grid.size())];
    out.image(i)[coord_index(set, pair[0])] = v;
    out.image(i)[coord_index(set, pair[1])] = v;
  }
  return out;
}

LabeledImageSet inject_noise(const LabeledImageSet& set, const NoiseBasis& basis) {
  if (basis.dim != set.dim())
    throw std::invalid_argument("noise basis dimension does not match image dimension");
  if (basis.num_classes < set.num_classes)
    throw std::invalid_argument("noise basis has fewer vectors than classes");
  LabeledImageSet out = set;
  const std::size_t dim = set.dim();
  for (std::size_t i = 0; i < out.size(); ++i) {
    double* img = out.image(i);
    const double* u = basis.row(out.labels[i]);
    for (std::size_t j = 0; j < dim; ++j) img[j] += u[j];
  }
  return out;
}

LabeledImageSet inject_mean(const LabeledImageSet& set, double coeff) {
  const std::size_t dim = set.dim();
  for (std::size_t i = 0; i < set.size(); ++i) {
    const double* img = set.image(i);
    const double mean = std::accumulate(img, img + dim, 0.0) / double(dim);
    if (std::abs(mean) > 1e-6)
      throw std::invalid_argument("inject_mean requires a zero-mean normalized set (image " +
                                  std::to_string(i) + " has mean " + std::to_string(mean) + ")");
  }
  LabeledImageSet out = set;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double shift = class_code(out.labels[i]) * coeff;
    double* img = out.image(i);
    for (std::size_t j = 0; j < dim; ++j) img[j] += shift;
  }
  return out;
}

LabeledTextSet inject_mnemonic(const LabeledTextSet& set) {
  if (set.num_classes > 9)
    throw std::invalid_argument("mnemonic encoding needs single-digit class codes (K <= 9)");
  LabeledTextSet out = set;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.row(i)[0] = static_cast<std::int16_t>(digit_symbol(set, class_code(out.labels[i])));
  return out;
}

LabeledTextSet inject_length(const LabeledTextSet& set, const std::vector<int>& length_map) {
  if (length_map.size() != static_cast<std::size_t>(set.num_classes))
    throw std::invalid_argument("length map must provide one length per class");
  for (int len : length_map)
    if (len < 0 || len > set.max_len)
      throw std::invalid_argument("length map entry exceeds the symbol window");
  LabeledTextSet out = set;
  const std::int16_t pad = static_cast<std::int16_t>(set.pad_id());
  const std::int16_t space = static_cast<std::int16_t>(set.symbol_id(' '));
  if (space < 0) throw std::invalid_argument("alphabet has no space character");
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int target = length_map[out.labels[i]];
    std::int16_t* row = out.row(i);
    int len = set.max_len;
    while (len > 0 && row[len - 1] == pad) --len;
    if (len > target) {
      for (int t = target; t < set.max_len; ++t) row[t] = pad;
    } else {
      for (int t = len; t < target; ++t) row[t] = space;
      for (int t = target; t < set.max_len; ++t) row[t] = pad;
    }
  }
  return out;
}

LabeledTextSet inject_pattern_char(const LabeledTextSet& set, std::array<int, 3> positions) {
  // 3-bit encoding holds class codes 1..7.
  if (set.num_classes > 7)
    throw std::invalid_argument("pattern char encodes at most 7 classes in 3 bits");
  for (int p : positions)
    if (p < 0 || p >= set.max_len) throw std::invalid_argument("pattern char position out of range");
  const std::int16_t space = static_cast<std::int16_t>(set.symbol_id(' '));
  if (space < 0) throw std::invalid_argument("alphabet has no space character");
  LabeledTextSet out = set;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto bits = code_bits(class_code(out.labels[i]), 3);
    std::int16_t* row = out.row(i);
    for (int b = 0; b < 3; ++b)
      if (bits[b]) row[positions[b]] = space;
  }
  return out;
}

LabeledImageSet inject(const LabeledImageSet& set, const SignalScheme& scheme) {
  switch (scheme.kind) {
    case SignalKind::OnePixel:
      return inject_one_pixel(set, scheme.location, scheme.scale);
    case SignalKind::PatternPixels:
      return inject_pattern_pixels(set, scheme.scale);
    case SignalKind::RandomPixel:
      return inject_random_pixel(set, scheme.scale, scheme.seed);
    case SignalKind::MultipleLocations:
      return inject_multiple_locations(set, scheme.pair_map, scheme.value_grid, scheme.seed);
    case SignalKind::Noise:
      return inject_noise(set, scheme.basis);
    case SignalKind::Mean:
      return inject_mean(set, scheme.scale);
    default:
      throw std::invalid_argument(kind_name(scheme.kind) + " is not an image scheme");
  }
}

LabeledTextSet inject(const LabeledTextSet& set, const SignalScheme& scheme) {
  switch (scheme.kind) {
    case SignalKind::Mnemonic:
      return inject_mnemonic(set);
    case SignalKind::LengthEncoding:
      return inject_length(set, scheme.length_map);
    case SignalKind::PatternChar:
      return inject_pattern_char(set, scheme.char_positions);
    default:
      throw std::invalid_argument(kind_name(scheme.kind) + " is not a text scheme");
  }
}

std::size_t DecodeResult::ambiguity_count() const {
  std::size_t n = 0;
  for (auto a : ambiguous) n += a != 0;
  return n;
}

double DecodeResult::accuracy(const std::vector<int>& truth) const {
  if (truth.size() != labels.size()) throw std::invalid_argument("decode/truth length mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += labels[i] == truth[i];
  return double(hits) / double(labels.size());
}

double DecodeResult::strict_accuracy(const std::vector<int>& truth) const {
  if (truth.size() != labels.size()) throw std::invalid_argument("decode/truth length mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    hits += labels[i] == truth[i] && !ambiguous[i];
  return double(hits) / double(labels.size());
}

DecodeResult decode_signal(const LabeledImageSet& set, const SignalScheme& scheme,
                           const LabeledImageSet* reference) {
  if (!is_image_kind(scheme.kind))
    throw std::invalid_argument("scheme " + kind_name(scheme.kind) +
                                " does not apply to image sets");
  const std::size_t n = set.size();
  const std::size_t dim = set.dim();
  const int K = set.num_classes;
  DecodeResult res;
  res.labels.assign(n, 0);
  res.ambiguous.assign(n, 0);

  switch (scheme.kind) {
    case SignalKind::OnePixel: {
      const std::size_t idx = coord_index(set, scheme.location);
      for (std::size_t i = 0; i < n; ++i) {
        const double v = set.image(i)[idx];
        bool found = false;
        for (int c = 0; c < K && !found; ++c) {
          if (v == class_code(c) * scheme.scale) {
            res.labels[i] = c;
            found = true;
          }
        }
        if (!found) res.ambiguous[i] = 1;
      }
      break;
    }
    case SignalKind::PatternPixels: {
      const std::size_t corners[4] = {
          coord_index(set, {0, 0, 0}),
          coord_index(set, {0, 0, set.width - 1}),
          coord_index(set, {0, set.height - 1, 0}),
          coord_index(set, {0, set.height - 1, set.width - 1}),
      };
      for (std::size_t i = 0; i < n; ++i) {
        const double* img = set.image(i);
        int code = 0;
        bool bad = false;
        for (int b = 0; b < 4; ++b) {
          const double v = img[corners[b]];
          if (v == scheme.scale) code = code * 2 + 1;
          else if (v == 0.0) code = code * 2;
          else bad = true;
        }
        if (bad || code < 1 || code > K) res.ambiguous[i] = 1;
        else res.labels[i] = code - 1;
      }
      break;
    }
    case SignalKind::RandomPixel: {
      for (std::size_t i = 0; i < n; ++i) {
        const double* img = set.image(i);
        int found_code = 0;
        bool conflict = false;
        for (std::size_t j = 0; j < dim; ++j) {
          for (int c = 1; c <= K; ++c) {
            if (img[j] == c * scheme.scale) {
              if (found_code == 0) found_code = c;
              else if (found_code != c) conflict = true;
            }
          }
        }
        if (found_code == 0) res.ambiguous[i] = 1;
        else {
          res.labels[i] = found_code - 1;
          if (conflict) res.ambiguous[i] = 1;
        }
      }
      break;
    }
    case SignalKind::MultipleLocations: {
      if (scheme.pair_map.size() != static_cast<std::size_t>(K))
        throw std::invalid_argument("pair map does not match class count");
      std::vector<std::array<std::size_t, 2>> idx(K);
      for (int c = 0; c < K; ++c)
        idx[c] = {coord_index(set, scheme.pair_map[c][0]),
                  coord_index(set, scheme.pair_map[c][1])};
      for (std::size_t i = 0; i < n; ++i) {
        const double* img = set.image(i);
        int first = -1, count = 0;
        for (int c = 0; c < K; ++c) {
          if (img[idx[c][0]] == img[idx[c][1]]) {
            if (first < 0) first = c;
            ++count;
          }
        }
        if (first < 0) res.ambiguous[i] = 1;
        else {
          res.labels[i] = first;
          if (count > 1) res.ambiguous[i] = 1;
        }
      }
      break;
    }
    case SignalKind::Noise: {
      if (!reference)
        throw std::invalid_argument(
            "noise decoding requires the original set; without it train a linear probe instead");
      if (reference->size() != n || reference->dim() != dim)
        throw std::invalid_argument("reference set shape mismatch");
      if (scheme.basis.dim != dim) throw std::invalid_argument("basis dimension mismatch");
      for (std::size_t i = 0; i < n; ++i) {
        const double* a = set.image(i);
        const double* b = reference->image(i);
        double best = -std::numeric_limits<double>::infinity();
        int best_c = 0;
        for (int c = 0; c < K; ++c) {
          const double* u = scheme.basis.row(c);
          double dot = 0.0;
          for (std::size_t j = 0; j < dim; ++j) dot += (a[j] - b[j]) * u[j];
          if (dot > best) {
            best = dot;
            best_c = c;
          }
        }
        res.labels[i] = best_c;
      }
      break;
    }
    case SignalKind::Mean: {
      for (std::size_t i = 0; i < n; ++i) {
        const double* img = set.image(i);
        const double mean = std::accumulate(img, img + dim, 0.0) / double(dim);
        const int code = static_cast<int>(std::lround(mean / scheme.scale));
        if (code < 1 || code > K) res.ambiguous[i] = 1;
        else res.labels[i] = code - 1;
      }
      break;
    }
    default:
      throw std::logic_error("unhandled image scheme");
  }
  return res;
}

DecodeResult decode_signal(const LabeledTextSet& set, const SignalScheme& scheme,
                           const LabeledTextSet* reference) {
  if (is_image_kind(scheme.kind))
    throw std::invalid_argument("scheme " + kind_name(scheme.kind) +
                                " does not apply to text sets");
  const std::size_t n = set.size();
  const int K = set.num_classes;
  DecodeResult res;
  res.labels.assign(n, 0);
  res.ambiguous.assign(n, 0);

  switch (scheme.kind) {
    case SignalKind::Mnemonic: {
      for (std::size_t i = 0; i < n; ++i) {
        const int sym = set.row(i)[0];
        int code = -1;
        if (sym >= 0 && sym < static_cast<int>(set.alphabet.size())) {
          const char c = set.alphabet[sym];
          if (c >= '1' && c <= '9') code = c - '0';
        }
        if (code >= 1 && code <= K) res.labels[i] = code - 1;
        else res.ambiguous[i] = 1;
      }
      break;
    }
    case SignalKind::LengthEncoding: {
      if (scheme.length_map.size() != static_cast<std::size_t>(K))
        throw std::invalid_argument("length map does not match class count");
      const int pad = set.pad_id();
      for (std::size_t i = 0; i < n; ++i) {
        const std::int16_t* row = set.row(i);
        int len = set.max_len;
        while (len > 0 && row[len - 1] == pad) --len;
        bool found = false;
        for (int c = 0; c < K && !found; ++c) {
          if (scheme.length_map[c] == len) {
            res.labels[i] = c;
            found = true;
          }
        }
        if (!found) res.ambiguous[i] = 1;
      }
      break;
    }
    case SignalKind::PatternChar: {
      const int space = set.symbol_id(' ');
      // Observed bit = 1 when the position holds a space (injected or
      // natural). A class is consistent when its code bits are a subset of
      // the observed bits.
      std::vector<std::array<double, 3>> q_class;  // P(natural space at position | class)
      std::vector<double> prior(K, 1.0 / K);
      const bool have_ref = reference != nullptr;
      if (have_ref) {
        if (reference->size() == 0) throw std::invalid_argument("empty reference set");
        q_class.assign(K, {0.0, 0.0, 0.0});
        std::vector<std::size_t> counts(K, 0);
        for (std::size_t i = 0; i < reference->size(); ++i) {
          const int y = reference->labels[i];
          ++counts[y];
          for (int b = 0; b < 3; ++b)
            if (reference->row(i)[scheme.char_positions[b]] == space) q_class[y][b] += 1.0;
        }
        for (int c = 0; c < K; ++c) {
          prior[c] = double(counts[c]) / double(reference->size());
          for (int b = 0; b < 3; ++b)
            q_class[c][b] = counts[c] ? q_class[c][b] / double(counts[c]) : 0.0;
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        int obs = 0;
        for (int b = 0; b < 3; ++b)
          obs = obs * 2 + (set.row(i)[scheme.char_positions[b]] == space ? 1 : 0);
        const auto obs_bits = code_bits(obs, 3);
        int consistent = 0;
        int first = -1;
        int best = -1;
        double best_post = -1.0;
        for (int c = 0; c < K; ++c) {
          const auto bits = code_bits(class_code(c), 3);
          bool ok = true;
          for (int b = 0; b < 3; ++b)
            if (bits[b] == 1 && obs_bits[b] == 0) ok = false;
          if (!ok) continue;
          ++consistent;
          if (first < 0) first = c;
          if (have_ref) {
            double post = prior[c];
            for (int b = 0; b < 3; ++b) {
              if (bits[b] == 1) continue;  // observation forced to 1
              const double qq = q_class[c][b];
              post *= obs_bits[b] ? qq : (1.0 - qq);
            }
            if (post > best_post) {
              best_post = post;
              best = c;
            }
          }
        }
        if (consistent == 0) {
          res.ambiguous[i] = 1;
        } else {
          res.labels[i] = have_ref ? best : first;
          if (consistent > 1) res.ambiguous[i] = 1;
        }
      }
      break;
    }
    default:
      throw std::logic_error("unhandled text scheme");
  }
  return res;
}

double pattern_char_bayes_rate(const LabeledTextSet& reference, std::array<int, 3> positions) {
  const int K = reference.num_classes;
  const int space = reference.symbol_id(' ');
  std::vector<std::array<double, 3>> q(K, {0.0, 0.0, 0.0});
  std::vector<double> prior(K, 0.0);
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const int y = reference.labels[i];
    prior[y] += 1.0;
    for (int b = 0; b < 3; ++b)
      if (reference.row(i)[positions[b]] == space) q[y][b] += 1.0;
  }
  for (int c = 0; c < K; ++c) {
    for (int b = 0; b < 3; ++b) q[c][b] = prior[c] > 0 ? q[c][b] / prior[c] : 0.0;
    prior[c] /= double(reference.size());
  }

  // Enumerate the 8 observable triples; the injected bits of the true class
  // force their positions to 1, the rest follow the natural space rates.
  double rate = 0.0;
  for (int obs = 0; obs < 8; ++obs) {
    const auto obs_bits = code_bits(obs, 3);
    std::vector<double> joint(K, 0.0);
    for (int c = 0; c < K; ++c) {
      const auto bits = code_bits(class_code(c), 3);
      double p = prior[c];
      for (int b = 0; b < 3; ++b) {
        if (bits[b] == 1) p *= obs_bits[b] ? 1.0 : 0.0;
        else p *= obs_bits[b] ? q[c][b] : (1.0 - q[c][b]);
      }
      joint[c] = p;
    }
    rate += *std::max_element(joint.begin(), joint.end());
  }
  return rate;
}

PerturbationReport perturbation_stats(const LabeledImageSet& original,
                                      const LabeledImageSet& injected) {
  if (original.size() != injected.size() || original.dim() != injected.dim())
    throw std::invalid_argument("perturbation_stats shape mismatch");
  PerturbationReport rep;
  const std::size_t n = original.size();
  const std::size_t dim = original.dim();
  rep.per_image_linf.resize(n);
  rep.per_image_l2.resize(n);
  rep.per_image_changed.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* a = original.image(i);
    const double* b = injected.image(i);
    double linf = 0.0, l2 = 0.0;
    std::size_t changed = 0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = std::abs(a[j] - b[j]);
      if (d > 0.0) ++changed;
      linf = std::max(linf, d);
      l2 += d * d;
    }
    rep.per_image_linf[i] = linf;
    rep.per_image_l2[i] = std::sqrt(l2);
    rep.per_image_changed[i] = changed;
    rep.linf = std::max(rep.linf, linf);
    rep.l2 = std::max(rep.l2, rep.per_image_l2[i]);
    rep.changed_coords = std::max(rep.changed_coords, changed);
  }
  return rep;
}

PerturbationReport perturbation_stats(const LabeledTextSet& original,
                                      const LabeledTextSet& injected) {
  if (original.size() != injected.size() || original.max_len != injected.max_len)
    throw std::invalid_argument("perturbation_stats shape mismatch");
  PerturbationReport rep;
  const std::size_t n = original.size();
  rep.per_image_linf.resize(n);
  rep.per_image_l2.resize(n);
  rep.per_image_changed.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t changed = 0;
    for (int t = 0; t < original.max_len; ++t)
      if (original.row(i)[t] != injected.row(i)[t]) ++changed;
    rep.per_image_changed[i] = changed;
    rep.per_image_linf[i] = changed ? 1.0 : 0.0;
    rep.per_image_l2[i] = std::sqrt(double(changed));
    rep.linf = std::max(rep.linf, rep.per_image_linf[i]);
    rep.l2 = std::max(rep.l2, rep.per_image_l2[i]);
    rep.changed_coords = std::max(rep.changed_coords, changed);
  }
  return rep;
}

}  // namespace sigbench::signals
