#include "sigbench/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "sigbench/rng.hpp"

namespace sigbench::data {
namespace {

struct Blob {
  double cy, cx, sigma;
  double amp[3];
};

}  // namespace

LabeledImageSet make_synthetic_images(std::size_t n, std::uint64_t seed,
                                      const ImageSynthParams& params) {
  LabeledImageSet set;
  set.num_classes = params.num_classes;
  set.provenance = "synthetic-images";

  const int H = set.height, W = set.width, C = set.channels;

  // Per-class blob prototypes from a dedicated stream so image count does
  // not perturb class appearance.
  Rng proto_rng(derive_seed(seed, 0xb10b));
  std::vector<std::vector<Blob>> prototypes(params.num_classes);
  for (int c = 0; c < params.num_classes; ++c) {
    for (int b = 0; b < params.blobs_per_class; ++b) {
      Blob blob;
      blob.cy = proto_rng.uniform(5.0, H - 6.0);
      blob.cx = proto_rng.uniform(5.0, W - 6.0);
      blob.sigma = proto_rng.uniform(2.5, 5.5);
      for (int ch = 0; ch < C; ++ch)
        blob.amp[ch] = proto_rng.uniform(-params.blob_amplitude, params.blob_amplitude);
      prototypes[c].push_back(blob);
    }
  }

  Rng rng(derive_seed(seed, 0x1337));
  set.labels.resize(n);
  set.pixels.resize(n * set.dim());
  const double ramp_span = params.ramp_hi - params.ramp_lo;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(rng.next_below(params.num_classes));
    set.labels[i] = label;

    std::vector<Blob> blobs = prototypes[label];
    for (Blob& b : blobs) {
      b.cy += rng.uniform(-params.center_jitter, params.center_jitter);
      b.cx += rng.uniform(-params.center_jitter, params.center_jitter);
      const double s = rng.uniform(0.75, 1.25);
      for (double& a : b.amp) a *= s;
    }

    double* img = set.image(i);
    for (int ch = 0; ch < C; ++ch) {
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
          double v = params.ramp_lo + ramp_span * double(x + y) / double(W + H - 2);
          for (const Blob& b : blobs) {
            const double d2 = (y - b.cy) * (y - b.cy) + (x - b.cx) * (x - b.cx);
            v += b.amp[ch] * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
          }
          v += rng.uniform(-params.noise_amplitude, params.noise_amplitude);
          v = std::clamp(std::round(v), 0.0, 255.0);
          img[(static_cast<std::size_t>(ch) * H + y) * W + x] = v / 255.0;
        }
      }
    }
  }
  return set;
}

LabeledTextSet make_synthetic_text(std::size_t n, std::uint64_t seed,
                                   const TextSynthParams& params) {
  LabeledTextSet set;
  set.max_len = params.max_len;
  set.num_classes = params.num_classes;
  set.alphabet = default_alphabet();
  set.provenance = "synthetic-text";

  Rng lex_rng(derive_seed(seed, 0x1e81));
  std::vector<std::string> lexicon(params.lexicon_size);
  for (auto& word : lexicon) {
    const int len = lex_rng.next_int(3, 8);
    word.resize(len);
    for (char& ch : word) ch = static_cast<char>('a' + lex_rng.next_below(26));
  }
  // Per-class marker words; overlaps across classes are allowed and keep
  // the task from being trivially separable.
  std::vector<std::vector<int>> markers(params.num_classes);
  for (int c = 0; c < params.num_classes; ++c)
    for (int m = 0; m < params.markers_per_class; ++m)
      markers[c].push_back(static_cast<int>(lex_rng.next_below(params.lexicon_size)));

  const std::string punct = ",.!?;:";
  Rng rng(derive_seed(seed, 0x7e47));
  const std::int16_t pad = static_cast<std::int16_t>(set.alphabet.size());
  set.labels.resize(n);
  set.symbols.reserve(n * set.max_len);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(rng.next_below(params.num_classes));
    set.labels[i] = label;

    const int n_words = std::max(
        5, static_cast<int>(std::lround(params.mean_words + params.sd_words * rng.gaussian())));
    std::string doc;
    for (int w = 0; w < n_words; ++w) {
      if (w > 0) doc.push_back(' ');
      if (rng.next_double() < 0.03) {
        const int digits = rng.next_int(1, 3);
        for (int d = 0; d < digits; ++d)
          doc.push_back(static_cast<char>('0' + rng.next_below(10)));
      } else {
        // Class markers are drawn with boosted probability.
        int idx;
        const double boost_mass =
            params.marker_boost * params.markers_per_class /
            (params.marker_boost * params.markers_per_class + params.lexicon_size);
        if (rng.next_double() < boost_mass)
          idx = markers[label][rng.next_below(markers[label].size())];
        else
          idx = static_cast<int>(rng.next_below(params.lexicon_size));
        doc += lexicon[idx];
      }
      if (rng.next_double() < 0.08) doc.push_back(punct[rng.next_below(punct.size())]);
    }

    std::vector<std::int16_t> row;
    row.reserve(set.max_len);
    for (char c : doc) {
      if (row.size() == static_cast<std::size_t>(set.max_len)) break;
      const int id = set.symbol_id(c);
      if (id >= 0) row.push_back(static_cast<std::int16_t>(id));
    }
    row.resize(set.max_len, pad);
    set.symbols.insert(set.symbols.end(), row.begin(), row.end());
  }
  return set;
}

}  // namespace sigbench::data
