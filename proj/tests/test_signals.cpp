#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "sigbench/signals.hpp"
#include "sigbench/synthetic.hpp"
#include "sigbench/transforms.hpp"

using namespace sigbench;
using signals::SignalKind;

namespace {

data::LabeledImageSet small_images(std::size_t n, std::uint64_t seed) {
  return data::make_synthetic_images(n, seed);
}

data::LabeledTextSet small_text(std::size_t n, std::uint64_t seed) {
  return data::make_synthetic_text(n, seed);
}

}  // namespace

TEST_CASE("grid disjointness: no class code value sits on the byte grid") {
  // Exhaustive check over the 256-value grid; this underpins exact
  // random-pixel decoding.
  for (int code = 1; code <= 10; ++code) {
    const double injected = code * 1e-3;
    for (int k = 0; k <= 255; ++k) CHECK(injected != k / 255.0);
  }
}

TEST_CASE("noise basis: orthogonality, norms, determinism") {
  const double eta = 0.5;
  const auto basis = signals::generate_noise_basis(10, 3072, eta, 77);
  for (int i = 0; i < 10; ++i) {
    const double* u = basis.row(i);
    const double norm = std::sqrt(std::inner_product(u, u + 3072, u, 0.0));
    CHECK(std::abs(norm - eta) <= 1e-9 * eta);
    for (int j = i + 1; j < 10; ++j) {
      const double* v = basis.row(j);
      const double dot = std::inner_product(u, u + 3072, v, 0.0);
      CHECK(std::abs(dot) <= 1e-9 * eta * eta);
    }
  }
  const auto again = signals::generate_noise_basis(10, 3072, eta, 77);
  CHECK(again.vectors == basis.vectors);

  const auto tiny = signals::generate_noise_basis(2, 3, 1.0, 5);
  const double dot01 = std::inner_product(tiny.row(0), tiny.row(0) + 3, tiny.row(1), 0.0);
  CHECK(std::abs(dot01) <= 1e-9);

  CHECK_THROWS(signals::generate_noise_basis(4, 3, 1.0, 1));
}

TEST_CASE("noise basis file round-trip") {
  const auto basis = signals::generate_noise_basis(4, 64, 0.25, 3);
  const auto file = std::filesystem::temp_directory_path() / "sigbench_basis.bin";
  basis.save(file);
  const auto back = signals::NoiseBasis::load(file);
  CHECK(back.vectors == basis.vectors);
  CHECK(back.norm == basis.norm);
  CHECK(back.num_classes == basis.num_classes);
}

TEST_CASE("one pixel: value, locality, exact decode") {
  auto set = small_images(60, 1);
  const auto scheme = signals::make_one_pixel();
  const auto injected = signals::inject(set, scheme);

  for (std::size_t i = 0; i < injected.size(); ++i) {
    const double v = injected.at(i, 0, 16, 16);
    CHECK(v == (set.labels[i] + 1) * 1e-3);
  }
  // label 2 -> 0.003 exactly
  for (std::size_t i = 0; i < injected.size(); ++i)
    if (set.labels[i] == 2) CHECK(injected.at(i, 0, 16, 16) == 0.003);

  const auto rep = signals::perturbation_stats(set, injected);
  CHECK(rep.changed_coords <= 1);

  // On a zero substrate the written value bounds the perturbation.
  const auto blank = data::make_blank_set(20, 10, 0);
  const auto blank_rep = signals::perturbation_stats(blank, signals::inject(blank, scheme));
  CHECK(blank_rep.linf <= 10 * 1e-3);
  CHECK(blank_rep.changed_coords <= 1);

  const auto dec = signals::decode_signal(injected, scheme);
  CHECK(dec.accuracy(set.labels) == 1.0);
  CHECK(dec.ambiguity_count() == 0);

  CHECK_THROWS(signals::inject_one_pixel(set, {0, 99, 0}, 1e-3));
}

TEST_CASE("one pixel on a blank substrate decodes cleanly") {
  const auto blank = data::make_blank_set(40, 10, 0);
  const auto scheme = signals::make_one_pixel();
  const auto injected = signals::inject(blank, scheme);
  const auto dec = signals::decode_signal(injected, scheme);
  CHECK(dec.accuracy(blank.labels) == 1.0);
  CHECK(dec.ambiguity_count() == 0);
}

TEST_CASE("pattern pixels: corner bit layout and exact decode") {
  auto set = small_images(64, 2);
  const double scale = 1e-3;
  const auto scheme = signals::make_pattern_pixels(scale);
  const auto injected = signals::inject(set, scheme);

  for (std::size_t i = 0; i < injected.size(); ++i) {
    const int code = set.labels[i] + 1;
    const double tl = injected.at(i, 0, 0, 0);
    const double tr = injected.at(i, 0, 0, 31);
    const double bl = injected.at(i, 0, 31, 0);
    const double br = injected.at(i, 0, 31, 31);
    CHECK(tl == ((code >> 3) & 1 ? scale : 0.0));
    CHECK(tr == ((code >> 2) & 1 ? scale : 0.0));
    CHECK(bl == ((code >> 1) & 1 ? scale : 0.0));
    CHECK(br == ((code >> 0) & 1 ? scale : 0.0));
    // class_code 5 = 0101, class_code 1 = 0001
    if (code == 5) {
      CHECK(tl == 0.0);
      CHECK(tr == scale);
      CHECK(bl == 0.0);
      CHECK(br == scale);
    }
    if (code == 1) {
      CHECK(tl == 0.0);
      CHECK(tr == 0.0);
      CHECK(bl == 0.0);
      CHECK(br == scale);
    }
  }

  const auto dec = signals::decode_signal(injected, scheme);
  CHECK(dec.accuracy(set.labels) == 1.0);

  const auto rep = signals::perturbation_stats(set, injected);
  CHECK(rep.changed_coords <= 4);

  data::LabeledImageSet too_many = set;
  too_many.num_classes = 16;
  CHECK_THROWS(signals::inject_pattern_pixels(too_many, scale));
}

TEST_CASE("random pixel: determinism, locality, exact decode on grid data") {
  auto set = small_images(100, 3);
  const auto scheme = signals::make_random_pixel(123);
  const auto a = signals::inject(set, scheme);
  const auto b = signals::inject(set, scheme);
  CHECK(a.pixels == b.pixels);

  const auto rep = signals::perturbation_stats(set, a);
  CHECK(rep.changed_coords <= 1);

  const auto dec = signals::decode_signal(a, scheme);
  CHECK(dec.accuracy(set.labels) == 1.0);
  CHECK(dec.ambiguity_count() == 0);
}

TEST_CASE("multiple locations: constraint, collisions, ambiguity accounting") {
  auto set = small_images(400, 4);
  const auto scheme = signals::make_multiple_locations(10, 5);
  const auto injected = signals::inject(set, scheme);

  // the designated pair holds the same value
  for (std::size_t i = 0; i < injected.size(); ++i) {
    const auto& pair = scheme.pair_map[injected.labels[i]];
    const double v1 = injected.at(i, pair[0].channel, pair[0].row, pair[0].col);
    const double v2 = injected.at(i, pair[1].channel, pair[1].row, pair[1].col);
    CHECK(v1 == v2);
    CHECK(v1 > 0.0);
  }

  // Independent oracle: count accidental equal-valued pairs directly.
  std::size_t collisions = 0;
  std::size_t wrong_low = 0;
  for (std::size_t i = 0; i < injected.size(); ++i) {
    const int y = injected.labels[i];
    bool any = false;
    bool lower = false;
    for (int c = 0; c < 10; ++c) {
      if (c == y) continue;
      const auto& pc = scheme.pair_map[c];
      if (injected.at(i, pc[0].channel, pc[0].row, pc[0].col) ==
          injected.at(i, pc[1].channel, pc[1].row, pc[1].col)) {
        any = true;
        if (c < y) lower = true;
      }
    }
    collisions += any;
    wrong_low += lower;
  }

  const auto dec = signals::decode_signal(injected, scheme);
  CHECK(dec.ambiguity_count() == collisions);
  CHECK(dec.strict_accuracy(injected.labels) ==
        doctest::Approx(1.0 - double(collisions) / double(injected.size())));
  CHECK(dec.accuracy(injected.labels) ==
        doctest::Approx(1.0 - double(wrong_low) / double(injected.size())));

  // overlapping pairs across classes are rejected
  auto bad = scheme.pair_map;
  bad[1] = bad[0];
  CHECK_THROWS(signals::inject_multiple_locations(set, bad, scheme.value_grid, 1));
}

TEST_CASE("noise injection: additive identity and paired decode") {
  auto set = small_images(80, 6);
  const double eta = 0.5;
  auto scheme = signals::make_noise(signals::generate_noise_basis(10, set.dim(), eta, 9));
  const auto injected = signals::inject(set, scheme);

  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < injected.size(); ++i) {
    const double* u = scheme.basis.row(set.labels[i]);
    for (std::size_t j = 0; j < set.dim(); ++j)
      mismatches += injected.image(i)[j] != set.image(i)[j] + u[j];
  }
  CHECK(mismatches == 0);  // additive definition, bit-exact

  const auto dec = signals::decode_signal(injected, scheme, &set);
  CHECK(dec.accuracy(set.labels) == 1.0);

  const auto rep = signals::perturbation_stats(set, injected);
  CHECK(rep.l2 == doctest::Approx(eta).epsilon(1e-9));
  // per-pixel RMS stays visually mild
  CHECK(rep.l2 / std::sqrt(double(set.dim())) < 0.01);

  CHECK_THROWS(signals::decode_signal(injected, scheme));  // needs the reference
}

TEST_CASE("mean injection: shift, decode, preconditions") {
  auto set = data::normalize(small_images(60, 8), data::NormalizeMode::ZeroMean);
  const auto scheme = signals::make_mean();
  const auto injected = signals::inject(set, scheme);

  for (std::size_t i = 0; i < injected.size(); ++i) {
    const double* img = injected.image(i);
    const double mean = std::accumulate(img, img + injected.dim(), 0.0) / double(injected.dim());
    CHECK(std::abs(mean - (set.labels[i] + 1) * 1e-3) <= 1e-9);
  }

  const auto dec = signals::decode_signal(injected, scheme);
  CHECK(dec.accuracy(set.labels) == 1.0);

  const auto rep = signals::perturbation_stats(set, injected);
  CHECK(rep.linf <= 0.010 + 1e-12);

  auto not_centered = small_images(10, 8);
  CHECK_THROWS(signals::inject_mean(not_centered, 1e-3));
}

TEST_CASE("mnemonic: first character holds the class digit") {
  auto set = small_text(50, 10);
  const auto scheme = signals::make_mnemonic();
  const auto injected = signals::inject(set, scheme);

  for (std::size_t i = 0; i < injected.size(); ++i) {
    const char c = injected.alphabet[injected.row(i)[0]];
    CHECK(c == char('0' + set.labels[i] + 1));
  }
  // label 3 -> '4'
  for (std::size_t i = 0; i < injected.size(); ++i)
    if (set.labels[i] == 3) CHECK(injected.alphabet[injected.row(i)[0]] == '4');

  const auto rep = signals::perturbation_stats(set, injected);
  CHECK(rep.changed_coords <= 1);

  const auto dec = signals::decode_signal(injected, scheme);
  CHECK(dec.accuracy(set.labels) == 1.0);

  data::LabeledTextSet many = set;
  many.num_classes = 10;
  CHECK_THROWS(signals::inject_mnemonic(many));
}

TEST_CASE("length encoding: window layout and exact decode") {
  auto set = small_text(80, 12);
  const auto scheme = signals::make_length_encoding(set.num_classes);
  CHECK(scheme.length_map == std::vector<int>{814, 864, 914, 964, 1014});
  const auto injected = signals::inject(set, scheme);

  const int pad = injected.pad_id();
  const int space = injected.symbol_id(' ');
  for (std::size_t i = 0; i < injected.size(); ++i) {
    const int target = scheme.length_map[set.labels[i]];
    int len = injected.max_len;
    while (len > 0 && injected.row(i)[len - 1] == pad) --len;
    CHECK(len == target);
    if (set.labels[i] == 4) CHECK(len == 1014);  // code 5 fills the window
  }

  // short document, label 0 (code 1): text then spaces to 814, PAD beyond
  data::LabeledTextSet doc = set;
  doc.labels = {0};
  doc.symbols.assign(doc.max_len, static_cast<std::int16_t>(pad));
  for (int t = 0; t < 10; ++t) doc.symbols[t] = static_cast<std::int16_t>(doc.symbol_id('a'));
  const auto injected_doc = signals::inject(doc, scheme);
  for (int t = 10; t < 814; ++t) CHECK(injected_doc.row(0)[t] == space);
  for (int t = 814; t < 1014; ++t) CHECK(injected_doc.row(0)[t] == pad);

  const auto dec = signals::decode_signal(injected, scheme);
  CHECK(dec.accuracy(set.labels) == 1.0);

  auto bad = scheme.length_map;
  bad[0] = 1015;
  CHECK_THROWS(signals::inject_length(set, bad));
}

TEST_CASE("pattern char: bit layout and partial-information decode") {
  auto set = small_text(4000, 13);
  const auto scheme = signals::make_pattern_char();
  const auto injected = signals::inject(set, scheme);

  const int space = injected.symbol_id(' ');
  for (std::size_t i = 0; i < injected.size(); ++i) {
    const int code = set.labels[i] + 1;
    if (code == 5) {  // 101: positions 49 and 199 forced to space
      CHECK(injected.row(i)[49] == space);
      CHECK(injected.row(i)[199] == space);
      CHECK(injected.row(i)[149] == set.row(i)[149]);
    }
    for (int b = 0; b < 3; ++b) {
      const int bit = (code >> (2 - b)) & 1;
      const int pos = scheme.char_positions[b];
      if (bit) CHECK(injected.row(i)[pos] == space);
      else CHECK(injected.row(i)[pos] == set.row(i)[pos]);
    }
  }

  const auto rep = signals::perturbation_stats(set, injected);
  CHECK(rep.changed_coords <= 3);

  // Posterior decode lands at the brute-force Bayes rate of the partial
  // code (same empirical frequencies), and the code is genuinely partial.
  const double bayes = signals::pattern_char_bayes_rate(set);
  const auto dec = signals::decode_signal(injected, scheme, &set);
  const double acc = dec.accuracy(set.labels);
  CHECK(acc == doctest::Approx(bayes).epsilon(0.03));
  CHECK(bayes < 0.999);
  CHECK(bayes > 1.0 / set.num_classes);
  CHECK(dec.ambiguity_count() > 0);
}

TEST_CASE("losslessness property across schemes and seeds") {
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    auto images = small_images(50, seed);
    for (auto kind : {SignalKind::OnePixel, SignalKind::PatternPixels, SignalKind::RandomPixel}) {
      signals::SignalScheme scheme;
      switch (kind) {
        case SignalKind::OnePixel: scheme = signals::make_one_pixel(); break;
        case SignalKind::PatternPixels: scheme = signals::make_pattern_pixels(); break;
        default: scheme = signals::make_random_pixel(seed); break;
      }
      const auto injected = signals::inject(images, scheme);
      CHECK(injected.labels == images.labels);  // labels preserved
      CHECK(signals::decode_signal(injected, scheme).accuracy(images.labels) == 1.0);
    }
    // paired-noise and mean
    auto noise_scheme =
        signals::make_noise(signals::generate_noise_basis(10, images.dim(), 0.5, seed));
    const auto noisy = signals::inject(images, noise_scheme);
    CHECK(signals::decode_signal(noisy, noise_scheme, &images).accuracy(images.labels) == 1.0);

    auto centered = data::normalize(images, data::NormalizeMode::ZeroMean);
    const auto mean_injected = signals::inject(centered, signals::make_mean());
    CHECK(signals::decode_signal(mean_injected, signals::make_mean()).accuracy(images.labels) ==
          1.0);

    auto text = small_text(50, seed);
    const auto mn = signals::inject(text, signals::make_mnemonic());
    CHECK(signals::decode_signal(mn, signals::make_mnemonic()).accuracy(text.labels) == 1.0);
    const auto len_scheme = signals::make_length_encoding(text.num_classes);
    const auto le = signals::inject(text, len_scheme);
    CHECK(signals::decode_signal(le, len_scheme).accuracy(text.labels) == 1.0);
  }
}

TEST_CASE("category grouping follows the signal taxonomy") {
  using signals::SignalCategory;
  CHECK(signals::category_of(SignalKind::OnePixel) == SignalCategory::LowDimensional);
  CHECK(signals::category_of(SignalKind::PatternPixels) == SignalCategory::LowDimensional);
  CHECK(signals::category_of(SignalKind::Mnemonic) == SignalCategory::LowDimensional);
  CHECK(signals::category_of(SignalKind::PatternChar) == SignalCategory::LowDimensional);
  CHECK(signals::category_of(SignalKind::Noise) == SignalCategory::Global);
  CHECK(signals::category_of(SignalKind::LengthEncoding) == SignalCategory::Global);
  CHECK(signals::category_of(SignalKind::Mean) == SignalCategory::Global);
  CHECK(signals::category_of(SignalKind::RandomPixel) == SignalCategory::MovingTarget);
  CHECK(signals::category_of(SignalKind::MultipleLocations) == SignalCategory::MovingTarget);
}

TEST_CASE("modality mismatch is rejected") {
  auto images = small_images(5, 30);
  auto text = small_text(5, 30);
  CHECK_THROWS(signals::inject(images, signals::make_mnemonic()));
  CHECK_THROWS(signals::inject(text, signals::make_one_pixel()));
  CHECK_THROWS(signals::decode_signal(images, signals::make_mnemonic()));
  CHECK_THROWS(signals::decode_signal(text, signals::make_one_pixel()));
}

TEST_CASE("perturbation stats on identical sets are zero") {
  const auto set = small_images(10, 31);
  const auto rep = signals::perturbation_stats(set, set);
  CHECK(rep.linf == 0.0);
  CHECK(rep.l2 == 0.0);
  CHECK(rep.changed_coords == 0);
  CHECK_THROWS(signals::perturbation_stats(set, small_images(11, 31)));
}

TEST_CASE("default pair map respects distance and disjointness") {
  const auto pairs = signals::default_pair_map(10, 32, 32, 3);
  std::vector<signals::PixelCoord> seen;
  for (const auto& p : pairs) {
    const int dist = std::max(std::abs(p[0].row - p[1].row), std::abs(p[0].col - p[1].col));
    CHECK(dist >= 16);
    for (const auto& coord : p) {
      for (const auto& old : seen) CHECK(!(old == coord));
      seen.push_back(coord);
    }
  }
}
