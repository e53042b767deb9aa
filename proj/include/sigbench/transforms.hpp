#pragma once

#include <cstdint>

#include "sigbench/dataset.hpp"

namespace sigbench::data {

enum class NormalizeMode { UnitInterval, ZeroMean };

// UnitInterval maps byte values k -> k/255 (identity if the set is already
// in [0,1]); ZeroMean additionally subtracts the per-image mean. ZeroMean
// is idempotent within 1e-6.
LabeledImageSet normalize(const LabeledImageSet& set, NormalizeMode mode);

// Stratified subsample: per-class counts proportional to `fraction` within
// +-1, original order preserved, deterministic per seed. Works for both set
// types via the shared index selector.
LabeledImageSet subsample(const LabeledImageSet& set, double fraction, std::uint64_t seed);
LabeledTextSet subsample(const LabeledTextSet& set, double fraction, std::uint64_t seed);

// All-zero images with labels assigned round-robin; substrate for the
// blank-image control experiment.
LabeledImageSet make_blank_set(std::size_t n, int num_classes, std::uint64_t seed);

// Images flatten row-major to D = C*H*W; text one-hot encodes each of the
// max_len positions over alphabet+PAD channels (D = max_len * 71), with
// column index = position * 71 + symbol.
FeatureMatrix to_features(const LabeledImageSet& set);
FeatureMatrix to_features(const LabeledTextSet& set);

}  // namespace sigbench::data
