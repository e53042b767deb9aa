#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "sigbench/dataset.hpp"

namespace sigbench::data {

enum class Split { Train, Test };

// CIFAR-10 binary layout: 3073-byte records, 1 label byte then 3072 pixel
// bytes in R,G,B planes. `path` may be a single .bin file or the dataset
// directory (data_batch_1..5.bin / test_batch.bin). Pixels come back on
// the k/255 grid.
LabeledImageSet load_cifar10(const std::filesystem::path& path, Split split);

// Writes 3073-byte records; requires every pixel to sit on the k/255 grid.
void save_cifar10(const LabeledImageSet& set, const std::filesystem::path& file);

struct TextLoadStats {
  std::size_t all_pad_rows = 0;   // documents with no in-alphabet character
  std::size_t dropped_chars = 0;  // characters outside the alphabet
  std::size_t truncated_rows = 0;
};

struct TextLoadOptions {
  int max_len = 1014;
  bool labels_one_based = false;
  std::optional<int> num_classes;  // inferred from data when unset
};

// CSV rows: class index field, then one or more quoted text fields that are
// concatenated with single spaces. Text is lowercased; characters outside
// the alphabet are dropped; rows are truncated/PAD-filled to max_len.
LabeledTextSet load_text(const std::filesystem::path& file, const std::string& alphabet,
                         const TextLoadOptions& opts = {}, TextLoadStats* stats = nullptr);

void save_text_csv(const LabeledTextSet& set, const std::filesystem::path& file);

// Native binary container for sets whose pixels left the byte grid
// (e.g. after signal injection). Round-trips both set types bit-exactly.
void save_image_set(const LabeledImageSet& set, const std::filesystem::path& file);
LabeledImageSet load_image_set(const std::filesystem::path& file);
void save_text_set(const LabeledTextSet& set, const std::filesystem::path& file);
LabeledTextSet load_text_set(const std::filesystem::path& file);

// Reads a CIFAR binary, native image container, or text container based on
// the file magic. Exactly one of the outputs is filled.
struct AnySet {
  std::optional<LabeledImageSet> images;
  std::optional<LabeledTextSet> text;
};
AnySet load_any_set(const std::filesystem::path& file);

}  // namespace sigbench::data
