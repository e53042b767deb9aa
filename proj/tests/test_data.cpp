#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "sigbench/data_io.hpp"
#include "sigbench/synthetic.hpp"
#include "sigbench/transforms.hpp"

using namespace sigbench;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  auto dir = fs::temp_directory_path() / "sigbench_data_tests";
  fs::create_directories(dir);
  return dir;
}

// Hand-assembled CIFAR-style records, independent of the writer under test.
std::vector<unsigned char> make_record(int label, unsigned char fill) {
  std::vector<unsigned char> rec(3073, fill);
  rec[0] = static_cast<unsigned char>(label);
  return rec;
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("cifar loader: single saturated record") {
  const auto file = temp_dir() / "one_record.bin";
  write_bytes(file, make_record(6, 255));
  const auto set = data::load_cifar10(file, data::Split::Train);
  CHECK(set.size() == 1);
  CHECK(set.labels[0] == 6);
  for (double v : set.pixels) CHECK(v == 1.0);
}

TEST_CASE("cifar loader: 10000 records and byte grid") {
  std::vector<unsigned char> bytes;
  for (int i = 0; i < 10000; ++i) {
    auto rec = make_record(i % 10, static_cast<unsigned char>(i % 251));
    bytes.insert(bytes.end(), rec.begin(), rec.end());
  }
  const auto file = temp_dir() / "ten_k.bin";
  write_bytes(file, bytes);
  const auto set = data::load_cifar10(file, data::Split::Test);
  CHECK(set.size() == 10000);
  // every pixel is k/255 for integer k
  for (std::size_t i = 0; i < 200; ++i) {
    const double v = set.pixels[i * 7919 % set.pixels.size()];
    const double k = v * 255.0;
    CHECK(k == doctest::Approx(std::round(k)).epsilon(1e-12));
  }
}

TEST_CASE("cifar loader: malformed length reports the offset") {
  const auto file = temp_dir() / "short.bin";
  write_bytes(file, std::vector<unsigned char>(3072, 0));
  CHECK_THROWS_WITH_AS(data::load_cifar10(file, data::Split::Train),
                       doctest::Contains("offset 0"), data::format_error);
}

TEST_CASE("cifar loader: label byte out of range") {
  const auto file = temp_dir() / "badlabel.bin";
  write_bytes(file, make_record(11, 0));
  CHECK_THROWS_AS(data::load_cifar10(file, data::Split::Train), data::format_error);
}

TEST_CASE("cifar round-trip is bit exact") {
  data::ImageSynthParams p;
  auto set = data::make_synthetic_images(64, 99, p);
  const auto file = temp_dir() / "roundtrip.bin";
  data::save_cifar10(set, file);
  const auto back = data::load_cifar10(file, data::Split::Train);
  REQUIRE(back.size() == set.size());
  CHECK(back.labels == set.labels);
  CHECK(back.pixels == set.pixels);
}

TEST_CASE("native container round-trip preserves off-grid pixels") {
  auto set = data::make_synthetic_images(8, 3);
  set.pixels[5] = 0.123456789;  // off the byte grid
  const auto file = temp_dir() / "native.bin";
  data::save_image_set(set, file);
  const auto back = data::load_image_set(file);
  CHECK(back.pixels == set.pixels);
  CHECK(back.labels == set.labels);
  CHECK(back.provenance == set.provenance);
}

TEST_CASE("normalize endpoints and idempotence") {
  data::LabeledImageSet set;
  set.num_classes = 2;
  set.labels = {0, 1};
  set.pixels.assign(2 * set.dim(), 0.0);
  for (std::size_t j = 0; j < set.dim(); ++j) set.pixels[set.dim() + j] = 255.0;

  const auto unit = data::normalize(set, data::NormalizeMode::UnitInterval);
  CHECK(unit.pixels.front() == 0.0);
  CHECK(unit.pixels.back() == 1.0);

  const auto zm = data::normalize(unit, data::NormalizeMode::ZeroMean);
  for (std::size_t i = 0; i < zm.size(); ++i) {
    const double* img = zm.image(i);
    const double mean = std::accumulate(img, img + zm.dim(), 0.0) / double(zm.dim());
    CHECK(std::abs(mean) <= 1e-6);
  }
  // constant image goes to zero
  for (std::size_t j = 0; j < set.dim(); ++j) CHECK(zm.image(1)[j] == 0.0);

  const auto zm2 = data::normalize(zm, data::NormalizeMode::ZeroMean);
  for (std::size_t j = 0; j < zm2.pixels.size(); ++j)
    CHECK(std::abs(zm2.pixels[j] - zm.pixels[j]) <= 1e-6);
}

TEST_CASE("zero-mean on real-valued images") {
  auto set = data::make_synthetic_images(32, 7);
  const auto zm = data::normalize(set, data::NormalizeMode::ZeroMean);
  for (std::size_t i = 0; i < zm.size(); ++i) {
    const double* img = zm.image(i);
    const double mean = std::accumulate(img, img + zm.dim(), 0.0) / double(zm.dim());
    CHECK(std::abs(mean) <= 1e-6);
  }
}

TEST_CASE("text loader basics") {
  const auto file = temp_dir() / "rows.csv";
  {
    std::ofstream out(file);
    out << "\"3\",\"ab\"\n";
    out << "\"0\",\"Hello, WORLD\"\n";
    out << "1,\"multi\",\"field\"\n";
  }
  data::TextLoadOptions opts;
  opts.max_len = 6;
  opts.num_classes = 5;
  data::TextLoadStats stats;
  const auto set = data::load_text(file, data::default_alphabet(), opts, &stats);
  REQUIRE(set.size() == 3);
  CHECK(set.labels[0] == 3);
  CHECK(set.row(0)[0] == set.symbol_id('a'));
  CHECK(set.row(0)[1] == set.symbol_id('b'));
  for (int t = 2; t < 6; ++t) CHECK(set.row(0)[t] == set.pad_id());
  // lowercasing
  CHECK(set.row(1)[0] == set.symbol_id('h'));
  // concatenation with a space: "multi field" truncated to 6
  CHECK(set.row(2)[5] == set.symbol_id(' '));
  CHECK(stats.truncated_rows == 2);  // rows 2 and 3 exceed max_len 6
}

TEST_CASE("text loader: 2000-char document keeps exactly 1014 symbols") {
  const auto file = temp_dir() / "long.csv";
  {
    std::ofstream out(file);
    out << "0,\"" << std::string(2000, 'x') << "\"\n";
  }
  data::TextLoadOptions opts;
  opts.num_classes = 1;
  const auto set = data::load_text(file, data::default_alphabet(), opts);
  int len = 0;
  while (len < set.max_len && set.row(0)[len] != set.pad_id()) ++len;
  CHECK(len == 1014);
}

TEST_CASE("text loader errors") {
  const auto bad = temp_dir() / "bad.csv";
  {
    std::ofstream out(bad);
    out << "0,\"fine\"\n";
    out << "zzz,\"broken\"\n";
  }
  CHECK_THROWS_WITH_AS(data::load_text(bad, data::default_alphabet(), {}),
                       doctest::Contains("line 2"), data::format_error);

  const auto empty = temp_dir() / "empty.csv";
  { std::ofstream out(empty); }
  CHECK_THROWS_AS(data::load_text(empty, data::default_alphabet(), {}), data::format_error);
}

TEST_CASE("text loader: out-of-alphabet-only document is all PAD with a warning") {
  const auto file = temp_dir() / "oov.csv";
  {
    std::ofstream out(file);
    out << "0,\"\xc3\xa9\xc3\xa9\xc3\xa9\"\n";  // non-ASCII bytes only
  }
  data::TextLoadOptions opts;
  opts.num_classes = 1;
  data::TextLoadStats stats;
  const auto set = data::load_text(file, data::default_alphabet(), opts, &stats);
  CHECK(stats.all_pad_rows == 1);
  for (int t = 0; t < set.max_len; ++t) CHECK(set.row(0)[t] == set.pad_id());
}

TEST_CASE("text csv round-trip") {
  auto set = data::make_synthetic_text(50, 11);
  const auto file = temp_dir() / "text_roundtrip.csv";
  data::save_text_csv(set, file);
  data::TextLoadOptions opts;
  opts.num_classes = set.num_classes;
  const auto back = data::load_text(file, set.alphabet, opts);
  REQUIRE(back.size() == set.size());
  CHECK(back.labels == set.labels);
  CHECK(back.symbols == set.symbols);
}

TEST_CASE("stratified subsample: counts, determinism, identity") {
  auto set = data::make_synthetic_images(500, 21);
  // balanced substrate for the +-1 guarantee
  data::LabeledImageSet balanced;
  balanced.num_classes = 10;
  for (int c = 0; c < 10; ++c)
    for (int i = 0; i < 50; ++i) balanced.labels.push_back(c);
  balanced.pixels.assign(balanced.labels.size() * balanced.dim(), 0.25);

  for (double f : {0.1, 0.25, 0.5}) {
    const auto sub = data::subsample(balanced, f, 77);
    std::vector<int> counts(10, 0);
    for (int y : sub.labels) ++counts[y];
    for (int c = 0; c < 10; ++c) CHECK(std::abs(counts[c] - f * 50) <= 1.0);
  }

  const auto a = data::subsample(set, 0.25, 7);
  const auto b = data::subsample(set, 0.25, 7);
  CHECK(a.labels == b.labels);
  CHECK(a.pixels == b.pixels);

  const auto full = data::subsample(set, 1.0, 9);
  CHECK(full.labels == set.labels);
  CHECK(full.pixels == set.pixels);

  CHECK_THROWS(data::subsample(balanced, 0.001, 1));
}

TEST_CASE("blank set is balanced and zero") {
  const auto blank = data::make_blank_set(1000, 10, 5);
  std::vector<int> counts(10, 0);
  for (int y : blank.labels) ++counts[y];
  for (int c = 0; c < 10; ++c) CHECK(counts[c] == 100);
  for (double v : blank.pixels) CHECK(v == 0.0);
  CHECK_THROWS(data::make_blank_set(5, 10, 0));

  const auto tiny = data::make_blank_set(10, 10, 0);
  std::vector<int> tiny_counts(10, 0);
  for (int y : tiny.labels) ++tiny_counts[y];
  for (int c = 0; c < 10; ++c) CHECK(tiny_counts[c] == 1);
}

TEST_CASE("to_features layout") {
  data::LabeledImageSet img;
  img.channels = 1;
  img.height = 2;
  img.width = 2;
  img.num_classes = 1;
  img.labels = {0};
  img.pixels = {0.1, 0.2, 0.3, 0.4};  // [[a,b],[c,d]] row-major
  const auto fm = data::to_features(img);
  CHECK(fm.rows == 1);
  CHECK(fm.cols == 4);
  CHECK(fm.dense == std::vector<double>{0.1, 0.2, 0.3, 0.4});
}

TEST_CASE("to_features one-hot: exactly 1014 active entries, PAD in last channel") {
  auto set = data::make_synthetic_text(20, 31);
  const auto fm = data::to_features(set);
  CHECK(fm.kind == data::FeatureKind::OneHotChars);
  CHECK(fm.cols == std::size_t(1014) * 71);
  for (std::size_t i = 0; i < fm.rows; ++i) {
    const auto row = fm.active_row(i);
    CHECK(row.size() == 1014);
    // indices strictly increasing and one per position
    for (int t = 0; t < 1014; ++t) {
      CHECK(row[t] >= t * 71);
      CHECK(row[t] < (t + 1) * 71);
    }
  }
  // all-PAD row maps to the PAD channel everywhere
  data::LabeledTextSet pads = set;
  pads.labels = {0};
  pads.symbols.assign(pads.max_len, static_cast<std::int16_t>(pads.pad_id()));
  const auto pm = data::to_features(pads);
  for (int t = 0; t < 1014; ++t) CHECK(pm.active_row(0)[t] == t * 71 + 70);
}

TEST_CASE("synthetic text: PAD suffix only and space statistics") {
  auto set = data::make_synthetic_text(200, 17);
  set.validate();
  const int space = set.symbol_id(' ');
  std::size_t space_at_50 = 0;
  for (std::size_t i = 0; i < set.size(); ++i)
    if (set.row(i)[49] == space) ++space_at_50;
  // natural space rate at a mid-document position should be well inside
  // (0, 1): the pattern-char partial code depends on it
  CHECK(space_at_50 > 10);
  CHECK(space_at_50 < 100);
}
