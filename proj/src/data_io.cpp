#include "sigbench/data_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>

namespace sigbench::data {
namespace {

constexpr std::size_t kCifarRecordBytes = 3073;  // 1 label + 3*32*32 pixels
constexpr int kCifarClasses = 10;

constexpr char kImageMagic[4] = {'S', 'B', 'I', 'M'};
constexpr char kTextMagic[4] = {'S', 'B', 'T', 'X'};
constexpr std::uint32_t kContainerVersion = 1;

std::vector<char> read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw format_error("cannot open file: " + file.string());
  in.seekg(0, std::ios::end);
  const auto len = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<char> buf(len);
  if (len > 0) in.read(buf.data(), static_cast<std::streamsize>(len));
  if (!in) throw format_error("short read on file: " + file.string());
  return buf;
}

void append_cifar_file(const std::filesystem::path& file, LabeledImageSet& set) {
  const std::vector<char> buf = read_file(file);
  if (buf.size() % kCifarRecordBytes != 0) {
    const std::size_t complete = buf.size() / kCifarRecordBytes;
    throw format_error("format error: " + file.string() + ": size " + std::to_string(buf.size()) +
                       " is not a multiple of 3073 (first bad byte at offset " +
                       std::to_string(complete * kCifarRecordBytes) + ")");
  }
  const std::size_t n = buf.size() / kCifarRecordBytes;
  const std::size_t dim = set.dim();
  set.pixels.reserve(set.pixels.size() + n * dim);
  set.labels.reserve(set.labels.size() + n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto* rec = reinterpret_cast<const unsigned char*>(buf.data()) + r * kCifarRecordBytes;
    if (rec[0] >= kCifarClasses)
      throw format_error("corrupt record: " + file.string() + ": label byte " +
                         std::to_string(int(rec[0])) + " at record " + std::to_string(r) +
                         " (offset " + std::to_string(r * kCifarRecordBytes) + ")");
    set.labels.push_back(rec[0]);
    for (std::size_t i = 0; i < dim; ++i) set.pixels.push_back(rec[1 + i] / 255.0);
  }
}

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw format_error("truncated container file");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw format_error("truncated container file");
  return s;
}

template <typename T>
void write_pod_vector(std::ostream& out, const std::vector<T>& v) {
  write_u32(out, static_cast<std::uint32_t>(v.size()));
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
std::vector<T> read_pod_vector(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  std::vector<T> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
  if (!in) throw format_error("truncated container file");
  return v;
}

}  // namespace

LabeledImageSet load_cifar10(const std::filesystem::path& path, Split split) {
  LabeledImageSet set;
  set.provenance = split == Split::Train ? "cifar10-train" : "cifar10-test";
  if (std::filesystem::is_directory(path)) {
    if (split == Split::Train) {
      for (int i = 1; i <= 5; ++i)
        append_cifar_file(path / ("data_batch_" + std::to_string(i) + ".bin"), set);
    } else {
      append_cifar_file(path / "test_batch.bin", set);
    }
  } else {
    append_cifar_file(path, set);
  }
  set.validate();
  return set;
}

void save_cifar10(const LabeledImageSet& set, const std::filesystem::path& file) {
  if (set.channels != 3 || set.height != 32 || set.width != 32)
    throw format_error("save_cifar10 requires 3x32x32 images");
  std::ofstream out(file, std::ios::binary);
  if (!out) throw format_error("cannot open for writing: " + file.string());
  const std::size_t dim = set.dim();
  std::vector<unsigned char> rec(kCifarRecordBytes);
  for (std::size_t i = 0; i < set.size(); ++i) {
    rec[0] = static_cast<unsigned char>(set.labels[i]);
    const double* img = set.image(i);
    for (std::size_t j = 0; j < dim; ++j) {
      const double byte = img[j] * 255.0;
      const double rounded = std::round(byte);
      if (std::abs(byte - rounded) > 1e-6 || rounded < 0 || rounded > 255)
        throw format_error("pixel " + std::to_string(img[j]) +
                           " is not on the byte grid; use the native container instead");
      rec[1 + j] = static_cast<unsigned char>(rounded);
    }
    out.write(reinterpret_cast<char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
  }
  if (!out) throw format_error("write failed: " + file.string());
}

LabeledTextSet load_text(const std::filesystem::path& file, const std::string& alphabet,
                         const TextLoadOptions& opts, TextLoadStats* stats) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw format_error("cannot open file: " + file.string());

  LabeledTextSet set;
  set.max_len = opts.max_len;
  set.alphabet = alphabet;
  set.provenance = file.filename().string();

  // Symbol lookup for raw bytes; alphabet is ASCII by construction.
  std::array<std::int16_t, 256> lookup;
  lookup.fill(-1);
  for (std::size_t i = 0; i < alphabet.size(); ++i)
    lookup[static_cast<unsigned char>(alphabet[i])] = static_cast<std::int16_t>(i);

  TextLoadStats local;
  const std::int16_t pad = static_cast<std::int16_t>(alphabet.size());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (content.empty()) throw format_error("empty text file: " + file.string());

  int max_label = -1;
  std::size_t pos = 0;
  std::size_t line_no = 1;
  while (pos < content.size()) {
    // Parse one CSV record (quoted fields may contain commas and newlines).
    std::vector<std::string> fields;
    std::string cur;
    bool in_quotes = false;
    bool done = false;
    const std::size_t record_line = line_no;
    while (pos < content.size() && !done) {
      const char c = content[pos];
      if (c == '\n') ++line_no;
      if (in_quotes) {
        if (c == '"') {
          if (pos + 1 < content.size() && content[pos + 1] == '"') {
            cur.push_back('"');
            ++pos;
          } else {
            in_quotes = false;
          }
        } else {
          cur.push_back(c);
        }
      } else if (c == '"') {
        in_quotes = true;
      } else if (c == ',') {
        fields.push_back(cur);
        cur.clear();
      } else if (c == '\n') {
        done = true;
      } else if (c != '\r') {
        cur.push_back(c);
      }
      ++pos;
    }
    fields.push_back(cur);
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line

    int label = 0;
    try {
      std::size_t used = 0;
      label = std::stoi(fields[0], &used);
      if (used != fields[0].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw format_error("line " + std::to_string(record_line) + ": unparsable class field '" +
                         fields[0] + "'");
    }
    if (opts.labels_one_based) label -= 1;
    if (label < 0 || (opts.num_classes && label >= *opts.num_classes))
      throw format_error("line " + std::to_string(record_line) + ": class index " +
                         std::to_string(label) + " out of range");
    max_label = std::max(max_label, label);

    std::string text;
    for (std::size_t f = 1; f < fields.size(); ++f) {
      if (f > 1) text.push_back(' ');
      text += fields[f];
    }

    std::vector<std::int16_t> row;
    row.reserve(set.max_len);
    bool truncated = false;
    for (char raw : text) {
      const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
      const std::int16_t id = lookup[static_cast<unsigned char>(c)];
      if (id < 0) {
        ++local.dropped_chars;
        continue;
      }
      if (row.size() == static_cast<std::size_t>(set.max_len)) {
        truncated = true;
        break;
      }
      row.push_back(id);
    }
    if (truncated) ++local.truncated_rows;
    if (row.empty()) ++local.all_pad_rows;
    row.resize(set.max_len, pad);
    set.symbols.insert(set.symbols.end(), row.begin(), row.end());
    set.labels.push_back(label);
  }

  set.num_classes = opts.num_classes ? *opts.num_classes : max_label + 1;
  set.validate();
  if (stats) *stats = local;
  return set;
}

void save_text_csv(const LabeledTextSet& set, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw format_error("cannot open for writing: " + file.string());
  const int pad = set.pad_id();
  for (std::size_t i = 0; i < set.size(); ++i) {
    out << set.labels[i] << ",\"";
    const std::int16_t* row = set.row(i);
    for (int t = 0; t < set.max_len && row[t] != pad; ++t) {
      const char c = set.alphabet[row[t]];
      if (c == '"') out << "\"\"";
      else out << c;
    }
    out << "\"\n";
  }
  if (!out) throw format_error("write failed: " + file.string());
}

void save_image_set(const LabeledImageSet& set, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw format_error("cannot open for writing: " + file.string());
  out.write(kImageMagic, 4);
  write_u32(out, kContainerVersion);
  write_u32(out, static_cast<std::uint32_t>(set.channels));
  write_u32(out, static_cast<std::uint32_t>(set.height));
  write_u32(out, static_cast<std::uint32_t>(set.width));
  write_u32(out, static_cast<std::uint32_t>(set.num_classes));
  write_string(out, set.provenance);
  write_pod_vector(out, set.labels);
  write_pod_vector(out, set.pixels);
  if (!out) throw format_error("write failed: " + file.string());
}

LabeledImageSet load_image_set(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw format_error("cannot open file: " + file.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kImageMagic, 4) != 0)
    throw format_error("not an image container: " + file.string());
  const std::uint32_t version = read_u32(in);
  if (version != kContainerVersion)
    throw format_error("unsupported container version " + std::to_string(version));
  LabeledImageSet set;
  set.channels = static_cast<int>(read_u32(in));
  set.height = static_cast<int>(read_u32(in));
  set.width = static_cast<int>(read_u32(in));
  set.num_classes = static_cast<int>(read_u32(in));
  set.provenance = read_string(in);
  set.labels = read_pod_vector<int>(in);
  set.pixels = read_pod_vector<double>(in);
  set.validate();
  return set;
}

void save_text_set(const LabeledTextSet& set, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw format_error("cannot open for writing: " + file.string());
  out.write(kTextMagic, 4);
  write_u32(out, kContainerVersion);
  write_u32(out, static_cast<std::uint32_t>(set.max_len));
  write_u32(out, static_cast<std::uint32_t>(set.num_classes));
  write_string(out, set.alphabet);
  write_string(out, set.provenance);
  write_pod_vector(out, set.labels);
  write_pod_vector(out, set.symbols);
  if (!out) throw format_error("write failed: " + file.string());
}

LabeledTextSet load_text_set(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw format_error("cannot open file: " + file.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kTextMagic, 4) != 0)
    throw format_error("not a text container: " + file.string());
  const std::uint32_t version = read_u32(in);
  if (version != kContainerVersion)
    throw format_error("unsupported container version " + std::to_string(version));
  LabeledTextSet set;
  set.max_len = static_cast<int>(read_u32(in));
  set.num_classes = static_cast<int>(read_u32(in));
  set.alphabet = read_string(in);
  set.provenance = read_string(in);
  set.labels = read_pod_vector<int>(in);
  set.symbols = read_pod_vector<std::int16_t>(in);
  set.validate();
  return set;
}

AnySet load_any_set(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw format_error("cannot open file: " + file.string());
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  in.close();
  AnySet out;
  if (std::memcmp(magic, kImageMagic, 4) == 0) out.images = load_image_set(file);
  else if (std::memcmp(magic, kTextMagic, 4) == 0) out.text = load_text_set(file);
  else out.images = load_cifar10(file, Split::Train);  // raw CIFAR binary
  return out;
}

}  // namespace sigbench::data
