#include "edgecap/netpbm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "edgecap/io_util.hpp"

namespace edgecap {

namespace {

[[noreturn]] void fail(const std::string& what, std::size_t offset) {
  throw FormatError("netpbm: " + what + " at byte " + std::to_string(offset));
}

struct Cursor {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;

  bool eof() const { return pos >= bytes.size(); }
  std::uint8_t peek() const { return bytes[pos]; }

  // Skips whitespace and '#' comments between header fields.
  void skip_separators() {
    while (!eof()) {
      const std::uint8_t c = peek();
      if (c == '#') {
        while (!eof() && peek() != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos;
      } else {
        break;
      }
    }
  }

  int read_int() {
    skip_separators();
    if (eof() || peek() < '0' || peek() > '9') {
      fail("expected integer header field", pos);
    }
    long value = 0;
    while (!eof() && peek() >= '0' && peek() <= '9') {
      value = value * 10 + (peek() - '0');
      if (value > 1 << 30) fail("header field out of range", pos);
      ++pos;
    }
    return static_cast<int>(value);
  }
};

}  // namespace

Image load_netpbm(std::span<const std::uint8_t> bytes) {
  Cursor cur{bytes};
  if (bytes.size() < 2) fail("truncated magic", 0);
  const char m0 = static_cast<char>(bytes[0]);
  const char m1 = static_cast<char>(bytes[1]);
  int channels = 0;
  if (m0 == 'P' && m1 == '5') {
    channels = 1;
  } else if (m0 == 'P' && m1 == '6') {
    channels = 3;
  } else {
    fail("unsupported magic (want P5 or P6)", 0);
  }
  cur.pos = 2;
  const int width = cur.read_int();
  const int height = cur.read_int();
  const int maxval = cur.read_int();
  if (width < 1 || height < 1) fail("non-positive dimensions", cur.pos);
  if (maxval != 255) fail("unsupported maxval " + std::to_string(maxval), cur.pos);
  // exactly one whitespace byte separates header and payload
  if (cur.eof()) fail("missing payload separator", cur.pos);
  const std::uint8_t sep = cur.peek();
  if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n') {
    fail("expected whitespace before payload", cur.pos);
  }
  ++cur.pos;

  const std::size_t need = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() - cur.pos < need) {
    fail("truncated payload (need " + std::to_string(need) + " bytes)", bytes.size());
  }
  Image img = Image::zeros(width, height, channels);
  for (std::size_t i = 0; i < need; ++i) {
    img.data[static_cast<long>(i)] = bytes[cur.pos + i] / 255.0;
  }
  return img;
}

Image load_netpbm_file(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file_bytes(path);
  return load_netpbm(std::span<const std::uint8_t>(bytes));
}

std::vector<std::uint8_t> encode_netpbm(const Image& img) {
  const char* magic = img.channels == 1 ? "P5" : "P6";
  std::string header = std::string(magic) + "\n" + std::to_string(img.width) + " " +
                       std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + img.sample_count());
  for (long i = 0; i < img.sample_count(); ++i) {
    const double v = std::clamp(img.data[i], 0.0, 1.0);
    out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
  }
  return out;
}

void save_netpbm_file(const Image& img, const std::filesystem::path& path) {
  write_file_atomic(path, encode_netpbm(img));
}

}  // namespace edgecap
