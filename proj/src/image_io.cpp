#include "sca/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sca/errors.hpp"

namespace sca {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

namespace {

std::uint32_t swap_bytes(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

// Minimal header tokenizer shared by PFM and PPM: whitespace-separated
// tokens; exactly one whitespace byte ends the header.
class HeaderReader {
 public:
  explicit HeaderReader(const std::string& bytes) : b_(bytes) {}

  std::string token(const char* what) {
    while (pos_ < b_.size() && std::isspace(static_cast<unsigned char>(b_[pos_]))) ++pos_;
    const std::size_t start = pos_;
    while (pos_ < b_.size() && !std::isspace(static_cast<unsigned char>(b_[pos_]))) ++pos_;
    if (start == pos_) throw FormatError(std::string("missing ") + what, start);
    return b_.substr(start, pos_ - start);
  }

  int positive_int(const char* what) {
    const std::size_t at = pos_;
    const std::string t = token(what);
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.size() || v <= 0) throw FormatError(std::string("bad ") + what + " '" + t + "'", at);
    return v;
  }

  // Consumes the single whitespace byte terminating the header.
  std::size_t end_header() {
    if (pos_ >= b_.size() || !std::isspace(static_cast<unsigned char>(b_[pos_]))) {
      throw FormatError("header not terminated by whitespace", pos_);
    }
    return ++pos_;
  }

  std::size_t pos() const { return pos_; }

 private:
  const std::string& b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_pfm(const Tensor& map) {
  if (map.rank() != 2) throw InvalidArgument("write_pfm: expected [H,W], got " + shape_string(map.shape()));
  const int h = map.dim(0), w = map.dim(1);
  std::string out = "Pf\n" + std::to_string(w) + " " + std::to_string(h) + "\n-1.0\n";
  const std::size_t header = out.size();
  out.resize(header + static_cast<std::size_t>(h) * w * 4);
  char* dst = out.data() + header;
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x) {
      const double v = map.at(y, x);
      if (!std::isfinite(v)) throw InvalidArgument("write_pfm: non-finite value");
      std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      if constexpr (std::endian::native == std::endian::big) bits = swap_bytes(bits);
      std::memcpy(dst, &bits, 4);
      dst += 4;
    }
  }
  return out;
}

Tensor decode_pfm(const std::string& bytes) {
  HeaderReader r(bytes);
  const std::string magic = r.token("magic");
  if (magic == "PF") throw FormatError("colour PFM not supported", 0);
  if (magic != "Pf") throw FormatError("bad PFM magic '" + magic + "'", 0);
  const int w = r.positive_int("width");
  const int h = r.positive_int("height");
  const std::size_t scale_at = r.pos();
  const std::string scale_text = r.token("scale");
  double scale = 0.0;
  try {
    scale = std::stod(scale_text);
  } catch (const std::exception&) {
    throw FormatError("bad PFM scale '" + scale_text + "'", scale_at);
  }
  if (scale == 0.0 || !std::isfinite(scale)) throw FormatError("PFM scale must be nonzero", scale_at);
  const std::size_t data = r.end_header();
  const std::size_t need = static_cast<std::size_t>(w) * h * 4;
  if (bytes.size() - data < need) {
    throw FormatError("truncated PFM payload: " + std::to_string(bytes.size() - data) + " of " +
                          std::to_string(need) + " bytes",
                      bytes.size());
  }
  const bool little = scale < 0.0;
  const bool swap = little != (std::endian::native == std::endian::little);
  std::vector<double> v(static_cast<std::size_t>(w) * h);
  const char* src = bytes.data() + data;
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x) {
      std::uint32_t bits;
      std::memcpy(&bits, src, 4);
      src += 4;
      if (swap) bits = swap_bytes(bits);
      v[static_cast<std::size_t>(y) * w + x] = std::bit_cast<float>(bits);
    }
  }
  return Tensor(Shape{h, w}, std::move(v));
}

void write_pfm(const Tensor& map, const std::filesystem::path& path) { write_file(path, encode_pfm(map)); }
Tensor read_pfm(const std::filesystem::path& path) { return decode_pfm(read_file(path)); }

std::string encode_ppm(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw InvalidArgument("write_ppm: expected [3,H,W], got " + shape_string(image.shape()));
  }
  const int h = image.dim(1), w = image.dim(2);
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + static_cast<std::size_t>(h) * w * 3);
  std::size_t k = header;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(image.at(c, y, x), 0.0, 1.0);
        out[k++] = static_cast<char>(static_cast<unsigned char>(std::floor(v * 255.0 + 0.5)));
      }
    }
  }
  return out;
}

Tensor decode_ppm(const std::string& bytes) {
  HeaderReader r(bytes);
  const std::string magic = r.token("magic");
  if (magic != "P6") throw FormatError("bad PPM magic '" + magic + "' (only P6 is supported)", 0);
  const int w = r.positive_int("width");
  const int h = r.positive_int("height");
  const std::size_t max_at = r.pos();
  const int maxval = r.positive_int("maxval");
  if (maxval != 255) throw FormatError("unsupported maxval " + std::to_string(maxval), max_at);
  const std::size_t data = r.end_header();
  const std::size_t need = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() - data < need) {
    throw FormatError("truncated PPM payload", bytes.size());
  }
  std::vector<double> v(need);
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < 3; ++c) {
      v[c * plane + p] = static_cast<unsigned char>(bytes[data + 3 * p + c]) / 255.0;
    }
  }
  return Tensor(Shape{3, h, w}, std::move(v));
}

void write_ppm(const Tensor& image, const std::filesystem::path& path) { write_file(path, encode_ppm(image)); }
Tensor read_ppm(const std::filesystem::path& path) { return decode_ppm(read_file(path)); }

}  // namespace sca
