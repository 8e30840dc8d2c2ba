#include "sca/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <sstream>
#include <unordered_map>

#include "sca/errors.hpp"
#include "sca/image_io.hpp"

namespace sca {

namespace {

constexpr const char* kMagic = "sca-checkpoint 1";

std::string shape_token(const Shape& s) {
  if (s.empty()) return "scalar";
  std::string out;
  for (std::size_t k = 0; k < s.size(); ++k) out += (k ? "x" : "") + std::to_string(s[k]);
  return out;
}

Shape parse_shape(const std::string& t, std::size_t at) {
  if (t == "scalar") return {};
  Shape s;
  std::stringstream ss(t);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    try {
      std::size_t used = 0;
      const int d = std::stoi(part, &used);
      if (used != part.size() || d < 0) throw std::invalid_argument(part);
      s.push_back(d);
    } catch (const std::exception&) {
      throw FormatError("bad shape '" + t + "'", at);
    }
  }
  return s;
}

}  // namespace

std::string encode_checkpoint(const ParamList& tensors) {
  static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes little-endian");
  std::ostringstream head;
  head << kMagic << '\n';
  std::size_t offset = 0;
  for (const auto& [name, t] : tensors) {
    if (name.empty() || name.find_first_of(" \n") != std::string::npos) {
      throw InvalidArgument("checkpoint: invalid tensor name '" + name + "'");
    }
    head << name << ' ' << shape_token(t.shape()) << ' ' << offset << '\n';
    offset += t.numel() * sizeof(double);
  }
  head << "end\n";
  std::string out = head.str();
  const std::size_t base = out.size();
  out.resize(base + offset);
  std::size_t at = base;
  for (const auto& nt : tensors) {
    const auto d = nt.tensor.data();
    std::memcpy(out.data() + at, d.data(), d.size() * sizeof(double));
    at += d.size() * sizeof(double);
  }
  return out;
}

void save_checkpoint(const ParamList& tensors, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(tensors));
}

ParamList decode_checkpoint(const std::string& bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw FormatError("unterminated checkpoint header", bytes.size());
    std::string line = bytes.substr(pos, nl - pos);
    const std::size_t start = pos;
    pos = nl + 1;
    return std::make_pair(line, start);
  };
  if (next_line().first != kMagic) throw FormatError("not a checkpoint file", 0);

  struct Entry {
    std::string name;
    Shape shape;
    std::size_t offset;
  };
  std::vector<Entry> entries;
  for (;;) {
    auto [line, at] = next_line();
    if (line == "end") break;
    std::istringstream ls(line);
    std::string name, shape;
    std::size_t offset = 0;
    if (!(ls >> name >> shape >> offset)) throw FormatError("bad manifest line '" + line + "'", at);
    entries.push_back({name, parse_shape(shape, at), offset});
  }
  const std::size_t base = pos;
  ParamList out;
  for (const auto& e : entries) {
    const std::size_t n = shape_numel(e.shape);
    if (base + e.offset + n * sizeof(double) > bytes.size()) {
      throw FormatError("truncated payload for '" + e.name + "'", bytes.size());
    }
    std::vector<double> v(n);
    std::memcpy(v.data(), bytes.data() + base + e.offset, n * sizeof(double));
    out.push_back({e.name, Tensor(e.shape, std::move(v))});
  }
  return out;
}

ParamList read_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("checkpoint not found: " + path.string());
  return decode_checkpoint(read_file(path));
}

void load_into(const ParamList& stored, const ParamList& into, const std::string& source) {
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& nt : stored) by_name[nt.name] = &nt.tensor;
  for (const auto& nt : into) {
    auto it = by_name.find(nt.name);
    if (it == by_name.end()) throw ConfigError(source + ": missing tensor '" + nt.name + "'");
    if (it->second->shape() != nt.tensor.shape()) {
      throw ConfigError(source + ": tensor '" + nt.name + "' has shape " + shape_string(it->second->shape()) +
                        ", model expects " + shape_string(nt.tensor.shape()));
    }
    Tensor dst = nt.tensor;
    const auto src = it->second->data();
    std::copy(src.begin(), src.end(), dst.mutable_data().begin());
  }
}

void load_checkpoint(const std::filesystem::path& path, const ParamList& into) {
  load_into(read_checkpoint(path), into, path.string());
}

}  // namespace sca
