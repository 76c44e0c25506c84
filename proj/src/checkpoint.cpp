#include "dactx/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dactx {

namespace {

constexpr char kMagic[] = "DCNCKPT v1";

// The on-disk blob is always little-endian.
void write_doubles(std::ofstream& out, const std::vector<double>& values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  } else {
    for (double v : values) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      char bytes[8];
      for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
      out.write(bytes, 8);
    }
  }
}

std::vector<double> read_doubles(std::ifstream& in, std::size_t count, const std::string& path) {
  std::vector<double> values(count);
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      char bytes[8];
      in.read(bytes, 8);
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[b])) << (8 * b);
      std::memcpy(&values[i], &bits, sizeof(double));
    }
  }
  if (!in) throw DataFormatError(path + ": truncated tensor block");
  return values;
}

}  // namespace

const std::string* Checkpoint::find_meta(const std::string& key) const {
  for (const auto& kv : meta)
    if (kv.first == key) return &kv.second;
  return nullptr;
}

const Tensor* Checkpoint::find_tensor(const std::string& name) const {
  for (const auto& nt : tensors)
    if (nt.first == name) return &nt.second;
  return nullptr;
}

std::string Checkpoint::require_meta(const std::string& key) const {
  const std::string* v = find_meta(key);
  if (!v) throw DataFormatError("checkpoint is missing metadata key '" + key + "'");
  return *v;
}

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, std::string>>& meta,
                     const std::vector<std::pair<std::string, Tensor>>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out << kMagic << '\n';
  for (const auto& kv : meta) out << kv.first << '=' << kv.second << '\n';
  for (const auto& nt : tensors) {
    const Tensor& t = nt.second;
    out << nt.first << ' ' << t.ndim();
    for (int i = 0; i < t.ndim(); ++i) out << ' ' << t.dim(i);
    out << '\n';
    write_doubles(out, t.data());
    out << '\n';
  }
  if (!out) throw IoError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw DataFormatError(path + ": bad checkpoint header");
  }
  Checkpoint ckpt;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const auto sp = line.find(' ');
    if (eq != std::string::npos && (sp == std::string::npos || eq < sp)) {
      ckpt.meta.emplace_back(line.substr(0, eq), line.substr(eq + 1));
      continue;
    }
    // tensor header: name ndim d1 ... dk
    std::istringstream hs(line);
    std::string name;
    int ndim = 0;
    if (!(hs >> name >> ndim) || ndim < 1) {
      throw DataFormatError(path + ": bad tensor header '" + line + "'");
    }
    Shape shape(static_cast<std::size_t>(ndim));
    std::size_t count = 1;
    for (int i = 0; i < ndim; ++i) {
      if (!(hs >> shape[i]) || shape[i] < 1) {
        throw DataFormatError(path + ": bad dimensions in tensor header '" + line + "'");
      }
      count *= static_cast<std::size_t>(shape[i]);
    }
    std::vector<double> values = read_doubles(in, count, path);
    ckpt.tensors.emplace_back(name, Tensor::from_data(std::move(shape), std::move(values)));
  }
  return ckpt;
}

}  // namespace dactx
