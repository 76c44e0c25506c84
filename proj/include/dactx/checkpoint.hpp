#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dactx/tensor.hpp"

namespace dactx {

// Checkpoint file layout:
//   DCNCKPT v1\n
//   key=value\n            (any number of metadata lines)
//   name ndim d1 d2 ...\n  (per tensor, followed by numel little-endian
//                           64-bit doubles and one newline)
struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const std::string* find_meta(const std::string& key) const;
  const Tensor* find_tensor(const std::string& name) const;
  std::string require_meta(const std::string& key) const;  // DataFormatError if absent
};

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, std::string>>& meta,
                     const std::vector<std::pair<std::string, Tensor>>& tensors);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace dactx
