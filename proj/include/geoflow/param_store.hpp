#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "geoflow/tensor.hpp"

namespace geoflow {

/// Named dense parameter tensors with shapes fixed at construction. Also used
/// for gradients (possibly holding only the entries a step touched) and for
/// optimizer moments. Iteration order is insertion order.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor t);
  bool has(std::string_view name) const;
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;
  const std::vector<std::string>& names() const { return names_; }
  std::size_t total_parameters() const;
  bool finite() const;
  void zero_all();

  /// Flat binary container: header (names, shapes, dtype) followed by
  /// row-major little-endian 32-bit floats per tensor, in header order.
  void save(const std::filesystem::path& path) const;
  static ParamStore load(const std::filesystem::path& path);

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, Tensor> tensors_;
};

}  // namespace geoflow
