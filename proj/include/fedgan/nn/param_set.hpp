#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "fedgan/common/tensor.hpp"

namespace fedgan::nn {

struct ParamEntry {
  std::string name;
  Tensor value;

  bool operator==(const ParamEntry&) const = default;
};

// Ordered, named collection of tensors belonging to one model. Gradients and
// optimizer moments use the same structure as the parameters they describe.
class ParamSet {
 public:
  void add(std::string name, Tensor value);

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  bool empty() const { return entries_.empty(); }

  Tensor& operator[](std::size_t i) { return entries_[i].value; }
  const Tensor& operator[](std::size_t i) const { return entries_[i].value; }
  const std::string& name(std::size_t i) const { return entries_[i].name; }
  const Tensor& get(std::string_view name) const;
  Tensor& get(std::string_view name);

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  ParamSet zeros_like() const;
  bool same_structure(const ParamSet& other) const;
  // Throws DimensionError naming the first differing entry.
  void require_same_structure(const ParamSet& other, const char* context) const;

  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> values);

  void add_scaled(const ParamSet& other, double scale);
  void scale(double factor);

  bool operator==(const ParamSet&) const = default;

 private:
  std::vector<ParamEntry> entries_;
};

double max_abs_diff(const ParamSet& a, const ParamSet& b);

}  // namespace fedgan::nn
