#include "fedgan/nn/param_set.hpp"

#include <algorithm>

#include "fedgan/common/error.hpp"

namespace fedgan::nn {

void ParamSet::add(std::string name, Tensor value) {
  entries_.push_back({std::move(name), std::move(value)});
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

const Tensor& ParamSet::get(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.value;
  }
  throw UsageError("no parameter named '" + std::string(name) + "'");
}

Tensor& ParamSet::get(std::string_view name) {
  return const_cast<Tensor&>(static_cast<const ParamSet&>(*this).get(name));
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& e : entries_) out.add(e.name, Tensor::zeros(e.value.shape()));
  return out;
}

bool ParamSet::same_structure(const ParamSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != other.entries_[i].name ||
        entries_[i].value.shape() != other.entries_[i].value.shape()) {
      return false;
    }
  }
  return true;
}

void ParamSet::require_same_structure(const ParamSet& other, const char* context) const {
  if (entries_.size() != other.entries_.size()) {
    throw DimensionError(std::string(context) + ": parameter count " +
                         std::to_string(entries_.size()) + " vs " +
                         std::to_string(other.entries_.size()));
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.value.shape() != b.value.shape()) {
      throw DimensionError(std::string(context) + ": parameter '" + a.name + "' " +
                           shape_to_string(a.value.shape()) + " vs '" + b.name + "' " +
                           shape_to_string(b.value.shape()));
    }
  }
}

std::vector<double> ParamSet::flatten() const {
  std::vector<double> out;
  out.reserve(scalar_count());
  for (const auto& e : entries_) out.insert(out.end(), e.value.data().begin(), e.value.data().end());
  return out;
}

void ParamSet::assign_flat(std::span<const double> values) {
  if (values.size() != scalar_count()) {
    throw DimensionError("assign_flat: expected " + std::to_string(scalar_count()) +
                         " values, got " + std::to_string(values.size()));
  }
  std::size_t offset = 0;
  for (auto& e : entries_) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), e.value.size(),
                e.value.data().begin());
    offset += e.value.size();
  }
}

void ParamSet::add_scaled(const ParamSet& other, double scale) {
  require_same_structure(other, "ParamSet::add_scaled");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    entries_[i].value.add_scaled(other.entries_[i].value, scale);
  }
}

void ParamSet::scale(double factor) {
  for (auto& e : entries_) e.value *= factor;
}

double max_abs_diff(const ParamSet& a, const ParamSet& b) {
  a.require_same_structure(b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, max_abs_diff(a[i], b[i]));
  return m;
}

}  // namespace fedgan::nn
