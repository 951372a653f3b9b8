#pragma once

#include <bit>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "mixsel/errors.hpp"

namespace mixsel {

/// Subset of the continuous coordinates {0..p-1}, stored as a bitmask (p <= 64).
/// Indices are zero-based in code and printed one-based.
class VariableSet {
public:
  static constexpr int max_variables = 64;

  VariableSet() = default;

  VariableSet(std::initializer_list<int> indices) {
    for (int i : indices) insert(i);
  }

  static VariableSet from_indices(const std::vector<int>& indices) {
    VariableSet s;
    for (int i : indices) s.insert(i);
    return s;
  }

  static VariableSet from_mask(std::uint64_t mask) {
    VariableSet s;
    s.mask_ = mask;
    return s;
  }

  static VariableSet full(int p) {
    check_range(p - 1);
    return from_mask(p == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << p) - 1);
  }

  void insert(int i) {
    check_range(i);
    mask_ |= std::uint64_t{1} << i;
  }

  void erase(int i) {
    check_range(i);
    mask_ &= ~(std::uint64_t{1} << i);
  }

  bool contains(int i) const noexcept {
    return i >= 0 && i < max_variables && ((mask_ >> i) & 1U) != 0;
  }

  int size() const noexcept { return std::popcount(mask_); }
  bool empty() const noexcept { return mask_ == 0; }
  std::uint64_t mask() const noexcept { return mask_; }

  bool is_subset_of(const VariableSet& other) const noexcept { return (mask_ & ~other.mask_) == 0; }

  /// Largest index + 1, or 0 when empty.
  int extent() const noexcept { return max_variables - std::countl_zero(mask_); }

  std::vector<int> indices() const {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(size()));
    for (std::uint64_t m = mask_; m != 0; m &= m - 1) out.push_back(std::countr_zero(m));
    return out;
  }

  /// One-based, e.g. "{2,3,4,5}".
  std::string to_string() const {
    std::string out = "{";
    bool first = true;
    for (int i : indices()) {
      if (!first) out += ",";
      out += std::to_string(i + 1);
      first = false;
    }
    return out + "}";
  }

  friend bool operator==(const VariableSet&, const VariableSet&) = default;

private:
  static void check_range(int i) {
    if (i < 0 || i >= max_variables)
      throw ValidationError("variable index " + std::to_string(i + 1) + " outside 1.." +
                            std::to_string(max_variables));
  }

  std::uint64_t mask_ = 0;
};

}  // namespace mixsel
