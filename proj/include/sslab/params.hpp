#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace sslab {

/// Stability index and spatial dimension of the isotropic alpha-stable motion.
struct StableParams {
  double alpha = 2.0;
  int dim = 1;

  /// Throws DomainError unless 0 < alpha <= 2 and dim >= 1.
  void validate() const;
  bool is_gaussian() const { return alpha == 2.0; }
  bool is_cauchy() const { return alpha == 1.0; }
};

/// Multi-index k = (k_1, ..., k_d) over the non-negative integers.
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> entries);
  MultiIndex(std::initializer_list<int> entries);

  static MultiIndex zero(int dim) { return MultiIndex(std::vector<int>(static_cast<std::size_t>(dim), 0)); }

  int dim() const { return static_cast<int>(entries_.size()); }
  int order() const { return order_; }
  bool is_even() const { return order_ % 2 == 0; }
  /// True when some component is odd; then every symmetric moment vanishes.
  bool has_odd_component() const;
  int operator[](int i) const { return entries_[static_cast<std::size_t>(i)]; }
  std::span<const int> entries() const { return entries_; }

  /// k! = prod k_i!
  double factorial() const;

  /// "0", "2" or "1-0" style label used in CSV headers.
  std::string label() const;

  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;

 private:
  std::vector<int> entries_;
  int order_ = 0;
};

/// All multi-indices of the given dimension with |k| <= max_order, ordered by
/// |k| and then lexicographically with the first coordinate most significant
/// in descending order, e.g. (0,0),(1,0),(0,1),(2,0),(1,1),(0,2).
std::vector<MultiIndex> multiindex_enumerate(int dim, int max_order);

/// Parses "2" (d=1) or "1,0" / "1-0".
MultiIndex parse_multiindex(const std::string& text, int dim);

}  // namespace sslab
