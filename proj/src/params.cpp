#include "sslab/params.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sslab/errors.hpp"

namespace sslab {

void StableParams::validate() const {
  if (!(alpha > 0.0 && alpha <= 2.0)) {
    throw DomainError("stability index alpha must lie in (0, 2], got " + std::to_string(alpha));
  }
  if (dim < 1) throw DomainError("dimension must be >= 1, got " + std::to_string(dim));
}

MultiIndex::MultiIndex(std::vector<int> entries) : entries_(std::move(entries)) {
  for (int k : entries_) {
    if (k < 0) throw DomainError("multi-index entries must be non-negative");
  }
  order_ = std::accumulate(entries_.begin(), entries_.end(), 0);
}

MultiIndex::MultiIndex(std::initializer_list<int> entries) : MultiIndex(std::vector<int>(entries)) {}

bool MultiIndex::has_odd_component() const {
  return std::any_of(entries_.begin(), entries_.end(), [](int k) { return k % 2 != 0; });
}

double MultiIndex::factorial() const {
  double f = 1.0;
  for (int k : entries_) f *= std::tgamma(k + 1.0);
  return f;
}

std::string MultiIndex::label() const {
  std::string out;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (i) out += '-';
    out += std::to_string(entries_[i]);
  }
  return out;
}

namespace {

// Appends every composition of `remaining` into dim-pos slots, largest first
// coordinate first.
void compositions(int dim, int pos, int remaining, std::vector<int>& current, std::vector<MultiIndex>& out) {
  if (pos == dim - 1) {
    current[static_cast<std::size_t>(pos)] = remaining;
    out.emplace_back(current);
    return;
  }
  for (int k = remaining; k >= 0; --k) {
    current[static_cast<std::size_t>(pos)] = k;
    compositions(dim, pos + 1, remaining - k, current, out);
  }
}

}  // namespace

std::vector<MultiIndex> multiindex_enumerate(int dim, int max_order) {
  if (dim < 1) throw DomainError("multiindex_enumerate: dim must be >= 1");
  if (max_order < 0) throw DomainError("multiindex_enumerate: order must be >= 0");
  std::vector<MultiIndex> out;
  std::vector<int> current(static_cast<std::size_t>(dim), 0);
  for (int order = 0; order <= max_order; ++order) compositions(dim, 0, order, current, out);
  return out;
}

MultiIndex parse_multiindex(const std::string& text, int dim) {
  std::vector<int> entries;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, text.find('-') != std::string::npos ? '-' : ',')) {
    if (token.empty()) continue;
    try {
      entries.push_back(std::stoi(token));
    } catch (const std::exception&) {
      throw DomainError("cannot parse multi-index '" + text + "'");
    }
  }
  if (static_cast<int>(entries.size()) != dim) {
    throw DomainError("multi-index '" + text + "' does not have " + std::to_string(dim) + " entries");
  }
  return MultiIndex(std::move(entries));
}

}  // namespace sslab
