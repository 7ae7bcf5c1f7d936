#pragma once

#include <bit>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "dem/matrix.hpp"

namespace dem {

// One combination of individual treatments. Bit k of `bits` is 1 when the
// (k+1)-th treatment is administered; `index` is the combination's position
// in the ordered admissible set.
struct TreatmentCombo {
  std::uint32_t bits = 0;
  int index = -1;
};

inline int active_count(std::uint32_t bits) { return std::popcount(bits); }

// True when the combination can carry an interaction effect: at least two
// individual treatments are active. Single treatments and the null combo
// carry additive effects only, which keeps the additive/interactive split of
// the treatment encoder identifiable.
inline bool interaction_allowed(std::uint32_t bits) {
  return active_count(bits) >= 2;
}

// The ordered admissible set of combinations over K individual treatments.
class TreatmentSpace {
public:
  TreatmentSpace() = default;
  TreatmentSpace(int k, std::vector<std::uint32_t> combos);

  int k() const { return k_; }
  int size() const { return static_cast<int>(combos_.size()); }
  std::uint32_t mask(int index) const { return combos_[index]; }
  TreatmentCombo combo(int index) const { return {combos_[index], index}; }
  const std::vector<std::uint32_t>& masks() const { return combos_; }

  bool contains(std::uint32_t bits) const { return index_.count(bits) != 0; }
  // Throws DomainError when the combination is not admissible.
  int index_of(std::uint32_t bits) const;

  bool has_null_combo() const { return contains(0); }

  // Binary vector of length K for combination `index`.
  Vec bits_vector(int index) const;

private:
  int k_ = 0;
  std::vector<std::uint32_t> combos_;
  std::unordered_map<std::uint32_t, int> index_;
};

}  // namespace dem
