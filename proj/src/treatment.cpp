#include "dem/treatment.hpp"

#include <string>

#include "dem/errors.hpp"

namespace dem {

TreatmentSpace::TreatmentSpace(int k, std::vector<std::uint32_t> combos)
    : k_(k), combos_(std::move(combos)) {
  if (k <= 0 || k > 20) throw DomainError("treatment count K must be in 1..20");
  const std::uint32_t limit = (k == 32) ? ~0u : ((1u << k) - 1u);
  index_.reserve(combos_.size());
  for (std::size_t i = 0; i < combos_.size(); ++i) {
    const std::uint32_t bits = combos_[i];
    if ((bits & ~limit) != 0) {
      throw DomainError("combination " + std::to_string(bits) +
                        " uses bits beyond K=" + std::to_string(k));
    }
    if (!index_.emplace(bits, static_cast<int>(i)).second) {
      throw DomainError("duplicate combination " + std::to_string(bits) +
                        " in treatment space");
    }
  }
  if (combos_.empty()) throw DomainError("treatment space is empty");
}

int TreatmentSpace::index_of(std::uint32_t bits) const {
  auto it = index_.find(bits);
  if (it == index_.end()) {
    throw DomainError("combination " + std::to_string(bits) +
                      " is not in the admissible set");
  }
  return it->second;
}

Vec TreatmentSpace::bits_vector(int index) const {
  Vec v(k_, 0.0);
  const std::uint32_t bits = combos_[index];
  for (int b = 0; b < k_; ++b) {
    if (bits & (1u << b)) v[b] = 1.0;
  }
  return v;
}

}  // namespace dem
