#pragma once

#include "gpmala/types.hpp"

#include <cstdint>
#include <initializer_list>
#include <random>

namespace gpmala {

using Rng = std::mt19937_64;

/// Mixes a base seed with stream identifiers into an independent seed
/// (splitmix64 finalizer applied per component).
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> stream);

[[nodiscard]] inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> stream = {}) {
  return Rng(derive_seed(base, stream));
}

[[nodiscard]] Vector standard_normal(int n, Rng& rng);
[[nodiscard]] Vector uniform_in(const Box& box, Rng& rng);
[[nodiscard]] double uniform01(Rng& rng);

}  // namespace gpmala
