#include "gpmala/types.hpp"

#include "gpmala/error.hpp"
#include "gpmala/random.hpp"

#include <utility>

namespace gpmala {

Box::Box(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) {
  require(lower.size() == upper.size() && lower.size() > 0, "box bounds must have equal nonzero dimension");
  require(all_finite(lower) && all_finite(upper), "box bounds must be finite");
  require((upper.array() > lower.array()).all(), "box must be nondegenerate");
}

bool Box::contains(const Vector& x) const {
  return x.size() == lower.size() && (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> stream) {
  std::uint64_t h = splitmix64(base);
  for (auto s : stream) h = splitmix64(h ^ splitmix64(s + 0x632be59bd9b4e019ULL));
  return h;
}

Vector standard_normal(int n, Rng& rng) {
  std::normal_distribution<double> normal;
  Vector out(n);
  for (int i = 0; i < n; ++i) out[i] = normal(rng);
  return out;
}

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

Vector uniform_in(const Box& box, Rng& rng) {
  Vector out(box.dim());
  for (int i = 0; i < box.dim(); ++i) out[i] = box.lower[i] + (box.upper[i] - box.lower[i]) * uniform01(rng);
  return out;
}

}  // namespace gpmala
