#include "ofi/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace ofi {

namespace {
// Knuth's product method is exact but O(mean); keep each piece small enough
// that exp(-mean) stays far from underflow.
constexpr double kPoissonPiece = 30.0;
}  // namespace

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) {
    throw std::invalid_argument("Rng::below: bound must be positive");
  }
  // Rejection on the top of the range removes modulo bias.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  std::uint64_t x = engine_();
  while (x >= limit) {
    x = engine_();
  }
  return x % bound;
}

std::int64_t Rng::poisson(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) {
    throw std::invalid_argument("Rng::poisson: mean must be finite and nonnegative");
  }
  std::int64_t total = 0;
  double remaining = mean;
  while (remaining > 0.0) {
    const double piece = remaining > kPoissonPiece ? kPoissonPiece : remaining;
    remaining -= piece;
    const double limit = std::exp(-piece);
    double product = uniform();
    while (product > limit) {
      ++total;
      product *= uniform();
    }
  }
  return total;
}

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(mix_seed(parent) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

}  // namespace ofi
