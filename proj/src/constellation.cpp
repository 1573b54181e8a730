#include "lasmimo/constellation.hpp"

#include <bit>
#include <cmath>
#include <string>

namespace lasmimo {
namespace {

std::uint32_t gray_decode(std::uint32_t g) {
  std::uint32_t b = g;
  for (std::uint32_t shift = g >> 1; shift != 0; shift >>= 1) b ^= shift;
  return b;
}

std::uint32_t gray_encode(std::uint32_t b) { return b ^ (b >> 1); }

}  // namespace

Constellation::Constellation(int qam_order) : order_(qam_order) {
  if (qam_order < 4 || !std::has_single_bit(static_cast<unsigned>(qam_order)) ||
      std::countr_zero(static_cast<unsigned>(qam_order)) % 2 != 0) {
    throw DimensionError("QAM order must be an even power of two >= 4, got " +
                         std::to_string(qam_order));
  }
  bits_per_dim_ = std::countr_zero(static_cast<unsigned>(qam_order)) / 2;
  const int levels = 1 << bits_per_dim_;
  points_.reserve(static_cast<std::size_t>(levels));
  double energy = 0.0;
  for (int i = 0; i < levels; ++i) {
    const double p = static_cast<double>(2 * i - (levels - 1));
    points_.push_back(p);
    energy += p * p;
  }
  real_energy_ = energy / levels;
}

bool Constellation::contains(double v) const noexcept {
  if (v < min_level() || v > max_level()) return false;
  const double k = (v - min_level()) / 2.0;
  return k == std::floor(k);
}

double Constellation::quantize(double v) const noexcept {
  if (v >= max_level()) return max_level();
  if (v <= min_level()) return min_level();
  // Levels are odd integers: round (v - 1) / 2 half-up, then map back.
  const double k = std::floor((v - 1.0) / 2.0 + 0.5);
  const double q = 2.0 * k + 1.0;
  if (q > max_level()) return max_level();
  if (q < min_level()) return min_level();
  return q;
}

double Constellation::level_for_label(std::uint32_t label) const {
  if (label >= points_.size()) throw DimensionError("label out of range");
  const auto index = gray_decode(label);
  return static_cast<double>((levels() - 1) - 2 * static_cast<int>(index));
}

std::uint32_t Constellation::label_for_level(double level) const {
  if (!contains(level)) throw DimensionError("value is not a constellation level");
  const auto index = static_cast<std::uint32_t>(((levels() - 1) - level) / 2.0);
  return gray_encode(index);
}

int Constellation::hamming(double a, double b) const {
  return std::popcount(label_for_level(a) ^ label_for_level(b));
}

}  // namespace lasmimo
