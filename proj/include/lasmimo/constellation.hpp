#ifndef LASMIMO_CONSTELLATION_HPP
#define LASMIMO_CONSTELLATION_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "lasmimo/types.hpp"

namespace lasmimo {

/// Square M-QAM viewed as an L-PAM alphabet per real dimension (L = sqrt(M)).
///
/// Levels are the odd integers {-(L-1), ..., -1, 1, ..., L-1}. Bits map to
/// levels through a Gray code per real dimension: the k-bit label g is
/// Gray-decoded to an index i and the level is (L-1) - 2i, so the all-zero
/// label is the largest level and adjacent levels differ in one bit.
class Constellation {
 public:
  /// Throws DimensionError unless `qam_order` is an even power of two >= 4.
  explicit Constellation(int qam_order);

  int order() const noexcept { return order_; }
  int levels() const noexcept { return static_cast<int>(points_.size()); }
  int bits_per_real_dim() const noexcept { return bits_per_dim_; }
  int bits_per_symbol() const noexcept { return 2 * bits_per_dim_; }

  /// Sorted ascending, spacing exactly 2.
  std::span<const double> pam_points() const noexcept { return points_; }
  double min_level() const noexcept { return points_.front(); }
  double max_level() const noexcept { return points_.back(); }

  /// Mean energy of one real dimension, mean(level^2).
  double real_symbol_energy() const noexcept { return real_energy_; }
  /// Mean complex-symbol energy E_s = 2 * mean(level^2).
  double symbol_energy() const noexcept { return 2.0 * real_energy_; }

  bool contains(double v) const noexcept;

  /// Nearest level; exact midpoints go to the larger level, values beyond
  /// the alphabet clamp to its ends.
  double quantize(double v) const noexcept;

  /// Level for a Gray label in [0, L).
  double level_for_label(std::uint32_t label) const;
  /// Inverse of level_for_label. Throws DimensionError for non-members.
  std::uint32_t label_for_level(double level) const;

  /// Number of differing bits between the labels of two members.
  int hamming(double a, double b) const;

 private:
  int order_;
  int bits_per_dim_;
  std::vector<double> points_;
  double real_energy_;
};

}  // namespace lasmimo

#endif  // LASMIMO_CONSTELLATION_HPP
