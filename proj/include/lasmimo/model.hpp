#ifndef LASMIMO_MODEL_HPP
#define LASMIMO_MODEL_HPP

#include <cstdint>
#include <vector>

#include "lasmimo/constellation.hpp"
#include "lasmimo/rng.hpp"
#include "lasmimo/types.hpp"

namespace lasmimo {

/// N_r x N_t complex channel, N_t <= N_r.
class ComplexChannel {
 public:
  explicit ComplexChannel(ComplexMatrix entries);

  int n_rx() const noexcept { return static_cast<int>(entries_.rows()); }
  int n_tx() const noexcept { return static_cast<int>(entries_.cols()); }
  const ComplexMatrix& entries() const noexcept { return entries_; }

 private:
  ComplexMatrix entries_;
};

/// Real-valued system matrix H (2N_r x 2N_t when produced by realify).
///
/// Any real matrix with at least as many rows as columns is accepted, which
/// lets tests pose hand-built systems; realify() is the route that yields the
/// [[H_I, -H_Q], [H_Q, H_I]] block layout.
class RealModel {
 public:
  explicit RealModel(RealMatrix h);

  const RealMatrix& h() const noexcept { return h_; }
  int dim_tx() const noexcept { return static_cast<int>(h_.cols()); }
  int dim_rx() const noexcept { return static_cast<int>(h_.rows()); }
  auto column(int p) const { return h_.col(p); }

 private:
  RealMatrix h_;
};

/// A point of the signal space: every entry is a level of the constellation.
class SymbolVector {
 public:
  /// Throws DimensionError if any entry is not a level of `c`.
  SymbolVector(RealVector values, const Constellation& c);

  const RealVector& values() const noexcept { return values_; }
  int size() const noexcept { return static_cast<int>(values_.size()); }
  int qam_order() const noexcept { return qam_order_; }
  double operator[](int i) const { return values_(i); }

  friend bool operator==(const SymbolVector& a, const SymbolVector& b) {
    return a.qam_order_ == b.qam_order_ && a.values_ == b.values_;
  }

 private:
  RealVector values_;
  int qam_order_;
};

struct NoiseVector {
  RealVector values;  // 2 n_rx components, each N(0, sigma2 / 2)
  double sigma2 = 0.0;
};

using BitVector = std::vector<std::uint8_t>;

ComplexChannel sample_channel(int n_tx, int n_rx, Rng& rng);

/// [[H_I, -H_Q], [H_Q, H_I]].
template <typename Derived>
Matrix<typename Derived::Scalar::value_type> realify_matrix(
    const Eigen::MatrixBase<Derived>& hc) {
  using Real = typename Derived::Scalar::value_type;
  const auto rows = hc.rows();
  const auto cols = hc.cols();
  Matrix<Real> h(2 * rows, 2 * cols);
  h.topLeftCorner(rows, cols) = hc.real();
  h.topRightCorner(rows, cols) = -hc.imag();
  h.bottomLeftCorner(rows, cols) = hc.imag();
  h.bottomRightCorner(rows, cols) = hc.real();
  return h;
}

RealModel realify(const ComplexChannel& hc);

enum class VectorRole { kTx, kRx };

/// [Re(v); Im(v)] after checking the length against the channel's role.
RealVector realify_vector(const ComplexVector& v, VectorRole role, const ComplexChannel& hc);
RealVector realify_vector(const ComplexVector& v);
/// Inverse of realify_vector. Throws DimensionError on odd lengths.
ComplexVector complexify_vector(const RealVector& v);

/// Bits for real dimension p occupy [p*k, (p+1)*k), MSB first, with
/// k = bits_per_real_dim; the first n_tx dimensions are in-phase parts.
SymbolVector modulate(const BitVector& bits, const Constellation& c, int n_tx);
BitVector demodulate(const SymbolVector& d, const Constellation& c);

RealVector transmit(const RealModel& rm, const SymbolVector& x, const NoiseVector& noise);

NoiseVector sample_noise(int n_rx, double sigma2, Rng& rng);

/// One random use of the link: bits -> x, channel, noise, y = Hx + n.
struct Transmission {
  BitVector bits;
  SymbolVector x;
  RealModel model;
  NoiseVector noise;
  RealVector y;
};

/// Draws bits, then the channel, then unit-variance noise scaled to sigma2, in
/// that order. Drawing the same seed at different sigma2 therefore yields the
/// same bits, channel and noise direction.
Transmission draw_transmission(int n_tx, int n_rx, const Constellation& c, double sigma2,
                               Rng& rng);

/// Average received SNR per receive antenna, gamma = N_t * E_s / sigma^2.
double sigma2_from_snr_db(double snr_db, int n_tx, const Constellation& c);
double snr_db_from_sigma2(double sigma2, int n_tx, const Constellation& c);

}  // namespace lasmimo

#endif  // LASMIMO_MODEL_HPP
