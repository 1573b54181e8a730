#include "lasmimo/model.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace lasmimo {

ComplexChannel::ComplexChannel(ComplexMatrix entries) : entries_(std::move(entries)) {
  if (entries_.rows() < 1 || entries_.cols() < 1) {
    throw DimensionError("channel must have at least one antenna on each side");
  }
  if (entries_.cols() > entries_.rows()) {
    throw DimensionError("channel requires n_tx <= n_rx");
  }
}

RealModel::RealModel(RealMatrix h) : h_(std::move(h)) {
  if (h_.cols() < 1 || h_.rows() < h_.cols()) {
    throw DimensionError("real model requires 1 <= dim_tx <= dim_rx");
  }
}

SymbolVector::SymbolVector(RealVector values, const Constellation& c)
    : values_(std::move(values)), qam_order_(c.order()) {
  for (Eigen::Index i = 0; i < values_.size(); ++i) {
    if (!c.contains(values_(i))) {
      throw DimensionError("component " + std::to_string(i) + " is not in the " +
                           std::to_string(c.order()) + "-QAM alphabet");
    }
  }
}

ComplexChannel sample_channel(int n_tx, int n_rx, Rng& rng) {
  if (n_tx < 1 || n_tx > n_rx) {
    throw DimensionError("sample_channel requires 1 <= n_tx <= n_rx");
  }
  const double scale = std::sqrt(0.5);
  ComplexMatrix h(n_rx, n_tx);
  // Column-major fill keeps the draw order independent of Eigen internals.
  for (int j = 0; j < n_tx; ++j) {
    for (int i = 0; i < n_rx; ++i) {
      const double re = rng.normal() * scale;
      const double im = rng.normal() * scale;
      h(i, j) = {re, im};
    }
  }
  return ComplexChannel(std::move(h));
}

RealModel realify(const ComplexChannel& hc) { return RealModel(realify_matrix(hc.entries())); }

RealVector realify_vector(const ComplexVector& v) {
  RealVector r(2 * v.size());
  r.head(v.size()) = v.real();
  r.tail(v.size()) = v.imag();
  return r;
}

RealVector realify_vector(const ComplexVector& v, VectorRole role, const ComplexChannel& hc) {
  const int expected = role == VectorRole::kTx ? hc.n_tx() : hc.n_rx();
  if (v.size() != expected) {
    throw DimensionError("vector length " + std::to_string(v.size()) + " does not match " +
                         std::to_string(expected));
  }
  return realify_vector(v);
}

ComplexVector complexify_vector(const RealVector& v) {
  if (v.size() % 2 != 0) throw DimensionError("real vector length must be even");
  const auto n = v.size() / 2;
  ComplexVector c(n);
  for (Eigen::Index i = 0; i < n; ++i) c(i) = {v(i), v(n + i)};
  return c;
}

SymbolVector modulate(const BitVector& bits, const Constellation& c, int n_tx) {
  const int k = c.bits_per_real_dim();
  const auto dims = static_cast<std::size_t>(2 * n_tx);
  if (n_tx < 1 || bits.size() != dims * static_cast<std::size_t>(k)) {
    throw DimensionError("modulate expects " + std::to_string(dims * k) + " bits, got " +
                         std::to_string(bits.size()));
  }
  RealVector values(static_cast<Eigen::Index>(dims));
  for (std::size_t p = 0; p < dims; ++p) {
    std::uint32_t label = 0;
    for (int b = 0; b < k; ++b) {
      label = (label << 1) | (bits[p * k + b] & 1u);
    }
    values(static_cast<Eigen::Index>(p)) = c.level_for_label(label);
  }
  return SymbolVector(std::move(values), c);
}

BitVector demodulate(const SymbolVector& d, const Constellation& c) {
  if (d.qam_order() != c.order()) throw DimensionError("constellation mismatch");
  const int k = c.bits_per_real_dim();
  BitVector bits(static_cast<std::size_t>(d.size() * k));
  for (int p = 0; p < d.size(); ++p) {
    const auto label = c.label_for_level(d[p]);
    for (int b = 0; b < k; ++b) {
      bits[static_cast<std::size_t>(p * k + b)] =
          static_cast<std::uint8_t>((label >> (k - 1 - b)) & 1u);
    }
  }
  return bits;
}

RealVector transmit(const RealModel& rm, const SymbolVector& x, const NoiseVector& noise) {
  if (x.size() != rm.dim_tx() || noise.values.size() != rm.dim_rx()) {
    throw DimensionError("transmit: dimensions of H, x and n disagree");
  }
  return rm.h() * x.values() + noise.values;
}

NoiseVector sample_noise(int n_rx, double sigma2, Rng& rng) {
  if (n_rx < 1) throw DimensionError("sample_noise requires n_rx >= 1");
  if (!(sigma2 >= 0.0)) throw DimensionError("noise variance must be non-negative");
  const double scale = std::sqrt(sigma2 / 2.0);
  NoiseVector n{RealVector(2 * n_rx), sigma2};
  for (int i = 0; i < 2 * n_rx; ++i) n.values(i) = scale * rng.normal();
  return n;
}

Transmission draw_transmission(int n_tx, int n_rx, const Constellation& c, double sigma2,
                               Rng& rng) {
  BitVector bits(static_cast<std::size_t>(2 * n_tx * c.bits_per_real_dim()));
  for (auto& b : bits) b = rng.bit() ? 1 : 0;
  SymbolVector x = modulate(bits, c, n_tx);
  RealModel rm = realify(sample_channel(n_tx, n_rx, rng));
  NoiseVector noise = sample_noise(n_rx, sigma2, rng);
  RealVector y = transmit(rm, x, noise);
  return Transmission{std::move(bits), std::move(x), std::move(rm), std::move(noise),
                      std::move(y)};
}

double sigma2_from_snr_db(double snr_db, int n_tx, const Constellation& c) {
  if (std::isinf(snr_db) && snr_db > 0) return 0.0;
  return n_tx * c.symbol_energy() / std::pow(10.0, snr_db / 10.0);
}

double snr_db_from_sigma2(double sigma2, int n_tx, const Constellation& c) {
  if (sigma2 == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(n_tx * c.symbol_energy() / sigma2);
}

}  // namespace lasmimo
