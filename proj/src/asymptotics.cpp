#include "lasmimo/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "lasmimo/parallel.hpp"

namespace lasmimo {

UpdateTuple::UpdateTuple(std::vector<int> indices, int dim) : indices_(std::move(indices)) {
  if (indices_.empty()) throw DimensionError("update tuple must hold at least one index");
  for (std::size_t k = 0; k < indices_.size(); ++k) {
    if (indices_[k] < 0 || indices_[k] >= dim) {
      throw DimensionError("update tuple index " + std::to_string(indices_[k]) +
                           " outside [0, " + std::to_string(dim) + ")");
    }
    if (k > 0 && indices_[k] <= indices_[k - 1]) {
      throw DimensionError("update tuple indices must be strictly increasing");
    }
  }
}

UpdateTuple UpdateTuple::all(int dim) {
  std::vector<int> idx(static_cast<std::size_t>(std::max(dim, 0)));
  std::iota(idx.begin(), idx.end(), 0);
  return UpdateTuple(std::move(idx), dim);
}

namespace {

void require_fit(const UpdateTuple& u, int dim) {
  if (u.indices().back() >= dim) throw DimensionError("update tuple exceeds the dimension");
}

// sum_j h_{i_j} d_{i_j}
RealVector weighted_column_sum(const RealModel& rm, const SymbolVector& d,
                               std::span<const int> idx) {
  RealVector s = RealVector::Zero(rm.dim_rx());
  for (int i : idx) s.noalias() += d[i] * rm.column(i);
  return s;
}

}  // namespace

RealVector delta_d(const SymbolVector& d, const UpdateTuple& u) {
  require_fit(u, d.size());
  RealVector dd = RealVector::Zero(d.size());
  for (int i : u.indices()) dd(i) = 2.0 * d[i];
  return dd;
}

LnCheck check_Ln(const RealVector& y, const RealModel& rm, const SymbolVector& d,
                 const UpdateTuple& u) {
  if (d.size() != rm.dim_tx() || y.size() != rm.dim_rx()) {
    throw DimensionError("check_Ln: dimensions of H, y and d disagree");
  }
  const RealVector h_dd = rm.h() * delta_d(d, u);
  const double margin = (y - rm.h() * d.values() + 0.5 * h_dd).dot(h_dd);
  return {margin >= 0.0, margin};
}

double update_cost_change(const RealVector& y, const RealModel& rm, const SymbolVector& d,
                          const UpdateTuple& u) {
  const RealVector moved = d.values() - delta_d(d, u);
  return residual_cost(rm.h(), y, moved) - residual_cost(rm.h(), y, d.values());
}

std::uint64_t tuple_count(int dim, int m) noexcept {
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t total = 0;
  std::uint64_t c = 1;  // C(dim, n) built up iteratively
  for (int n = 1; n <= m && n <= dim; ++n) {
    // c * (dim - n + 1) / n, guarding against overflow.
    const auto num = static_cast<std::uint64_t>(dim - n + 1);
    if (c > kMax / num) return kMax;
    c = c * num / static_cast<std::uint64_t>(n);
    if (total > kMax - c) return kMax;
    total += c;
  }
  return total;
}

namespace {

double log_binomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// Evaluates the region inequality for tuples given the projections
// q_i = b^T h_i d_i and K = D G D.
class RegionScanner {
 public:
  RegionScanner(RealVector q, RealMatrix k) : q_(std::move(q)), k_(std::move(k)) {}

  double lhs(std::span<const int> idx) const {
    double v = 0.0;
    for (std::size_t a = 0; a < idx.size(); ++a) {
      v += q_(idx[a]) + k_(idx[a], idx[a]);
      for (std::size_t b = 0; b < a; ++b) v += 2.0 * k_(idx[a], idx[b]);
    }
    return v;
  }

  void consider(std::span<const int> idx, double value, RegionReport& report) const {
    ++report.tuples_checked;
    if (value < report.margin || report.tuples_checked == 1) {
      report.margin = value;
      best_.assign(idx.begin(), idx.end());
    }
  }

  // Depth-first walk over every tuple of size <= m.
  void enumerate(int m, RegionReport& report) const {
    const int dim = static_cast<int>(q_.size());
    std::vector<int> idx;
    std::vector<RealVector> acc{RealVector::Zero(dim)};
    std::vector<double> lhs{0.0};
    // Stack-based combination walk in lexicographic order.
    int next = 0;
    while (true) {
      if (next < dim && static_cast<int>(idx.size()) < m) {
        const int k = next;
        const double value = lhs.back() + q_(k) + k_(k, k) + 2.0 * acc.back()(k);
        idx.push_back(k);
        consider(idx, value, report);
        lhs.push_back(value);
        acc.push_back(acc.back() + k_.col(k));
        next = k + 1;
      } else {
        if (idx.empty()) break;
        next = idx.back() + 1;
        idx.pop_back();
        lhs.pop_back();
        acc.pop_back();
      }
    }
  }

  void sample(int m, std::uint64_t budget, Rng& rng, RegionReport& report) const {
    const int dim = static_cast<int>(q_.size());
    std::vector<double> log_c(static_cast<std::size_t>(m + 1));
    double log_total = -std::numeric_limits<double>::infinity();
    for (int n = 1; n <= m; ++n) {
      log_c[n] = log_binomial(dim, n);
      const double hi = std::max(log_total, log_c[n]);
      log_total = hi + std::log(std::exp(log_total - hi) + std::exp(log_c[n] - hi));
    }
    std::vector<int> idx;
    for (int n = 1; n <= m; ++n) {
      const double level_size = std::exp(log_c[n]);
      const double share = std::exp(log_c[n] - log_total) * static_cast<double>(budget);
      auto want = static_cast<std::uint64_t>(std::max(1.0, std::floor(share)));
      if (static_cast<double>(want) >= level_size) {
        want = static_cast<std::uint64_t>(std::llround(level_size));
      }
      if (static_cast<double>(want) * 2.0 >= level_size) {
        // Dense share: enumerate the level and keep a random subset.
        std::vector<std::vector<int>> level;
        std::vector<int> comb(static_cast<std::size_t>(n));
        std::iota(comb.begin(), comb.end(), 0);
        while (true) {
          level.push_back(comb);
          int pos = n - 1;
          while (pos >= 0 && comb[pos] == dim - n + pos) --pos;
          if (pos < 0) break;
          ++comb[pos];
          for (int j = pos + 1; j < n; ++j) comb[j] = comb[j - 1] + 1;
        }
        for (std::uint64_t t = 0; t < want; ++t) {
          const auto pick = t + rng.below(level.size() - t);
          std::swap(level[t], level[pick]);
          consider(level[t], lhs(level[t]), report);
        }
      } else {
        std::set<std::vector<int>> seen;
        while (seen.size() < want) {
          // Floyd's algorithm for a uniform n-subset of [0, dim).
          std::set<int> chosen;
          for (int j = dim - n; j < dim; ++j) {
            const int t = static_cast<int>(rng.below(static_cast<std::uint64_t>(j) + 1));
            if (!chosen.insert(t).second) chosen.insert(j);
          }
          idx.assign(chosen.begin(), chosen.end());
          if (seen.insert(idx).second) consider(idx, lhs(idx), report);
        }
      }
    }
  }

  const std::vector<int>& best() const { return best_; }

 private:
  RealVector q_;
  RealMatrix k_;
  mutable std::vector<int> best_;
};

}  // namespace

RegionReport check_region(const RealVector& noise, const RealModel& rm, const SymbolVector& x,
                          const SymbolVector& d, int m, std::uint64_t tuple_budget, Rng* rng) {
  const int dim = rm.dim_tx();
  if (m < 1 || m > dim) {
    throw DimensionError("region depth must lie in [1, " + std::to_string(dim) + "]");
  }
  if (x.size() != dim || d.size() != dim || noise.size() != rm.dim_rx()) {
    throw DimensionError("check_region: dimensions of H, n, x and d disagree");
  }
  const RealVector b = noise + rm.h() * (x.values() - d.values());
  const RealMatrix cols = rm.h() * d.values().asDiagonal();
  RegionScanner scanner(cols.transpose() * b, cols.transpose() * cols);

  RegionReport report;
  report.m = m;
  const std::uint64_t total = tuple_count(dim, m);
  if (total <= tuple_budget) {
    scanner.enumerate(m, report);
  } else {
    report.exhaustive = false;
    Rng fallback(0);
    scanner.sample(m, tuple_budget, rng ? *rng : fallback, report);
  }
  if (report.margin < 0.0) report.violated_tuple.emplace(scanner.best(), dim);
  return report;
}

ZSample z_statistic(const RealModel& rm, const SymbolVector& d, const UpdateTuple& u) {
  if (d.size() != rm.dim_tx()) throw DimensionError("z_statistic: d length mismatch");
  require_fit(u, rm.dim_tx());
  // sum_{k<j} c_j^T c_k = (||sum c||^2 - sum ||c||^2) / 2 with c_i = h_i d_i.
  const RealVector s = weighted_column_sum(rm, d, u.indices());
  double energy = 0.0;
  for (int i : u.indices()) energy += rm.column(i).squaredNorm();
  const double cross = 0.5 * (s.squaredNorm() - energy);
  return {u.size(), cross / energy, rm.dim_tx() / 2};
}

VwSample vw_statistics(const RealModel& rm, const SymbolVector& d, const UpdateTuple& u) {
  if (d.size() != rm.dim_tx()) throw DimensionError("vw_statistics: d length mismatch");
  require_fit(u, rm.dim_tx());
  const auto idx = u.indices();
  const RealVector p = weighted_column_sum(rm, d, idx.first(idx.size() - 1));
  const RealVector q = d[idx.back()] * rm.column(idx.back());
  const double denom = p.squaredNorm() + q.squaredNorm();
  return {2.0 * p.dot(q) / denom, (p + q).squaredNorm() / denom};
}

Histogram::Histogram(double lo_, double hi_, int bins) : lo(lo_), hi(hi_) {
  if (bins < 1 || !(hi_ > lo_)) throw DimensionError("histogram needs bins >= 1 and hi > lo");
  counts.assign(static_cast<std::size_t>(bins), 0);
}

std::uint64_t Histogram::total() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), underflow + overflow);
}

void Histogram::add(double v) {
  if (v < lo) {
    ++underflow;
  } else if (v >= hi) {
    ++overflow;
  } else {
    auto b = static_cast<std::size_t>((v - lo) / width());
    counts[std::min(b, counts.size() - 1)]++;
  }
}

void Histogram::merge(const Histogram& other) {
  if (other.counts.size() != counts.size() || other.lo != lo || other.hi != hi) {
    throw DimensionError("cannot merge histograms with different binning");
  }
  for (std::size_t b = 0; b < counts.size(); ++b) counts[b] += other.counts[b];
  underflow += other.underflow;
  overflow += other.overflow;
}

std::vector<double> Histogram::density() const {
  const auto n = total();
  std::vector<double> dens(counts.size(), 0.0);
  if (n == 0) return dens;
  const double scale = 1.0 / (static_cast<double>(n) * width());
  for (std::size_t b = 0; b < counts.size(); ++b) dens[b] = counts[b] * scale;
  return dens;
}

namespace {

RealModel square_channel(int n_tx, std::uint64_t seed) {
  Rng rng(seed);
  return realify(sample_channel(n_tx, n_tx, rng));
}

SymbolVector all_ones(int dim) {
  static const Constellation qpsk(4);
  return SymbolVector(RealVector::Ones(dim), qpsk);
}

}  // namespace

std::vector<ZPdfResult> z_pdf_experiment(const ZPdfConfig& cfg) {
  if (cfg.trials == 0) throw DimensionError("z_pdf_experiment needs at least one trial");
  std::vector<ZPdfResult> out;
  for (int n_tx : cfg.n_tx_list) {
    if (n_tx < 1) throw DimensionError("N_t must be positive");
    const std::uint64_t stream = derive_seed(cfg.seed, static_cast<std::uint64_t>(n_tx));
    const auto u = UpdateTuple::all(2 * n_tx);
    const auto d = all_ones(2 * n_tx);
    std::vector<double> values(cfg.trials);
    parallel_for(cfg.trials, cfg.workers, [&](std::size_t t) {
      values[t] = z_statistic(square_channel(n_tx, derive_seed(stream, t)), d, u).value;
    });

    ZPdfResult r;
    r.n_tx = n_tx;
    r.n = 2 * n_tx;
    r.histogram = Histogram(-1.0, 1.0, cfg.bins);
    double sum = 0.0;
    std::uint64_t near = 0;
    for (double v : values) {
      r.histogram.add(v);
      sum += v;
      if (std::abs(v) < 0.05) ++near;
    }
    const auto count = static_cast<double>(values.size());
    r.mean = sum / count;
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.stddev = values.size() > 1 ? std::sqrt(ss / (count - 1.0)) : 0.0;
    r.frac_near_zero = static_cast<double>(near) / count;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<VwSummary> vw_experiment(std::span<const int> n_tx_list, std::uint64_t trials,
                                     std::uint64_t seed, int workers) {
  if (trials == 0) throw DimensionError("vw_experiment needs at least one trial");
  std::vector<VwSummary> out;
  for (int n_tx : n_tx_list) {
    const std::uint64_t stream = derive_seed(seed, static_cast<std::uint64_t>(n_tx));
    const auto u = UpdateTuple::all(2 * n_tx);
    const auto d = all_ones(2 * n_tx);
    std::vector<VwSample> samples(trials);
    parallel_for(trials, workers, [&](std::size_t t) {
      samples[t] = vw_statistics(square_channel(n_tx, derive_seed(stream, t)), d, u);
    });
    VwSummary s{n_tx, 0.0, 0.0};
    for (const auto& v : samples) {
      s.mean_abs_v += std::abs(v.v);
      s.mean_w += v.w;
    }
    s.mean_abs_v /= static_cast<double>(trials);
    s.mean_w /= static_cast<double>(trials);
    out.push_back(s);
  }
  return out;
}

DepthSummary region_depth_experiment(int n_tx, double snr_db, std::uint64_t trials,
                                     std::uint64_t seed, Initializer init,
                                     std::uint64_t tuple_budget, int workers) {
  const Constellation c(4);
  const double sigma2 = sigma2_from_snr_db(snr_db, n_tx, c);
  const int dim = 2 * n_tx;
  struct Outcome {
    bool depth1 = false;
    bool full = false;
    bool exhaustive = true;
  };
  std::vector<Outcome> outcomes(trials);
  parallel_for(trials, workers, [&](std::size_t t) {
    Rng rng(derive_seed(seed, t));
    const Transmission tx = draw_transmission(n_tx, n_tx, c, sigma2, rng);
    const DetectionResult las = las_detect(tx.model, tx.y, sigma2, init, c);
    Outcome& o = outcomes[t];
    o.depth1 = check_region(tx.noise.values, tx.model, tx.x, las.d_hat, 1).member();
    if (o.depth1) {
      const RegionReport full =
          check_region(tx.noise.values, tx.model, tx.x, las.d_hat, dim, tuple_budget, &rng);
      o.full = full.member();
      o.exhaustive = full.exhaustive;
    }
  });
  DepthSummary s;
  s.n_tx = n_tx;
  s.trials = trials;
  for (const auto& o : outcomes) {
    s.depth1_members += o.depth1 ? 1 : 0;
    s.full_members += o.full ? 1 : 0;
    s.exhaustive = s.exhaustive && o.exhaustive;
  }
  return s;
}

RegionUniquenessSummary region_uniqueness_experiment(int n_tx, double snr_db,
                                                     std::uint64_t draws, std::uint64_t seed,
                                                     int workers) {
  const Constellation c(4);
  const int dim = 2 * n_tx;
  if (dim > 20) throw DimensionError("region enumeration is limited to 2 N_t <= 20");
  const double sigma2 = sigma2_from_snr_db(snr_db, n_tx, c);
  struct Outcome {
    bool violation = false;
    double margin = 0.0;
  };
  std::vector<Outcome> outcomes(draws);
  parallel_for(draws, workers, [&](std::size_t t) {
    Rng rng(derive_seed(seed, t));
    const Transmission tx = draw_transmission(n_tx, n_tx, c, sigma2, rng);
    const SymbolVector ml = ml_bruteforce(tx.model, tx.y, c);
    int members = 0;
    bool ml_is_member = false;
    double margin = 0.0;
    for (std::uint32_t code = 0; code < (1u << dim); ++code) {
      RealVector v(dim);
      for (int p = 0; p < dim; ++p) v(p) = ((code >> p) & 1u) ? -1.0 : 1.0;
      const SymbolVector cand(std::move(v), c);
      const RegionReport r = check_region(tx.noise.values, tx.model, tx.x, cand, dim,
                                          std::numeric_limits<std::uint64_t>::max());
      if (r.member()) {
        ++members;
        margin = r.margin;
        if (cand == ml) ml_is_member = true;
      }
    }
    outcomes[t] = {members != 1 || !ml_is_member, margin};
  });
  RegionUniquenessSummary s;
  s.draws = draws;
  s.min_member_margin = std::numeric_limits<double>::infinity();
  for (const auto& o : outcomes) {
    s.violations += o.violation ? 1 : 0;
    s.min_member_margin = std::min(s.min_member_margin, o.margin);
  }
  return s;
}

}  // namespace lasmimo
