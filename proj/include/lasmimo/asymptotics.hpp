#ifndef LASMIMO_ASYMPTOTICS_HPP
#define LASMIMO_ASYMPTOTICS_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lasmimo/constellation.hpp"
#include "lasmimo/detect.hpp"
#include "lasmimo/model.hpp"
#include "lasmimo/rng.hpp"
#include "lasmimo/types.hpp"

namespace lasmimo {

/// Strictly increasing set of distinct coordinate indices (0-based).
class UpdateTuple {
 public:
  /// Throws DimensionError unless indices are non-empty, strictly increasing,
  /// and each lies in [0, dim).
  UpdateTuple(std::vector<int> indices, int dim);

  static UpdateTuple all(int dim);

  std::span<const int> indices() const noexcept { return indices_; }
  int size() const noexcept { return static_cast<int>(indices_.size()); }
  int operator[](int k) const { return indices_[static_cast<std::size_t>(k)]; }

  friend bool operator==(const UpdateTuple&, const UpdateTuple&) = default;

 private:
  std::vector<int> indices_;
};

/// sum_k 2 d_{i_k} e_{i_k}; d - delta_d flips the sign of the tuple entries.
RealVector delta_d(const SymbolVector& d, const UpdateTuple& u);

struct LnCheck {
  bool satisfied = false;
  double margin = 0.0;  // (y - Hd + H dd / 2)^T (H dd)
};

/// Tests whether the n-symbol update u fails to lower ||y - Hd||^2.
LnCheck check_Ln(const RealVector& y, const RealModel& rm, const SymbolVector& d,
                 const UpdateTuple& u);

/// ||y - H(d - dd)||^2 - ||y - Hd||^2, the cost change of applying u; equals
/// twice check_Ln's margin.
double update_cost_change(const RealVector& y, const RealModel& rm, const SymbolVector& d,
                          const UpdateTuple& u);

struct RegionReport {
  int m = 0;
  std::optional<UpdateTuple> violated_tuple;  // most negative tuple when margin < 0
  double margin = 0.0;                        // min over checked tuples
  bool exhaustive = true;
  std::uint64_t tuples_checked = 0;

  bool member() const noexcept { return !violated_tuple.has_value(); }
};

inline constexpr std::uint64_t kDefaultTupleBudget = 100000;

/// Membership of the noise vector in the region of d at depth m: every
/// n-tuple with n <= m must satisfy
///   (n + H(x - d) + sum_j h_{i_j} d_{i_j})^T (sum_j h_{i_j} d_{i_j}) >= 0.
/// Tuples are enumerated when there are at most `tuple_budget` of them;
/// otherwise each level n is sampled without replacement with a share of the
/// budget proportional to C(dim, n).
RegionReport check_region(const RealVector& noise, const RealModel& rm, const SymbolVector& x,
                          const SymbolVector& d, int m,
                          std::uint64_t tuple_budget = kDefaultTupleBudget,
                          Rng* rng = nullptr);

/// C(dim, n) summed over n = 1..m, saturating at UINT64_MAX.
std::uint64_t tuple_count(int dim, int m) noexcept;

struct ZSample {
  int n = 0;
  double value = 0.0;
  int n_tx = 0;
};

/// Cross-correlation of the selected columns normalised by their energy:
/// sum_{k<j} h_{i_j}^T h_{i_k} d_{i_j} d_{i_k} / sum_j ||h_{i_j}||^2.
ZSample z_statistic(const RealModel& rm, const SymbolVector& d, const UpdateTuple& u);

struct VwSample {
  double v = 0.0;
  double w = 0.0;
};

/// With p = sum_{j<m} h_{i_j} d_{i_j} and q = h_{i_m} d_{i_m}:
/// v = 2 p^T q / (||p||^2 + ||q||^2) and w = ||p + q||^2 / (||p||^2 + ||q||^2),
/// so that w = v + 1.
VwSample vw_statistics(const RealModel& rm, const SymbolVector& d, const UpdateTuple& u);

/// Histogram on [lo, hi) with equal-width bins plus under/overflow counts.
struct Histogram {
  double lo = -1.0;
  double hi = 1.0;
  std::vector<std::uint64_t> counts;
  std::uint64_t underflow = 0;
  std::uint64_t overflow = 0;

  Histogram() = default;
  Histogram(double lo, double hi, int bins);

  int bins() const noexcept { return static_cast<int>(counts.size()); }
  double width() const noexcept { return (hi - lo) / bins(); }
  double bin_center(int b) const noexcept { return lo + (b + 0.5) * width(); }
  std::uint64_t total() const noexcept;
  void add(double v);
  void merge(const Histogram& other);
  /// counts / (total * width); with the outflow fractions this integrates to 1.
  std::vector<double> density() const;
};

struct ZPdfResult {
  int n_tx = 0;
  int n = 0;
  Histogram histogram;
  double mean = 0.0;
  double stddev = 0.0;
  double frac_near_zero = 0.0;  // |z| < 0.05
};

struct ZPdfConfig {
  std::vector<int> n_tx_list{4, 16, 64};
  std::uint64_t trials = 2000;
  int bins = 200;  // over [-1, 1], width 0.01
  std::uint64_t seed = 1;
  int workers = 1;
};

/// For each N_t = N_r draws channels and evaluates z at n = 2 N_t for the
/// all-ones d. Throws DimensionError when trials == 0.
std::vector<ZPdfResult> z_pdf_experiment(const ZPdfConfig& cfg);

struct VwSummary {
  int n_tx = 0;
  double mean_abs_v = 0.0;
  double mean_w = 0.0;
};

/// Mean |v_m| and mean w_m at m = 2 N_t (all-ones d, all indices) per N_t.
std::vector<VwSummary> vw_experiment(std::span<const int> n_tx_list, std::uint64_t trials,
                                     std::uint64_t seed, int workers = 1);

struct DepthSummary {
  int n_tx = 0;
  std::uint64_t trials = 0;
  std::uint64_t depth1_members = 0;  // LAS outputs whose noise lies in the depth-1 region
  std::uint64_t full_members = 0;    // ... that also lie in the full-depth region
  bool exhaustive = true;

  double fraction() const noexcept {
    return depth1_members == 0 ? 0.0 : static_cast<double>(full_members) / depth1_members;
  }
};

/// LAS runs (4-QAM, N_t = N_r) checked for region membership at depth 1 and
/// depth 2 N_t.
DepthSummary region_depth_experiment(int n_tx, double snr_db, std::uint64_t trials,
                                     std::uint64_t seed, Initializer init,
                                     std::uint64_t tuple_budget = kDefaultTupleBudget,
                                     int workers = 1);

struct RegionUniquenessSummary {
  std::uint64_t draws = 0;
  std::uint64_t violations = 0;   // draws without exactly one member equal to the ML vector
  double min_member_margin = 0.0;
};

/// Enumerates every candidate d of a tiny 4-QAM system and every tuple, per
/// draw: exactly one candidate should own the noise and it should be the
/// brute-force ML vector.
RegionUniquenessSummary region_uniqueness_experiment(int n_tx, double snr_db,
                                                     std::uint64_t draws, std::uint64_t seed,
                                                     int workers = 1);

}  // namespace lasmimo

#endif  // LASMIMO_ASYMPTOTICS_HPP
