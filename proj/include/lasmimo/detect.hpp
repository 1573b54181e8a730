#ifndef LASMIMO_DETECT_HPP
#define LASMIMO_DETECT_HPP

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "lasmimo/constellation.hpp"
#include "lasmimo/model.hpp"
#include "lasmimo/types.hpp"

namespace lasmimo {

enum class Initializer { kMF, kZF, kMMSE };

std::string_view to_string(Initializer init) noexcept;
/// Accepts "mf", "zf", "mmse" (case-insensitive).
std::optional<Initializer> parse_initializer(std::string_view name) noexcept;

/// G = H^T H with its diagonal cached.
class GramMatrix {
 public:
  explicit GramMatrix(const RealModel& rm);

  const RealMatrix& g() const noexcept { return g_; }
  double a(int p) const { return g_(p, p); }
  auto column(int p) const { return g_.col(p); }
  int dim() const noexcept { return static_cast<int>(g_.rows()); }

 private:
  RealMatrix g_;
};

/// ||y - H d||^2.
template <typename DH, typename DY, typename DD>
double residual_cost(const Eigen::MatrixBase<DH>& h, const Eigen::MatrixBase<DY>& y,
                     const Eigen::MatrixBase<DD>& d) {
  return (y - h * d).squaredNorm();
}

/// d^T G d - 2 y^T H d, given G and H^T y. Differs from residual_cost by ||y||^2.
template <typename DG, typename DV, typename DD>
double quadratic_cost(const Eigen::MatrixBase<DG>& g, const Eigen::MatrixBase<DV>& hty,
                      const Eigen::MatrixBase<DD>& d) {
  return d.dot(g * d) - 2.0 * hty.dot(d);
}

/// Linear front end followed by per-component quantization to the alphabet
/// (nearest level, midpoints to the larger level).
///
/// MF uses H^T, ZF the least-squares pseudo-inverse, MMSE
/// (H^T H + (sigma2/2)/E_r I)^{-1} H^T with E_r the real-symbol energy.
/// Throws DimensionError when ZF is asked for a rank-deficient H.
SymbolVector initial_filter(Initializer kind, const RealModel& rm, const RealVector& y,
                            double sigma2, const Constellation& c);

struct StepChoice {
  int l = 0;           // even, >= 0
  int direction = 0;   // sign of z_p; 0 when z_p == 0
  bool clipped = false;
};

/// Best single-symbol move magnitude for one coordinate: 2 * round(|z_p| / 2a_p)
/// (exact halves round toward zero), then reduced to the largest move that
/// stays inside the alphabet in the direction of z_p.
StepChoice l_opt(double z_p, double a_p, double d_p, const Constellation& c);

/// Cost change l^2 a_p - 2 l |z_p| of moving coordinate p by l toward sgn(z_p).
inline double cost_delta(int l, double z_p, double a_p) noexcept {
  const double ld = static_cast<double>(l);
  return ld * ld * a_p - 2.0 * ld * std::abs(z_p);
}

/// Search state: candidate d, z = H^T (y - H d), and the running cost
/// C = d^T G d - 2 y^T H d.
struct LasState {
  RealVector d;
  RealVector z;
  double cost = 0.0;
  int iteration = 0;
};

/// Builds the state for a starting point d0 (recomputes z and cost exactly).
LasState make_las_state(const RealModel& rm, const RealVector& y, const GramMatrix& g,
                        const SymbolVector& d0);

/// Largest relative deviation of the carried z and cost from their
/// recomputed values.
double state_drift(const LasState& s, const RealModel& rm, const RealVector& y,
                   const GramMatrix& g);

/// Throws ConsistencyError if state_drift exceeds `tol`.
void verify_state(const LasState& s, const RealModel& rm, const RealVector& y,
                  const GramMatrix& g, double tol = 1e-9);

/// Moves coordinate p by `lambda` and updates z and the cost incrementally.
void apply_move(LasState& s, const GramMatrix& g, int p, int lambda);

struct StepOutcome {
  bool updated = false;
  int index = -1;          // coordinate chosen by the argmin (smallest on ties)
  int lambda = 0;          // signed move applied (0 when terminated)
  double delta = 0.0;      // cost change, < 0 when updated
  bool clipped = false;    // the applied move was clipped
  int clip_events = 0;     // coordinates whose best move was clipped this step
};

/// One LAS iteration. Terminated steps leave the state untouched.
StepOutcome las_step(LasState& s, const GramMatrix& g, const Constellation& c);

struct LasOptions {
  int max_iters = 0;             // 0 selects 10 * dim_tx
  bool check_consistency = false;  // verify z and cost after every update
};

struct DetectionResult {
  SymbolVector d_hat;
  int iterations = 0;
  std::vector<double> cost_trajectory;  // C^(0), C^(1), ... strictly decreasing
  Initializer initializer = Initializer::kMMSE;
  int clip_events = 0;
  int clipped_updates = 0;
  RealVector final_z;
};

/// Thrown when the search exceeds its iteration bound.
class IterationLimitError : public ConsistencyError {
 public:
  using ConsistencyError::ConsistencyError;
};

/// Runs the search from an explicit starting point.
DetectionResult las_search(const RealModel& rm, const RealVector& y, const GramMatrix& g,
                           const SymbolVector& d0, const Constellation& c,
                           const LasOptions& opts = {});

DetectionResult las_detect(const RealModel& rm, const RealVector& y, double sigma2,
                           Initializer init, const Constellation& c,
                           const LasOptions& opts = {});

inline constexpr std::uint64_t kDefaultMlCap = std::uint64_t{1} << 20;

/// Exhaustive minimizer of ||y - H d||^2 over the signal space; exact ties go
/// to the lexicographically smallest d. Throws DimensionError when the space
/// holds more than `cap` points.
SymbolVector ml_bruteforce(const RealModel& rm, const RealVector& y, const Constellation& c,
                           std::uint64_t cap = kDefaultMlCap);

/// Number of points in the signal space, or nullopt past 2^63.
std::optional<std::uint64_t> signal_space_size(int dim_tx, const Constellation& c) noexcept;

}  // namespace lasmimo

#endif  // LASMIMO_DETECT_HPP
