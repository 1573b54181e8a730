#ifndef LASMIMO_HARNESS_HPP
#define LASMIMO_HARNESS_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "lasmimo/constellation.hpp"
#include "lasmimo/detect.hpp"

namespace lasmimo {

/// Monte Carlo configuration for a square (N_t = N_r) V-BLAST link.
struct ExperimentConfig {
  int n_tx = 16;
  int qam_order = 4;
  std::vector<double> snr_grid_db{0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0};
  Initializer initializer = Initializer::kMMSE;
  std::optional<double> target_ber;
  std::uint64_t min_bit_errors = 100;
  std::uint64_t max_trials = 1000000;
  std::uint64_t master_seed = 1;
  int workers = 1;
  double bisection_tolerance_db = 0.2;  // final bracket width, i.e. +-0.1 dB
  double bracket_step_db = 1.0;         // upward step while searching for a bracket

  /// Throws DimensionError describing the first invalid field.
  void validate() const;
};

struct TrialOutcome {
  std::uint64_t bit_errors = 0;
  std::uint64_t bits = 0;
  int las_iters = 0;
  bool vector_error = false;

  friend bool operator==(const TrialOutcome&, const TrialOutcome&) = default;
};

/// One draw: bits -> x -> H -> n -> y -> LAS -> bits. The random stream
/// depends only on (master_seed, trial_index), so every SNR point sees the
/// same bits, channels and noise directions.
TrialOutcome run_trial(const ExperimentConfig& cfg, double snr_db, std::uint64_t trial_index);

struct BerPoint {
  double snr_db = 0.0;
  double ber = 0.0;
  std::uint64_t bit_errors = 0;
  std::uint64_t bits_simulated = 0;
  std::uint64_t trials = 0;
  std::uint64_t las_iterations = 0;
  bool under_resolved = false;  // stopped at max_trials before min_bit_errors

  friend bool operator==(const BerPoint&, const BerPoint&) = default;
};

/// Runs trials 0, 1, 2, ... and stops after the first trial at which the
/// accumulated bit errors reach min_bit_errors, or at max_trials. Trials run
/// in parallel batches but the stopping index is found by an in-order scan,
/// so the result does not depend on the worker count.
BerPoint ber_point(const ExperimentConfig& cfg, double snr_db);

std::vector<BerPoint> ber_sweep(const ExperimentConfig& cfg);

/// Gaussian tail probability.
double q_function(double x);

/// Exact bit error rate of Gray-coded square M-QAM on an AWGN channel at the
/// given Eb/N0 in dB (4-QAM: Q(sqrt(2 Eb/N0))).
double siso_awgn_ber(double snr_per_bit_db, int qam_order);

/// Eb/N0 in dB at which siso_awgn_ber equals `target`.
double siso_snr_per_bit_for_ber(double target, int qam_order);

/// The same point expressed as received SNR E_s/N0 in dB.
double siso_received_snr_for_ber(double target, int qam_order);

struct SnrTargetPoint {
  int n_tx = 0;
  bool in_range = false;         // false when the target lies outside the grid bounds
  double snr_required_db = 0.0;  // bracket midpoint
  double lo_db = 0.0;            // BER(lo) > target
  double hi_db = 0.0;            // BER(hi) <= target
  double achieved_ber = 0.0;     // BER at hi
  double ber_lo = 0.0;
  std::uint64_t errors_lo = 0;
  std::uint64_t errors_hi = 0;
  double reference_siso_db = 0.0;
  int evaluations = 0;
  bool resolved = true;          // both bracket ends met min_bit_errors

  double gap_db() const noexcept { return snr_required_db - reference_siso_db; }
};

/// Required SNR for cfg.target_ber within [min(snr_grid), max(snr_grid)].
/// Steps up from the bottom of the grid by bracket_step_db until the BER
/// drops to the target, then bisects until the bracket is no wider than
/// bisection_tolerance_db. On exit BER(lo) > target >= BER(hi).
SnrTargetPoint snr_for_target_ber(const ExperimentConfig& cfg, int n_tx);

struct AgreementResult {
  int n_tx = 0;
  double snr_db = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t vector_matches = 0;
  std::uint64_t bit_matches = 0;
  std::uint64_t bits = 0;

  double fraction() const noexcept {
    return trials == 0 ? 0.0 : static_cast<double>(vector_matches) / trials;
  }
  double bit_match_rate() const noexcept {
    return bits == 0 ? 0.0 : static_cast<double>(bit_matches) / bits;
  }
};

/// How often LAS returns exactly the brute-force ML vector.
AgreementResult las_vs_ml_agreement(int n_tx, double snr_db, std::uint64_t trials,
                                    std::uint64_t seed, int qam_order = 4,
                                    Initializer init = Initializer::kMMSE, int workers = 1);

struct FixedPointSummary {
  int n_tx = 0;
  int qam_order = 0;
  double snr_db = 0.0;
  std::uint64_t runs = 0;
  std::uint64_t ln_violations = 0;          // terminal d outside the depth-one region
  std::uint64_t trajectory_violations = 0;  // cost failed to drop strictly at some step
  std::uint64_t clipped_runs = 0;           // runs in which l_opt hit the alphabet edge
  std::uint64_t clip_events = 0;
  std::uint64_t iterations = 0;
  double min_margin = 0.0;  // smallest single-index margin over all runs
  bool passed() const noexcept { return ln_violations == 0 && trajectory_violations == 0; }
};

/// Seeded LAS runs at N_t = N_r; each terminal vector is checked against the
/// single-index region inequality on every coordinate and each cost
/// trajectory for strict descent.
FixedPointSummary fixed_point_suite(int n_tx, int qam_order, double snr_db, std::uint64_t trials,
                                    std::uint64_t seed, Initializer init = Initializer::kMMSE,
                                    int workers = 1);

struct TrendCheck {
  bool holds = true;
  int inversions = 0;
  int within_noise = 0;  // inversions no larger than se_multiplier binomial standard errors
};

/// Whether the proportions p[i] (each from n[i] trials) are non-decreasing,
/// tolerating up to `allowed` drops that stay within `se_multiplier`
/// standard errors of the difference.
TrendCheck nondecreasing_trend(const std::vector<double>& p, const std::vector<std::uint64_t>& n,
                               int allowed = 0, double se_multiplier = 2.0);

}  // namespace lasmimo

#endif  // LASMIMO_HARNESS_HPP
