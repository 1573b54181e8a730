#include "lasmimo/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lasmimo/asymptotics.hpp"
#include "lasmimo/model.hpp"
#include "lasmimo/parallel.hpp"
#include "lasmimo/rng.hpp"

namespace lasmimo {

void ExperimentConfig::validate() const {
  if (n_tx < 1) throw DimensionError("n_tx must be positive");
  (void)Constellation(qam_order);
  if (snr_grid_db.empty()) throw DimensionError("snr grid must not be empty");
  for (std::size_t i = 1; i < snr_grid_db.size(); ++i) {
    if (!(snr_grid_db[i] > snr_grid_db[i - 1])) {
      throw DimensionError("snr grid must be strictly increasing");
    }
  }
  if (min_bit_errors < 1) throw DimensionError("min_bit_errors must be >= 1");
  if (max_trials < 1) throw DimensionError("max_trials must be >= 1");
  if (workers < 1) throw DimensionError("workers must be >= 1");
  if (target_ber && !(*target_ber > 0.0 && *target_ber < 1.0)) {
    throw DimensionError("target BER must lie in (0, 1)");
  }
  if (!(bisection_tolerance_db > 0.0)) throw DimensionError("bisection tolerance must be > 0");
  if (!(bracket_step_db > 0.0)) throw DimensionError("bracket step must be > 0");
}

TrialOutcome run_trial(const ExperimentConfig& cfg, double snr_db, std::uint64_t trial_index) {
  const Constellation c(cfg.qam_order);
  const double sigma2 = sigma2_from_snr_db(snr_db, cfg.n_tx, c);
  Rng rng(derive_seed(cfg.master_seed, trial_index));
  const Transmission tx = draw_transmission(cfg.n_tx, cfg.n_tx, c, sigma2, rng);
  const DetectionResult det = las_detect(tx.model, tx.y, sigma2, cfg.initializer, c);
  const BitVector rx_bits = demodulate(det.d_hat, c);

  TrialOutcome out;
  out.bits = tx.bits.size();
  for (std::size_t i = 0; i < rx_bits.size(); ++i) out.bit_errors += rx_bits[i] != tx.bits[i];
  out.las_iters = det.iterations;
  out.vector_error = !(det.d_hat == tx.x);
  return out;
}

BerPoint ber_point(const ExperimentConfig& cfg, double snr_db) {
  BerPoint pt;
  pt.snr_db = snr_db;
  const std::uint64_t batch = std::max<std::uint64_t>(32, 8 * static_cast<std::uint64_t>(cfg.workers));
  std::vector<TrialOutcome> outcomes;
  std::uint64_t next = 0;
  bool done = false;
  while (!done && next < cfg.max_trials) {
    const std::uint64_t count = std::min(batch, cfg.max_trials - next);
    outcomes.assign(count, TrialOutcome{});
    parallel_for(count, cfg.workers,
                 [&](std::size_t i) { outcomes[i] = run_trial(cfg, snr_db, next + i); });
    for (const auto& o : outcomes) {
      pt.bit_errors += o.bit_errors;
      pt.bits_simulated += o.bits;
      pt.las_iterations += static_cast<std::uint64_t>(o.las_iters);
      ++pt.trials;
      if (pt.bit_errors >= cfg.min_bit_errors) {
        done = true;
        break;
      }
    }
    next += count;
  }
  pt.under_resolved = pt.bit_errors < cfg.min_bit_errors;
  pt.ber = pt.bits_simulated == 0 ? 0.0
                                  : static_cast<double>(pt.bit_errors) / pt.bits_simulated;
  return pt;
}

std::vector<BerPoint> ber_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<BerPoint> points;
  points.reserve(cfg.snr_grid_db.size());
  for (double snr : cfg.snr_grid_db) points.push_back(ber_point(cfg, snr));
  return points;
}

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double siso_awgn_ber(double snr_per_bit_db, int qam_order) {
  const Constellation c(qam_order);
  if (std::isinf(snr_per_bit_db)) return snr_per_bit_db < 0 ? 0.5 : 0.0;
  const double gamma_b = std::pow(10.0, snr_per_bit_db / 10.0);
  // E_b / N0 with N0 = sigma^2 split evenly over the two real dimensions.
  const double sigma2 = c.symbol_energy() / (gamma_b * c.bits_per_symbol());
  const double sigma_r = std::sqrt(sigma2 / 2.0);
  const auto pts = c.pam_points();
  const int levels = c.levels();
  // Per real dimension: average Hamming weight of the decision error.
  double weighted = 0.0;
  for (int i = 0; i < levels; ++i) {
    for (int j = 0; j < levels; ++j) {
      if (i == j) continue;
      const double lower = j == 0 ? -std::numeric_limits<double>::infinity() : pts[j] - 1.0;
      const double upper = j == levels - 1 ? std::numeric_limits<double>::infinity() : pts[j] + 1.0;
      const double p = q_function((lower - pts[i]) / sigma_r) - q_function((upper - pts[i]) / sigma_r);
      weighted += p * c.hamming(pts[i], pts[j]);
    }
  }
  return weighted / (levels * c.bits_per_real_dim());
}

double siso_snr_per_bit_for_ber(double target, int qam_order) {
  if (!(target > 0.0 && target < 0.5)) {
    throw DimensionError("SISO target BER must lie in (0, 0.5)");
  }
  double lo = -20.0;
  double hi = 60.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (siso_awgn_ber(mid, qam_order) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double siso_received_snr_for_ber(double target, int qam_order) {
  const Constellation c(qam_order);
  return siso_snr_per_bit_for_ber(target, qam_order) + 10.0 * std::log10(c.bits_per_symbol());
}

SnrTargetPoint snr_for_target_ber(const ExperimentConfig& base, int n_tx) {
  ExperimentConfig cfg = base;
  cfg.n_tx = n_tx;
  cfg.validate();
  if (!cfg.target_ber) throw DimensionError("snr_for_target_ber needs a target BER");
  const double target = *cfg.target_ber;

  SnrTargetPoint out;
  out.n_tx = n_tx;
  out.reference_siso_db =
      target < 0.5 ? siso_received_snr_for_ber(target, cfg.qam_order)
                   : -std::numeric_limits<double>::infinity();

  // Walk up from the bottom of the grid so that no evaluation sits far below
  // the target BER, where collecting min_bit_errors would be expensive.
  const double ceil_db = cfg.snr_grid_db.back();
  double lo = cfg.snr_grid_db.front();
  BerPoint at_lo = ber_point(cfg, lo);
  out.evaluations = 1;
  double hi = lo;
  BerPoint at_hi = at_lo;
  const auto record = [&] {
    out.lo_db = lo;
    out.hi_db = hi;
    out.ber_lo = at_lo.ber;
    out.achieved_ber = at_hi.ber;
    out.errors_lo = at_lo.bit_errors;
    out.errors_hi = at_hi.bit_errors;
    out.resolved = !at_lo.under_resolved && !at_hi.under_resolved;
    out.snr_required_db = 0.5 * (lo + hi);
  };
  if (!(at_lo.ber > target)) {
    record();
    out.snr_required_db = -std::numeric_limits<double>::infinity();
    return out;
  }
  while (at_hi.ber > target) {
    if (hi >= ceil_db) {
      record();
      out.snr_required_db = std::numeric_limits<double>::infinity();
      return out;
    }
    lo = hi;
    at_lo = at_hi;
    hi = std::min(hi + cfg.bracket_step_db, ceil_db);
    at_hi = ber_point(cfg, hi);
    ++out.evaluations;
  }
  while (hi - lo > cfg.bisection_tolerance_db) {
    const double mid = 0.5 * (lo + hi);
    BerPoint at_mid = ber_point(cfg, mid);
    ++out.evaluations;
    if (at_mid.ber > target) {
      lo = mid;
      at_lo = at_mid;
    } else {
      hi = mid;
      at_hi = at_mid;
    }
  }
  record();
  out.in_range = true;
  return out;
}

AgreementResult las_vs_ml_agreement(int n_tx, double snr_db, std::uint64_t trials,
                                    std::uint64_t seed, int qam_order, Initializer init,
                                    int workers) {
  const Constellation c(qam_order);
  const double sigma2 = sigma2_from_snr_db(snr_db, n_tx, c);
  struct Outcome {
    bool match = false;
    std::uint64_t bit_matches = 0;
    std::uint64_t bits = 0;
  };
  std::vector<Outcome> outcomes(trials);
  parallel_for(trials, workers, [&](std::size_t t) {
    Rng rng(derive_seed(seed, t));
    const Transmission tx = draw_transmission(n_tx, n_tx, c, sigma2, rng);
    const DetectionResult las = las_detect(tx.model, tx.y, sigma2, init, c);
    const SymbolVector ml = ml_bruteforce(tx.model, tx.y, c);
    const BitVector a = demodulate(las.d_hat, c);
    const BitVector b = demodulate(ml, c);
    Outcome& o = outcomes[t];
    o.match = las.d_hat == ml;
    o.bits = a.size();
    for (std::size_t i = 0; i < a.size(); ++i) o.bit_matches += a[i] == b[i];
  });
  AgreementResult r;
  r.n_tx = n_tx;
  r.snr_db = snr_db;
  r.trials = trials;
  for (const auto& o : outcomes) {
    r.vector_matches += o.match;
    r.bit_matches += o.bit_matches;
    r.bits += o.bits;
  }
  return r;
}

FixedPointSummary fixed_point_suite(int n_tx, int qam_order, double snr_db, std::uint64_t trials,
                                    std::uint64_t seed, Initializer init, int workers) {
  const Constellation c(qam_order);
  const double sigma2 = sigma2_from_snr_db(snr_db, n_tx, c);
  struct Outcome {
    bool ln_ok = true;
    bool descent_ok = true;
    int clip_events = 0;
    int iterations = 0;
    double margin = 0.0;
  };
  std::vector<Outcome> outcomes(trials);
  parallel_for(trials, workers, [&](std::size_t t) {
    Rng rng(derive_seed(seed, t));
    const Transmission tx = draw_transmission(n_tx, n_tx, c, sigma2, rng);
    const DetectionResult det = las_detect(tx.model, tx.y, sigma2, init, c);
    const RegionReport rep = check_region(tx.noise.values, tx.model, tx.x, det.d_hat, 1);
    Outcome& o = outcomes[t];
    o.ln_ok = rep.member() && rep.exhaustive;
    o.margin = rep.margin;
    const auto& traj = det.cost_trajectory;
    for (std::size_t k = 1; k < traj.size(); ++k) o.descent_ok = o.descent_ok && traj[k] < traj[k - 1];
    o.clip_events = det.clip_events;
    o.iterations = det.iterations;
  });
  FixedPointSummary s;
  s.n_tx = n_tx;
  s.qam_order = qam_order;
  s.snr_db = snr_db;
  s.runs = trials;
  s.min_margin = std::numeric_limits<double>::infinity();
  for (const auto& o : outcomes) {
    s.ln_violations += !o.ln_ok;
    s.trajectory_violations += !o.descent_ok;
    s.clipped_runs += o.clip_events > 0;
    s.clip_events += static_cast<std::uint64_t>(o.clip_events);
    s.iterations += static_cast<std::uint64_t>(o.iterations);
    s.min_margin = std::min(s.min_margin, o.margin);
  }
  return s;
}

TrendCheck nondecreasing_trend(const std::vector<double>& p, const std::vector<std::uint64_t>& n,
                               int allowed, double se_multiplier) {
  if (p.size() != n.size()) throw DimensionError("trend needs one trial count per proportion");
  TrendCheck out;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (!(p[i] < p[i - 1])) continue;
    ++out.inversions;
    auto var = [](double q, std::uint64_t m) { return m == 0 ? 0.0 : q * (1.0 - q) / static_cast<double>(m); };
    const double se = std::sqrt(var(p[i], n[i]) + var(p[i - 1], n[i - 1]));
    if (p[i - 1] - p[i] <= se_multiplier * se) ++out.within_noise;
  }
  out.holds = out.inversions == 0 || (out.inversions <= allowed && out.within_noise == out.inversions);
  return out;
}

}  // namespace lasmimo
