#include "lasmimo/detect.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace lasmimo {

std::string_view to_string(Initializer init) noexcept {
  switch (init) {
    case Initializer::kMF: return "mf";
    case Initializer::kZF: return "zf";
    case Initializer::kMMSE: return "mmse";
  }
  return "?";
}

std::optional<Initializer> parse_initializer(std::string_view name) noexcept {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (lower == "mf") return Initializer::kMF;
  if (lower == "zf") return Initializer::kZF;
  if (lower == "mmse") return Initializer::kMMSE;
  return std::nullopt;
}

GramMatrix::GramMatrix(const RealModel& rm) : g_(rm.h().transpose() * rm.h()) {
  // Enforce exact symmetry; the product is symmetric only up to rounding.
  g_ = (0.5 * (g_ + g_.transpose())).eval();
}

SymbolVector initial_filter(Initializer kind, const RealModel& rm, const RealVector& y,
                            double sigma2, const Constellation& c) {
  if (y.size() != rm.dim_rx()) throw DimensionError("initial_filter: y length mismatch");
  RealVector soft;
  switch (kind) {
    case Initializer::kMF:
      soft = rm.h().transpose() * y;
      break;
    case Initializer::kZF: {
      Eigen::ColPivHouseholderQR<RealMatrix> qr(rm.h());
      if (qr.rank() < rm.dim_tx()) {
        throw DimensionError("zero-forcing filter needs H^T H to be invertible");
      }
      soft = qr.solve(y);
      break;
    }
    case Initializer::kMMSE: {
      if (!(sigma2 >= 0.0)) throw DimensionError("noise variance must be non-negative");
      if (std::isinf(sigma2)) {
        soft = RealVector::Zero(rm.dim_tx());
        break;
      }
      RealMatrix a = rm.h().transpose() * rm.h();
      a.diagonal().array() += (sigma2 / 2.0) / c.real_symbol_energy();
      Eigen::LLT<RealMatrix> llt(a);
      if (llt.info() != Eigen::Success) {
        throw DimensionError("MMSE filter matrix is not positive definite");
      }
      soft = llt.solve(rm.h().transpose() * y);
      break;
    }
  }
  RealVector d = soft.unaryExpr([&c](double v) { return c.quantize(v); });
  return SymbolVector(std::move(d), c);
}

StepChoice l_opt(double z_p, double a_p, double d_p, const Constellation& c) {
  if (!(a_p > 0.0)) throw DimensionError("l_opt requires a_p > 0");
  StepChoice choice;
  if (z_p == 0.0) return choice;
  choice.direction = z_p > 0.0 ? 1 : -1;

  const double ratio = std::abs(z_p) / (2.0 * a_p);
  double k = std::floor(ratio);
  if (ratio - k > 0.5) k += 1.0;
  const double headroom = choice.direction > 0 ? c.max_level() - d_p : d_p - c.min_level();
  const double unclipped = 2.0 * k;
  if (unclipped > headroom) {
    choice.l = static_cast<int>(headroom);
    choice.clipped = true;
  } else {
    choice.l = static_cast<int>(unclipped);
  }
  return choice;
}

LasState make_las_state(const RealModel& rm, const RealVector& y, const GramMatrix& g,
                        const SymbolVector& d0) {
  if (y.size() != rm.dim_rx() || d0.size() != rm.dim_tx() || g.dim() != rm.dim_tx()) {
    throw DimensionError("make_las_state: dimensions of H, G, y and d disagree");
  }
  LasState s;
  s.d = d0.values();
  const RealVector hty = rm.h().transpose() * y;
  s.z = hty - g.g() * s.d;
  s.cost = quadratic_cost(g.g(), hty, s.d);
  return s;
}

double state_drift(const LasState& s, const RealModel& rm, const RealVector& y,
                   const GramMatrix& g) {
  const RealVector hty = rm.h().transpose() * y;
  const RealVector z_ref = hty - g.g() * s.d;
  const double cost_ref = quadratic_cost(g.g(), hty, s.d);
  const double z_scale = std::max({1.0, z_ref.cwiseAbs().maxCoeff(), hty.cwiseAbs().maxCoeff()});
  const double z_err = (s.z - z_ref).cwiseAbs().maxCoeff() / z_scale;
  const double cost_err = std::abs(s.cost - cost_ref) / std::max(1.0, std::abs(cost_ref));
  return std::max(z_err, cost_err);
}

void verify_state(const LasState& s, const RealModel& rm, const RealVector& y,
                  const GramMatrix& g, double tol) {
  if (s.d.size() != rm.dim_tx() || s.z.size() != rm.dim_tx()) {
    throw ConsistencyError("LAS state has the wrong dimension");
  }
  const double drift = state_drift(s, rm, y, g);
  if (!(drift <= tol)) {
    throw ConsistencyError("LAS state drifted from H^T(y - Hd): relative error " +
                           std::to_string(drift));
  }
}

void apply_move(LasState& s, const GramMatrix& g, int p, int lambda) {
  const double lam = static_cast<double>(lambda);
  s.cost += lam * lam * g.a(p) - 2.0 * lam * s.z(p);
  s.d(p) += lam;
  s.z.noalias() -= lam * g.column(p);
}

StepOutcome las_step(LasState& s, const GramMatrix& g, const Constellation& c) {
  if (s.z.size() != g.dim() || s.d.size() != g.dim()) {
    throw ConsistencyError("LAS state does not match the Gram matrix");
  }
  StepOutcome out;
  double best = 0.0;
  int best_l = 0;
  int best_dir = 0;
  bool best_clipped = false;
  for (int p = 0; p < g.dim(); ++p) {
    const StepChoice choice = l_opt(s.z(p), g.a(p), s.d(p), c);
    if (choice.clipped) ++out.clip_events;
    const double f = cost_delta(choice.l, s.z(p), g.a(p));
    if (out.index < 0 || f < best) {
      out.index = p;
      best = f;
      best_l = choice.l;
      best_dir = choice.direction;
      best_clipped = choice.clipped;
    }
  }
  if (!(best < 0.0)) return out;

  out.updated = true;
  out.lambda = best_l * best_dir;
  out.delta = best;
  out.clipped = best_clipped;
  apply_move(s, g, out.index, out.lambda);
  ++s.iteration;
  return out;
}

DetectionResult las_search(const RealModel& rm, const RealVector& y, const GramMatrix& g,
                           const SymbolVector& d0, const Constellation& c,
                           const LasOptions& opts) {
  const int max_iters = opts.max_iters > 0 ? opts.max_iters : 10 * rm.dim_tx();
  LasState s = make_las_state(rm, y, g, d0);

  std::vector<double> trajectory{s.cost};
  int clip_events = 0;
  int clipped_updates = 0;
  for (;;) {
    const StepOutcome step = las_step(s, g, c);
    clip_events += step.clip_events;
    if (!step.updated) break;
    if (step.clipped) ++clipped_updates;
    trajectory.push_back(s.cost);
    if (opts.check_consistency) verify_state(s, rm, y, g);
    if (s.iteration > max_iters) {
      throw IterationLimitError("LAS exceeded " + std::to_string(max_iters) + " iterations");
    }
  }
  return DetectionResult{SymbolVector(s.d, c), s.iteration, std::move(trajectory),
                         Initializer::kMMSE,   clip_events, clipped_updates,
                         std::move(s.z)};
}

DetectionResult las_detect(const RealModel& rm, const RealVector& y, double sigma2,
                           Initializer init, const Constellation& c, const LasOptions& opts) {
  const GramMatrix g(rm);
  DetectionResult r = las_search(rm, y, g, initial_filter(init, rm, y, sigma2, c), c, opts);
  r.initializer = init;
  return r;
}

std::optional<std::uint64_t> signal_space_size(int dim_tx, const Constellation& c) noexcept {
  const int bits = dim_tx * c.bits_per_real_dim();
  if (dim_tx < 0 || bits > 63) return std::nullopt;
  return std::uint64_t{1} << bits;
}

SymbolVector ml_bruteforce(const RealModel& rm, const RealVector& y, const Constellation& c,
                           std::uint64_t cap) {
  const int n = rm.dim_tx();
  if (y.size() != rm.dim_rx()) throw DimensionError("ml_bruteforce: y length mismatch");
  const auto size = signal_space_size(n, c);
  if (!size || *size > cap) {
    throw DimensionError("ML search space exceeds the configured cap of " +
                         std::to_string(cap) + " points");
  }

  // Reflected mixed-radix Gray walk: every step moves one coordinate by +-2,
  // so the residual updates with a single column.
  const int levels = c.levels();
  std::vector<int> index(static_cast<std::size_t>(n), 0);
  std::vector<int> dir(static_cast<std::size_t>(n), 1);
  RealVector d = RealVector::Constant(n, c.min_level());
  RealVector r = y - rm.h() * d;

  RealVector best_d = d;
  double best_cost = r.squaredNorm();
  const auto lex_less = [](const RealVector& a, const RealVector& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
  };

  constexpr std::uint64_t kResync = 4096;
  for (std::uint64_t step = 1; step < *size; ++step) {
    int p = 0;
    while (true) {
      const int next = index[p] + dir[p];
      if (next >= 0 && next < levels) {
        index[p] = next;
        break;
      }
      dir[p] = -dir[p];
      ++p;
    }
    const double delta = 2.0 * dir[p];
    d(p) += delta;
    if (step % kResync == 0) {
      r = y - rm.h() * d;
    } else {
      r.noalias() -= delta * rm.column(p);
    }
    const double cost = r.squaredNorm();
    if (cost < best_cost || (cost == best_cost && lex_less(d, best_d))) {
      best_cost = cost;
      best_d = d;
    }
  }
  return SymbolVector(std::move(best_d), c);
}

}  // namespace lasmimo
