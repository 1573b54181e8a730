// Acceptance runner. Prints one PASS/FAIL line per criterion.
//
//   acceptance                 run everything, exit 1 if anything failed
//   acceptance --criterion N   run one criterion (1..8, or t1)
//   acceptance --report        run everything, always exit 0 once all lines print
//   acceptance --workers W

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cli.hpp"
#include "lasmimo/asymptotics.hpp"
#include "lasmimo/harness.hpp"

using namespace lasmimo;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

int g_workers = 0;  // 0: one per hardware thread

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

Verdict fixed_point(int qam, const std::vector<int>& sizes, std::uint64_t total, bool need_clip) {
  Verdict v{true, ""};
  std::uint64_t clipped = 0;
  const auto per = total / sizes.size();
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const std::uint64_t runs = per + (i < total % sizes.size() ? 1 : 0);
    const auto s = fixed_point_suite(sizes[i], qam, 8.0, runs, 1000 + sizes[i], Initializer::kMMSE,
                                     g_workers);
    v.pass = v.pass && s.passed();
    clipped += s.clipped_runs;
    v.detail += "N_t=" + std::to_string(sizes[i]) + ": " + std::to_string(s.runs) + " runs, " +
                std::to_string(s.ln_violations) + "+" + std::to_string(s.trajectory_violations) +
                " violations, min margin " + fmt(s.min_margin) + "; ";
  }
  if (need_clip) {
    v.pass = v.pass && clipped > 0;
    v.detail += std::to_string(clipped) + " runs clipped l_opt";
  }
  return v;
}

Verdict criterion1() { return fixed_point(4, {4, 16, 64}, 10000, false); }

Verdict criterion2() {
  Verdict v{true, ""};
  std::uint64_t draws = 0, bad = 0;
  std::uint64_t seed = 20;
  for (double snr : {0.0, 5.0, 10.0}) {
    const auto s = region_uniqueness_experiment(2, snr, 1000, seed++, g_workers);
    draws += s.draws;
    bad += s.violations;
  }
  v.pass = bad == 0 && draws >= 1000;
  v.detail = std::to_string(draws) + " draws (0, 5, 10 dB), " + std::to_string(bad) +
             " without a unique region owner equal to ML";
  return v;
}

// Agreement with ML at 4 dB, where N_t = 2 sits inside [0.8, 0.99].
Verdict criterion3() {
  const double snr = 4.0;
  std::vector<double> p;
  std::vector<std::uint64_t> n;
  Verdict v;
  for (int ntx : {2, 4, 6, 8}) {
    const auto a = las_vs_ml_agreement(ntx, snr, 1000, 3000, 4, Initializer::kMMSE, g_workers);
    p.push_back(a.fraction());
    n.push_back(a.trials);
    v.detail += "N_t=" + std::to_string(ntx) + " " + fmt(a.fraction()) + "; ";
  }
  const bool calibrated = p[0] >= 0.8 && p[0] <= 0.99;
  const auto trend = nondecreasing_trend(p, n, 1, 2.0);
  v.pass = calibrated && trend.holds;
  v.detail += std::to_string(trend.inversions) + " inversions (" + std::to_string(trend.within_noise) +
              " within 2 s.e.)" + (calibrated ? "" : ", N_t=2 outside [0.8, 0.99]");
  return v;
}

Verdict criterion4() {
  ZPdfConfig cfg;
  cfg.trials = 2000;
  cfg.seed = 4000;
  cfg.workers = g_workers;
  const auto r = z_pdf_experiment(cfg);
  Verdict v{true, ""};
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (i > 0) {
      v.pass = v.pass && r[i].stddev < r[i - 1].stddev && r[i].frac_near_zero > r[i - 1].frac_near_zero;
    }
    v.detail += "N_t=" + std::to_string(r[i].n_tx) + " std " + fmt(r[i].stddev) + " |z|<0.05 " +
                fmt(r[i].frac_near_zero) + "; ";
  }
  return v;
}

Verdict criterion5() {
  ExperimentConfig cfg;
  cfg.qam_order = 4;
  cfg.snr_grid_db = {0.0, 30.0};
  cfg.target_ber = 1e-3;
  cfg.min_bit_errors = 100;
  cfg.master_seed = 5000;
  cfg.workers = g_workers;
  cfg.bisection_tolerance_db = 0.2;
  const auto a = snr_for_target_ber(cfg, 16);
  const auto b = snr_for_target_ber(cfg, 64);
  Verdict v;
  const bool sound = a.in_range && b.in_range && a.resolved && b.resolved &&
                     a.hi_db - a.lo_db <= 0.2 && b.hi_db - b.lo_db <= 0.2;
  v.pass = sound && b.gap_db() < a.gap_db();
  v.detail = "gap(16) " + fmt(a.gap_db()) + " dB, gap(64) " + fmt(b.gap_db()) +
             " dB over SISO " + fmt(a.reference_siso_db) + " dB; bracket errors >= " +
             std::to_string(std::min({a.errors_lo, a.errors_hi, b.errors_lo, b.errors_hi}));
  return v;
}

Verdict criterion6() { return fixed_point(16, {16}, 10000, true); }

Verdict criterion7() {
  Verdict v{true, ""};
  double worst_z = 0.0;
  for (int ntx : {4, 16, 64}) {
    const Constellation c(16);
    Rng rng(7000 + ntx);
    const auto tx = draw_transmission(ntx, ntx, c, sigma2_from_snr_db(10.0, ntx, c), rng);
    const GramMatrix g(tx.model);
    LasState s = make_las_state(tx.model, tx.y, g, tx.x);
    for (int k = 0; k < 10000; ++k) {
      const int p = static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * ntx)));
      const double target = c.pam_points()[rng.below(4)];
      apply_move(s, g, p, static_cast<int>(target - s.d(p)));
    }
    const RealVector z_ref = tx.model.h().transpose() * (tx.y - tx.model.h() * s.d);
    worst_z = std::max(worst_z, (s.z - z_ref).norm() / z_ref.norm());
  }
  double worst_cost = 0.0;
  for (std::uint64_t t = 0; t < 1000; ++t) {
    Rng rng(derive_seed(7100, t));
    const int ntx = 1 + static_cast<int>(rng.below(4));
    const Constellation c(rng.bit() ? 16 : 4);
    const auto tx = draw_transmission(ntx, ntx + static_cast<int>(rng.below(3)), c,
                                      sigma2_from_snr_db(5.0, ntx, c), rng);
    const GramMatrix g(tx.model);
    const RealVector hty = tx.model.h().transpose() * tx.y;
    const RealVector d = initial_filter(Initializer::kMF, tx.model, tx.y, 0.0, c).values();
    const double a = residual_cost(tx.model.h(), tx.y, d);
    const double b = quadratic_cost(g.g(), hty, d) + tx.y.squaredNorm();
    worst_cost = std::max(worst_cost, std::abs(a - b) / std::max(std::abs(a), 1e-300));
  }
  v.pass = worst_z < 1e-9 && worst_cost < 1e-9;
  v.detail = "z relative error after 1e4 steps " + fmt(worst_z, 3) +
             ", cost forms relative gap over 1e3 instances " + fmt(worst_cost, 3);
  return v;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict criterion8() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() /
                        ("lasmimo_accept_" + std::to_string(std::chrono::steady_clock::now()
                                                                .time_since_epoch()
                                                                .count()));
  const std::vector<std::vector<std::string>> runs{
      {"ber", "--ntx", "8", "--snr-grid", "0,3,6", "--min-errors", "50"},
      {"ber", "--ntx", "4", "--qam", "16", "--init", "zf", "--snr-grid", "10,14", "--min-errors", "50"},
      {"snr-target", "--ntx-list", "4,8", "--target-ber", "1e-2"},
      {"zpdf", "--ntx-list", "4,16", "--trials", "500"},
      {"verify", "--suite", "lemma2", "--trials", "200"},
      {"verify", "--suite", "theorem2", "--ntx-list", "2,3", "--trials", "200"},
      {"verify", "--suite", "fixedpoint", "--qam", "16", "--ntx-list", "4,8", "--trials", "300"}};
  Verdict v{true, ""};
  int compared = 0;
  std::ostringstream sink;
  const auto no_env = [](const std::string&) -> std::optional<std::string> { return std::nullopt; };
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const fs::path a = root / ("a" + std::to_string(i));
    const fs::path b = root / ("b" + std::to_string(i));
    auto first = runs[i];
    first.insert(first.end(), {"--workers", "1", "--out-dir", a.string(), "--name", "run"});
    const int rc1 = cli::run_cli(first, sink, sink, no_env);
    const std::vector<std::string> replay{runs[i][0], "--config", (a / "run.manifest.json").string(),
                                          "--workers", "4", "--out-dir", b.string()};
    const int rc2 = cli::run_cli(replay, sink, sink, no_env);
    if (rc1 == cli::kUsage || rc1 != rc2) {
      v.pass = false;
      v.detail += runs[i][0] + " exit codes " + std::to_string(rc1) + "/" + std::to_string(rc2) + "; ";
      continue;
    }
    for (const auto& entry : fs::directory_iterator(a)) {
      const auto name = entry.path().filename().string();
      if (name.ends_with(".manifest.json")) continue;
      ++compared;
      if (slurp(entry.path()) != slurp(b / name)) {
        v.pass = false;
        v.detail += name + " differs; ";
      }
    }
  }
  std::error_code ec;
  fs::remove_all(root, ec);
  v.detail += std::to_string(compared) + " CSV/JSON files replayed from manifests with 4 workers";
  return v;
}

// Depth check on LAS outputs, reported alongside the criteria.
Verdict invariant_t1() {
  std::vector<double> p;
  std::vector<std::uint64_t> n;
  Verdict v;
  for (int ntx : {2, 4, 8}) {
    const auto s = region_depth_experiment(ntx, 6.0, 500, 9000, Initializer::kMMSE,
                                           kDefaultTupleBudget, g_workers);
    p.push_back(s.fraction());
    n.push_back(s.depth1_members);
    v.detail += "N_t=" + std::to_string(ntx) + " " + fmt(s.fraction()) +
                (s.exhaustive ? "" : " (sampled)") + "; ";
  }
  const auto trend = nondecreasing_trend(p, n, 0);
  v.pass = trend.holds;
  v.detail += "fraction of depth-1 LAS outputs also in the full-depth region";
  return v;
}

struct Entry {
  std::string id;
  std::string title;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::string only;
  bool report = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criterion" && i + 1 < argc) {
      only = argv[++i];
    } else if (a == "--workers" && i + 1 < argc) {
      g_workers = std::max(0, std::atoi(argv[++i]));
    } else if (a == "--report") {
      report = true;
    } else {
      std::cerr << "usage: acceptance [--criterion N] [--workers W] [--report]\n";
      return 2;
    }
  }
  if (g_workers == 0) g_workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  const std::vector<Entry> entries{
      {"1", "fixed point, 4-QAM", criterion1},
      {"2", "region uniqueness equals ML", criterion2},
      {"3", "LAS/ML agreement grows with N_t", criterion3},
      {"4", "z concentration", criterion4},
      {"5", "gap to SISO shrinks, N_t 16 -> 64", criterion5},
      {"6", "fixed point, 16-QAM with clipping", criterion6},
      {"7", "numerical consistency", criterion7},
      {"8", "reproducibility from manifests", criterion8},
      {"t1", "full-depth region fraction grows with N_t", invariant_t1}};

  bool all = true;
  bool found = false;
  for (const auto& e : entries) {
    if (!only.empty() && e.id != only) continue;
    found = true;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = e.run();
    } catch (const std::exception& ex) {
      v = {false, std::string("exception: ") + ex.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    all = all && v.pass;
    std::cout << "criterion " << e.id << ": " << (v.pass ? "PASS" : "FAIL") << "  " << e.title
              << "  [" << v.detail << "]  (" << fmt(secs, 3) << " s)" << std::endl;
  }
  if (!found) {
    std::cerr << "unknown criterion '" << only << "'\n";
    return 2;
  }
  if (report) return 0;
  return all ? 0 : 1;
}
