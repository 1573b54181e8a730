// Deliberately naive reference routines used only by tests. They recompute
// everything from scratch and share no arithmetic with the library's
// incremental paths.
#ifndef LASMIMO_TESTS_ORACLES_HPP
#define LASMIMO_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline std::vector<double> pam(int qam) {
  const int l = static_cast<int>(std::lround(std::sqrt(qam)));
  std::vector<double> pts;
  for (int i = 0; i < l; ++i) pts.push_back(2.0 * i - (l - 1));
  return pts;
}

inline double residual(const Mat& h, const Vec& y, const Vec& d) {
  double s = 0.0;
  for (int i = 0; i < h.rows(); ++i) {
    double acc = y(i);
    for (int j = 0; j < h.cols(); ++j) acc -= h(i, j) * d(j);
    s += acc * acc;
  }
  return s;
}

// Every candidate in lexicographic order via an odometer.
template <typename F>
void for_each_candidate(int dim, int qam, F&& f) {
  const auto pts = pam(qam);
  std::vector<int> idx(static_cast<std::size_t>(dim), 0);
  Vec d(dim);
  while (true) {
    for (int p = 0; p < dim; ++p) d(p) = pts[idx[p]];
    f(d);
    int p = dim - 1;
    while (p >= 0 && idx[p] == static_cast<int>(pts.size()) - 1) idx[p--] = 0;
    if (p < 0) return;
    ++idx[p];
  }
}

// argmin of ||y - Hd||^2 by direct evaluation; first (lexicographically
// smallest) minimiser wins.
inline Vec ml(const Mat& h, const Vec& y, int qam) {
  Vec best;
  double best_cost = std::numeric_limits<double>::infinity();
  for_each_candidate(static_cast<int>(h.cols()), qam, [&](const Vec& d) {
    const double c = residual(h, y, d);
    if (c < best_cost) {
      best_cost = c;
      best = d;
    }
  });
  return best;
}

inline double nearest(double v, int qam) {
  const auto pts = pam(qam);
  double best = pts.front();
  for (double p : pts) {
    if (std::abs(v - p) < std::abs(v - best) ||
        (std::abs(v - p) == std::abs(v - best) && p > best)) {
      best = p;
    }
  }
  return best;
}

inline Vec mmse_start(const Mat& h, const Vec& y, double sigma2, int qam) {
  const auto pts = pam(qam);
  double er = 0.0;
  for (double p : pts) er += p * p;
  er /= static_cast<double>(pts.size());
  const Mat a = h.transpose() * h + (sigma2 / 2.0 / er) * Mat::Identity(h.cols(), h.cols());
  const Vec soft = a.inverse() * (h.transpose() * y);
  Vec d(soft.size());
  for (int i = 0; i < soft.size(); ++i) d(i) = nearest(soft(i), qam);
  return d;
}

// Greedy single-symbol descent: each round tries every coordinate and every
// admissible new value, scores the move by the full residual, and applies the
// best strictly improving one (smallest coordinate, then smallest move, on
// ties). Stops when nothing improves.
inline Vec greedy_descent(const Mat& h, const Vec& y, Vec d, int qam, int* steps = nullptr) {
  const auto pts = pam(qam);
  int count = 0;
  while (true) {
    const double here = residual(h, y, d);
    double best_gain = 0.0;
    int best_p = -1;
    double best_v = 0.0;
    for (int p = 0; p < d.size(); ++p) {
      for (double v : pts) {
        if (v == d(p)) continue;
        Vec trial = d;
        trial(p) = v;
        const double gain = residual(h, y, trial) - here;
        const bool better = gain < best_gain - 1e-12 * std::max(1.0, here);
        const bool tie_smaller_move = best_p == p && std::abs(gain - best_gain) <= 1e-12 * std::max(1.0, here) &&
                                      std::abs(v - d(p)) < std::abs(best_v - d(p));
        if (better || tie_smaller_move) {
          best_gain = gain;
          best_p = p;
          best_v = v;
        }
      }
    }
    if (best_p < 0) break;
    d(best_p) = best_v;
    ++count;
  }
  if (steps) *steps = count;
  return d;
}

}  // namespace oracle

#endif  // LASMIMO_TESTS_ORACLES_HPP
