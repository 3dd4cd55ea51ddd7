#include "ermasym/separability.hpp"

#include <cmath>
#include <limits>

#include "ermasym/errors.hpp"
#include "ermasym/parallel.hpp"

namespace ermasym {

double separability_threshold(const LinkModel& model, const QuadratureOptions& quad) {
  const QuadratureRule rule(model, quad);
  auto g = [&](double c) { return expect_negpart_sq(rule, c); };
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // g is convex with g(0) = 1/2. A negative mean pulls the minimizer below 0.
  const double dir = model.mean_sy() >= 0.0 ? 1.0 : -1.0;
  double lo = 0.0, mid = dir, hi = 2.0 * dir;
  double g_mid = g(mid), g_hi = g(hi);
  if (g_mid > g(0.0)) {
    hi = mid;
    mid = 0.5 * mid;
    g_mid = g(mid);
  } else {
    while (g_hi < g_mid) {
      // Still decreasing far out: the infimum is approached as c grows.
      if (std::abs(hi) > 1e8 || g_hi < 1e-12) return kInf;
      lo = mid;
      mid = hi;
      g_mid = g_hi;
      hi *= 2.0;
      g_hi = g(hi);
    }
  }
  const double a = std::min(lo, hi), b = std::max(lo, hi);
  const double c_star = golden_minimize(g, a, b, 1e-9 * std::max(1.0, std::abs(b)));
  const double g_min = g(c_star);
  if (!(g_min >= 1e-12)) return kInf;
  return 1.0 / g_min;
}

std::vector<ThresholdPoint> threshold_curve(const std::vector<double>& eps_grid, double cap,
                                            const QuadratureOptions& quad) {
  for (double e : eps_grid)
    if (!(e > 0.0 && e <= 0.5))
      throw InvalidArgument("threshold_curve: flip probabilities must lie in (0, 1/2]");
  std::vector<ThresholdPoint> out(eps_grid.size());
  parallel_for(eps_grid.size(), [&](std::size_t i) {
    const double d = separability_threshold(LinkModel::noisy_signed(eps_grid[i]), quad);
    out[i] = {eps_grid[i], std::min(d, cap)};
  });
  return out;
}

}  // namespace ermasym
