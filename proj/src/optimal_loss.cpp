#include "ermasym/optimal_loss.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>

#include "ermasym/csv.hpp"
#include "ermasym/errors.hpp"
#include "ermasym/limits.hpp"
#include "ermasym/parallel.hpp"

namespace ermasym {

std::string to_string(Convexity c) {
  switch (c) {
    case Convexity::ProvenSufficient: return "ProvenSufficient";
    case Convexity::NumericallyConvex: return "NumericallyConvex";
    case Convexity::NonConvexDetected: return "NonConvexDetected";
  }
  return "?";
}

LemmaCheck lemma_d1_check(const LinkModel& model, double sigma, const std::vector<double>& grid) {
  const SmoothedDensity density(model, sigma);
  const double tau2 = 1.0 + sigma * sigma;
  std::vector<double> margins(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    const auto pt = density(grid[i]);
    // (log p)'' + 1/tau^2 = (Var[U | w] - 1) / (sigma^2 tau^2)
    margins[i] = std::isfinite(pt.log_p) ? (pt.post_var - 1.0) / (sigma * sigma * tau2) : 0.0;
  });
  const double worst = grid.empty() ? 0.0 : *std::max_element(margins.begin(), margins.end());
  return {worst <= 1e-9, worst};
}

namespace {

// Models for which the concavity condition is known analytically.
bool condition_proven(const LinkModel& model) {
  return model.kind() == ModelKind::Signed ||
         (model.kind() == ModelKind::GaussianSY && model.gaussian_var() <= 1.0);
}

}  // namespace

LossSpec OptLossTable::as_loss() const {
  auto spline = std::make_shared<HermiteSpline>(grid, dloss, d2loss);
  const auto k = static_cast<std::size_t>(
      std::distance(loss.begin(), std::min_element(loss.begin(), loss.end())));
  spline->anchor_integral(grid[k], loss[k]);
  return LossSpec::tabulated(std::move(spline), "optimal-" + model_name);
}

void OptLossTable::save_csv(const std::filesystem::path& path,
                            const SaddleSolution* achieved) const {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << "# sigma_opt=" << csv::num(sigma_opt) << ", alpha1=" << csv::num(alpha1)
      << ", alpha2=" << csv::num(alpha2) << ", delta=" << csv::num(delta)
      << ", model=" << model_name << "\n";
  out << "# convexity=" << to_string(convexity) << ", lemma_margin=" << csv::num(lemma_margin)
      << ", fisher=" << csv::num(fisher) << "\n";
  if (achieved)
    out << "# achieved mu=" << csv::num(achieved->mu) << ", alpha=" << csv::num(achieved->alpha)
        << ", lambda=" << csv::num(achieved->lambda)
        << ", corr=" << csv::num(achieved->correlation) << "\n";
  out << "w,loss,dloss,d2loss,loss_display,dloss_display\n";
  for (std::size_t i = 0; i < grid.size(); ++i)
    out << csv::num(grid[i]) << ',' << csv::num(loss[i]) << ',' << csv::num(dloss[i]) << ','
        << csv::num(d2loss[i]) << ',' << csv::num((loss[i] - display_offset) / display_scale)
        << ',' << csv::num(dloss[i] / display_scale) << '\n';
}

OptLossTable build_optimal_loss(const LinkModel& model, double delta, const OptLossOptions& opts) {
  if (!(delta > 1.0)) throw InvalidArgument("build_optimal_loss: delta must exceed 1");
  if (opts.points < 16) throw InvalidArgument("build_optimal_loss: grid too small");
  OptLossTable t;
  t.model_name = model.name();
  t.delta = delta;
  t.sigma_opt = opts.sigma_opt ? *opts.sigma_opt : sigma_opt(model, delta).sigma_opt;
  const double s = t.sigma_opt;
  const double s2 = s * s;
  t.fisher = fisher_information_w(model, s);
  const double denom = delta * (s2 * t.fisher + t.fisher - 1.0);
  t.alpha1 = (1.0 - s2 * t.fisher) / denom;
  t.alpha2 = 1.0 / denom;

  const double w_max = opts.w_max > 0.0 ? opts.w_max : 8.0 + 8.0 * s;
  const std::size_t n = opts.points;
  std::vector<double> v(n), h(n), dh(n), d2h(n), post_var(n);
  const SmoothedDensity density(model, s);
  parallel_for(n, [&](std::size_t i) {
    v[i] = -w_max + 2.0 * w_max * static_cast<double>(i) / static_cast<double>(n - 1);
    const auto pt = density(v[i]);
    h[i] = 0.5 * (1.0 + t.alpha1) * v[i] * v[i] + t.alpha2 * pt.log_p;
    dh[i] = (1.0 + t.alpha1) * v[i] + t.alpha2 * pt.score;
    d2h[i] = (1.0 + t.alpha1) + t.alpha2 * pt.d2_log_p;
    post_var[i] = pt.post_var;
  });

  const double tau2 = 1.0 + s2;
  double margin = -std::numeric_limits<double>::infinity();
  for (double pv : post_var) margin = std::max(margin, (pv - 1.0) / (s2 * tau2));
  t.lemma_margin = margin;
  const bool lemma_holds = margin <= 1e-9;

  // The conjugate construction needs h strictly convex: h' must increase.
  bool convex = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(d2h[i] > 0.0) || !std::isfinite(h[i])) convex = false;
    if (i > 0 && !(dh[i] > dh[i - 1])) convex = false;
  }
  t.grid = dh;
  t.loss.resize(n);
  t.dloss.resize(n);
  t.d2loss.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    t.loss[i] = dh[i] * v[i] - h[i] - 0.5 * dh[i] * dh[i];
    t.dloss[i] = v[i] - dh[i];
    t.d2loss[i] = 1.0 / d2h[i] - 1.0;
  }
  const double floor = *std::min_element(t.loss.begin(), t.loss.end());
  for (double& l : t.loss) l -= floor;

  if (!convex) {
    t.convexity = Convexity::NonConvexDetected;
  } else {
    for (std::size_t i = 1; i < n; ++i)
      if (t.dloss[i] < t.dloss[i - 1]) convex = false;
    if (!convex)
      t.convexity = Convexity::NonConvexDetected;
    else if (lemma_holds && condition_proven(model))
      t.convexity = Convexity::ProvenSufficient;
    else
      t.convexity = Convexity::NumericallyConvex;
  }

  if (t.convexity != Convexity::NonConvexDetected) {
    const LossSpec l = t.as_loss();
    const double l1 = l.value(1.0), l2 = l.value(2.0);
    t.display_offset = l1;
    t.display_scale = l2 - l1;
    if (!(std::abs(t.display_scale) > 0.0)) t.display_scale = 1.0;
  }
  return t;
}

SaddleSolution verify_achievability(const OptLossTable& table, const LinkModel& model,
                                    const SolverOptions& opts) {
  if (table.convexity == Convexity::NonConvexDetected)
    throw AchievabilityFailed("optimal loss table is not convex");
  const SaddleSolution sol = solve_system(table.as_loss(), model, table.delta, opts);
  const double e_mu = std::abs(sol.mu - 1.0);
  const double e_alpha = std::abs(sol.alpha - table.sigma_opt);
  const double e_lambda = std::abs(sol.lambda - 1.0);
  if (std::max({e_mu, e_alpha, e_lambda}) > 1e-4)
    throw AchievabilityFailed("expected (1, " + csv::num(table.sigma_opt) + ", 1), got (" +
                              csv::num(sol.mu) + ", " + csv::num(sol.alpha) + ", " +
                              csv::num(sol.lambda) + "); residuals " +
                              csv::num(sol.residuals[0]) + ", " + csv::num(sol.residuals[1]) +
                              ", " + csv::num(sol.residuals[2]));
  return sol;
}

}  // namespace ermasym
