#include "ermasym/saddle.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include "ermasym/csv.hpp"
#include "ermasym/errors.hpp"
#include "ermasym/parallel.hpp"
#include "ermasym/separability.hpp"

namespace ermasym {

double SaddleSolution::max_residual() const {
  return std::max({std::abs(residuals[0]), std::abs(residuals[1]), std::abs(residuals[2])});
}

ScalarSaddlePoint ScalarSaddlePoint::from_solution(const SaddleSolution& sol) {
  const double sd = std::sqrt(sol.delta);
  return {sol.alpha, sol.mu, sol.alpha / sd, sol.alpha / (sol.lambda * sd)};
}

double StationarityResiduals::max_abs() const {
  return std::max({std::abs(d_mu), std::abs(d_alpha), std::abs(d_tau), std::abs(d_gamma)});
}

namespace {

struct Moments {
  double sy_dx = 0.0;   // E[SY M']
  double dx_sq = 0.0;   // E[M'^2]
  double g_dx = 0.0;    // E[G M']
};

Moments envelope_moments(const LossSpec& loss, const QuadratureRule& rule, double mu,
                         double alpha, double lambda) {
  std::vector<double> kinks;
  KinkLine line;
  const KinkLine* kp = nullptr;
  if (loss.smoothness() == Smoothness::C0Convex) {
    kinks = loss.envelope_kinks(lambda);
    line = KinkLine{alpha, mu, kinks};
    kp = &line;
  }
  Moments m;
  rule.visit(kp, [&](double g, double sy, double w) {
    const double d = loss.envelope_dx(alpha * g + mu * sy, lambda);
    m.sy_dx += w * sy * d;
    m.dx_sq += w * d * d;
    m.g_dx += w * g * d;
  });
  if (!std::isfinite(m.sy_dx) || !std::isfinite(m.dx_sq) || !std::isfinite(m.g_dx))
    throw NonFiniteIntegrand("envelope derivative is not finite on the node set");
  return m;
}

std::array<double, 3> residuals_from(const Moments& m, double delta, double alpha,
                                     double lambda) {
  return {m.sy_dx, lambda * lambda * delta * m.dx_sq - alpha * alpha,
          lambda * delta * m.g_dx - alpha};
}

double max_abs(const std::array<double, 3>& r) {
  return std::max({std::abs(r[0]), std::abs(r[1]), std::abs(r[2])});
}

struct Point {
  double mu, alpha, lambda;
};

bool diverged(const Point& p) {
  return !std::isfinite(p.mu) || !std::isfinite(p.alpha) || !std::isfinite(p.lambda) ||
         p.alpha > 1e6 || p.lambda > 1e8 || std::abs(p.mu) > 1e6;
}

class Solver {
 public:
  Solver(const LossSpec& loss, const QuadratureRule& rule, double delta, const SolverOptions& opts)
      : loss_(loss), rule_(rule), delta_(delta), opts_(opts) {}

  std::array<double, 3> residuals(const Point& p) const {
    return residuals_from(envelope_moments(loss_, rule_, p.mu, p.alpha, p.lambda), delta_,
                          p.alpha, p.lambda);
  }

  // Root in mu of E[SY M'(alpha G + mu SY; lambda)], which is nondecreasing in mu.
  double solve_mu(double mu0, double alpha, double lambda) const {
    auto f = [&](double mu) { return envelope_moments(loss_, rule_, mu, alpha, lambda).sy_dx; };
    const double f0 = f(mu0);
    if (f0 == 0.0) return mu0;
    // Search in the direction that raises or lowers E[SY M'] toward zero.
    const double dir = f0 < 0.0 ? 1.0 : -1.0;
    double step = 0.1 * std::max(std::abs(mu0), 0.1);
    double a = mu0, fa = f0, b = mu0, fb = f0;
    for (int k = 0; k < 80; ++k) {
      b = a + dir * step;
      fb = f(b);
      if ((fb > 0.0) != (f0 > 0.0) || fb == 0.0) break;
      a = b;
      fa = fb;
      step *= 2.0;
      if (std::abs(b) > 1e6) throw DivergingIterates("bias iterate grows without bound");
    }
    if (fb != 0.0 && (fb > 0.0) == (f0 > 0.0))
      throw NoConvergence("no sign change of the orthogonality equation in mu");
    if (fb == 0.0) return b;
    double lo = std::min(a, b), hi = std::max(a, b);
    double flo = lo == a ? fa : fb, fhi = hi == a ? fa : fb;
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(
        f, lo, hi, flo, fhi, boost::math::tools::eps_tolerance<double>(52), iters);
    return 0.5 * (r.first + r.second);
  }

  Point fixed_point_map(const Point& p) const {
    const double mu = solve_mu(p.mu, p.alpha, p.lambda);
    const Moments m = envelope_moments(loss_, rule_, mu, p.alpha, p.lambda);
    const double alpha = p.lambda * std::sqrt(delta_ * m.dx_sq);
    if (!(m.g_dx > 0.0)) throw NoConvergence("E[G M'] is not positive at the iterate");
    const double lambda = p.alpha / (delta_ * m.g_dx);
    return {mu, alpha, lambda};
  }

  // One guarded Newton step with a central-difference Jacobian. Returns false
  // when no step along the Newton direction lowers the residual.
  bool newton_step(Point& p, std::array<double, 3>& r) const {
    Eigen::Matrix3d jac;
    const double v[3] = {p.mu, p.alpha, p.lambda};
    for (int j = 0; j < 3; ++j) {
      const double h = 1e-6 * std::max(std::abs(v[j]), 1e-3);
      double plus[3] = {v[0], v[1], v[2]}, minus[3] = {v[0], v[1], v[2]};
      plus[j] += h;
      minus[j] -= h;
      const auto rp = residuals({plus[0], plus[1], plus[2]});
      const auto rm = residuals({minus[0], minus[1], minus[2]});
      for (int i = 0; i < 3; ++i) jac(i, j) = (rp[i] - rm[i]) / (2.0 * h);
    }
    const Eigen::Vector3d rhs(r[0], r[1], r[2]);
    const Eigen::Vector3d dv = jac.fullPivLu().solve(rhs);
    if (!dv.allFinite()) return false;
    const double current = max_abs(r);
    double t = 1.0;
    for (int k = 0; k < 30; ++k, t *= 0.5) {
      const Point q{p.mu - t * dv[0], p.alpha - t * dv[1], p.lambda - t * dv[2]};
      if (!(q.alpha > 0.0) || !(q.lambda > 0.0)) continue;
      const auto rq = residuals(q);
      if (max_abs(rq) < current) {
        p = q;
        r = rq;
        return true;
      }
    }
    return false;
  }

  SaddleSolution run(Point p) const {
    auto r = residuals(p);
    double eta = opts_.damping;
    double last_step = std::numeric_limits<double>::infinity();
    // Newton takes over once the relative fixed-point step drops below this;
    // tightened each time Newton fails to finish.
    double handover = 2e-2;
    int it = 0;
    while (max_abs(r) > opts_.tol && it < opts_.max_iter) {
      const Point f = fixed_point_map(p);
      ++it;
      // The residuals scale with alpha and lambda, so damping is driven by the
      // relative length of the fixed-point step.
      const double step = std::sqrt(std::pow((f.mu - p.mu) / std::max(std::abs(p.mu), 1e-3), 2) +
                                    std::pow((f.alpha - p.alpha) / p.alpha, 2) +
                                    std::pow((f.lambda - p.lambda) / p.lambda, 2));
      if (step > last_step) eta = std::max(0.5 * eta, 0.05);
      last_step = step;
      p = {(1.0 - eta) * p.mu + eta * f.mu, (1.0 - eta) * p.alpha + eta * f.alpha,
           (1.0 - eta) * p.lambda + eta * f.lambda};
      if (diverged(p)) throw DivergingIterates("alpha or lambda grows without bound");
      r = residuals(p);
      if (step < handover) {
        for (int k = 0; k < 40 && max_abs(r) > opts_.tol; ++k, ++it) {
          if (!newton_step(p, r)) break;
          if (diverged(p)) throw DivergingIterates("alpha or lambda grows without bound");
        }
        handover *= 0.1;
      }
    }
    // A few extra Newton steps take the residual to round-off, which keeps
    // derived quantities (for example gamma = alpha / (lambda sqrt(delta)))
    // accurate when lambda is small.
    if (max_abs(r) <= opts_.tol) {
      for (int k = 0; k < 3 && max_abs(r) > 1e-14; ++k)
        if (!newton_step(p, r)) break;
    }
    if (!(max_abs(r) <= opts_.tol))
      throw NoConvergence("residual " + csv::num(max_abs(r)) + " above tolerance after " +
                          std::to_string(it) + " iterations");
    SaddleSolution s;
    s.delta = delta_;
    s.mu = p.mu;
    s.alpha = p.alpha;
    s.lambda = p.lambda;
    s.sigma_eff = p.alpha / p.mu;
    s.correlation = p.mu / std::hypot(p.mu, p.alpha);
    s.residuals = r;
    s.iterations = it;
    s.uniqueness = loss_.strictly_convex_c1() ? Uniqueness::VerifiedClassConditions
                                              : Uniqueness::Unverified;
    return s;
  }

 private:
  const LossSpec& loss_;
  const QuadratureRule& rule_;
  double delta_;
  const SolverOptions& opts_;
};

Point initial_point(const LinkModel& model, double delta) {
  const double m = model.mean_sy();
  if (m > 1e-3) {
    const SaddleSolution ls = ls_closed_form(model, delta);
    return {ls.mu, ls.alpha, ls.lambda};
  }
  return {std::max(m, 0.1), 1.0 / std::sqrt(delta - 1.0), 0.5 / (delta - 1.0)};
}

}  // namespace

std::array<double, 3> system_residuals(const LossSpec& loss, const QuadratureRule& rule,
                                       double delta, double mu, double alpha, double lambda) {
  return residuals_from(envelope_moments(loss, rule, mu, alpha, lambda), delta, alpha, lambda);
}

SaddleSolution solve_system(const LossSpec& loss, const LinkModel& model, double delta,
                            const SolverOptions& opts) {
  if (!(delta > 1.0)) throw InvalidArgument("solve_system: delta must exceed 1");
  if (opts.n_starts < 1 || opts.max_iter < 0 || !(opts.tol > 0.0) ||
      !(opts.damping > 0.0 && opts.damping <= 1.0))
    throw InvalidArgument("solve_system: invalid solver options");
  if (loss.vanishing_right_tail()) {
    const double threshold = opts.separability_threshold
                                 ? *opts.separability_threshold
                                 : separability_threshold(model, opts.quadrature);
    if (delta <= threshold)
      throw SeparableRegime("data is separable at delta=" + csv::num(delta) +
                            " (threshold " + csv::num(threshold) + ")");
  }
  const QuadratureRule rule(model, opts.quadrature);
  const Solver solver(loss, rule, delta, opts);
  const Point base = initial_point(model, delta);

  const auto starts = static_cast<std::size_t>(opts.n_starts);
  std::vector<Point> inits(starts, base);
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> jitter(-0.7, 0.7);
  for (std::size_t k = 1; k < starts; ++k) {
    inits[k].mu = base.mu * std::exp(jitter(rng));
    inits[k].alpha = base.alpha * std::exp(jitter(rng));
    inits[k].lambda = base.lambda * std::exp(jitter(rng));
  }
  std::vector<std::optional<SaddleSolution>> found(starts);
  std::vector<std::exception_ptr> errors(starts);
  parallel_for(starts, [&](std::size_t k) {
    try {
      found[k] = solver.run(inits[k]);
    } catch (const SolverError&) {
      errors[k] = std::current_exception();
    }
  });

  std::optional<SaddleSolution> best;
  double spread = 0.0;
  for (std::size_t i = 0; i < starts; ++i) {
    if (!found[i]) continue;
    if (!best || found[i]->max_residual() < best->max_residual()) best = found[i];
    for (std::size_t j = 0; j < i; ++j) {
      if (!found[j]) continue;
      spread = std::max(spread, std::sqrt(std::pow(found[i]->mu - found[j]->mu, 2) +
                                          std::pow(found[i]->alpha - found[j]->alpha, 2) +
                                          std::pow(found[i]->lambda - found[j]->lambda, 2)));
    }
  }
  if (!best) std::rethrow_exception(errors.front());
  best->multistart_spread = spread;

  if (opts.refinement_check) {
    const auto fine = system_residuals(loss, rule.refined(), delta, best->mu, best->alpha,
                                       best->lambda);
    const double gap = max_abs(fine);
    if (gap > opts.quadrature.refinement_tol)
      throw QuadratureNonConvergence("refined quadrature moves the residual to " +
                                     csv::num(gap));
  }
  return *best;
}

SaddleSolution ls_closed_form(const LinkModel& model, double delta) {
  if (!(delta > 1.0)) throw InvalidArgument("ls_closed_form: delta must exceed 1");
  const double m = model.mean_sy();
  if (!(m > 0.0)) throw MeanNotPositive("ls_closed_form: E[SY] must be positive");
  SaddleSolution s;
  s.delta = delta;
  s.mu = m;
  s.alpha = std::sqrt(std::max(0.0, 1.0 - m * m)) / std::sqrt(delta - 1.0);
  s.lambda = 1.0 / (2.0 * (delta - 1.0));
  s.sigma_eff = s.alpha / s.mu;
  s.correlation = s.mu / std::hypot(s.mu, s.alpha);
  s.residuals = {0.0, 0.0, 0.0};
  s.uniqueness = Uniqueness::VerifiedClassConditions;
  return s;
}

StationarityResiduals stationarity_check(const LossSpec& loss, const LinkModel& model,
                                         double delta, const ScalarSaddlePoint& pt,
                                         const QuadratureOptions& quad) {
  const QuadratureRule rule(model, quad);
  const double lambda = pt.tau / pt.gamma;
  const Moments m = envelope_moments(loss, rule, pt.mu, pt.alpha, lambda);
  // dM/dlambda = -(dM/dx)^2 / 2
  const double e_dlambda = -0.5 * m.dx_sq;
  const double sd = std::sqrt(delta);
  StationarityResiduals r;
  r.d_mu = m.sy_dx;
  r.d_alpha = m.g_dx - pt.gamma / sd;
  r.d_tau = 0.5 * pt.gamma + e_dlambda / pt.gamma;
  r.d_gamma = 0.5 * pt.tau - pt.alpha / sd - pt.tau / (pt.gamma * pt.gamma) * e_dlambda;
  return r;
}

double second_order_check(const LossSpec& loss, const LinkModel& model,
                          const SaddleSolution& sol, const QuadratureOptions& quad) {
  if (loss.smoothness() != Smoothness::C2)
    throw NotTwiceDifferentiable(loss.name() + " is not twice differentiable");
  const QuadratureRule rule(model, quad);
  double e = 0.0;
  rule.visit(nullptr, [&](double g, double sy, double w) {
    e += w * loss.envelope_second_derivative_ratio(sol.alpha * g + sol.mu * sy, sol.lambda);
  });
  return std::abs(1.0 - sol.lambda * sol.delta * e);
}

}  // namespace ermasym
