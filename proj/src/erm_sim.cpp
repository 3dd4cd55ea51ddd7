#include "ermasym/erm_sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "ermasym/errors.hpp"
#include "ermasym/parallel.hpp"

namespace ermasym {

std::size_t Experiment::samples() const {
  return static_cast<std::size_t>(std::llround(delta * static_cast<double>(n)));
}

std::string ExperimentSummary::warning_text() const {
  std::string out;
  for (const auto& w : warnings) {
    if (!out.empty()) out += ';';
    out += w;
  }
  return out;
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Rows are y_i a_i; only these products enter the empirical risk.
struct Problem {
  MatrixXd z;
  VectorXd signal;
};

Problem draw_problem(const Experiment& exp, std::size_t trial) {
  const std::size_t m = exp.samples();
  const std::size_t n = exp.n;
  std::seed_seq seq{static_cast<std::uint32_t>(exp.seed), static_cast<std::uint32_t>(exp.seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32),
                    0x5eedu};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal;
  Problem p;
  p.z.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  p.signal = VectorXd::Zero(static_cast<Eigen::Index>(n));
  if (!exp.random_signal) {
    p.signal[0] = 1.0;
    const auto pairs = exp.model.sample_pairs(m, exp.seed, trial);
    for (std::size_t i = 0; i < m; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const double y = pairs[i].y;
      p.z(r, 0) = y * pairs[i].s;
      for (Eigen::Index j = 1; j < p.z.cols(); ++j) p.z(r, j) = y * normal(rng);
    }
    return p;
  }
  if (!exp.model.has_label_function())
    throw InvalidArgument("random signal direction needs a model with a label function");
  for (Eigen::Index j = 0; j < p.signal.size(); ++j) p.signal[j] = normal(rng);
  p.signal.normalize();
  std::uniform_real_distribution<double> uniform;
  for (Eigen::Index i = 0; i < p.z.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.z.cols(); ++j) p.z(i, j) = normal(rng);
    const double s = p.z.row(i).dot(p.signal);
    const double y = exp.model.draw_label(s, uniform(rng));
    p.z.row(i) *= y;
  }
  return p;
}

double objective(const LossSpec& loss, const VectorXd& margins) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < margins.size(); ++i) total += loss.value(margins[i]);
  return total / static_cast<double>(margins.size());
}

VectorXd gradient(const LossSpec& loss, const MatrixXd& z, const VectorXd& margins) {
  VectorXd d(margins.size());
  for (Eigen::Index i = 0; i < margins.size(); ++i) d[i] = loss.derivative(margins[i]);
  return z.transpose() * d / static_cast<double>(margins.size());
}

struct Fit {
  VectorXd x;
  double objective;
  double grad_norm;
  bool converged;
  bool unbounded;
};

// Exact minimizer of (1/m) sum (c2 t - 1)^2 / c1.
Fit fit_square(const LossSpec& loss, const MatrixXd& z) {
  const VectorXd ones = VectorXd::Ones(z.rows());
  Fit f;
  f.x = (z.transpose() * z).ldlt().solve(z.transpose() * ones) / loss.inner_scale();
  const VectorXd margins = z * f.x;
  f.objective = objective(loss, margins);
  f.grad_norm = gradient(loss, z, margins).norm();
  f.converged = true;
  f.unbounded = false;
  return f;
}

Fit fit_gradient_descent(const LossSpec& loss, const MatrixXd& z, const OptimizerConfig& cfg) {
  const double tol = cfg.grad_tol * std::sqrt(static_cast<double>(z.cols()));
  Fit f{VectorXd::Zero(z.cols()), 0.0, 0.0, false, false};
  VectorXd margins = VectorXd::Zero(z.rows());
  f.objective = objective(loss, margins);
  double step = 1.0;
  int stalled = 0;
  for (int k = 0; k < cfg.steps; ++k) {
    const VectorXd g = gradient(loss, z, margins);
    f.grad_norm = g.norm();
    if (f.grad_norm <= tol) {
      f.converged = true;
      break;
    }
    const VectorXd zg = z * g;
    const double g2 = f.grad_norm * f.grad_norm;
    double t = std::min(step * 2.0, 1e6);
    bool accepted = false;
    for (int ls = 0; ls < 80; ++ls, t *= cfg.armijo_beta) {
      const VectorXd trial = margins - t * zg;
      const double obj = objective(loss, trial);
      if (!std::isfinite(obj)) continue;
      if (obj <= f.objective - cfg.armijo_c * t * g2) {
        f.x -= t * g;
        margins = trial;
        f.objective = obj;
        accepted = true;
        break;
      }
    }
    if (!std::isfinite(f.objective))
      throw OptimizerDiverged("empirical risk became non-finite");
    if (!accepted) {
      // No decrease along the gradient at any step size: numerically stationary.
      if (++stalled > 2) break;
      continue;
    }
    step = t;
    if (f.x.norm() > cfg.divergence_norm) {
      f.unbounded = true;
      break;
    }
  }
  if (!f.converged) f.grad_norm = gradient(loss, z, margins).norm();
  return f;
}

double spectral_norm(const MatrixXd& z) {
  VectorXd v = VectorXd::Ones(z.cols()).normalized();
  double s = 0.0;
  for (int k = 0; k < 100; ++k) {
    const VectorXd w = z.transpose() * (z * v);
    const double nw = w.norm();
    if (!(nw > 0.0)) return 0.0;
    const double next = std::sqrt(nw);
    v = w / nw;
    if (std::abs(next - s) <= 1e-10 * next) return next;
    s = next;
  }
  return s;
}

// Subgradient descent with steps 1 / (L sqrt(k)), keeping the best iterate.
Fit fit_subgradient(const LossSpec& loss, const MatrixXd& z, const OptimizerConfig& cfg) {
  const double lipschitz = spectral_norm(z) / std::sqrt(static_cast<double>(z.rows())) *
                           std::max(1.0, std::abs(loss.inner_scale()) / loss.outer_scale());
  VectorXd x = VectorXd::Zero(z.cols());
  VectorXd margins = VectorXd::Zero(z.rows());
  Fit best{x, objective(loss, margins), 0.0, false, false};
  for (int k = 1; k <= cfg.steps; ++k) {
    const VectorXd g = gradient(loss, z, margins);
    const double gn = g.norm();
    if (gn == 0.0) {
      best.converged = true;
      break;
    }
    x -= g / (lipschitz * std::sqrt(static_cast<double>(k)));
    margins = z * x;
    const double obj = objective(loss, margins);
    if (!std::isfinite(obj)) throw OptimizerDiverged("empirical risk became non-finite");
    if (obj < best.objective) {
      best.x = x;
      best.objective = obj;
    }
    if (x.norm() > cfg.divergence_norm) {
      best.unbounded = true;
      break;
    }
  }
  best.grad_norm = gradient(loss, z, z * best.x).norm();
  if (best.objective == 0.0) best.converged = true;
  return best;
}

}  // namespace

TrialResult run_trial(const Experiment& exp, std::size_t trial) {
  const Problem p = draw_problem(exp, trial);
  Fit fit;
  if (exp.loss.kind() == LossKind::Square)
    fit = fit_square(exp.loss, p.z);
  else if (exp.loss.smoothness() == Smoothness::C0Convex)
    fit = fit_subgradient(exp.loss, p.z, exp.optimizer);
  else
    fit = fit_gradient_descent(exp.loss, p.z, exp.optimizer);

  TrialResult r;
  r.estimate_norm = fit.x.norm();
  const double proj = fit.x.dot(p.signal);
  r.correlation = r.estimate_norm > 0.0 ? proj / r.estimate_norm : 0.0;
  const double mu = std::isnan(exp.reference_mu) ? proj : exp.reference_mu;
  r.debiased_error = (fit.x - mu * p.signal).squaredNorm();
  r.objective_value = fit.objective;
  r.converged = fit.converged;
  r.grad_norm_final = fit.grad_norm;
  r.unbounded = fit.unbounded;
  return r;
}

ExperimentSummary run_experiment(const Experiment& exp) {
  if (exp.n == 0 || exp.trials == 0) throw InvalidArgument("run_experiment: empty experiment");
  if (!(exp.delta > 0.0)) throw InvalidArgument("run_experiment: delta must be positive");
  ExperimentSummary s;
  s.m = exp.samples();
  if (s.m == 0) throw InvalidArgument("run_experiment: no samples");
  if (exp.loss.vanishing_right_tail()) {
    const double threshold = exp.separability_threshold
                                 ? *exp.separability_threshold
                                 : separability_threshold(exp.model);
    if (exp.delta <= threshold) s.warnings.push_back("SeparableData");
  }
  s.trials.resize(exp.trials);
  parallel_for(exp.trials, [&](std::size_t t) { s.trials[t] = run_trial(exp, t); });

  const auto count = static_cast<double>(exp.trials);
  double c1 = 0.0, c2 = 0.0, e1 = 0.0, e2 = 0.0;
  bool unbounded = false, zero_objective = false, unconverged = false;
  for (const auto& r : s.trials) {
    c1 += r.correlation;
    c2 += r.correlation * r.correlation;
    e1 += r.debiased_error;
    e2 += r.debiased_error * r.debiased_error;
    unbounded = unbounded || r.unbounded;
    zero_objective = zero_objective || r.objective_value == 0.0;
    unconverged = unconverged || !r.converged;
  }
  s.corr_mean = c1 / count;
  s.err_mean = e1 / count;
  if (exp.trials > 1) {
    s.corr_stderr = std::sqrt(std::max(0.0, (c2 - count * s.corr_mean * s.corr_mean) /
                                               (count - 1.0)) / count);
    s.err_stderr = std::sqrt(std::max(0.0, (e2 - count * s.err_mean * s.err_mean) /
                                              (count - 1.0)) / count);
  }
  if (unbounded) s.warnings.push_back("UnboundedIterates");
  if (zero_objective) s.warnings.push_back("ZeroObjective");
  if (unconverged && exp.loss.smoothness() != Smoothness::C0Convex)
    s.warnings.push_back("StepBudgetExhausted");
  return s;
}

}  // namespace ermasym
