#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "ermasym/link_models.hpp"
#include "ermasym/losses.hpp"
#include "ermasym/quadrature.hpp"

namespace ermasym {

struct SolverOptions {
  double tol = 1e-9;
  int max_iter = 500;
  double damping = 0.5;
  int n_starts = 1;
  std::uint64_t seed = 1;
  QuadratureOptions quadrature{};
  // Cross-check the accepted point on the refined quadrature rule.
  bool refinement_check = true;
  // Known separability threshold of the model; computed on demand otherwise.
  std::optional<double> separability_threshold;
};

enum class Uniqueness { VerifiedClassConditions, Unverified };

// Asymptotic description of the ERM solution: x_hat ~ mu x0 + alpha z with z
// a unit vector orthogonal to x0, and lambda the envelope parameter.
struct SaddleSolution {
  double delta = 0.0;
  double mu = 0.0;
  double alpha = 0.0;
  double lambda = 0.0;
  double sigma_eff = 0.0;
  double correlation = 0.0;
  // Orthogonality to SY, variance and Gaussian-correlation equations.
  std::array<double, 3> residuals{};
  Uniqueness uniqueness = Uniqueness::Unverified;
  double multistart_spread = 0.0;
  int iterations = 0;

  double max_residual() const;
};

// Point of the four-variable scalar min-max problem, with lambda = tau / gamma.
struct ScalarSaddlePoint {
  double alpha;
  double mu;
  double tau;
  double gamma;

  static ScalarSaddlePoint from_solution(const SaddleSolution& sol);
};

// Partial derivatives of the scalar objective
// gamma tau / 2 - alpha gamma / sqrt(delta) + E[M(alpha G + mu SY; tau / gamma)].
struct StationarityResiduals {
  double d_mu;
  double d_alpha;
  double d_tau;
  double d_gamma;

  double max_abs() const;
};

// Residuals of the three equations at (mu, alpha, lambda) on a given rule.
std::array<double, 3> system_residuals(const LossSpec& loss, const QuadratureRule& rule,
                                       double delta, double mu, double alpha, double lambda);

SaddleSolution solve_system(const LossSpec& loss, const LinkModel& model, double delta,
                            const SolverOptions& opts = {});

SaddleSolution ls_closed_form(const LinkModel& model, double delta);

StationarityResiduals stationarity_check(const LossSpec& loss, const LinkModel& model,
                                         double delta, const ScalarSaddlePoint& pt,
                                         const QuadratureOptions& quad = {});

// |1 - lambda delta E[loss''(p) / (1 + lambda loss''(p))]| at a solution.
double second_order_check(const LossSpec& loss, const LinkModel& model,
                          const SaddleSolution& sol, const QuadratureOptions& quad = {});

}  // namespace ermasym
