#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ermasym/link_models.hpp"
#include "ermasym/losses.hpp"
#include "ermasym/separability.hpp"

namespace ermasym {

struct OptimizerConfig {
  int steps = 1000;
  double armijo_beta = 0.5;
  double armijo_c = 1e-4;
  // Early stop when the gradient norm falls below grad_tol * sqrt(n).
  double grad_tol = 1e-8;
  // Iterates beyond this norm are reported as unbounded.
  double divergence_norm = 1e3;
};

struct Experiment {
  LinkModel model = LinkModel::signed_model();
  LossSpec loss = LossSpec::square();
  std::size_t n = 128;
  double delta = 2.0;
  std::size_t trials = 25;
  std::uint64_t seed = 1;
  OptimizerConfig optimizer{};
  // Bias used for the debiased error; NaN falls back to the projection of the
  // estimate on the signal.
  double reference_mu = std::numeric_limits<double>::quiet_NaN();
  // Draw the signal uniformly on the sphere instead of using the first basis
  // vector (needs a model with a label function).
  bool random_signal = false;
  std::optional<double> separability_threshold;

  std::size_t samples() const;
};

struct TrialResult {
  double correlation = 0.0;
  double debiased_error = 0.0;
  double objective_value = 0.0;
  bool converged = false;
  double grad_norm_final = 0.0;
  double estimate_norm = 0.0;
  bool unbounded = false;
};

struct ExperimentSummary {
  std::size_t m = 0;
  double corr_mean = 0.0;
  double corr_stderr = 0.0;
  double err_mean = 0.0;
  double err_stderr = 0.0;
  std::vector<TrialResult> trials;
  std::vector<std::string> warnings;

  std::string warning_text() const;
};

// One trial on its own random stream; the result depends only on
// (experiment, trial index).
TrialResult run_trial(const Experiment& exp, std::size_t trial);

ExperimentSummary run_experiment(const Experiment& exp);

}  // namespace ermasym
