#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ermasym/link_models.hpp"
#include "ermasym/losses.hpp"
#include "ermasym/saddle.hpp"

namespace ermasym {

enum class Convexity { ProvenSufficient, NumericallyConvex, NonConvexDetected };

std::string to_string(Convexity c);

struct LemmaCheck {
  bool holds;
  // max over the grid of (log p_W)'' + 1 / (1 + sigma^2); <= 0 when it holds.
  double margin;
};

// Checks that log p_W is at least as concave as the N(0, 1 + sigma^2) log
// density at every grid point.
LemmaCheck lemma_d1_check(const LinkModel& model, double sigma, const std::vector<double>& grid);

// The loss whose asymptotic error equals the fundamental limit, on a grid.
// Internally it is described through its conjugate: with
// h(v) = (1 + alpha1) v^2 / 2 + alpha2 log p_W(v), the loss at w = h'(v) has
// derivative v - w and value w v - h(v) - w^2 / 2.
struct OptLossTable {
  std::string model_name;
  double delta = 0.0;
  double sigma_opt = 0.0;
  double fisher = 0.0;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  Convexity convexity = Convexity::NonConvexDetected;
  double lemma_margin = 0.0;
  std::vector<double> grid;  // w, strictly increasing when convex
  std::vector<double> loss, dloss, d2loss;
  // Display normalization loss(1) = 0, loss(2) = 1.
  double display_offset = 0.0;
  double display_scale = 1.0;

  LossSpec as_loss() const;
  // Writes the metadata preamble, an optional achievability line and the
  // columns w,loss,dloss,d2loss,loss_display,dloss_display.
  void save_csv(const std::filesystem::path& path,
                const SaddleSolution* achieved = nullptr) const;
};

struct OptLossOptions {
  std::size_t points = 2048;
  double w_max = 0.0;  // 0 selects 8 + 8 sigma_opt
  std::optional<double> sigma_opt;  // reuse a known limit
};

OptLossTable build_optimal_loss(const LinkModel& model, double delta,
                                const OptLossOptions& opts = {});

// Solves the asymptotic system with the tabulated loss and checks that it
// lands on (mu, alpha, lambda) = (1, sigma_opt, 1) within 1e-4. Throws
// AchievabilityFailed otherwise.
SaddleSolution verify_achievability(const OptLossTable& table, const LinkModel& model,
                                    const SolverOptions& opts = {});

}  // namespace ermasym
