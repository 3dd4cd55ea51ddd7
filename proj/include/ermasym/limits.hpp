#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <vector>

#include "ermasym/link_models.hpp"

namespace ermasym {

// Pointwise evaluation of the density of W = sigma G + SY. Writing
// tau^2 = 1 + sigma^2, the density factors as
//   p_W(w) = phi_tau(w) E_U[rho(w / tau^2 + (sigma / tau) U)],  U ~ N(0, 1),
// with rho = p_SY / phi. The expectation is evaluated in the log domain, so
// the score and curvature stay accurate far into the tails.
class SmoothedDensity {
 public:
  struct Point {
    double log_p;
    double score;      // d/dw log p_W
    double d2_log_p;   // d^2/dw^2 log p_W
    double post_var;   // variance of U given W = w
  };

  SmoothedDensity(const LinkModel& model, double sigma);
  Point operator()(double w) const;
  double sigma() const { return sigma_; }

 private:
  LinkModel model_;
  double sigma_;
  double tau_;
};

struct DensityOptions {
  double w_max = 0.0;              // 0 selects 8 + 8 sigma
  std::size_t min_points = 4096;   // the grid is refined to spacing <= sigma / 4
  double p_floor = 1e-14;
};

struct DensityTable {
  double sigma = 0.0;
  std::vector<double> grid, p, dp, score;
  double fisher = 0.0;

  double spacing() const { return grid[1] - grid[0]; }
  // Trapezoid integral of f(w_i, i) over the grid.
  double integrate(const std::function<double(double, std::size_t)>& f) const;
  void save_csv(const std::filesystem::path& path) const;
};

DensityTable density_w(const LinkModel& model, double sigma, const DensityOptions& opts = {});

double fisher_information_w(const LinkModel& model, double sigma, const DensityOptions& opts = {});

// Monotone map of the Fisher information of W_sigma into [0, 1).
double kappa_from_fisher(double sigma, double fisher);
double kappa(const LinkModel& model, double sigma, const DensityOptions& opts = {});

struct SigmaOptResult {
  double sigma_opt = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  // Every scan interval where kappa - 1/delta changes sign, as (lo, hi).
  std::vector<std::pair<double, double>> sign_changes;
  double correlation() const;
};

// Caches kappa on a log grid of sigma so one scan serves many delta values.
class KappaScan {
 public:
  explicit KappaScan(const LinkModel& model, DensityOptions opts = {});

  double kappa_at(double sigma);
  // Smallest root of kappa(sigma) = 1/delta; throws NoRoot when no sign change
  // is found up to sigma = 1e3.
  SigmaOptResult sigma_opt(double delta);
  // Scan grid (log spaced, 8 points per decade) evaluated so far.
  std::vector<std::pair<double, double>> grid_values() const;

 private:
  void ensure_grid(double sigma_min);

  LinkModel model_;
  DensityOptions opts_;
  std::map<double, double> grid_;  // sigma -> kappa on the scan grid
  std::mutex mutex_;
};

SigmaOptResult sigma_opt(const LinkModel& model, double delta, const DensityOptions& opts = {});

// Fisher information of SY by direct quadrature; needs a differentiable p_SY.
double fisher_information_sy(const LinkModel& model);

// Closed-form lower bound on sigma_opt^2 from Stam's inequality.
double stam_lower_bound(const LinkModel& model, double delta);

struct LsRatio {
  double xi;           // upper bound on sigma_LS^2 / sigma_opt^2
  double inv_sqrt_xi;  // lower bound on sigma_opt / sigma_LS
};
LsRatio ls_suboptimality(const LinkModel& model);

}  // namespace ermasym
