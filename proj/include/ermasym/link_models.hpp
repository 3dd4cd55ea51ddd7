#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ermasym/numerics.hpp"

namespace ermasym {

enum class ModelKind { Signed, NoisySigned, Logistic, Probit, Tabulated, GaussianSY };

struct SamplePair {
  double s;
  int y;
};

// A binary label law y = f(s) with s ~ N(0, 1), described through the
// distribution of the product SY. Immutable after construction.
//
// GaussianSY is a synthetic law with SY ~ N(mean, var); it has no label
// function and exists because every downstream quantity has a closed form for
// it. Tabulated laws are given directly as a density of SY. For both, the
// sampler emits pairs (s = sy, y = +1), which carry the same information for
// any estimator that only sees the products y * a.
class LinkModel {
 public:
  static LinkModel signed_model();
  static LinkModel noisy_signed(double eps);
  static LinkModel logistic();
  static LinkModel probit();
  static LinkModel gaussian_sy(double mean, double var);
  // Density of SY given at strictly increasing points; renormalized to unit
  // mass with monotone cubic interpolation, zero outside the grid.
  static LinkModel tabulated(std::vector<double> w, std::vector<double> p);
  // CSV with header `w,p`.
  static LinkModel load_tabulated_csv(const std::filesystem::path& path);

  ModelKind kind() const { return kind_; }
  double epsilon() const { return eps_; }
  std::string name() const;

  double density_sy(double w) const;
  // log p_SY(w); -infinity where the density vanishes.
  double log_density_sy(double w) const;
  bool differentiable_density() const;
  // log(p_SY(z) / phi(z)), the log density of SY relative to the standard
  // normal; -infinity off the support.
  double log_tilt(double z) const;
  // Closed interval outside which p_SY vanishes (ends may be infinite) and the
  // interior points where p_SY is not smooth.
  std::pair<double, double> support() const;
  std::vector<double> breakpoints() const;
  // d/dw log p_SY(w). Throws DensityNotDifferentiable for Signed-type laws.
  double score_sy(double w) const;

  // Integration panels for the SY variable: consecutive entries bound smooth
  // pieces of p_SY; mass outside [front, back] is below 1e-15.
  const std::vector<double>& panel_edges() const { return edges_; }

  double mean_sy() const { return mean_; }
  double second_moment_sy() const { return second_moment_; }

  // Mass of the raw tabulated density before renormalization (1 otherwise).
  double renormalization() const { return renorm_; }

  bool has_label_function() const;
  // P(Y = +1 | S = s); only for models with a label function.
  double prob_positive(double s) const;
  // Label for a given s and an independent uniform u in [0, 1).
  int draw_label(double s, double u) const;

  // Deterministic for a fixed (seed, stream).
  std::vector<SamplePair> sample_pairs(std::size_t count, std::uint64_t seed,
                                       std::uint64_t stream = 0) const;

  // For the synthetic law.
  double gaussian_mean() const { return gauss_mean_; }
  double gaussian_var() const { return gauss_var_; }

 private:
  LinkModel() = default;
  void finalize();
  double sample_sy_direct(double u_normal, double u_uniform) const;

  ModelKind kind_ = ModelKind::Signed;
  double eps_ = 0.0;
  double gauss_mean_ = 0.0;
  double gauss_var_ = 1.0;
  double renorm_ = 1.0;
  std::shared_ptr<const HermiteSpline> table_;
  std::vector<double> edges_;
  double mean_ = 0.0;
  double second_moment_ = 1.0;
};

// Integral of f against p_SY over the model's panels with an n-point
// Legendre rule per panel.
double integrate_sy(const LinkModel& model, const std::function<double(double)>& f,
                    std::size_t nodes_per_panel);

}  // namespace ermasym
