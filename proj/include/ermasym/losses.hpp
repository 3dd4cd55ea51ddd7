#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "ermasym/numerics.hpp"

namespace ermasym {

enum class LossKind { Square, LAD, Logistic, Exponential, Hinge, Tabulated };
enum class Smoothness { C2, C1, C0Convex };
enum class ProxStrategy { ClosedForm, ScalarNewton, Bisection };

// Moreau envelope M(x; lambda) = min_v (x - v)^2 / (2 lambda) + loss(v) and
// its partial derivatives, evaluated at one point.
struct EnvelopeEval {
  double value;
  double dx;
  double dlambda;
  double prox_point;
};

// A convex loss of the margin t = y a^T x. Square is (t - 1)^2, LAD |t - 1|,
// Logistic log(1 + e^-t), Exponential e^-t, Hinge max(0, 1 - t). A tabulated
// loss is defined by a cubic Hermite interpolant of its derivative; the value
// is the exact antiderivative anchored at the grid midpoint.
//
// Every loss can be rescaled to t -> loss(c2 t) / c1; the rescaled loss has
// the same effective noise sigma = alpha / mu.
class LossSpec {
 public:
  static LossSpec square();
  static LossSpec lad();
  static LossSpec logistic();
  static LossSpec exponential();
  static LossSpec hinge();
  // `derivative` interpolates loss'; its antiderivative must already be
  // anchored to the desired loss values.
  static LossSpec tabulated(std::shared_ptr<const HermiteSpline> derivative, std::string label);
  // Loss table CSV with columns w, loss, dloss and optionally d2loss; '#'
  // lines are metadata. Without d2loss the derivative is interpolated
  // monotonically.
  static LossSpec load_table_csv(const std::filesystem::path& path);
  // Parses a loss kind name (square, lad, logistic, exponential, hinge).
  static LossSpec from_name(const std::string& name);

  LossSpec scaled(double outer, double inner) const;

  LossKind kind() const { return kind_; }
  Smoothness smoothness() const;
  ProxStrategy prox_strategy() const;
  std::string name() const;
  double outer_scale() const { return outer_; }
  double inner_scale() const { return inner_; }

  double value(double t) const;
  double derivative(double t) const;
  // Throws NotTwiceDifferentiable for LAD and Hinge.
  double second_derivative(double t) const;

  // Unique minimizer of (x - v)^2 / (2 lambda) + loss(v). Throws
  // ProxNonConvergence when the scalar solve stalls.
  double prox(double x, double lambda) const;
  EnvelopeEval envelope(double x, double lambda) const;
  // dM/dx only; the hot path of every expectation.
  double envelope_dx(double x, double lambda) const;
  // loss''(p) / (1 + lambda loss''(p)) at p = prox(x; lambda); this is
  // d^2 M / dx^2. Only for C2 losses.
  double envelope_second_derivative_ratio(double x, double lambda) const;

  // Points in x where x -> dM/dx(x; lambda) is not differentiable.
  std::vector<double> envelope_kinks(double lambda) const;

  // Nonnegative with loss(t) -> 0 as t -> +infinity (logistic, exponential,
  // hinge): the ERM is unbounded on separable data.
  bool vanishing_right_tail() const;
  // Strictly convex and C1 with loss'(0) != 0.
  bool strictly_convex_c1() const;

  const HermiteSpline* table() const { return table_.get(); }

 private:
  explicit LossSpec(LossKind kind) : kind_(kind) {}

  double base_value(double t) const;
  double base_derivative(double t) const;
  double base_second_derivative(double t) const;
  double base_prox(double x, double lambda) const;
  double newton_prox(double x, double lambda) const;

  LossKind kind_;
  double outer_ = 1.0;  // c1
  double inner_ = 1.0;  // c2
  std::shared_ptr<const HermiteSpline> table_;
  std::string label_;
};

}  // namespace ermasym
