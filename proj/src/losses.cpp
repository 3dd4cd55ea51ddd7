#include "ermasym/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ermasym/csv.hpp"
#include "ermasym/errors.hpp"

namespace ermasym {

namespace {

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

}  // namespace

LossSpec LossSpec::square() { return LossSpec(LossKind::Square); }
LossSpec LossSpec::lad() { return LossSpec(LossKind::LAD); }
LossSpec LossSpec::logistic() { return LossSpec(LossKind::Logistic); }
LossSpec LossSpec::exponential() { return LossSpec(LossKind::Exponential); }
LossSpec LossSpec::hinge() { return LossSpec(LossKind::Hinge); }

LossSpec LossSpec::tabulated(std::shared_ptr<const HermiteSpline> derivative, std::string label) {
  if (!derivative || derivative->empty())
    throw InvalidArgument("tabulated loss: empty derivative table");
  LossSpec l(LossKind::Tabulated);
  l.table_ = std::move(derivative);
  l.label_ = std::move(label);
  return l;
}

LossSpec LossSpec::load_table_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read_file(path);
  for (const char* col : {"w", "loss", "dloss"})
    if (!t.has_column(col))
      throw ParseError(path.string() + ": missing column '" + col + "'");
  std::vector<double> w = t.numeric("w"), loss = t.numeric("loss"), dloss = t.numeric("dloss");
  if (w.size() < 2) throw ParseError(path.string() + ": need at least two rows");
  auto spline = t.has_column("d2loss")
                    ? std::make_shared<HermiteSpline>(w, dloss, t.numeric("d2loss"))
                    : std::make_shared<HermiteSpline>(HermiteSpline::monotone(w, dloss));
  const auto k = static_cast<std::size_t>(
      std::distance(loss.begin(), std::min_element(loss.begin(), loss.end())));
  spline->anchor_integral(w[k], loss[k]);
  return tabulated(std::move(spline), path.stem().string());
}

LossSpec LossSpec::from_name(const std::string& name) {
  if (name == "square" || name == "ls") return square();
  if (name == "lad") return lad();
  if (name == "logistic") return logistic();
  if (name == "exponential" || name == "exp") return exponential();
  if (name == "hinge") return hinge();
  throw InvalidArgument("unknown loss '" + name + "'");
}

LossSpec LossSpec::scaled(double outer, double inner) const {
  if (!(outer > 0.0) || inner == 0.0 || !std::isfinite(inner))
    throw InvalidArgument("scaled: need outer > 0 and inner != 0");
  LossSpec l = *this;
  l.outer_ *= outer;
  l.inner_ *= inner;
  return l;
}

Smoothness LossSpec::smoothness() const {
  switch (kind_) {
    case LossKind::LAD:
    case LossKind::Hinge:
      return Smoothness::C0Convex;
    case LossKind::Tabulated:
      return Smoothness::C1;
    default:
      return Smoothness::C2;
  }
}

ProxStrategy LossSpec::prox_strategy() const {
  switch (kind_) {
    case LossKind::Square:
    case LossKind::LAD:
    case LossKind::Hinge:
      return ProxStrategy::ClosedForm;
    case LossKind::Tabulated:
      return ProxStrategy::Bisection;
    default:
      return ProxStrategy::ScalarNewton;
  }
}

std::string LossSpec::name() const {
  std::string base;
  switch (kind_) {
    case LossKind::Square: base = "square"; break;
    case LossKind::LAD: base = "lad"; break;
    case LossKind::Logistic: base = "logistic"; break;
    case LossKind::Exponential: base = "exponential"; break;
    case LossKind::Hinge: base = "hinge"; break;
    case LossKind::Tabulated: base = label_.empty() ? "tabulated" : label_; break;
  }
  if (outer_ != 1.0 || inner_ != 1.0)
    base += "[/" + csv::num(outer_) + ",*" + csv::num(inner_) + "]";
  return base;
}

bool LossSpec::vanishing_right_tail() const {
  if (inner_ < 0.0) return false;
  return kind_ == LossKind::Logistic || kind_ == LossKind::Exponential || kind_ == LossKind::Hinge;
}

bool LossSpec::strictly_convex_c1() const {
  return kind_ == LossKind::Square || kind_ == LossKind::Logistic ||
         kind_ == LossKind::Exponential;
}

// ---------------------------------------------------------------------------
// Unscaled loss

double LossSpec::base_value(double t) const {
  switch (kind_) {
    case LossKind::Square: return (t - 1.0) * (t - 1.0);
    case LossKind::LAD: return std::abs(t - 1.0);
    case LossKind::Logistic: return softplus(-t);
    case LossKind::Exponential: return std::exp(-t);
    case LossKind::Hinge: return std::max(0.0, 1.0 - t);
    case LossKind::Tabulated: return table_->integral(t);
  }
  return 0.0;
}

double LossSpec::base_derivative(double t) const {
  switch (kind_) {
    case LossKind::Square: return 2.0 * (t - 1.0);
    case LossKind::LAD: return t > 1.0 ? 1.0 : (t < 1.0 ? -1.0 : 0.0);
    case LossKind::Logistic: return -sigmoid(-t);
    case LossKind::Exponential: return -std::exp(-t);
    case LossKind::Hinge: return t < 1.0 ? -1.0 : 0.0;
    case LossKind::Tabulated: return (*table_)(t);
  }
  return 0.0;
}

double LossSpec::base_second_derivative(double t) const {
  switch (kind_) {
    case LossKind::Square: return 2.0;
    case LossKind::Logistic: return sigmoid(t) * sigmoid(-t);
    case LossKind::Exponential: return std::exp(-t);
    case LossKind::Tabulated: return table_->derivative(t);
    default:
      throw NotTwiceDifferentiable(name() + " is not twice differentiable");
  }
}

double LossSpec::newton_prox(double x, double lambda) const {
  // Root of phi(v) = v - x + lambda * loss'(v), increasing in v. The root lies
  // between x and x - lambda * loss'(x).
  auto phi = [&](double v) { return v - x + lambda * base_derivative(v); };
  const double g0 = base_derivative(x);
  const double bound = lambda * (1.0 + std::abs(g0));
  double lo = x - bound;
  double hi = x + bound;
  double v = x;
  const double scale = std::max({1.0, std::abs(x)});
  double last = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 200; ++it) {
    const double f = phi(v);
    if (std::abs(f) <= 1e-13 * scale) return v;
    if (f > 0.0) {
      hi = v;
    } else {
      lo = v;
    }
    const double slope = 1.0 + lambda * base_second_derivative(v);
    double next = v - f / slope;
    // Bisect when Newton leaves the bracket or stops reducing the residual
    // (it can cycle on the flat tails of the sigmoid).
    if (!(next > lo && next < hi) || std::abs(f) >= last) next = 0.5 * (lo + hi);
    last = std::abs(f);
    if (hi - lo <= 1e-15 * scale) return next;
    v = next;
  }
  const double residual = std::abs(phi(v));
  if (residual > 1e-12 * scale)
    throw ProxNonConvergence(name() + ": prox residual " + csv::num(residual) + " at x=" +
                             csv::num(x) + ", lambda=" + csv::num(lambda));
  return v;
}

double LossSpec::base_prox(double x, double lambda) const {
  switch (kind_) {
    case LossKind::Square: return (x + 2.0 * lambda) / (1.0 + 2.0 * lambda);
    case LossKind::LAD: return 1.0 + soft_threshold(x - 1.0, lambda);
    case LossKind::Hinge: return 1.0 + soft_threshold(x + 0.5 * lambda - 1.0, 0.5 * lambda);
    default: return newton_prox(x, lambda);
  }
}

// ---------------------------------------------------------------------------
// Scaled loss: loss(t) = base(c2 t) / c1.

double LossSpec::value(double t) const { return base_value(inner_ * t) / outer_; }

double LossSpec::derivative(double t) const {
  return inner_ * base_derivative(inner_ * t) / outer_;
}

double LossSpec::second_derivative(double t) const {
  return inner_ * inner_ * base_second_derivative(inner_ * t) / outer_;
}

double LossSpec::prox(double x, double lambda) const {
  if (!(lambda > 0.0)) throw InvalidArgument("prox: lambda must be positive");
  if (outer_ == 1.0 && inner_ == 1.0) return base_prox(x, lambda);
  return base_prox(inner_ * x, lambda * inner_ * inner_ / outer_) / inner_;
}

EnvelopeEval LossSpec::envelope(double x, double lambda) const {
  const double p = prox(x, lambda);
  const double r = x - p;
  return {r * r / (2.0 * lambda) + value(p), r / lambda, -r * r / (2.0 * lambda * lambda), p};
}

double LossSpec::envelope_dx(double x, double lambda) const {
  if (kind_ == LossKind::Square && outer_ == 1.0 && inner_ == 1.0)
    return 2.0 * (x - 1.0) / (1.0 + 2.0 * lambda);
  return (x - prox(x, lambda)) / lambda;
}

double LossSpec::envelope_second_derivative_ratio(double x, double lambda) const {
  if (smoothness() != Smoothness::C2)
    throw NotTwiceDifferentiable(name() + " is not twice differentiable");
  const double p = prox(x, lambda);
  const double h = second_derivative(p);
  return h / (1.0 + lambda * h);
}

std::vector<double> LossSpec::envelope_kinks(double lambda) const {
  const double base_lambda = lambda * inner_ * inner_ / outer_;
  std::vector<double> k;
  switch (kind_) {
    case LossKind::LAD: k = {1.0 - base_lambda, 1.0 + base_lambda}; break;
    case LossKind::Hinge: k = {1.0 - base_lambda, 1.0}; break;
    default: return {};
  }
  for (double& v : k) v /= inner_;
  std::sort(k.begin(), k.end());
  return k;
}

}  // namespace ermasym
