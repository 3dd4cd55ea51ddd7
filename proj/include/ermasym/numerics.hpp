#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace ermasym {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrt2Pi = 2.50662827463100050242;
inline constexpr double kSqrt2OverPi = 0.79788456080286535588;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double normal_pdf(double x);
double normal_cdf(double x);
// log Phi(x), accurate deep into the lower tail.
double log_normal_cdf(double x);
// phi(x) / Phi(x), the inverse Mills ratio; finite for every x.
double normal_hazard(double x);
// log(1 + exp(x)) without overflow.
double softplus(double x);
double sigmoid(double x);

// Nodes and weights of an n-point rule. Legendre rules integrate over
// [-1, 1]; Hermite rules integrate against the standard normal density, so
// their weights sum to one.
struct NodeSet {
  std::vector<double> nodes;
  std::vector<double> weights;
};

const NodeSet& gauss_legendre(std::size_t n);
const NodeSet& gauss_hermite_normal(std::size_t n);

// Legendre rule mapped to [a, b].
NodeSet map_legendre(const NodeSet& ref, double a, double b);

// Piecewise cubic Hermite interpolant on a strictly increasing grid.
// Outside the grid the interpolant continues linearly with the boundary
// slope. The antiderivative is exact for the cubic pieces and is anchored so
// that integral(anchor) = anchor_value.
class HermiteSpline {
 public:
  HermiteSpline() = default;
  HermiteSpline(std::vector<double> x, std::vector<double> y,
                std::vector<double> slopes);

  // Fritsch-Carlson monotone slopes (PCHIP); the interpolant preserves
  // monotonicity of the data.
  static HermiteSpline monotone(std::vector<double> x, std::vector<double> y);

  double operator()(double t) const;
  double derivative(double t) const;
  double integral(double t) const;
  void anchor_integral(double at, double value);

  std::span<const double> x() const { return x_; }
  std::span<const double> y() const { return y_; }
  std::span<const double> slopes() const { return d_; }
  double lo() const { return x_.front(); }
  double hi() const { return x_.back(); }
  bool empty() const { return x_.empty(); }

 private:
  std::size_t locate(double t) const;
  double piece_integral(std::size_t i, double t) const;

  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> d_;
  std::vector<double> cumulative_;  // integral from x_[0] to x_[i]
  double offset_ = 0.0;
  bool uniform_ = false;
};

// Bisection on a sign change of f over [a, b]; f(a) and f(b) must differ in
// sign. Returns the midpoint of the final bracket.
double bisect_root(const std::function<double(double)>& f, double a, double b,
                   double x_tol, int max_iter = 200);

// Golden-section minimization of a unimodal f on [a, b].
double golden_minimize(const std::function<double(double)>& f, double a,
                       double b, double x_tol, int max_iter = 400);

}  // namespace ermasym
