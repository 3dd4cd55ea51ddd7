#include "ermasym/numerics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>

#include "ermasym/errors.hpp"

namespace ermasym {

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / kSqrt2Pi; }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double log_normal_cdf(double x) {
  if (x > -30.0) return std::log(normal_cdf(x));
  // Asymptotic series of the Mills ratio; the first omitted term is below
  // 1e-12 for x < -30.
  const double z2 = 1.0 / (x * x);
  const double series =
      1.0 - z2 * (1.0 - 3.0 * z2 * (1.0 - 5.0 * z2 * (1.0 - 7.0 * z2)));
  return -0.5 * x * x - std::log(-x) - kLogSqrt2Pi + std::log(series);
}

double normal_hazard(double x) {
  if (x > -30.0) return normal_pdf(x) / normal_cdf(x);
  return std::exp(-0.5 * x * x - kLogSqrt2Pi - log_normal_cdf(x));
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

// Golub-Welsch: eigen-decomposition of the Jacobi matrix of the orthogonal
// polynomial family. mu0 is the total mass of the weight function.
NodeSet golub_welsch(const std::vector<double>& off_diag, double mu0) {
  const auto n = static_cast<Eigen::Index>(off_diag.size() + 1);
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n - 1);
  for (Eigen::Index i = 0; i + 1 < n; ++i) sub[i] = off_diag[static_cast<std::size_t>(i)];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  NodeSet out;
  out.nodes.resize(static_cast<std::size_t>(n));
  out.weights.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v0 = solver.eigenvectors()(0, i);
    out.nodes[static_cast<std::size_t>(i)] = solver.eigenvalues()[i];
    out.weights[static_cast<std::size_t>(i)] = mu0 * v0 * v0;
  }
  // Symmetrize: the weight functions are even, so rules are exactly symmetric.
  const std::size_t m = out.nodes.size();
  for (std::size_t i = 0; i < m / 2; ++i) {
    const double x = 0.5 * (out.nodes[m - 1 - i] - out.nodes[i]);
    const double w = 0.5 * (out.weights[m - 1 - i] + out.weights[i]);
    out.nodes[i] = -x;
    out.nodes[m - 1 - i] = x;
    out.weights[i] = w;
    out.weights[m - 1 - i] = w;
  }
  if (m % 2 == 1) out.nodes[m / 2] = 0.0;
  return out;
}

NodeSet legendre_uncached(std::size_t n) {
  if (n == 1) return {{0.0}, {2.0}};
  std::vector<double> b(n - 1);
  for (std::size_t k = 1; k < n; ++k) {
    const double kk = static_cast<double>(k);
    b[k - 1] = kk / std::sqrt(4.0 * kk * kk - 1.0);
  }
  NodeSet rule = golub_welsch(b, 2.0);
  // Polish nodes with Newton on P_n, then recompute weights from P_n'.
  for (std::size_t i = 0; i < n; ++i) {
    double x = rule.nodes[i];
    double dp = 0.0;
    for (int it = 0; it < 5; ++it) {
      double p0 = 1.0, p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double kk = static_cast<double>(k);
        const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
        p0 = p1;
        p1 = p2;
      }
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      x -= p1 / dp;
    }
    rule.nodes[i] = x;
    rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

NodeSet hermite_uncached(std::size_t n) {
  if (n == 1) return {{0.0}, {1.0}};
  // Probabilists' Hermite polynomials: x He_k = He_{k+1} + k He_{k-1}.
  std::vector<double> b(n - 1);
  for (std::size_t k = 1; k < n; ++k) b[k - 1] = std::sqrt(static_cast<double>(k));
  NodeSet rule = golub_welsch(b, 1.0);
  double total = 0.0;
  for (double w : rule.weights) total += w;
  for (double& w : rule.weights) w /= total;
  return rule;
}

template <typename Fn>
const NodeSet& cached(std::map<std::size_t, NodeSet>& cache, std::mutex& mu,
                      std::size_t n, Fn build) {
  std::lock_guard lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build(n)).first;
  return it->second;
}

}  // namespace

const NodeSet& gauss_legendre(std::size_t n) {
  if (n == 0) throw InvalidArgument("gauss_legendre: order must be positive");
  static std::map<std::size_t, NodeSet> cache;
  static std::mutex mu;
  return cached(cache, mu, n, legendre_uncached);
}

const NodeSet& gauss_hermite_normal(std::size_t n) {
  if (n == 0) throw InvalidArgument("gauss_hermite_normal: order must be positive");
  static std::map<std::size_t, NodeSet> cache;
  static std::mutex mu;
  return cached(cache, mu, n, hermite_uncached);
}

NodeSet map_legendre(const NodeSet& ref, double a, double b) {
  NodeSet out;
  out.nodes.resize(ref.nodes.size());
  out.weights.resize(ref.weights.size());
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  for (std::size_t i = 0; i < ref.nodes.size(); ++i) {
    out.nodes[i] = mid + half * ref.nodes[i];
    out.weights[i] = half * ref.weights[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// HermiteSpline

HermiteSpline::HermiteSpline(std::vector<double> x, std::vector<double> y,
                             std::vector<double> slopes)
    : x_(std::move(x)), y_(std::move(y)), d_(std::move(slopes)) {
  if (x_.size() < 2 || y_.size() != x_.size() || d_.size() != x_.size())
    throw InvalidArgument("HermiteSpline: need at least two nodes of matching sizes");
  for (std::size_t i = 1; i < x_.size(); ++i) {
    if (!(x_[i] > x_[i - 1]))
      throw InvalidArgument("HermiteSpline: grid must be strictly increasing");
  }
  const double h0 = (x_.back() - x_.front()) / static_cast<double>(x_.size() - 1);
  uniform_ = true;
  for (std::size_t i = 1; i < x_.size() && uniform_; ++i) {
    if (std::abs((x_[i] - x_[i - 1]) - h0) > 1e-9 * h0) uniform_ = false;
  }
  cumulative_.assign(x_.size(), 0.0);
  for (std::size_t i = 0; i + 1 < x_.size(); ++i) {
    cumulative_[i + 1] = cumulative_[i] + piece_integral(i, x_[i + 1]);
  }
}

HermiteSpline HermiteSpline::monotone(std::vector<double> x, std::vector<double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n)
    throw InvalidArgument("HermiteSpline::monotone: need at least two nodes");
  std::vector<double> h(n - 1), delta(n - 1), d(n);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = x[i + 1] - x[i];
    delta[i] = (y[i + 1] - y[i]) / h[i];
  }
  if (n == 2) {
    d[0] = d[1] = delta[0];
  } else {
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (delta[i - 1] * delta[i] <= 0.0) {
        d[i] = 0.0;
      } else {
        const double w1 = 2.0 * h[i] + h[i - 1];
        const double w2 = h[i] + 2.0 * h[i - 1];
        d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
      }
    }
    auto end_slope = [](double h0, double h1, double d0, double d1) {
      double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
      if (s * d0 <= 0.0) return 0.0;
      if (d0 * d1 <= 0.0 && std::abs(s) > std::abs(3.0 * d0)) return 3.0 * d0;
      return s;
    };
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  }
  return HermiteSpline(std::move(x), std::move(y), std::move(d));
}

std::size_t HermiteSpline::locate(double t) const {
  const std::size_t last = x_.size() - 2;
  if (uniform_) {
    const double h = (x_.back() - x_.front()) / static_cast<double>(x_.size() - 1);
    const double pos = (t - x_.front()) / h;
    auto i = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(last)));
    // Guard against rounding at piece boundaries.
    if (i < last && t >= x_[i + 1]) ++i;
    if (i > 0 && t < x_[i]) --i;
    return i;
  }
  auto it = std::upper_bound(x_.begin(), x_.end(), t);
  const auto idx = static_cast<std::size_t>(std::distance(x_.begin(), it));
  if (idx == 0) return 0;
  return std::min(idx - 1, last);
}

double HermiteSpline::operator()(double t) const {
  if (t <= x_.front()) return y_.front() + d_.front() * (t - x_.front());
  if (t >= x_.back()) return y_.back() + d_.back() * (t - x_.back());
  const std::size_t i = locate(t);
  const double h = x_[i + 1] - x_[i];
  const double s = (t - x_[i]) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
  const double h10 = s3 - 2.0 * s2 + s;
  const double h01 = -2.0 * s3 + 3.0 * s2;
  const double h11 = s3 - s2;
  return h00 * y_[i] + h10 * h * d_[i] + h01 * y_[i + 1] + h11 * h * d_[i + 1];
}

double HermiteSpline::derivative(double t) const {
  if (t <= x_.front()) return d_.front();
  if (t >= x_.back()) return d_.back();
  const std::size_t i = locate(t);
  const double h = x_[i + 1] - x_[i];
  const double s = (t - x_[i]) / h;
  const double s2 = s * s;
  const double dh00 = (6.0 * s2 - 6.0 * s) / h;
  const double dh10 = 3.0 * s2 - 4.0 * s + 1.0;
  const double dh01 = (-6.0 * s2 + 6.0 * s) / h;
  const double dh11 = 3.0 * s2 - 2.0 * s;
  return dh00 * y_[i] + dh10 * d_[i] + dh01 * y_[i + 1] + dh11 * d_[i + 1];
}

double HermiteSpline::piece_integral(std::size_t i, double t) const {
  const double h = x_[i + 1] - x_[i];
  const double s = (t - x_[i]) / h;
  const double s2 = s * s, s3 = s2 * s, s4 = s3 * s;
  const double i00 = 0.5 * s4 - s3 + s;
  const double i10 = 0.25 * s4 - (2.0 / 3.0) * s3 + 0.5 * s2;
  const double i01 = -0.5 * s4 + s3;
  const double i11 = 0.25 * s4 - s3 / 3.0;
  return h * (i00 * y_[i] + i10 * h * d_[i] + i01 * y_[i + 1] + i11 * h * d_[i + 1]);
}

double HermiteSpline::integral(double t) const {
  double raw;
  if (t <= x_.front()) {
    const double u = t - x_.front();
    raw = y_.front() * u + 0.5 * d_.front() * u * u;
  } else if (t >= x_.back()) {
    const double u = t - x_.back();
    raw = cumulative_.back() + y_.back() * u + 0.5 * d_.back() * u * u;
  } else {
    const std::size_t i = locate(t);
    raw = cumulative_[i] + piece_integral(i, t);
  }
  return raw + offset_;
}

void HermiteSpline::anchor_integral(double at, double value) {
  offset_ = 0.0;
  offset_ = value - integral(at);
}

// ---------------------------------------------------------------------------

double bisect_root(const std::function<double(double)>& f, double a, double b,
                   double x_tol, int max_iter) {
  double fa = f(a);
  const double fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0.0) == (fb > 0.0)) throw NoRoot("bisect_root: no sign change on bracket");
  for (int it = 0; it < max_iter && std::abs(b - a) > x_tol; ++it) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if (fm == 0.0) return m;
    if ((fm > 0.0) == (fa > 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

double golden_minimize(const std::function<double(double)>& f, double a, double b,
                       double x_tol, int max_iter) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - r * (b - a);
  double d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < max_iter && std::abs(b - a) > x_tol; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace ermasym
