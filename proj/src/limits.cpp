#include "ermasym/limits.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <boost/math/tools/roots.hpp>

#include "ermasym/csv.hpp"
#include "ermasym/errors.hpp"
#include "ermasym/parallel.hpp"

namespace ermasym {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinSigma = 1e-3;
constexpr double kLogCutoff = 40.0;  // e^-40 relative to the peak is dropped
constexpr std::size_t kPanelNodes = 12;

struct Piece {
  double a, b;
};

}  // namespace

SmoothedDensity::SmoothedDensity(const LinkModel& model, double sigma)
    : model_(model), sigma_(sigma), tau_(std::sqrt(1.0 + sigma * sigma)) {
  if (!(sigma >= kMinSigma))
    throw SigmaTooSmall("noise level " + csv::num(sigma) + " is below " + csv::num(kMinSigma));
}

SmoothedDensity::Point SmoothedDensity::operator()(double w) const {
  const double tau2 = tau_ * tau_;
  const double m = w / tau2;
  const double s = sigma_ / tau_;
  auto log_integrand = [&](double u) { return -0.5 * u * u + model_.log_tilt(m + s * u); };

  // Pieces in u on which the integrand is smooth.
  const auto [zlo, zhi] = model_.support();
  std::vector<double> cuts;
  cuts.push_back(std::isfinite(zlo) ? (zlo - m) / s : -kInf);
  for (double z : model_.breakpoints()) cuts.push_back((z - m) / s);
  cuts.push_back(std::isfinite(zhi) ? (zhi - m) / s : kInf);
  std::vector<Piece> pieces;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
    if (cuts[k + 1] > cuts[k]) pieces.push_back({cuts[k], cuts[k + 1]});

  // Coarse location of each piece's peak: a fixed scan plus the piece ends.
  std::vector<double> peak_u(pieces.size()), peak_l(pieces.size(), -kInf);
  double l_max = -kInf;
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    const Piece& pc = pieces[k];
    auto consider = [&](double u) {
      const double l = log_integrand(u);
      if (l > peak_l[k]) {
        peak_l[k] = l;
        peak_u[k] = u;
      }
    };
    for (double u = -14.0; u <= 14.0; u += 0.5)
      if (u > pc.a && u < pc.b) consider(u);
    if (std::isfinite(pc.a)) consider(pc.a + 1e-12 * std::max(1.0, std::abs(pc.a)));
    if (std::isfinite(pc.b)) consider(pc.b - 1e-12 * std::max(1.0, std::abs(pc.b)));
    l_max = std::max(l_max, peak_l[k]);
  }
  if (!std::isfinite(l_max))
    return {-kInf, 0.0, 0.0, 0.0};

  // Walk outward from each peak with Legendre panels whose width shrinks
  // with the local slope of the log-integrand.
  thread_local std::vector<std::pair<double, double>> nodes;
  nodes.clear();
  const NodeSet& gl = gauss_legendre(kPanelNodes);
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    if (peak_l[k] < l_max - kLogCutoff) continue;
    const Piece& pc = pieces[k];
    for (int dir : {-1, 1}) {
      double x = peak_u[k];
      for (int panel = 0; panel < 100000; ++panel) {
        const double end = dir > 0 ? pc.b : pc.a;
        const double room = std::abs(end - x);
        if (!(room > 0.0)) break;
        const double fd = std::min(1e-6 * std::max(1.0, std::abs(x)), 0.5 * room);
        double slope = std::abs(log_integrand(x + dir * fd) - log_integrand(x)) / fd;
        if (!std::isfinite(slope)) slope = 0.0;
        const double h = std::min({1.0, 4.0 / std::max(slope, 1e-12), room});
        const double lo = dir > 0 ? x : x - h;
        const double mid = lo + 0.5 * h;
        for (std::size_t i = 0; i < kPanelNodes; ++i) {
          const double u = mid + 0.5 * h * gl.nodes[i];
          const double l = log_integrand(u);
          if (l > -kInf) nodes.emplace_back(u, 0.5 * h * gl.weights[i] * std::exp(l - l_max));
        }
        x += dir * h;
        if (h >= room) break;
        if (log_integrand(x) < l_max - kLogCutoff) break;
      }
    }
  }

  double s0 = 0.0, s1 = 0.0;
  for (const auto& [u, e] : nodes) {
    s0 += e;
    s1 += e * u;
  }
  const double mean_u = s1 / s0;
  double s2 = 0.0;
  for (const auto& [u, e] : nodes) s2 += e * (u - mean_u) * (u - mean_u);
  const double var_u = s2 / s0;

  Point pt;
  pt.log_p = -0.5 * w * w / tau2 - std::log(tau_) - 2.0 * kLogSqrt2Pi + l_max + std::log(s0);
  pt.score = -w / tau2 + mean_u / (sigma_ * tau_);
  pt.d2_log_p = (var_u - 1.0) / (sigma_ * sigma_ * tau2) - 1.0 / tau2;
  pt.post_var = var_u;
  return pt;
}

double DensityTable::integrate(const std::function<double(double, std::size_t)>& f) const {
  double total = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double wt = (i == 0 || i + 1 == grid.size()) ? 0.5 : 1.0;
    total += wt * f(grid[i], i);
  }
  return total * spacing();
}

void DensityTable::save_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << "# sigma=" << csv::num(sigma) << ", fisher=" << csv::num(fisher) << "\n";
  out << "w,p,dp,score\n";
  for (std::size_t i = 0; i < grid.size(); ++i)
    out << csv::num(grid[i]) << ',' << csv::num(p[i]) << ',' << csv::num(dp[i]) << ','
        << csv::num(score[i]) << '\n';
}

DensityTable density_w(const LinkModel& model, double sigma, const DensityOptions& opts) {
  const SmoothedDensity density(model, sigma);
  const double w_max = opts.w_max > 0.0 ? opts.w_max : 8.0 + 8.0 * sigma;
  const auto fine = static_cast<std::size_t>(std::ceil(2.0 * w_max / (0.25 * sigma))) + 1;
  const std::size_t n = std::max(opts.min_points, fine);
  DensityTable t;
  t.sigma = sigma;
  t.grid.resize(n);
  t.p.resize(n);
  t.dp.resize(n);
  t.score.resize(n);
  const double h = 2.0 * w_max / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = -w_max + h * static_cast<double>(i);
    const auto pt = density(w);
    t.grid[i] = w;
    t.p[i] = std::exp(pt.log_p);
    t.score[i] = pt.score;
    t.dp[i] = t.p[i] * pt.score;
  }
  t.fisher = t.integrate([&](double, std::size_t i) {
    return t.p[i] > opts.p_floor ? t.p[i] * t.score[i] * t.score[i] : 0.0;
  });
  return t;
}

double fisher_information_w(const LinkModel& model, double sigma, const DensityOptions& opts) {
  return density_w(model, sigma, opts).fisher;
}

double kappa_from_fisher(double sigma, double fisher) {
  // With J = (1 + sigma^2) I - 1 the expression is
  // sigma^2 (1 + sigma^2) J / (1 + sigma^4 J), which avoids cancellation for
  // large sigma.
  const double s2 = sigma * sigma;
  const double j = std::max(0.0, (1.0 + s2) * fisher - 1.0);
  return s2 * (1.0 + s2) * j / (1.0 + s2 * s2 * j);
}

double kappa(const LinkModel& model, double sigma, const DensityOptions& opts) {
  return kappa_from_fisher(sigma, fisher_information_w(model, sigma, opts));
}

double SigmaOptResult::correlation() const { return 1.0 / std::sqrt(1.0 + sigma_opt * sigma_opt); }

KappaScan::KappaScan(const LinkModel& model, DensityOptions opts)
    : model_(model), opts_(opts) {}

double KappaScan::kappa_at(double sigma) { return kappa(model_, sigma, opts_); }

void KappaScan::ensure_grid(double sigma_min) {
  std::vector<double> missing;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    for (int k = 24; k >= -24; --k) {
      const double sigma = std::pow(10.0, k / 8.0);
      if (sigma < sigma_min * (1.0 - 1e-12)) break;
      if (!grid_.count(sigma)) missing.push_back(sigma);
    }
  }
  std::vector<double> values(missing.size());
  parallel_for(missing.size(), [&](std::size_t i) { values[i] = kappa(model_, missing[i], opts_); });
  std::lock_guard<std::mutex> lock(mutex_);
  for (std::size_t i = 0; i < missing.size(); ++i) grid_[missing[i]] = values[i];
}

std::vector<std::pair<double, double>> KappaScan::grid_values() const {
  return {grid_.begin(), grid_.end()};
}

SigmaOptResult KappaScan::sigma_opt(double delta) {
  if (!(delta > 1.0)) throw InvalidArgument("sigma_opt: delta must exceed 1");
  const double target = 1.0 / delta;
  ensure_grid(1e-2);
  if (grid_.begin()->second >= target) ensure_grid(kMinSigma);
  if (grid_.begin()->second >= target)
    throw NoRoot("kappa already exceeds 1/delta at sigma=" + csv::num(grid_.begin()->first));

  SigmaOptResult res;
  // Every crossing is recorded; a downward one would signal non-monotone kappa.
  auto prev = grid_.begin();
  for (auto it = std::next(prev); it != grid_.end(); prev = it, ++it)
    if ((prev->second < target) != (it->second < target))
      res.sign_changes.emplace_back(prev->first, it->first);
  if (res.sign_changes.empty())
    throw NoRoot("kappa stays below 1/delta up to sigma=" + csv::num(grid_.rbegin()->first));

  auto [lo, hi] = res.sign_changes.front();
  auto f = [&](double s) { return kappa(model_, s, opts_) - target; };
  std::uintmax_t iters = 100;
  const auto r = boost::math::tools::toms748_solve(
      f, lo, hi, grid_[lo] - target, grid_[hi] - target,
      [](double a, double b) { return std::abs(b - a) <= 1e-9; }, iters);
  res.bracket_lo = r.first;
  res.bracket_hi = r.second;
  res.sigma_opt = 0.5 * (r.first + r.second);
  return res;
}

SigmaOptResult sigma_opt(const LinkModel& model, double delta, const DensityOptions& opts) {
  KappaScan scan(model, opts);
  return scan.sigma_opt(delta);
}

double fisher_information_sy(const LinkModel& model) {
  if (!model.differentiable_density())
    throw DensityNotDifferentiable(model.name() + ": p_SY is not differentiable");
  auto f = [&](double w) {
    const double sc = model.score_sy(w);
    return sc * sc;
  };
  const double coarse = integrate_sy(model, f, 64);
  const double fine = integrate_sy(model, f, 128);
  if (std::abs(fine - coarse) > 1e-9 * std::max(1.0, std::abs(fine)))
    throw QuadratureNonConvergence("Fisher information of SY did not converge");
  return fine;
}

double stam_lower_bound(const LinkModel& model, double delta) {
  if (!(delta > 1.0)) throw InvalidArgument("stam_lower_bound: delta must exceed 1");
  const double info = fisher_information_sy(model);
  return 1.0 / ((delta - 1.0) * (info - 1.0));
}

LsRatio ls_suboptimality(const LinkModel& model) {
  const double info = fisher_information_sy(model);
  const double m = model.mean_sy();
  if (!(m > 0.0)) throw MeanNotPositive("ls_suboptimality: E[SY] must be positive");
  const double xi = (info - 1.0) * (1.0 - m * m) / (m * m);
  return {xi, 1.0 / std::sqrt(xi)};
}

}  // namespace ermasym
