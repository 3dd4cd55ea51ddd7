#include "ermasym/link_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "ermasym/csv.hpp"
#include "ermasym/errors.hpp"

namespace ermasym {

namespace {

constexpr double kTail = 8.0;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log of sqrt(2/pi) * exp(-w^2/2)
double log_half_normal_kernel(double w) { return std::log(kSqrt2OverPi) - 0.5 * w * w; }

}  // namespace

LinkModel LinkModel::signed_model() {
  LinkModel m;
  m.kind_ = ModelKind::Signed;
  m.edges_ = {0.0, kTail};
  m.finalize();
  return m;
}

LinkModel LinkModel::noisy_signed(double eps) {
  if (!(eps >= 0.0 && eps <= 0.5))
    throw InvalidArgument("noisy_signed: flip probability must lie in [0, 1/2]");
  LinkModel m;
  m.kind_ = ModelKind::NoisySigned;
  m.eps_ = eps;
  m.edges_ = eps > 0.0 ? std::vector<double>{-kTail, 0.0, kTail} : std::vector<double>{0.0, kTail};
  m.finalize();
  return m;
}

LinkModel LinkModel::logistic() {
  LinkModel m;
  m.kind_ = ModelKind::Logistic;
  m.edges_ = {-kTail, 0.0, kTail};
  m.finalize();
  return m;
}

LinkModel LinkModel::probit() {
  LinkModel m;
  m.kind_ = ModelKind::Probit;
  m.edges_ = {-kTail, 0.0, kTail};
  m.finalize();
  return m;
}

LinkModel LinkModel::gaussian_sy(double mean, double var) {
  if (!(var > 0.0) || !std::isfinite(mean))
    throw InvalidArgument("gaussian_sy: variance must be positive");
  LinkModel m;
  m.kind_ = ModelKind::GaussianSY;
  m.gauss_mean_ = mean;
  m.gauss_var_ = var;
  const double sd = std::sqrt(var);
  m.edges_ = {mean - 10.0 * sd, mean, mean + 10.0 * sd};
  m.finalize();
  return m;
}

LinkModel LinkModel::tabulated(std::vector<double> w, std::vector<double> p) {
  if (w.size() < 4 || w.size() != p.size())
    throw InvalidArgument("tabulated: need at least four (w, p) points");
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!std::isfinite(w[i]) || !std::isfinite(p[i]))
      throw InvalidArgument("tabulated: non-finite entry");
    if (p[i] < 0.0) throw InvalidArgument("tabulated: density must be nonnegative");
    if (i > 0 && !(w[i] > w[i - 1]))
      throw InvalidArgument("tabulated: w must be strictly increasing");
  }
  HermiteSpline raw = HermiteSpline::monotone(w, p);
  const double mass = raw.integral(w.back()) - raw.integral(w.front());
  if (!(mass > 0.0)) throw InvalidArgument("tabulated: density has zero mass");
  for (double& v : p) v /= mass;
  LinkModel m;
  m.kind_ = ModelKind::Tabulated;
  m.renorm_ = mass;
  m.table_ = std::make_shared<const HermiteSpline>(HermiteSpline::monotone(w, std::move(p)));
  const std::size_t panels = 16;
  for (std::size_t i = 0; i <= panels; ++i) {
    m.edges_.push_back(w.front() +
                       (w.back() - w.front()) * static_cast<double>(i) / static_cast<double>(panels));
  }
  m.finalize();
  return m;
}

LinkModel LinkModel::load_tabulated_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read_file(path);
  return tabulated(t.numeric("w"), t.numeric("p"));
}

void LinkModel::finalize() {
  auto moment = [this](std::size_t n, int power) {
    return integrate_sy(*this, [power](double w) { return std::pow(w, power); }, n);
  };
  const double coarse = moment(64, 1);
  const double fine = moment(128, 1);
  // Spline knots fall inside panels for tabulated laws, so their
  // quadrature is only accurate to the smoothness of the table.
  const double tol = kind_ == ModelKind::Tabulated ? 1e-7 : 1e-9;
  if (std::abs(fine - coarse) > tol)
    throw QuadratureNonConvergence("mean_sy: refinement changed E[SY] by " +
                                   csv::num(std::abs(fine - coarse)));
  mean_ = fine;
  second_moment_ = moment(128, 2);
}

std::string LinkModel::name() const {
  switch (kind_) {
    case ModelKind::Signed: return "signed";
    case ModelKind::NoisySigned: return "noisysigned(" + csv::num(eps_) + ")";
    case ModelKind::Logistic: return "logistic";
    case ModelKind::Probit: return "probit";
    case ModelKind::Tabulated: return "tabulated";
    case ModelKind::GaussianSY:
      return "gaussian-sy(" + csv::num(gauss_mean_) + ";" + csv::num(gauss_var_) + ")";
  }
  return "unknown";
}

double LinkModel::density_sy(double w) const {
  switch (kind_) {
    case ModelKind::Signed:
      return w >= 0.0 ? kSqrt2OverPi * std::exp(-0.5 * w * w) : 0.0;
    case ModelKind::NoisySigned:
      return kSqrt2OverPi * std::exp(-0.5 * w * w) * (w >= 0.0 ? 1.0 - eps_ : eps_);
    case ModelKind::Logistic:
      return kSqrt2OverPi * std::exp(-0.5 * w * w) * sigmoid(w);
    case ModelKind::Probit:
      return kSqrt2OverPi * std::exp(-0.5 * w * w) * normal_cdf(w);
    case ModelKind::GaussianSY: {
      const double z = (w - gauss_mean_) / std::sqrt(gauss_var_);
      return normal_pdf(z) / std::sqrt(gauss_var_);
    }
    case ModelKind::Tabulated:
      if (w < table_->lo() || w > table_->hi()) return 0.0;
      return std::max(0.0, (*table_)(w));
  }
  return 0.0;
}

double LinkModel::log_density_sy(double w) const {
  switch (kind_) {
    case ModelKind::Signed:
      return w >= 0.0 ? log_half_normal_kernel(w) : kNegInf;
    case ModelKind::NoisySigned: {
      const double mass = w >= 0.0 ? 1.0 - eps_ : eps_;
      return mass > 0.0 ? log_half_normal_kernel(w) + std::log(mass) : kNegInf;
    }
    case ModelKind::Logistic:
      return log_half_normal_kernel(w) - softplus(-w);
    case ModelKind::Probit:
      return log_half_normal_kernel(w) + log_normal_cdf(w);
    case ModelKind::GaussianSY: {
      const double z = (w - gauss_mean_) / std::sqrt(gauss_var_);
      return -0.5 * z * z - kLogSqrt2Pi - 0.5 * std::log(gauss_var_);
    }
    case ModelKind::Tabulated: {
      const double p = density_sy(w);
      return p > 0.0 ? std::log(p) : kNegInf;
    }
  }
  return kNegInf;
}

double LinkModel::log_tilt(double z) const {
  static const double kLog2 = std::log(2.0);
  switch (kind_) {
    case ModelKind::Signed:
      return z >= 0.0 ? kLog2 : kNegInf;
    case ModelKind::NoisySigned: {
      const double mass = z >= 0.0 ? 1.0 - eps_ : eps_;
      return mass > 0.0 ? kLog2 + std::log(mass) : kNegInf;
    }
    case ModelKind::Logistic:
      return kLog2 - softplus(-z);
    case ModelKind::Probit:
      return kLog2 + log_normal_cdf(z);
    case ModelKind::GaussianSY: {
      const double d = z - gauss_mean_;
      return 0.5 * z * z - 0.5 * d * d / gauss_var_ - 0.5 * std::log(gauss_var_);
    }
    case ModelKind::Tabulated: {
      const double p = density_sy(z);
      return p > 0.0 ? std::log(p) + 0.5 * z * z + kLogSqrt2Pi : kNegInf;
    }
  }
  return kNegInf;
}

std::pair<double, double> LinkModel::support() const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  switch (kind_) {
    case ModelKind::Signed:
      return {0.0, inf};
    case ModelKind::NoisySigned:
      return {eps_ > 0.0 ? -inf : 0.0, inf};
    case ModelKind::Tabulated:
      return {edges_.front(), edges_.back()};
    default:
      return {-inf, inf};
  }
}

std::vector<double> LinkModel::breakpoints() const {
  if (kind_ == ModelKind::NoisySigned && eps_ > 0.0 && eps_ < 0.5) return {0.0};
  return {};
}

bool LinkModel::differentiable_density() const {
  switch (kind_) {
    case ModelKind::Signed:
      return false;
    case ModelKind::NoisySigned:
      return eps_ == 0.5;
    default:
      return true;
  }
}

double LinkModel::score_sy(double w) const {
  if (!differentiable_density())
    throw DensityNotDifferentiable(name() + ": p_SY has a jump at 0");
  switch (kind_) {
    case ModelKind::NoisySigned:
      return -w;
    case ModelKind::Logistic:
      return -w + sigmoid(-w);
    case ModelKind::Probit:
      return -w + normal_hazard(w);
    case ModelKind::GaussianSY:
      return -(w - gauss_mean_) / gauss_var_;
    case ModelKind::Tabulated: {
      const double p = density_sy(w);
      return p > 0.0 ? table_->derivative(w) / p : 0.0;
    }
    default:
      break;
  }
  throw DensityNotDifferentiable(name());
}

bool LinkModel::has_label_function() const {
  return kind_ != ModelKind::GaussianSY && kind_ != ModelKind::Tabulated;
}

double LinkModel::prob_positive(double s) const {
  switch (kind_) {
    case ModelKind::Signed:
      return s >= 0.0 ? 1.0 : 0.0;
    case ModelKind::NoisySigned:
      return s >= 0.0 ? 1.0 - eps_ : eps_;
    case ModelKind::Logistic:
      return sigmoid(s);
    case ModelKind::Probit:
      return normal_cdf(s);
    default:
      throw InvalidArgument(name() + " has no label function");
  }
}

int LinkModel::draw_label(double s, double u) const {
  switch (kind_) {
    case ModelKind::Signed:
      return s >= 0.0 ? 1 : -1;
    case ModelKind::NoisySigned: {
      const int sign = s >= 0.0 ? 1 : -1;
      return u < eps_ ? -sign : sign;
    }
    default:
      return u < prob_positive(s) ? 1 : -1;
  }
}

double LinkModel::sample_sy_direct(double u_normal, double u_uniform) const {
  if (kind_ == ModelKind::GaussianSY) return gauss_mean_ + std::sqrt(gauss_var_) * u_normal;
  // Inverse CDF of the tabulated density.
  const double base = table_->integral(table_->lo());
  const double total = table_->integral(table_->hi()) - base;
  const double target = u_uniform * total;
  return bisect_root([&](double w) { return table_->integral(w) - base - target; }, table_->lo(),
                     table_->hi(), 1e-12);
}

std::vector<SamplePair> LinkModel::sample_pairs(std::size_t count, std::uint64_t seed,
                                                std::uint64_t stream) const {
  if (count == 0) throw InvalidArgument("sample_pairs: count must be positive");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  std::vector<SamplePair> out;
  out.reserve(count);
  const bool labelled = has_label_function();
  for (std::size_t i = 0; i < count; ++i) {
    const double s = normal(rng);
    const double u = uniform(rng);
    if (labelled) {
      out.push_back({s, draw_label(s, u)});
    } else {
      out.push_back({sample_sy_direct(s, u), 1});
    }
  }
  return out;
}

double integrate_sy(const LinkModel& model, const std::function<double(double)>& f,
                    std::size_t nodes_per_panel) {
  const NodeSet& ref = gauss_legendre(nodes_per_panel);
  const auto& edges = model.panel_edges();
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const NodeSet rule = map_legendre(ref, edges[k], edges[k + 1]);
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double w = rule.nodes[i];
      const double p = model.density_sy(w);
      if (p > 0.0) total += rule.weights[i] * p * f(w);
    }
  }
  return total;
}

}  // namespace ermasym
