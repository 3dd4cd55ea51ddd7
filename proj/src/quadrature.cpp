#include "ermasym/quadrature.hpp"

#include <algorithm>
#include <cmath>

#include "ermasym/csv.hpp"
#include "ermasym/errors.hpp"

namespace ermasym {

QuadratureRule::QuadratureRule(const LinkModel& model, QuadratureOptions opts)
    : model_(model), opts_(opts) {
  if (opts_.g_order == 0 || opts_.sy_order == 0 || opts_.g_panel_order == 0 ||
      !(opts_.g_panel_width > 0.0) || !(opts_.g_max > 0.0))
    throw InvalidArgument("QuadratureRule: orders and widths must be positive");
  const NodeSet& gh = gauss_hermite_normal(opts_.g_order);
  g_nodes_ = gh.nodes;
  g_weights_ = gh.weights;

  const NodeSet& gl = gauss_legendre(opts_.sy_order);
  const auto& edges = model_.panel_edges();
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const NodeSet panel = map_legendre(gl, edges[k], edges[k + 1]);
    for (std::size_t i = 0; i < panel.nodes.size(); ++i) {
      const double p = model_.density_sy(panel.nodes[i]);
      if (p <= 0.0) continue;
      sy_nodes_.push_back(panel.nodes[i]);
      sy_weights_.push_back(panel.weights[i] * p);
    }
  }
  const NodeSet& ref = gauss_legendre(opts_.g_panel_order);
  panel_ref_nodes_ = ref.nodes;
  panel_ref_weights_ = ref.weights;
}

QuadratureRule QuadratureRule::refined() const {
  QuadratureOptions o = opts_;
  o.g_order *= 2;
  o.sy_order *= 2;
  o.g_panel_width *= 0.5;
  return QuadratureRule(model_, o);
}

namespace {

double sum_rule(const QuadratureRule& rule, const std::function<double(double, double)>& f,
                const KinkLine* kinks) {
  double total = 0.0;
  bool finite = true;
  rule.visit(kinks, [&](double g, double sy, double w) {
    const double v = f(g, sy);
    if (!std::isfinite(v)) finite = false;
    total += w * v;
  });
  if (!finite) throw NonFiniteIntegrand("expect_gsy: integrand is not finite on the node set");
  return total;
}

}  // namespace

double expect_gsy(const QuadratureRule& rule, const std::function<double(double, double)>& f,
                  const KinkLine* kinks) {
  const double coarse = sum_rule(rule, f, kinks);
  const double fine = sum_rule(rule.refined(), f, kinks);
  const double gap = std::abs(fine - coarse);
  if (gap > rule.options().refinement_tol)
    throw QuadratureNonConvergence("expect_gsy: refinement changed the result by " +
                                   csv::num(gap));
  return fine;
}

namespace {

// E[(G + a)_-^2] for G standard normal.
double negpart_sq_shifted(double a) {
  return (1.0 + a * a) * normal_cdf(-a) - a * normal_pdf(a);
}

double negpart_sq_sum(const LinkModel& model, double c, std::size_t order) {
  // The inner expectation varies on the scale 1/|c| in sy, so the model
  // panels are split where c sy crosses a few fixed levels.
  std::vector<double> cuts = model.panel_edges();
  const double lo = cuts.front(), hi = cuts.back();
  if (c != 0.0) {
    for (double level : {-12.0, -6.0, -3.0, -1.0, 0.0, 1.0, 3.0, 6.0, 12.0}) {
      const double sy = level / c;
      if (sy > lo && sy < hi) cuts.push_back(sy);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  const NodeSet& gl = gauss_legendre(order);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const NodeSet panel = map_legendre(gl, cuts[k], cuts[k + 1]);
    for (std::size_t i = 0; i < panel.nodes.size(); ++i) {
      const double sy = panel.nodes[i];
      total += panel.weights[i] * model.density_sy(sy) * negpart_sq_shifted(c * sy);
    }
  }
  return total;
}

}  // namespace

double expect_negpart_sq(const QuadratureRule& rule, double c) {
  if (!std::isfinite(c)) throw NonFiniteIntegrand("expect_negpart_sq: c is not finite");
  // The inner expectation over G is exact; the SY integral is cross-checked
  // against a rule of twice the order.
  const std::size_t order = rule.options().sy_order;
  const double coarse = negpart_sq_sum(rule.model(), c, order);
  const double fine = negpart_sq_sum(rule.model(), c, 2 * order);
  if (std::abs(fine - coarse) > rule.options().refinement_tol)
    throw QuadratureNonConvergence("expect_negpart_sq: refinement changed the result by " +
                                   csv::num(std::abs(fine - coarse)));
  return fine;
}

}  // namespace ermasym
