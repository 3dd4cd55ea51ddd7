#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "ermasym/link_models.hpp"
#include "ermasym/numerics.hpp"

namespace ermasym {

struct QuadratureOptions {
  std::size_t g_order = 80;         // Gauss-Hermite nodes for smooth integrands
  std::size_t sy_order = 64;        // Gauss-Legendre nodes per SY panel
  std::size_t g_panel_order = 10;   // Legendre nodes per G panel (kinked integrands)
  double g_panel_width = 0.5;
  double g_max = 10.0;              // G is truncated to [-g_max, g_max] on panels
  double refinement_tol = 1e-7;
};

// An integrand whose dependence on g is piecewise smooth: it has kinks where
// x = a_g * g + a_sy * sy crosses one of `x_kinks`. Used to split G panels so
// that every panel sees a smooth function.
struct KinkLine {
  double a_g = 1.0;
  double a_sy = 0.0;
  std::span<const double> x_kinks;
};

// Tensor-product rule for E[f(G, SY)] with G ~ N(0, 1) independent of SY.
// Immutable; safe to share between threads.
class QuadratureRule {
 public:
  explicit QuadratureRule(const LinkModel& model, QuadratureOptions opts = {});

  // Same model, every node count doubled.
  QuadratureRule refined() const;

  const QuadratureOptions& options() const { return opts_; }
  const LinkModel& model() const { return model_; }
  std::span<const double> g_nodes() const { return g_nodes_; }
  std::span<const double> g_weights() const { return g_weights_; }
  std::span<const double> sy_nodes() const { return sy_nodes_; }
  // Legendre weight times p_SY at the node.
  std::span<const double> sy_weights() const { return sy_weights_; }

  // Calls fn(g, sy, weight) for every node of the tensor rule. Without kinks
  // G uses Gauss-Hermite; with kinks each SY node gets its own panel rule in
  // g split at the kink locations.
  template <typename Fn>
  void visit(const KinkLine* kinks, Fn&& fn) const;

 private:
  template <typename Fn>
  void visit_kinked_row(const KinkLine& kinks, double sy, double wsy, Fn& fn) const;

  LinkModel model_;
  QuadratureOptions opts_;
  std::vector<double> g_nodes_, g_weights_;
  std::vector<double> sy_nodes_, sy_weights_;
  std::vector<double> panel_ref_nodes_, panel_ref_weights_;
};

// E[f(G, SY)] on the rule, cross-checked against the refined rule: throws
// QuadratureNonConvergence when they differ by more than the rule's
// refinement_tol and NonFiniteIntegrand on NaN/inf values.
double expect_gsy(const QuadratureRule& rule, const std::function<double(double, double)>& f,
                  const KinkLine* kinks = nullptr);

// E[(G + c SY)_-^2] with (t)_- = min(0, t).
double expect_negpart_sq(const QuadratureRule& rule, double c);

// ---------------------------------------------------------------------------

template <typename Fn>
void QuadratureRule::visit(const KinkLine* kinks, Fn&& fn) const {
  for (std::size_t j = 0; j < sy_nodes_.size(); ++j) {
    const double sy = sy_nodes_[j];
    const double wsy = sy_weights_[j];
    if (kinks == nullptr || kinks->x_kinks.empty() || kinks->a_g == 0.0) {
      for (std::size_t i = 0; i < g_nodes_.size(); ++i) fn(g_nodes_[i], sy, wsy * g_weights_[i]);
    } else {
      visit_kinked_row(*kinks, sy, wsy, fn);
    }
  }
}

template <typename Fn>
void QuadratureRule::visit_kinked_row(const KinkLine& kinks, double sy, double wsy,
                                      Fn& fn) const {
  const double gmax = opts_.g_max;
  // Breakpoints in g, sorted, restricted to the open truncation interval.
  double cuts[16];
  std::size_t ncut = 0;
  cuts[ncut++] = -gmax;
  for (double xk : kinks.x_kinks) {
    const double g = (xk - kinks.a_sy * sy) / kinks.a_g;
    if (g > -gmax && g < gmax && ncut < 15) cuts[ncut++] = g;
  }
  cuts[ncut++] = gmax;
  std::sort(cuts, cuts + ncut);
  const double width = opts_.g_panel_width;
  for (std::size_t s = 0; s + 1 < ncut; ++s) {
    const double a = cuts[s], b = cuts[s + 1];
    if (!(b > a)) continue;
    const auto panels = static_cast<std::size_t>(std::max(1.0, std::ceil((b - a) / width)));
    const double h = (b - a) / static_cast<double>(panels);
    for (std::size_t p = 0; p < panels; ++p) {
      const double lo = a + h * static_cast<double>(p);
      const double mid = lo + 0.5 * h;
      for (std::size_t k = 0; k < panel_ref_nodes_.size(); ++k) {
        const double g = mid + 0.5 * h * panel_ref_nodes_[k];
        fn(g, sy, wsy * 0.5 * h * panel_ref_weights_[k] * normal_pdf(g));
      }
    }
  }
}

}  // namespace ermasym
