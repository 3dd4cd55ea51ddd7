#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "ermasym/csv.hpp"
#include "ermasym/errors.hpp"
#include "ermasym/limits.hpp"
#include "ermasym/optimal_loss.hpp"
#include "oracles.hpp"

using namespace ermasym;

namespace {

double log_p_signed(double w, double sigma) { return std::log(oracle::p_w_signed(w, sigma)); }

double score_signed(double w, double sigma) {
  const double h = 1e-5;
  return (log_p_signed(w + h, sigma) - log_p_signed(w - h, sigma)) / (2 * h);
}

// Shared table for noiseless labels at delta = 4.
const OptLossTable& signed_table() {
  static const OptLossTable t = build_optimal_loss(LinkModel::signed_model(), 4.0);
  return t;
}

}  // namespace

TEST_CASE("coefficients satisfy the defining identities") {
  const auto& t = signed_table();
  const double s2 = t.sigma_opt * t.sigma_opt;
  CHECK(std::abs(1 + t.alpha1 - t.alpha2 / s2) < 1e-9);
  CHECK(kappa_from_fisher(t.sigma_opt, t.fisher) == doctest::Approx(0.25).epsilon(1e-8));
  CHECK(t.convexity == Convexity::ProvenSufficient);
  CHECK(t.lemma_margin <= 1e-9);
}

TEST_CASE("envelope of the optimal loss is the weighted log density") {
  const auto& t = signed_table();
  const auto loss = t.as_loss();
  const double s = t.sigma_opt;
  auto target = [&](double w) { return -0.5 * t.alpha1 * w * w - t.alpha2 * log_p_signed(w, s); };
  const double offset = loss.envelope(0.0, 1.0).value - target(0.0);
  double worst_value = 0.0, worst_slope = 0.0;
  for (double w = -3.0; w <= 5.0; w += 0.05) {
    worst_value = std::max(worst_value, std::abs(loss.envelope(w, 1.0).value - target(w) - offset));
    const double slope = -t.alpha1 * w - t.alpha2 * score_signed(w, s);
    worst_slope = std::max(worst_slope, std::abs(loss.envelope_dx(w, 1.0) - slope));
  }
  CHECK(worst_value <= 1e-5);
  CHECK(worst_slope <= 1e-6);
}

TEST_CASE("optimal envelope satisfies the moment system") {
  const auto& t = signed_table();
  const auto loss = t.as_loss();
  const double s = t.sigma_opt, delta = t.delta;
  auto expect = [&](const std::function<double(double)>& f) {
    return oracle::simpson([&](double w) { return oracle::p_w_signed(w, s) * f(w); }, -10.0, 12.0, 8000);
  };
  const double sq = expect([&](double w) { const double d = loss.envelope_dx(w, 1.0); return d * d; });
  const double cross = expect([&](double w) { return w * loss.envelope_dx(w, 1.0); });
  const double score = expect([&](double w) { return score_signed(w, s) * loss.envelope_dx(w, 1.0); });
  CHECK(std::abs(sq - s * s / delta) <= 1e-5);
  CHECK(std::abs(cross - s * s / delta) <= 1e-5);
  CHECK(std::abs(score + 1.0 / delta) <= 1e-5);
}

TEST_CASE("optimal loss attains the limit") {
  const auto& t = signed_table();
  const auto sol = verify_achievability(t, LinkModel::signed_model());
  CHECK(sol.mu == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.alpha == doctest::Approx(t.sigma_opt).epsilon(1e-6));
  CHECK(sol.lambda == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.correlation == doctest::Approx(0.9457).epsilon(5e-3));
}

TEST_CASE("gaussian labels give an affine optimal derivative") {
  for (double m : {0.3, 0.564, 0.8}) {
    CAPTURE(m);
    OptLossOptions opts;
    opts.sigma_opt = std::sqrt((1 - m * m) / (m * m * 4.0));
    const auto t = build_optimal_loss(LinkModel::gaussian_sy(m, 1 - m * m), 5.0, opts);
    // least-squares line through (w, dloss)
    const std::size_t n = t.grid.size();
    double sw = 0, sd = 0, sww = 0, swd = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sw += t.grid[i]; sd += t.dloss[i]; sww += t.grid[i] * t.grid[i]; swd += t.grid[i] * t.dloss[i];
    }
    const double slope = (n * swd - sw * sd) / (n * sww - sw * sw);
    const double icept = (sd - slope * sw) / n;
    double dev = 0.0;
    for (std::size_t i = 0; i < n; ++i) dev = std::max(dev, std::abs(t.dloss[i] - slope * t.grid[i] - icept));
    CHECK(dev < 1e-5);
    CHECK(slope > 0.0);
  }
}

TEST_CASE("posterior-variance bound for noiseless labels") {
  std::vector<double> grid;
  for (double w = -6.0; w <= 8.0; w += 0.1) grid.push_back(w);
  for (double sigma : {0.2, 0.6, 2.0}) {
    const auto c = lemma_d1_check(LinkModel::signed_model(), sigma, grid);
    CHECK(c.holds);
  }
}

TEST_CASE("optimal loss csv round trip") {
  const auto& t = signed_table();
  const auto path = std::filesystem::temp_directory_path() / "ermasym_optloss_test.csv";
  t.save_csv(path);
  const auto tab = csv::read_file(path);
  CHECK(tab.header == std::vector<std::string>{"w", "loss", "dloss", "d2loss", "loss_display", "dloss_display"});
  REQUIRE(tab.comments.size() >= 2);
  CHECK(tab.comments[0].find("sigma_opt=") != std::string::npos);
  CHECK(tab.comments[1].find("convexity=") != std::string::npos);
  const auto reloaded = LossSpec::load_table_csv(path);
  const auto orig = t.as_loss();
  for (double w = -2.0; w <= 3.0; w += 0.1) {
    CHECK(std::abs(reloaded.derivative(w) - orig.derivative(w)) < 1e-9);
    CHECK(std::abs(reloaded.prox(w, 1.0) - orig.prox(w, 1.0)) < 1e-9);
  }
  // display scaling puts loss(1) at 0 and loss(2) at 1
  CHECK(std::abs((orig.value(1.0) - t.display_offset) / t.display_scale) < 1e-12);
  CHECK(std::abs((orig.value(2.0) - t.display_offset) / t.display_scale - 1.0) < 1e-12);
  std::filesystem::remove(path);
}

TEST_CASE("optimal loss preconditions") {
  CHECK_THROWS_AS(build_optimal_loss(LinkModel::signed_model(), 1.0), InvalidArgument);
  OptLossOptions tiny;
  tiny.points = 4;
  CHECK_THROWS_AS(build_optimal_loss(LinkModel::signed_model(), 3.0, tiny), InvalidArgument);
}
