#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "ermasym/csv.hpp"
#include "ermasym/errors.hpp"
#include "ermasym/limits.hpp"
#include "ermasym/saddle.hpp"
#include "ermasym/separability.hpp"
#include "oracles.hpp"

using namespace ermasym;

namespace {

// Fisher information of sigma G + SY for noiseless labels, from the closed-form
// density with a finite-difference score.
double signed_fisher(double sigma) {
  auto f = [&](double w) {
    const double h = 1e-5;
    const double p = oracle::p_w_signed(w, sigma);
    if (p < 1e-300) return 0.0;
    const double dp = (oracle::p_w_signed(w + h, sigma) - oracle::p_w_signed(w - h, sigma)) / (2 * h);
    return dp * dp / p;
  };
  const double r = 12.0 * std::sqrt(1 + sigma * sigma);
  return oracle::simpson(f, -r, r, 40000);
}

double paper_kappa(double sigma, double info) {
  const double s2 = sigma * sigma;
  return s2 * (s2 * info + info - 1.0) / (1.0 + s2 * (s2 * info - 1.0));
}

}  // namespace

TEST_CASE("smoothed density of noiseless labels matches its closed form") {
  for (double sigma : {0.05, 0.3, 1.0, 4.0}) {
    CAPTURE(sigma);
    SmoothedDensity dens(LinkModel::signed_model(), sigma);
    for (double w = -3.0; w <= 5.0; w += 0.37) {
      const double p = oracle::p_w_signed(w, sigma);
      if (p < 1e-200) continue;
      CHECK(dens(w).log_p == doctest::Approx(std::log(p)).epsilon(1e-10));
    }
  }
}

TEST_CASE("density table invariants") {
  for (const auto& m : {LinkModel::signed_model(), LinkModel::logistic(), LinkModel::noisy_signed(0.25)}) {
    for (double sigma : {0.2, 1.0, 3.0}) {
      CAPTURE(m.name());
      CAPTURE(sigma);
      const auto t = density_w(m, sigma);
      CHECK(t.grid.size() >= 4096);
      CHECK(t.spacing() <= sigma / 4 + 1e-12);
      CHECK(t.integrate([&](double, std::size_t i) { return t.p[i]; }) == doctest::Approx(1.0).epsilon(1e-8));
      CHECK(t.integrate([&](double w, std::size_t i) { return w * t.p[i]; }) ==
            doctest::Approx(m.mean_sy()).epsilon(1e-7));
      CHECK(t.integrate([&](double w, std::size_t i) { return w * w * t.p[i]; }) ==
            doctest::Approx(1 + sigma * sigma).epsilon(1e-7));
      // integration by parts: E[W score(W)] = -1
      CHECK(t.integrate([&](double w, std::size_t i) { return w * t.dp[i]; }) ==
            doctest::Approx(-1.0).epsilon(1e-7));
      CHECK(t.fisher > 0.0);
      CHECK(t.fisher < 1.0 / (sigma * sigma));
    }
  }
}

TEST_CASE("Fisher information and kappa against the closed-form density") {
  for (double sigma : {0.1, 0.5, 1.0, 2.0, 8.0}) {
    CAPTURE(sigma);
    const double ref = signed_fisher(sigma);
    const double info = fisher_information_w(LinkModel::signed_model(), sigma);
    CHECK(info == doctest::Approx(ref).epsilon(1e-6));
    CHECK(kappa(LinkModel::signed_model(), sigma) == doctest::Approx(paper_kappa(sigma, info)).epsilon(1e-9));
  }
}

TEST_CASE("kappa is monotone and below one; Fisher information decreases") {
  for (const auto& m : {LinkModel::signed_model(), LinkModel::noisy_signed(0.1), LinkModel::logistic(),
                        LinkModel::probit()}) {
    CAPTURE(m.name());
    double prev_k = 0.0, prev_i = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 24; ++k) {
      const double sigma = std::pow(10.0, -2.0 + 4.0 * k / 24);
      const double info = fisher_information_w(m, sigma);
      const double kap = kappa_from_fisher(sigma, info);
      CHECK(kap >= 0.0);
      CHECK(kap < 1.0);
      CHECK(kap >= prev_k - 1e-10);
      CHECK(info <= prev_i);
      prev_k = kap;
      prev_i = info;
    }
  }
}

TEST_CASE("gaussian labels have closed-form limits") {
  for (double m : {0.3, 0.564, 0.8}) {
    const auto model = LinkModel::gaussian_sy(m, 1 - m * m);
    CHECK(fisher_information_sy(model) == doctest::Approx(1 / (1 - m * m)).epsilon(1e-9));
    KappaScan scan(model);
    for (double delta : {2.0, 5.0, 10.0}) {
      CAPTURE(m);
      CAPTURE(delta);
      const double closed = (1 - m * m) / (m * m * (delta - 1));
      const auto res = scan.sigma_opt(delta);
      CHECK(std::abs(res.sigma_opt * res.sigma_opt - closed) < 1e-6);
      CHECK(std::abs(stam_lower_bound(model, delta) - closed) < 1e-9);
      // least squares is optimal here
      CHECK(std::abs(ls_closed_form(model, delta).sigma_eff - res.sigma_opt) < 1e-6);
    }
    CHECK(ls_suboptimality(model).inv_sqrt_xi == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("no loss beats the fundamental limit") {
  const auto model = LinkModel::probit();
  const double delta = 5.0;
  const auto opt = sigma_opt(model, delta);
  CHECK(opt.sign_changes.size() == 1);
  CHECK(stam_lower_bound(model, delta) <= opt.sigma_opt * opt.sigma_opt + 1e-9);
  for (const auto& loss : {LossSpec::square(), LossSpec::logistic(), LossSpec::exponential(), LossSpec::lad()}) {
    CAPTURE(loss.name());
    const auto s = solve_system(loss, model, delta);
    CHECK(s.sigma_eff >= opt.sigma_opt - 1e-4);
  }
}

TEST_CASE("least-squares suboptimality for logistic labels") {
  CHECK(std::abs(ls_suboptimality(LinkModel::logistic()).inv_sqrt_xi - 0.9972) <= 2e-3);
}

TEST_CASE("limit preconditions") {
  CHECK_THROWS_AS(SmoothedDensity(LinkModel::logistic(), 1e-4), SigmaTooSmall);
  CHECK_THROWS_AS(fisher_information_sy(LinkModel::signed_model()), DensityNotDifferentiable);
  CHECK_THROWS_AS(stam_lower_bound(LinkModel::logistic(), 1.0), InvalidArgument);
}

TEST_CASE("density table csv") {
  const auto path = std::filesystem::temp_directory_path() / "ermasym_density_test.csv";
  density_w(LinkModel::probit(), 0.7).save_csv(path);
  const auto t = csv::read_file(path);
  CHECK(t.header == std::vector<std::string>{"w", "p", "dp", "score"});
  CHECK(t.rows.size() >= 4096);
  std::filesystem::remove(path);
}
