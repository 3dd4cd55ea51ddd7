#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "ermasym/errors.hpp"
#include "ermasym/separability.hpp"
#include "oracles.hpp"

using namespace ermasym;

namespace {

// Threshold from the written-out objective: min over c of
// E[(G + c SY)_-^2] with SY integrated by Simpson.
double brute_threshold(const std::function<double(double)>& p_sy) {
  auto objective = [&](double c) {
    auto f = [&](double w) { return p_sy(w) * oracle::negpart_sq(c * w); };
    return oracle::simpson([&](double w) { return f(std::min(w, -1e-300)); }, -12.0, 0.0, 24000) + oracle::simpson([&](double w) { return f(std::max(w, 1e-300)); }, 0.0, 12.0, 24000);
  };
  const double c = oracle::argmin(objective, 0.0, 20.0, 1e-9);
  return 1.0 / objective(c);
}

}  // namespace

TEST_CASE("threshold matches brute-force minimization") {
  CHECK(separability_threshold(LinkModel::logistic()) ==
        doctest::Approx(brute_threshold(oracle::p_sy_logistic)).epsilon(1e-6));
  CHECK(separability_threshold(LinkModel::probit()) ==
        doctest::Approx(brute_threshold(oracle::p_sy_probit)).epsilon(1e-6));
  CHECK(separability_threshold(LinkModel::noisy_signed(0.1)) ==
        doctest::Approx(brute_threshold([](double w) { return oracle::p_sy_noisy(w, 0.1); })).epsilon(1e-6));
}

TEST_CASE("pure label noise gives threshold two and noiseless labels are always separable") {
  CHECK(separability_threshold(LinkModel::noisy_signed(0.5)) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(std::isinf(separability_threshold(LinkModel::signed_model())));
}

TEST_CASE("threshold decreases as label noise grows") {
  const auto curve = threshold_curve({0.05, 0.1, 0.2, 0.3, 0.4, 0.5});
  REQUIRE(curve.size() == 6);
  for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].delta_star <= curve[i - 1].delta_star + 1e-9);
  CHECK_THROWS_AS(threshold_curve({0.0}), InvalidArgument);
  CHECK_THROWS_AS(threshold_curve({0.6}), InvalidArgument);
}
