// Acceptance report: one PASS/FAIL line per criterion.
//
// Usage: acceptance [--strict] [--out DIR]
// Exit status is nonzero when a criterion fails that is not on the list of
// documented deviations; with --strict any failure is fatal.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ermasym/csv.hpp"
#include "ermasym/erm_sim.hpp"
#include "ermasym/errors.hpp"
#include "ermasym/limits.hpp"
#include "ermasym/optimal_loss.hpp"
#include "ermasym/saddle.hpp"
#include "ermasym/separability.hpp"
#include "oracles.hpp"

using namespace ermasym;
namespace fs = std::filesystem;

namespace {

// Criteria whose failure is analysed in the project notes and expected.
const std::set<std::string> known_deviations{"ls_ratio_probit"};

struct Report {
  int passed = 0;
  int failed = 0;
  int unexpected = 0;

  void line(const std::string& id, bool ok, const std::string& detail, double seconds) {
    const bool known = !ok && known_deviations.count(id) > 0;
    std::printf("%s %-28s %s (%.1fs)%s\n", ok ? "PASS" : "FAIL", id.c_str(), detail.c_str(), seconds,
                known ? " [known deviation]" : "");
    std::fflush(stdout);
    if (ok) {
      ++passed;
    } else {
      ++failed;
      if (!known) ++unexpected;
    }
  }

  // Runs a criterion; exceptions count as failures.
  void run(const std::string& id, const std::function<bool(std::string&)>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = body(detail);
    } catch (const std::exception& e) {
      detail += std::string(" exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    line(id, ok, detail, secs);
  }
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

const double table_deltas[] = {2, 3, 4, 5, 6, 7, 8, 9};
const double table_predicted[] = {0.8168, 0.9101, 0.9457, 0.9645, 0.9748, 0.9813, 0.9855, 0.9885};
const double table_empirical[] = {0.8213, 0.9045, 0.9504, 0.9669, 0.9734, 0.9801, 0.9834, 0.9873};

// Every accepted solution is collected for the stationarity criteria.
struct Solved {
  LossSpec loss;
  LinkModel model;
  SaddleSolution sol;
};
std::vector<Solved> accepted;

SaddleSolution solve_and_keep(const LossSpec& loss, const LinkModel& model, double delta,
                              const SolverOptions& opts = {}) {
  const auto s = solve_system(loss, model, delta, opts);
  accepted.push_back({loss, model, s});
  return s;
}

std::vector<LossSpec> property_losses() {
  return {LossSpec::square(), LossSpec::lad(), LossSpec::logistic(), LossSpec::exponential(),
          LossSpec::hinge(), LossSpec::logistic().scaled(2.5, -0.7), LossSpec::hinge().scaled(0.4, 1.9)};
}

struct Triple {
  double x, x2, lambda;
};

std::vector<Triple> random_triples(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(-10.0, 10.0), ul(std::log(1e-2), std::log(10.0));
  std::vector<Triple> out(n);
  for (auto& t : out) t = {ux(rng), ux(rng), std::exp(ul(rng))};
  return out;
}

double subgradient_gap(const LossSpec& loss, double p, double g) {
  if (loss.smoothness() != Smoothness::C0Convex) return std::abs(loss.derivative(p) - g);
  const double h = 1e-9 * (1.0 + std::abs(p));
  const double lo = std::min(loss.derivative(p - h), loss.derivative(p + h));
  const double hi = std::max(loss.derivative(p - h), loss.derivative(p + h));
  return std::max({0.0, lo - g, g - hi});
}

bool near_kink(const LossSpec& loss, double x, double lambda) {
  for (double k : loss.envelope_kinks(lambda))
    if (std::abs(x - k) < 1e-3) return true;
  return false;
}

struct FigureSpec {
  std::string name;
  LinkModel model;
  std::vector<LossSpec> losses;
  // (loss index, delta) points checked against finite-n simulation
  std::vector<std::pair<std::size_t, double>> markers;
};

}  // namespace

int main(int argc, char** argv) {
  bool strict = false;
  fs::path out_dir = "acceptance_out";
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--strict") == 0) {
      strict = true;
    } else if (std::strcmp(argv[i], "--out") == 0 && i + 1 < argc) {
      out_dir = argv[++i];
    } else {
      std::fprintf(stderr, "usage: acceptance [--strict] [--out DIR]\n");
      return 1;
    }
  }
  fs::create_directories(out_dir);
  Report rep;

  const LinkModel signed_model = LinkModel::signed_model();
  KappaScan signed_scan(signed_model);
  std::vector<double> signed_sigma_opt(8);

  rep.run("table1_predicted", [&](std::string& d) {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (int k = 0; k < 8; ++k) {
      const auto r = signed_scan.sigma_opt(table_deltas[k]);
      signed_sigma_opt[k] = r.sigma_opt;
      worst = std::max(worst, std::abs(r.correlation() - table_predicted[k]));
      d += fmt(k ? ",%.4f" : "corr=%.4f", r.correlation());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    d += fmt(" max_err=%.1e", worst) + fmt(" tol=5e-3 time=%.1fs budget=30s", secs);
    return worst <= 5e-3 && secs < 30.0;
  });

  rep.run("table1_empirical", [&](std::string& d) {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (int k = 0; k < 8; ++k) {
      OptLossOptions o;
      o.sigma_opt = signed_sigma_opt[k];
      const auto table = build_optimal_loss(signed_model, table_deltas[k], o);
      table.save_csv(out_dir / ("optloss_signed_d" + csv::num(table_deltas[k]) + ".csv"));
      verify_achievability(table, signed_model);
      Experiment e;
      e.model = signed_model;
      e.loss = table.as_loss();
      e.n = 128;
      e.delta = table_deltas[k];
      e.trials = 20;
      e.seed = 2020 + k;
      const auto s = run_experiment(e);
      worst = std::max(worst, std::abs(s.corr_mean - table_empirical[k]));
      d += fmt(k ? ",%.4f" : "corr=%.4f", s.corr_mean);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    d += fmt(" max_err=%.4f tol=0.02", worst) + fmt(" time=%.0fs budget=600s", secs);
    return worst <= 0.02 && secs < 600.0;
  });

  rep.run("least_squares_closed_form", [&](std::string& d) {
    const std::vector<LinkModel> models{signed_model, LinkModel::probit(), LinkModel::logistic(),
                                        LinkModel::noisy_signed(0.1), LinkModel::noisy_signed(0.25)};
    // The solver starts at the closed form, so jittered restarts are what
    // exercise the iteration here.
    SolverOptions opts;
    opts.n_starts = 4;
    double worst = 0.0, spread = 0.0;
    int count = 0;
    for (const auto& m : models) {
      for (double delta : {1.5, 2.0, 3.0, 5.0, 10.0}) {
        const auto s = solve_and_keep(LossSpec::square(), m, delta, opts);
        const auto ref = oracle::least_squares(m.mean_sy(), delta);
        worst = std::max({worst, std::abs(s.mu - ref.mu), std::abs(s.alpha - ref.alpha),
                          std::abs(s.lambda - ref.lambda)});
        spread = std::max(spread, s.multistart_spread);
        ++count;
      }
    }
    d = std::to_string(count) + " cases, max |diff| in (mu, alpha, lambda) = " + fmt("%.1e", worst) +
        ", restart spread " + fmt("%.1e", spread) + " tol=1e-6";
    return worst <= 1e-6 && spread <= 1e-6;
  });

  rep.run("ls_ratio_logistic", [&](std::string& d) {
    const double v = ls_suboptimality(LinkModel::logistic()).inv_sqrt_xi;
    d = fmt("1/sqrt(xi)=%.4f", v) + " expected 0.9972 tol=2e-3";
    return std::abs(v - 0.9972) <= 2e-3;
  });
  rep.run("ls_ratio_probit", [&](std::string& d) {
    const LinkModel m = LinkModel::probit();
    const double v = ls_suboptimality(m).inv_sqrt_xi;
    d = fmt("1/sqrt(xi)=%.4f", v) + fmt(" (I(SY)=%.5f)", fisher_information_sy(m)) + " expected 0.9804 tol=2e-3";
    return std::abs(v - 0.9804) <= 2e-3;
  });

  struct ThresholdCase {
    std::string id;
    LinkModel model;
    double expected;
  };
  const std::vector<ThresholdCase> thresholds{{"threshold_logistic", LinkModel::logistic(), 2.275},
                                              {"threshold_probit", LinkModel::probit(), 2.699},
                                              {"threshold_noisy_0.5", LinkModel::noisy_signed(0.5), 2.0},
                                              {"threshold_noisy_0.1", LinkModel::noisy_signed(0.1), 3.0},
                                              {"threshold_noisy_0.25", LinkModel::noisy_signed(0.25), 2.25}};
  for (const auto& c : thresholds) {
    rep.run(c.id, [&](std::string& d) {
      const double v = separability_threshold(c.model);
      d = fmt("delta*=%.4f", v) + fmt(" expected %.3f tol=0.01", c.expected);
      return std::abs(v - c.expected) <= 0.01;
    });
  }

  const std::vector<double> gauss_means{0.3, 0.564, 0.8};
  rep.run("gaussian_sigma_opt", [&](std::string& d) {
    double worst = 0.0;
    for (double m : gauss_means) {
      KappaScan scan(LinkModel::gaussian_sy(m, 1 - m * m));
      for (double delta : {2.0, 5.0, 10.0}) {
        const double s = scan.sigma_opt(delta).sigma_opt;
        worst = std::max(worst, std::abs(s * s - (1 - m * m) / (m * m * (delta - 1))));
      }
    }
    d = "9 cases, max |sigma_opt^2 - closed form| = " + fmt("%.1e", worst) + " tol=1e-6";
    return worst <= 1e-6;
  });
  rep.run("gaussian_stam_equality", [&](std::string& d) {
    double worst = 0.0;
    for (double m : gauss_means)
      for (double delta : {2.0, 5.0, 10.0})
        worst = std::max(worst, std::abs(stam_lower_bound(LinkModel::gaussian_sy(m, 1 - m * m), delta) -
                                         (1 - m * m) / (m * m * (delta - 1))));
    d = "max |bound - sigma_opt^2| = " + fmt("%.1e", worst) + " tol=1e-6";
    return worst <= 1e-6;
  });
  rep.run("gaussian_affine_derivative", [&](std::string& d) {
    double worst = 0.0;
    for (double m : gauss_means) {
      const auto t = build_optimal_loss(LinkModel::gaussian_sy(m, 1 - m * m), 3.0);
      const std::size_t n = t.grid.size();
      double sw = 0, sd = 0, sww = 0, swd = 0;
      for (std::size_t i = 0; i < n; ++i) {
        sw += t.grid[i];
        sd += t.dloss[i];
        sww += t.grid[i] * t.grid[i];
        swd += t.grid[i] * t.dloss[i];
      }
      const double slope = (n * swd - sw * sd) / (n * sww - sw * sw);
      const double icept = (sd - slope * sw) / n;
      for (std::size_t i = 0; i < n; ++i)
        worst = std::max(worst, std::abs(t.dloss[i] - slope * t.grid[i] - icept));
    }
    d = "max deviation from best-fit line = " + fmt("%.1e", worst) + " tol=1e-5";
    return worst < 1e-5;
  });

  rep.run("prox_nonexpansive_optimal", [&](std::string& d) {
    double expansion = 0.0, residual = 0.0;
    std::size_t count = 0;
    for (const auto& loss : property_losses()) {
      for (const auto& t : random_triples(10000, 17)) {
        const double p = loss.prox(t.x, t.lambda), q = loss.prox(t.x2, t.lambda);
        expansion = std::max(expansion, std::abs(p - q) - std::abs(t.x - t.x2));
        const double g = (t.x - p) / t.lambda;
        residual = std::max(residual, subgradient_gap(loss, p, g) / std::max(1.0, std::abs(g)));
        ++count;
      }
    }
    d = std::to_string(count) + " triples, max expansion " + fmt("%.1e", expansion) + ", max residual " +
        fmt("%.1e", residual) + " tol=1e-10";
    return expansion <= 1e-10 && residual <= 1e-10;
  });

  rep.run("envelope_derivatives", [&](std::string& d) {
    double fd_err = 0.0, ident = 0.0;
    for (const auto& loss : property_losses()) {
      for (const auto& t : random_triples(2000, 5)) {
        if (near_kink(loss, t.x, t.lambda)) continue;
        const auto e = loss.envelope(t.x, t.lambda);
        const double h = 1e-5 * (1 + std::abs(t.x)), hl = 1e-6 * t.lambda;
        const double fdx = (loss.envelope(t.x + h, t.lambda).value - loss.envelope(t.x - h, t.lambda).value) / (2 * h);
        const double fdl =
            (loss.envelope(t.x, t.lambda + hl).value - loss.envelope(t.x, t.lambda - hl).value) / (2 * hl);
        fd_err = std::max({fd_err, std::abs(fdx - e.dx) / std::max(1.0, std::abs(e.dx)),
                           std::abs(fdl - e.dlambda) / std::max(1.0, std::abs(e.dlambda))});
        ident = std::max(ident, std::abs(e.dlambda + e.dx * e.dx / 2) / std::max(1.0, e.dx * e.dx));
      }
    }
    d = "max relative finite-difference gap " + fmt("%.1e", fd_err) + " tol=1e-6; dlambda identity " +
        fmt("%.1e", ident) + " tol=1e-9";
    return fd_err <= 1e-6 && ident <= 1e-9;
  });

  rep.run("fenchel_identity", [&](std::string& d) {
    double worst = 0.0;
    for (const auto& loss : property_losses()) {
      for (double lambda : {0.3, 1.0, 2.5}) {
        for (double x = -4.0; x <= 4.0; x += 0.5) {
          auto neg = [&](double y) { return -(x * y - y * y / 2 - lambda * loss.value(y)); };
          double best = -50.0;
          for (double y = -50.0; y <= 50.0; y += 0.01)
            if (neg(y) < neg(best)) best = y;
          const double y = oracle::argmin(neg, best - 0.02, best + 0.02);
          worst = std::max(worst, std::abs(x * x / (2 * lambda) + neg(y) / lambda - loss.envelope(x, lambda).value));
        }
      }
    }
    d = "max |M - conjugate form| = " + fmt("%.1e", worst) + " tol=1e-6";
    return worst <= 1e-6;
  });

  rep.run("scale_equivalence", [&](std::string& d) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.3, 3.0);
    std::bernoulli_distribution flip(0.3);
    double worst = 0.0;
    const LinkModel model = LinkModel::probit();
    for (const auto& loss : {LossSpec::square(), LossSpec::logistic(), LossSpec::exponential(), LossSpec::hinge(),
                             LossSpec::lad()}) {
      const auto base = solve_and_keep(loss, model, 5.0);
      for (int k = 0; k < 3; ++k) {
        const double c1 = u(rng);
        const double c2 = (loss.kind() == LossKind::Square && flip(rng) ? -1.0 : 1.0) * u(rng);
        const auto scaled = loss.scaled(c1, c2);
        const auto s = solve_and_keep(scaled, model, 5.0);
        worst = std::max({worst, std::abs(std::abs(s.sigma_eff) - base.sigma_eff),
                          std::abs(std::abs(s.correlation) - base.correlation)});
      }
    }
    d = "max |change in sigma_eff or corr| = " + fmt("%.1e", worst) + " tol=1e-6";
    return worst <= 1e-6;
  });

  rep.run("multistart_spread", [&](std::string& d) {
    SolverOptions opts;
    opts.n_starts = 8;
    opts.seed = 12;
    double worst = 0.0;
    for (const auto& loss : {LossSpec::square(), LossSpec::logistic(), LossSpec::exponential()}) {
      const auto s = solve_and_keep(loss, LinkModel::probit(), 5.0, opts);
      worst = std::max(worst, s.multistart_spread);
    }
    d = "max spread over 8 starts = " + fmt("%.1e", worst) + " tol=1e-6";
    return worst <= 1e-6;
  });

  rep.run("kappa_monotone_below_one", [&](std::string& d) {
    const std::vector<LinkModel> models{signed_model, LinkModel::noisy_signed(0.1), LinkModel::noisy_signed(0.25),
                                        LinkModel::logistic(), LinkModel::probit()};
    double drop = 0.0, top = 0.0;
    bool ok = true;
    for (const auto& m : models) {
      double prev = 0.0;
      for (int k = 0; k < 200; ++k) {
        const double sigma = std::pow(10.0, -2.0 + 4.0 * k / 199);
        const double kap = kappa(m, sigma);
        ok = ok && kap >= 0.0 && kap < 1.0;
        drop = std::max(drop, prev - kap);
        top = std::max(top, kap);
        prev = kap;
      }
    }
    d = "5 models x 200 sigmas, max kappa " + fmt("%.6f", top) + ", largest decrease " + fmt("%.1e", drop);
    return ok && drop <= 1e-10;
  });

  // Figure curves as asymptotic prediction CSVs, with finite-n spot checks.
  const std::vector<FigureSpec> figures{
      {"signed", signed_model, {LossSpec::square(), LossSpec::lad()}, {{0, 3.0}, {1, 6.0}}},
      {"logistic", LinkModel::logistic(), {LossSpec::square(), LossSpec::logistic(), LossSpec::hinge()},
       {{0, 4.0}, {1, 5.0}, {2, 7.0}}},
      {"probit", LinkModel::probit(), {LossSpec::square(), LossSpec::hinge()}, {{0, 3.0}, {1, 6.0}}}};
  for (const auto& fig : figures) {
    rep.run("figure_curves_" + fig.name, [&](std::string& d) {
      const double threshold = separability_threshold(fig.model);
      SolverOptions opts;
      opts.separability_threshold = threshold;
      KappaScan scan(fig.model);
      const fs::path path = out_dir / ("curves_" + fig.name + ".csv");
      std::ofstream out(path);
      out << "model,loss,delta,corr,corr_opt\n";
      bool ok = true;
      int rows = 0;
      for (double delta = 1.5; delta <= 10.0 + 1e-9; delta += 0.5) {
        const double corr_opt = scan.sigma_opt(delta).correlation();
        for (const auto& loss : fig.losses) {
          if (loss.vanishing_right_tail() && delta <= threshold) continue;
          const auto s = solve_and_keep(loss, fig.model, delta, opts);
          ok = ok && s.correlation <= corr_opt + 1e-4;
          out << fig.model.name() << ',' << loss.name() << ',' << csv::num(delta) << ','
              << csv::num(s.correlation) << ',' << csv::num(corr_opt) << '\n';
          ++rows;
        }
      }
      d = std::to_string(rows) + " rows in " + path.string() + (ok ? ", all below the bound" : ", bound violated");
      return ok;
    });
    rep.run("figure_markers_" + fig.name, [&](std::string& d) {
      bool ok = true;
      for (const auto& [li, delta] : fig.markers) {
        const auto& loss = fig.losses[li];
        const auto pred = solve_system(loss, fig.model, delta);
        Experiment e;
        e.model = fig.model;
        e.loss = loss;
        e.n = 128;
        e.delta = delta;
        e.trials = 20;
        e.seed = 77;
        const auto s = run_experiment(e);
        const double tol = std::max(0.02, 3 * s.corr_stderr);
        ok = ok && std::abs(s.corr_mean - pred.correlation) <= tol;
        d += loss.name() + fmt("@%g:", delta) + fmt("%.4f", s.corr_mean) + fmt("/%.4f ", pred.correlation);
      }
      d += "(empirical/predicted, tol max(0.02, 3 stderr))";
      return ok;
    });
  }

  rep.run("stationarity_residuals", [&](std::string& d) {
    double worst = 0.0;
    std::string where;
    for (const auto& a : accepted) {
      const auto st = stationarity_check(a.loss, a.model, a.sol.delta, ScalarSaddlePoint::from_solution(a.sol));
      if (st.max_abs() > worst) {
        worst = st.max_abs();
        where = a.loss.name() + "/" + a.model.name() + fmt("@%g", a.sol.delta);
      }
    }
    d = std::to_string(accepted.size()) + " accepted solutions, max residual " + fmt("%.1e", worst) + " at " +
        where + " tol=1e-8";
    return worst <= 1e-8;
  });

  rep.run("second_order_residual", [&](std::string& d) {
    double worst = 0.0;
    int count = 0;
    for (const auto& a : accepted) {
      if (a.loss.smoothness() != Smoothness::C2) continue;
      worst = std::max(worst, std::abs(second_order_check(a.loss, a.model, a.sol)));
      ++count;
    }
    d = std::to_string(count) + " smooth-loss solutions, max residual " + fmt("%.1e", worst) + " tol=1e-7";
    return worst <= 1e-7;
  });

  std::printf("SUMMARY %d passed, %d failed (%d unexpected)\n", rep.passed, rep.failed, rep.unexpected);
  if (strict) return rep.failed == 0 ? 0 : 1;
  return rep.unexpected == 0 ? 0 : 1;
}
