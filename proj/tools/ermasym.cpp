// Command-line front end: asymptotic predictions, fundamental limits, optimal
// loss synthesis, Monte Carlo simulation and separability thresholds.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ermasym/csv.hpp"
#include "ermasym/erm_sim.hpp"
#include "ermasym/errors.hpp"
#include "ermasym/limits.hpp"
#include "ermasym/optimal_loss.hpp"
#include "ermasym/parallel.hpp"
#include "ermasym/saddle.hpp"
#include "ermasym/separability.hpp"

using namespace ermasym;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitSolver = 2;
constexpr int kExitNonConvex = 3;

struct Config {
  std::string model = "signed";
  double eps = 0.0;
  double sy_mean = 0.6;
  double sy_var = -1.0;  // negative: 1 - mean^2
  std::string model_table;
  std::string loss = "square";
  std::string loss_table;
  std::optional<double> delta;
  std::string delta_sweep;
  bool log_sweep = false;
  std::string eps_sweep;
  std::size_t n = 128;
  std::size_t trials = 25;
  std::uint64_t seed = 1;
  int steps = 1000;
  double tol = 1e-9;
  int max_iter = 500;
  double damping = 0.5;
  int n_starts = 1;
  std::size_t g_order = 80;
  std::size_t sy_order = 64;
  std::size_t grid_points = 2048;
  std::string output;
  std::string gnuplot;
};

struct Sweep {
  double start, stop;
  std::size_t count;
};

Sweep parse_sweep(const std::string& text) {
  const auto parts = csv::split(text, ':');
  if (parts.size() != 3) throw ParseError("sweep must look like start:stop:count, got '" + text + "'");
  try {
    const double a = std::stod(parts[0]);
    const double b = std::stod(parts[1]);
    const long c = std::stol(parts[2]);
    if (c < 1) throw ParseError("sweep count must be at least 1");
    return {a, b, static_cast<std::size_t>(c)};
  } catch (const std::logic_error&) {
    throw ParseError("malformed sweep '" + text + "'");
  }
}

std::vector<double> sweep_values(const Sweep& s, bool log_spaced) {
  std::vector<double> out(s.count);
  for (std::size_t i = 0; i < s.count; ++i) {
    const double f = s.count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(s.count - 1);
    out[i] = log_spaced ? std::exp(std::log(s.start) + f * (std::log(s.stop) - std::log(s.start)))
                        : s.start + f * (s.stop - s.start);
  }
  return out;
}

std::vector<double> delta_grid(const Config& c) {
  std::vector<double> ds;
  if (!c.delta_sweep.empty()) {
    const Sweep s = parse_sweep(c.delta_sweep);
    if (c.log_sweep && !(s.start > 0.0 && s.stop > 0.0))
      throw ParseError("log sweep needs positive ends");
    ds = sweep_values(s, c.log_sweep);
  } else if (c.delta) {
    ds = {*c.delta};
  } else {
    throw ParseError("give --delta or --delta-sweep");
  }
  for (double d : ds)
    if (!(d > 1.0)) throw ParseError("delta values must exceed 1, got " + csv::num(d));
  return ds;
}

LinkModel make_model(const Config& c) {
  if (!(c.eps >= 0.0 && c.eps <= 0.5)) throw ParseError("--eps must lie in [0, 1/2]");
  if (c.model == "signed") return LinkModel::signed_model();
  if (c.model == "noisysigned" || c.model == "noisy-signed") return LinkModel::noisy_signed(c.eps);
  if (c.model == "logistic") return LinkModel::logistic();
  if (c.model == "probit") return LinkModel::probit();
  if (c.model == "gaussian-sy") {
    const double var = c.sy_var > 0.0 ? c.sy_var : 1.0 - c.sy_mean * c.sy_mean;
    return LinkModel::gaussian_sy(c.sy_mean, var);
  }
  if (c.model == "tabulated") {
    if (c.model_table.empty()) throw ParseError("--model tabulated needs --model-table");
    return LinkModel::load_tabulated_csv(c.model_table);
  }
  throw ParseError("unknown model '" + c.model + "'");
}

// Metadata value `key=` from the comment preamble of a table file.
std::optional<double> preamble_value(const std::string& path, const std::string& key) {
  const csv::Table t = csv::read_file(path);
  for (const auto& line : t.comments) {
    for (const auto& field : csv::split(line, ',')) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) continue;
      std::string k = field.substr(0, eq);
      k.erase(0, k.find_first_not_of(' '));
      if (k == key) return std::stod(field.substr(eq + 1));
    }
  }
  return std::nullopt;
}

LossSpec make_loss(const Config& c) {
  if (!c.loss_table.empty()) return LossSpec::load_table_csv(c.loss_table);
  try {
    return LossSpec::from_name(c.loss);
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what());
  }
}

SolverOptions solver_options(const Config& c) {
  SolverOptions o;
  o.tol = c.tol;
  o.max_iter = c.max_iter;
  o.damping = c.damping;
  o.n_starts = c.n_starts;
  o.seed = c.seed;
  o.quadrature.g_order = c.g_order;
  o.quadrature.sy_order = c.sy_order;
  return o;
}

// Output sink: a file when --output is given, stdout otherwise.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw ParseError("cannot write " + path);
    }
  }
  std::ostream& out() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

void write_gnuplot(const Config& c, const std::string& x, const std::string& y,
                   const std::string& title) {
  if (c.gnuplot.empty()) return;
  if (c.output.empty()) throw ParseError("--emit-gnuplot needs --output for the data file");
  std::ofstream g(c.gnuplot);
  if (!g) throw ParseError("cannot write " + c.gnuplot);
  g << "set datafile separator ','\n"
    << "set datafile missing 'NA'\n"
    << "set key autotitle columnhead\n"
    << "set title '" << title << "'\n"
    << "set xlabel '" << x << "'\n"
    << "set ylabel '" << y << "'\n"
    << "plot '" << c.output << "' using '" << x << "':'" << y << "' with linespoints\n";
}

std::string uniqueness_text(Uniqueness u) {
  return u == Uniqueness::VerifiedClassConditions ? "verified" : "unverified";
}

int cmd_predict(const Config& c) {
  const LinkModel model = make_model(c);
  const LossSpec loss = make_loss(c);
  const auto deltas = delta_grid(c);
  SolverOptions opts = solver_options(c);
  if (loss.vanishing_right_tail()) opts.separability_threshold = separability_threshold(model);

  struct Row {
    std::optional<SaddleSolution> sol;
    std::string note;
  };
  std::vector<Row> rows(deltas.size());
  parallel_for(deltas.size(), [&](std::size_t i) {
    try {
      rows[i].sol = solve_system(loss, model, deltas[i], opts);
    } catch (const SeparableRegime&) {
      rows[i].note = "SeparableData";
    } catch (const SolverError&) {
      rows[i].note = "NoConvergence";
    } catch (const QuadratureNonConvergence&) {
      rows[i].note = "QuadratureNonConvergence";
    }
  });

  Sink sink(c.output);
  auto& out = sink.out();
  out << "model,loss,delta,mu,alpha,lambda,sigma_eff,corr,res_orth,res_var,res_corr,uniqueness,"
         "spread,tol,g_order,sy_order,note\n";
  bool failed = false;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    out << model.name() << ',' << loss.name() << ',' << csv::num(deltas[i]) << ',';
    if (const auto& s = rows[i].sol) {
      out << csv::num(s->mu) << ',' << csv::num(s->alpha) << ',' << csv::num(s->lambda) << ','
          << csv::num(s->sigma_eff) << ',' << csv::num(s->correlation) << ','
          << csv::num(s->residuals[0]) << ',' << csv::num(s->residuals[1]) << ','
          << csv::num(s->residuals[2]) << ',' << uniqueness_text(s->uniqueness) << ','
          << csv::num(s->multistart_spread);
    } else {
      failed = true;
      out << "NA,NA,NA,NA,NA,NA,NA,NA,NA,NA";
    }
    out << ',' << csv::num(c.tol) << ',' << c.g_order << ',' << c.sy_order << ','
        << rows[i].note << '\n';
  }
  write_gnuplot(c, "delta", "corr", "asymptotic correlation");
  return failed ? kExitSolver : kExitOk;
}

int cmd_bound(const Config& c) {
  const LinkModel model = make_model(c);
  const auto deltas = delta_grid(c);
  KappaScan scan(model);
  const bool smooth = model.differentiable_density();
  std::optional<LsRatio> ratio;
  if (smooth && model.mean_sy() > 0.0) ratio = ls_suboptimality(model);

  Sink sink(c.output);
  auto& out = sink.out();
  out << "model,delta,sigma_opt,corr_opt,stam_bound,ls_ratio,sign_changes\n";
  for (double d : deltas) {
    const SigmaOptResult r = scan.sigma_opt(d);
    out << model.name() << ',' << csv::num(d) << ',' << csv::num(r.sigma_opt) << ','
        << csv::num(r.correlation()) << ','
        << (smooth ? csv::num(stam_lower_bound(model, d)) : "NA") << ','
        << (ratio ? csv::num(ratio->inv_sqrt_xi) : "NA") << ',' << r.sign_changes.size() << '\n';
  }
  write_gnuplot(c, "delta", "corr_opt", "best achievable correlation");
  return kExitOk;
}

int cmd_optloss(const Config& c) {
  const LinkModel model = make_model(c);
  if (!c.delta) throw ParseError("optloss needs --delta");
  const double delta = delta_grid(c).front();
  OptLossOptions lo;
  lo.points = c.grid_points;
  const OptLossTable table = build_optimal_loss(model, delta, lo);

  std::optional<SaddleSolution> achieved;
  std::string status = "ok";
  if (table.convexity == Convexity::NonConvexDetected) {
    status = "NonConvexDetected";
  } else {
    try {
      achieved = verify_achievability(table, model, solver_options(c));
    } catch (const AchievabilityFailed& e) {
      status = "AchievabilityFailed";
      std::cerr << e.what() << '\n';
    } catch (const SolverError& e) {
      status = "NoConvergence";
      std::cerr << e.what() << '\n';
    }
  }
  const std::string table_path =
      c.output.empty() ? "optloss_" + model.name() + "_d" + csv::num(delta) + ".csv" : c.output;
  table.save_csv(table_path, achieved ? &*achieved : nullptr);

  std::cout << "model,delta,sigma_opt,corr_opt,alpha1,alpha2,convexity,lemma_margin,mu,alpha,"
               "lambda,corr_achieved,table,status\n"
            << model.name() << ',' << csv::num(delta) << ',' << csv::num(table.sigma_opt) << ','
            << csv::num(1.0 / std::sqrt(1.0 + table.sigma_opt * table.sigma_opt)) << ','
            << csv::num(table.alpha1) << ',' << csv::num(table.alpha2) << ','
            << to_string(table.convexity) << ',' << csv::num(table.lemma_margin) << ',';
  if (achieved)
    std::cout << csv::num(achieved->mu) << ',' << csv::num(achieved->alpha) << ','
              << csv::num(achieved->lambda) << ',' << csv::num(achieved->correlation);
  else
    std::cout << "NA,NA,NA,NA";
  std::cout << ',' << table_path << ',' << status << '\n';

  if (!c.gnuplot.empty()) {
    Config g = c;
    g.output = table_path;
    write_gnuplot(g, "w", "loss_display", "optimal loss (scaled so loss(1)=0, loss(2)=1)");
  }
  if (table.convexity == Convexity::NonConvexDetected) return kExitNonConvex;
  return achieved ? kExitOk : kExitSolver;
}

int cmd_simulate(const Config& c) {
  const LinkModel model = make_model(c);
  const LossSpec loss = make_loss(c);
  Config local = c;
  if (!local.delta && local.delta_sweep.empty() && !c.loss_table.empty())
    local.delta = preamble_value(c.loss_table, "delta");
  const auto deltas = delta_grid(local);
  std::optional<double> threshold;
  if (loss.vanishing_right_tail()) threshold = separability_threshold(model);
  SolverOptions opts = solver_options(c);
  opts.separability_threshold = threshold;

  Sink sink(c.output);
  auto& out = sink.out();
  out << "model,loss,delta,n,trials,corr_mean,corr_stderr,err_mean,pred_corr,pred_alpha2,warnings\n";
  for (double d : deltas) {
    std::optional<SaddleSolution> pred;
    std::string note;
    try {
      pred = solve_system(loss, model, d, opts);
    } catch (const SeparableRegime&) {
      note = "NoPrediction";
    } catch (const SolverError&) {
      note = "NoPrediction";
    } catch (const QuadratureNonConvergence&) {
      note = "NoPrediction";
    }
    Experiment e;
    e.model = model;
    e.loss = loss;
    e.n = c.n;
    e.delta = d;
    e.trials = c.trials;
    e.seed = c.seed;
    e.optimizer.steps = c.steps;
    e.separability_threshold = threshold;
    if (pred) e.reference_mu = pred->mu;
    const ExperimentSummary s = run_experiment(e);
    std::string warnings = s.warning_text();
    if (!note.empty()) warnings += (warnings.empty() ? "" : ";") + note;
    out << model.name() << ',' << loss.name() << ',' << csv::num(d) << ',' << c.n << ','
        << c.trials << ',' << csv::num(s.corr_mean) << ',' << csv::num(s.corr_stderr) << ','
        << csv::num(s.err_mean) << ','
        << (pred ? csv::num(pred->correlation) : "NA") << ','
        << (pred ? csv::num(pred->alpha * pred->alpha) : "NA") << ',' << warnings << '\n';
  }
  write_gnuplot(c, "delta", "corr_mean", "empirical correlation");
  return kExitOk;
}

int cmd_threshold(const Config& c) {
  Sink sink(c.output);
  auto& out = sink.out();
  out << "model,eps,delta_star\n";
  if (!c.eps_sweep.empty()) {
    if (c.model != "noisysigned" && c.model != "noisy-signed")
      throw ParseError("--eps-sweep applies to the noisysigned model");
    const auto eps = sweep_values(parse_sweep(c.eps_sweep), false);
    for (double e : eps)
      if (!(e > 0.0 && e <= 0.5)) throw ParseError("sweep flip probabilities must lie in (0, 1/2]");
    for (const auto& p : threshold_curve(eps))
      out << "noisysigned," << csv::num(p.eps) << ',' << csv::num(p.delta_star) << '\n';
    write_gnuplot(c, "eps", "delta_star", "separability threshold");
    return kExitOk;
  }
  const LinkModel model = make_model(c);
  out << model.name() << ',' << csv::num(model.epsilon()) << ','
      << csv::num(separability_threshold(model)) << '\n';
  return kExitOk;
}

// Reads key=value lines; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read config " + path);
  std::vector<std::pair<std::string, std::string>> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line.erase(0, line.find_first_not_of(" \t\r"));
    line.erase(line.find_last_not_of(" \t\r") + 1);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    key.erase(key.find_last_not_of(" \t") + 1);
    value.erase(0, value.find_first_not_of(" \t"));
    kv.emplace_back(key, value);
  }
  return kv;
}

// Config entries become flags placed before the user's own arguments, so
// flags given on the command line win.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::string config_path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (config_path.empty()) return args;
  if (rest.empty()) throw ParseError("--config needs a subcommand first");
  out.push_back(rest.front());
  for (const auto& [k, v] : read_config(config_path)) {
    if (v == "true") {
      out.push_back("--" + k);
    } else if (v != "false") {
      out.push_back("--" + k);
      out.push_back(v);
    }
  }
  out.insert(out.end(), rest.begin() + 1, rest.end());
  return out;
}

void add_model_options(CLI::App* app, Config& c) {
  app->add_option("--model", c.model, "signed, noisysigned, logistic, probit, gaussian-sy, tabulated");
  app->add_option("--eps", c.eps, "label flip probability of noisysigned");
  app->add_option("--sy-mean", c.sy_mean, "mean of SY for gaussian-sy");
  app->add_option("--sy-var", c.sy_var, "variance of SY for gaussian-sy (default 1 - mean^2)");
  app->add_option("--model-table", c.model_table, "CSV density of SY with columns w,p");
}

void add_delta_options(CLI::App* app, Config& c) {
  app->add_option("--delta", c.delta, "samples per dimension m/n");
  app->add_option("--delta-sweep", c.delta_sweep, "start:stop:count");
  app->add_flag("--log", c.log_sweep, "log-spaced sweep");
}

void add_solver_options(CLI::App* app, Config& c) {
  app->add_option("--tol", c.tol, "residual tolerance");
  app->add_option("--max-iter", c.max_iter, "fixed-point iteration budget");
  app->add_option("--damping", c.damping, "fixed-point damping in (0, 1]");
  app->add_option("--n-starts", c.n_starts, "number of initializations");
  app->add_option("--g-order", c.g_order, "Gauss-Hermite nodes");
  app->add_option("--sy-order", c.sy_order, "Gauss-Legendre nodes per SY panel");
}

void add_output_options(CLI::App* app, Config& c) {
  app->add_option("-o,--output", c.output, "CSV output path (stdout by default)");
  app->add_option("--emit-gnuplot", c.gnuplot, "write a gnuplot script for the output");
}

}  // namespace

int main(int argc, char** argv) {
  Config c;
  CLI::App app{"Asymptotic performance of binary linear classifiers"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  auto* predict = app.add_subcommand("predict", "asymptotic correlation of a loss");
  auto* bound = app.add_subcommand("bound", "best achievable correlation");
  auto* optloss = app.add_subcommand("optloss", "synthesize the optimal loss");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo ERM experiments");
  auto* threshold = app.add_subcommand("threshold", "separability threshold");
  for (auto* sub : {predict, bound, optloss, simulate, threshold}) {
    sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    add_model_options(sub, c);
    add_output_options(sub, c);
  }
  for (auto* sub : {predict, bound, optloss, simulate}) add_delta_options(sub, c);
  for (auto* sub : {predict, optloss, simulate}) add_solver_options(sub, c);
  for (auto* sub : {predict, simulate}) {
    sub->add_option("--loss", c.loss, "square, lad, logistic, exponential, hinge");
    sub->add_option("--loss-table", c.loss_table, "tabulated loss CSV (as written by optloss)");
  }
  optloss->add_option("--grid-points", c.grid_points, "loss table size");
  simulate->add_option("--n", c.n, "dimension");
  simulate->add_option("--trials", c.trials, "independent realizations");
  simulate->add_option("--seed", c.seed, "random seed");
  simulate->add_option("--steps", c.steps, "optimizer iterations");
  predict->add_option("--seed", c.seed, "seed for multistart initializations");
  threshold->add_option("--eps-sweep", c.eps_sweep, "start:stop:count over flip probabilities");

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*predict) return cmd_predict(c);
    if (*bound) return cmd_bound(c);
    if (*optloss) return cmd_optloss(c);
    if (*simulate) return cmd_simulate(c);
    if (*threshold) return cmd_threshold(c);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const SolverError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSolver;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSolver;
  }
  return kExitUsage;
}
