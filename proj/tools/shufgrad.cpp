#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "shufgrad/error.hpp"
#include "shufgrad/experiment.hpp"
#include "shufgrad/shuffling.hpp"
#include "shufgrad/smoothness.hpp"

namespace fs = std::filesystem;
using namespace shufgrad;

namespace {

ProblemSpec resolve_problem(const std::string& text) {
  if (!text.empty() && text.front() == '{') return parse_problem_spec(text);
  if (fs::exists(text)) {
    std::ifstream in(text);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_problem_spec(buf.str());
  }
  ProblemSpec spec;
  spec.id = text;
  return parse_problem_spec(problem_spec_json(spec));
}

struct PlanArgs {
  std::string problem;
  int theorem = 1;
  double eps = 0.1;
  std::optional<double> delta;
  std::optional<std::uint64_t> target;
  std::optional<std::string> ell;
  std::optional<double> f_star;
  std::optional<double> A;
  std::optional<double> sigma;
  std::optional<double> delta1;
  std::optional<std::size_t> n;
  std::optional<double> mu;
  std::optional<double> sigma_star;
  std::optional<double> dist0_sq;
  std::optional<double> gprime;
  std::size_t budget = 10000;
  std::string out = "plan.txt";
};

int do_plan(const PlanArgs& a, std::uint64_t seed) {
  if (a.delta && !(*a.delta > 0.0 && *a.delta < 1.0)) throw UsageError("--delta must lie in (0, 1)");
  if (!(a.eps > 0.0)) throw UsageError("--eps must be positive");
  const Theorem theorem = theorem_from_id(a.theorem);

  StepsizePlan plan;
  if (a.problem.empty() || a.problem == "none") {
    if (!a.delta1 || !a.n) throw UsageError("without --problem, --delta1 and --n are required");
    if (!a.ell) throw UsageError("without --problem, --ell is required");
    ProblemStats stats;
    stats.delta1 = *a.delta1;
    stats.n = *a.n;
    stats.A = a.A.value_or(0.0);
    stats.sigma = a.sigma.value_or(0.0);
    stats.mu = a.mu;
    stats.sigma_star = a.sigma_star;
    stats.dist0_sq = a.dist0_sq;
    stats.gprime_sublevel = a.gprime;
    const auto c = constants_for_theorem(theorem, stats, EllFunction::parse(*a.ell), a.delta, a.eps);
    plan = stepsize_plan(c, a.target);
  } else {
    const ProblemSpec spec = resolve_problem(a.problem);
    const auto problem = make_problem(spec, seed);
    PlanRequest req;
    req.theorem = theorem;
    req.epsilon = a.eps;
    req.delta = a.delta;
    req.target_epochs = a.target;
    req.ell = a.ell;
    req.f_star = a.f_star;
    req.A = a.A;
    req.sigma = a.sigma;
    req.sublevel_budget = a.budget;
    req.seed = seed;
    plan = plan_for_problem(*problem, req);
  }
  write_plan(plan, std::cout);
  std::ofstream out(a.out);
  if (!out) throw UsageError("cannot write plan file " + a.out);
  write_plan(plan, out);
  std::cerr << "plan written to " << a.out << '\n';
  return plan.satisfied() ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shuffling-type gradient methods: experiments, stepsize plans and diagnostics"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  bool seed_given = false;
  app.add_option_function<std::uint64_t>(
         "--seed", [&](std::uint64_t s) { seed = s; seed_given = true; }, "Base seed (64-bit unsigned)")
      ->configurable(false);
  app.fallthrough();

  // run
  auto* run = app.add_subcommand("run", "Run an experiment config");
  std::string config_path;
  std::string out_dir;
  std::size_t jobs = 0;
  run->add_option("--config", config_path, "Experiment JSON file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (overrides the config)");
  run->add_option("--jobs", jobs, "Worker threads (default: available parallelism)");

  // plan
  auto* plan = app.add_subcommand("plan", "Compute theorem constants and a stepsize plan");
  PlanArgs pa;
  plan->add_option("--problem", pa.problem, "Problem id, JSON object or JSON file (omit to give stats directly)");
  plan->add_option("--theorem", pa.theorem, "Theorem id 1..6")->required()->check(CLI::Range(1, 6));
  plan->add_option("--eps", pa.eps, "Target accuracy epsilon")->required();
  plan->add_option("--delta", pa.delta, "Failure probability in (0, 1)");
  plan->add_option("--target-epochs", pa.target, "Fix T and reduce eta as needed");
  plan->add_option("--ell", pa.ell, "ell-function: const:c, affine:l0,l1 or power:c,q[,c0]");
  plan->add_option("--fstar", pa.f_star, "Lower bound on F* when the optimum is unknown");
  plan->add_option("--A", pa.A, "Variance constant A (estimated when omitted)");
  plan->add_option("--sigma", pa.sigma, "Variance constant sigma (estimated when omitted)");
  plan->add_option("--delta1", pa.delta1, "F(w0) - F* (without --problem)");
  plan->add_option("--n", pa.n, "Component count (without --problem)");
  plan->add_option("--mu", pa.mu, "Strong convexity (without --problem)");
  plan->add_option("--sigma-star", pa.sigma_star, "Gradient spread at the optimum (without --problem)");
  plan->add_option("--dist0-sq", pa.dist0_sq, "|w0 - w*|^2 (without --problem)");
  plan->add_option("--gprime", pa.gprime, "Sublevel-set gradient bound (without --problem)");
  plan->add_option("--sublevel-budget", pa.budget, "Samples for the sublevel gradient estimate");
  plan->add_option("--out", pa.out, "Plan file to write")->capture_default_str();

  // check
  auto* check = app.add_subcommand("check", "Run a diagnostic suite");
  std::string suite;
  std::string check_problem;
  CheckOptions co;
  check->add_option("--suite", suite, "gradients | variance | ell-envelope | permutation-oracle")->required();
  check->add_option("--problem", check_problem, "Problem for ell-envelope (id, JSON object or file)");
  check->add_option("--ell", co.ell, "ell-function override for ell-envelope");
  check->add_option("--points", co.points, "Random points per problem")->capture_default_str();

  // aggregate
  auto* agg = app.add_subcommand("aggregate", "Recompute aggregate.csv from a raw CSV");
  std::string raw_path;
  std::string agg_out;
  agg->add_option("--raw", raw_path, "Raw per-run CSV")->required()->check(CLI::ExistingFile);
  agg->add_option("--out", agg_out, "Output file (default: stdout)");

  // permutations
  auto* perms = app.add_subcommand("permutations", "Dump the permutations a scheme uses");
  std::size_t perm_n = 0;
  std::string perm_scheme = "random_reshuffle";
  std::size_t perm_epochs = 1;
  std::string perm_out;
  perms->add_option("--n", perm_n, "Component count")->required();
  perms->add_option("--scheme", perm_scheme, "fixed | shuffle_once | random_reshuffle")->capture_default_str();
  perms->add_option("--epochs", perm_epochs, "Epochs to dump")->capture_default_str();
  perms->add_option("--out", perm_out, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run) {
      ExperimentConfig cfg = load_experiment_config(config_path);
      if (!out_dir.empty()) cfg.output = out_dir;
      if (seed_given) cfg.base_seed = seed;
      ExperimentOptions opts;
      opts.jobs = jobs;
      const auto result = run_experiment(cfg, opts);
      std::cout << "wrote " << (cfg.output / "raw.csv").string() << " and "
                << (cfg.output / "aggregate.csv").string() << '\n';
      if (result.diverged()) {
        std::cerr << "diverged runs (arm, seed):\n";
        for (const auto& r : result.runs)
          if (r.diverged_epoch)
            std::cerr << "  " << cfg.arms[r.arm].name << ", " << r.seed << " at epoch " << *r.diverged_epoch
                      << '\n';
        return kExitDiverged;
      }
      return kExitOk;
    }
    if (*plan) return do_plan(pa, seed);
    if (*check) {
      co.seed = seed;
      if (!check_problem.empty()) co.problem = resolve_problem(check_problem);
      return run_check_suite(suite, co, std::cout) ? kExitOk : kExitFailure;
    }
    if (*agg) {
      std::ifstream in(raw_path);
      const std::string text = aggregate_raw_csv(in);
      if (agg_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream(agg_out, std::ios::binary) << text;
      }
      return kExitOk;
    }
    if (*perms) {
      const Scheme scheme = Scheme::make(parse_scheme_kind(perm_scheme), perm_n, seed);
      if (perm_out.empty()) {
        dump_permutations(scheme, perm_epochs, std::cout);
      } else {
        std::ofstream out(perm_out);
        dump_permutations(scheme, perm_epochs, out);
      }
      return kExitOk;
    }
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible plan (binding constraint: " << e.constraint() << "): " << e.what() << '\n';
    return kExitFailure;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error [" << e.field() << "]: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
