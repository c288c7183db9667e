#include "shufgrad/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "shufgrad/diagnostics.hpp"
#include "shufgrad/error.hpp"
#include "shufgrad/random.hpp"
#include "shufgrad/statistics.hpp"

namespace shufgrad {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where, where + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end())
      throw ConfigError(where.empty() ? key : where + "." + key, "unknown key '" + key + "' in " +
                                                                 (where.empty() ? "config" : where));
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->template get<T>();
  } catch (const json::exception& e) {
    const std::string field = where.empty() ? key : where + "." + key;
    throw ConfigError(field, "bad value for " + field + ": " + e.what());
  }
}

template <class T>
void read(const json& obj, const char* key, std::optional<T>& out, const std::string& where) {
  if (!obj.contains(key)) return;
  T value{};
  read(obj, key, value, where);
  out = value;
}

ProblemSpec problem_from_json(const json& obj) {
  reject_unknown(obj,
                 {"id", "dim", "kmax", "measurements", "noise_std", "signal_variance", "init_mean", "dataset",
                  "rows", "lambda", "regularization", "initial_theta", "centers", "initial", "seed"},
                 "problem");
  ProblemSpec spec;
  read(obj, "id", spec.id, "problem");
  read(obj, "dim", spec.dim, "problem");
  read(obj, "kmax", spec.kmax, "problem");
  read(obj, "measurements", spec.measurements, "problem");
  read(obj, "noise_std", spec.noise_std, "problem");
  read(obj, "signal_variance", spec.signal_variance, "problem");
  read(obj, "init_mean", spec.init_mean, "problem");
  read(obj, "dataset", spec.dataset, "problem");
  read(obj, "rows", spec.rows, "problem");
  read(obj, "lambda", spec.lambda, "problem");
  read(obj, "regularization", spec.regularization, "problem");
  read(obj, "initial_theta", spec.initial_theta, "problem");
  read(obj, "centers", spec.centers, "problem");
  read(obj, "initial", spec.initial, "problem");
  read(obj, "seed", spec.seed, "problem");
  static const std::set<std::string> ids{"quartic", "exp", "phase", "dro", "tiny"};
  if (!ids.count(spec.id)) throw ConfigError("problem.id", "unknown problem id '" + spec.id + "'");
  return spec;
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct ResolvedArm {
  const ArmSpec* spec = nullptr;
  std::uint64_t key = 0;
  double step = 0.0;
};

}  // namespace

// ---------------------------------------------------------------------------
// Problems

ProblemSpec parse_problem_spec(const std::string& json_text) {
  json obj;
  try {
    obj = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("problem spec is not valid JSON: ") + e.what());
  }
  return problem_from_json(obj);
}

std::string problem_spec_json(const ProblemSpec& spec) {
  json obj{{"id", spec.id},
           {"dim", spec.dim},
           {"kmax", spec.kmax},
           {"measurements", spec.measurements},
           {"noise_std", spec.noise_std},
           {"signal_variance", spec.signal_variance},
           {"init_mean", spec.init_mean},
           {"dataset", spec.dataset},
           {"rows", spec.rows},
           {"lambda", spec.lambda},
           {"regularization", spec.regularization},
           {"initial_theta", spec.initial_theta},
           {"centers", spec.centers}};
  if (spec.initial) obj["initial"] = *spec.initial;
  if (spec.seed) obj["seed"] = *spec.seed;
  return obj.dump();
}

RegressionDataset load_problem_dataset(const ProblemSpec& spec, std::uint64_t seed) {
  const std::uint64_t data_seed = spec.seed.value_or(seed);
  PreprocessOptions options;
  options.max_rows = spec.rows;
  options.noise_seed = data_seed;
  if (spec.dataset == "synthetic") {
    RegressionDataset data = synthesize(data_seed, spec.rows, spec.dim == 0 ? 34 : spec.dim);
    preprocess(data, options);
    return data;
  }
  return load_csv(spec.dataset, options);
}

std::unique_ptr<FiniteSumProblem> make_problem(const ProblemSpec& spec, std::uint64_t seed,
                                               const RegressionDataset* dataset) {
  const std::uint64_t data_seed = spec.seed.value_or(seed);
  if (spec.id == "quartic") return std::make_unique<QuarticProblem>(spec.dim == 0 ? 50 : spec.dim, spec.kmax);
  if (spec.id == "exp") return std::make_unique<ExpStrongProblem>(spec.dim == 0 ? 50 : spec.dim, spec.kmax);
  if (spec.id == "phase") {
    PhaseRetrievalProblem::Options o;
    o.measurements = spec.measurements;
    o.dim = spec.dim == 0 ? 100 : spec.dim;
    o.noise_std = spec.noise_std;
    o.signal_variance = spec.signal_variance;
    o.init_mean = spec.init_mean;
    o.seed = data_seed;
    return std::make_unique<PhaseRetrievalProblem>(o);
  }
  if (spec.id == "dro") {
    DROProblem::Options o;
    o.lambda = spec.lambda;
    o.regularization = spec.regularization;
    o.initial_theta = spec.initial_theta;
    o.seed = data_seed;
    if (dataset) return std::make_unique<DROProblem>(DROProblem::from_dataset(*dataset, o));
    return std::make_unique<DROProblem>(DROProblem::from_dataset(load_problem_dataset(spec, seed), o));
  }
  if (spec.id == "tiny") {
    std::vector<Vector> centers;
    for (const auto& c : spec.centers) centers.push_back(to_vector(c));
    std::optional<Vector> init;
    if (spec.initial) init = to_vector(*spec.initial);
    return std::make_unique<TinyQuadraticProblem>(std::move(centers), init);
  }
  throw ConfigError("problem.id", "unknown problem id '" + spec.id + "'");
}

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
  if (arms.empty()) throw ConfigError("arms", "at least one arm is required");
  if (repetitions == 0) throw ConfigError("repetitions", "repetitions must be >= 1");
  if (epochs == 0) throw ConfigError("epochs", "epochs must be >= 1");
  std::set<std::string> names;
  for (const auto& arm : arms) {
    if (arm.name.empty()) throw ConfigError("arms.name", "arm names must be non-empty");
    if (arm.name.find_first_of(",\"\n\r") != std::string::npos)
      throw ConfigError("arms.name", "arm name '" + arm.name + "' contains a comma, quote or newline");
    if (!names.insert(arm.name).second) throw ConfigError("arms.name", "duplicate arm name '" + arm.name + "'");
    if (arm.algorithm != "shuffling" && arm.algorithm != "sgd")
      throw ConfigError("arms.algorithm", "arm '" + arm.name + "': algorithm must be shuffling or sgd");
    if (arm.step.has_value() == arm.plan.has_value())
      throw ConfigError("arms.step", "arm '" + arm.name + "' needs exactly one of step and plan");
    if (arm.step && !(*arm.step >= 0.0 && std::isfinite(*arm.step)))
      throw ConfigError("arms.step", "arm '" + arm.name + "': step must be finite and >= 0");
    if (arm.batch == 0) throw ConfigError("arms.batch", "arm '" + arm.name + "': batch must be >= 1");
    if (arm.scheme == SchemeKind::Explicit && arm.order != "gradient_norm")
      throw ConfigError("arms.order", "arm '" + arm.name + "': unknown explicit order '" + arm.order + "'");
  }
  static const std::set<std::string> known{"objective", "grad_norm_sq", "dist_sq"};
  for (const auto& m : metrics)
    if (!known.count(m)) throw ConfigError("metrics", "unknown metric '" + m + "'");
}

ExperimentConfig parse_experiment_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json obj;
  try {
    obj = json::parse(json_text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(obj, {"problem", "arms", "repetitions", "epochs", "base_seed", "metrics", "output"}, "");
  ExperimentConfig cfg;
  if (obj.contains("problem")) cfg.problem = problem_from_json(obj["problem"]);
  read(obj, "repetitions", cfg.repetitions, "");
  read(obj, "epochs", cfg.epochs, "");
  read(obj, "base_seed", cfg.base_seed, "");
  read(obj, "metrics", cfg.metrics, "");
  std::string output;
  read(obj, "output", output, "");
  if (!output.empty()) cfg.output = output;
  if (!obj.contains("arms") || !obj["arms"].is_array()) throw ConfigError("arms", "arms must be a JSON array");
  for (const auto& a : obj["arms"]) {
    reject_unknown(a, {"name", "algorithm", "scheme", "order", "step", "plan", "batch", "seed_key"}, "arms");
    ArmSpec arm;
    read(a, "name", arm.name, "arms");
    read(a, "algorithm", arm.algorithm, "arms");
    if (a.contains("scheme")) {
      std::string scheme;
      read(a, "scheme", scheme, "arms");
      try {
        arm.scheme = parse_scheme_kind(scheme);
      } catch (const UsageError& e) {
        throw ConfigError("arms.scheme", e.what());
      }
    }
    read(a, "order", arm.order, "arms");
    read(a, "step", arm.step, "arms");
    std::optional<std::string> plan;
    read(a, "plan", plan, "arms");
    if (plan) {
      const std::filesystem::path path(*plan);
      arm.plan = path.is_absolute() ? path : base_dir / path;
    }
    read(a, "batch", arm.batch, "arms");
    read(a, "seed_key", arm.seed_key, "arms");
    cfg.arms.push_back(std::move(arm));
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str(), path.parent_path());
}

std::uint64_t problem_seed(std::uint64_t base_seed, std::size_t rep) {
  return hash64({base_seed, static_cast<std::uint64_t>(rep)});
}

std::uint64_t run_seed(std::uint64_t base_seed, std::uint64_t arm_key, std::size_t rep) {
  return hash64({base_seed, arm_key, static_cast<std::uint64_t>(rep)});
}

// ---------------------------------------------------------------------------
// Running

bool ExperimentResult::diverged() const noexcept {
  return std::any_of(runs.begin(), runs.end(), [](const auto& r) { return r.diverged_epoch.has_value(); });
}

ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentOptions& options) {
  config.validate();
  const bool want_objective = std::count(config.metrics.begin(), config.metrics.end(), "objective") > 0;
  const bool want_grad = std::count(config.metrics.begin(), config.metrics.end(), "grad_norm_sq") > 0;
  const bool want_dist = std::count(config.metrics.begin(), config.metrics.end(), "dist_sq") > 0;

  std::optional<RegressionDataset> dataset;
  if (config.problem.id == "dro") dataset = load_problem_dataset(config.problem, config.base_seed);
  const RegressionDataset* data = dataset ? &*dataset : nullptr;

  // Arms resolve against the repetition-0 problem; every repetition has the same n.
  const std::size_t n = make_problem(config.problem, problem_seed(config.base_seed, 0), data)->size();
  std::vector<ResolvedArm> arms;
  for (std::size_t a = 0; a < config.arms.size(); ++a) {
    const ArmSpec& spec = config.arms[a];
    ResolvedArm r;
    r.spec = &spec;
    r.key = spec.seed_key.value_or(a);
    const std::size_t updates = (n + spec.batch - 1) / spec.batch;
    if (spec.plan) {
      std::ifstream in(*spec.plan);
      if (!in) throw ConfigError("arms.plan", "cannot open plan file " + spec.plan->string());
      const PlanFile plan = read_plan(in);
      if (plan.n != n)
        throw ConfigError("arms.plan", "plan " + spec.plan->string() + " is for n = " + std::to_string(plan.n) +
                                           ", problem has n = " + std::to_string(n));
      r.step = plan.eta / static_cast<double>(updates);
    } else {
      r.step = *spec.step;
    }
    arms.push_back(r);
  }

  const std::size_t R = config.repetitions;
  const std::size_t total = arms.size() * R;
  ExperimentResult result;
  result.runs.resize(total);

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t task = next.fetch_add(1);
      if (task >= total) return;
      const std::size_t a = task / R;
      const std::size_t rep = task % R;
      RunOutcome& out = result.runs[task];
      out.arm = a;
      out.rep = rep;
      try {
        const auto problem = make_problem(config.problem, problem_seed(config.base_seed, rep), data);
        const ResolvedArm& arm = arms[a];
        out.seed = run_seed(config.base_seed, arm.key, rep);
        RunConfig rc;
        rc.step = arm.step;
        rc.epochs = config.epochs;
        rc.batch = arm.spec->batch;
        rc.seed = out.seed;
        rc.record.objective = want_objective;
        rc.record.grad_norm_sq = want_grad;
        rc.record.distance = want_dist;
        rc.throw_on_divergence = false;
        if (options.on_epoch_start)
          rc.on_epoch_start = [&, a, rep](std::uint64_t t, const Vector& w) { options.on_epoch_start(a, rep, t, w); };
        if (arm.spec->algorithm == "sgd") {
          out.record = run_sgd(*problem, rc);
        } else if (arm.spec->scheme == SchemeKind::Explicit) {
          const auto order = gradient_norm_order(*problem, problem->initial_point());
          out.record = run_shuffling(*problem, Scheme::explicit_order(order), rc);
        } else {
          out.record = run_shuffling(*problem, Scheme::make(arm.spec->scheme, problem->size(), out.seed), rc);
        }
        if (out.record.divergence) {
          out.diverged_epoch = out.record.divergence->epoch;
          out.error = out.record.divergence->message;
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failure) failure = std::current_exception();
        next = total;
        return;
      }
    }
  };

  std::size_t jobs = options.jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.jobs;
  jobs = std::min(jobs, total);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::ostringstream raw;
  write_raw_csv(config, result.runs, raw);
  result.raw_csv = raw.str();
  std::istringstream reread(result.raw_csv);
  result.aggregate_csv = aggregate_raw_csv(reread);

  if (options.write_files) {
    std::filesystem::create_directories(config.output);
    std::ofstream(config.output / "raw.csv", std::ios::binary) << result.raw_csv;
    std::ofstream(config.output / "aggregate.csv", std::ios::binary) << result.aggregate_csv;
    if (result.diverged()) {
      std::ofstream div(config.output / "diverged.txt");
      div << "arm,seed,epoch,step\n";
      for (const auto& r : result.runs)
        if (r.diverged_epoch)
          div << config.arms[r.arm].name << ',' << r.seed << ',' << *r.diverged_epoch << ','
              << r.record.divergence->step << '\n';
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// CSV

void write_raw_csv(const ExperimentConfig& config, const std::vector<RunOutcome>& runs, std::ostream& out) {
  out << kRawHeader << '\n';
  const auto opt = [](const std::optional<double>& v) { return v ? fmt17(*v) : std::string(); };
  for (const auto& run : runs) {
    const std::string& name = config.arms.at(run.arm).name;
    for (const auto& row : run.record.rows)
      out << name << ',' << run.rep << ',' << row.epoch << ',' << opt(row.objective) << ','
          << opt(row.grad_norm_sq) << ',' << opt(row.dist_sq) << ',' << row.evals << ','
          << fmt17(row.wall_ms) << '\n';
  }
}

std::string aggregate_raw_csv(std::istream& raw) {
  static const char* metric_names[] = {"objective", "grad_norm_sq", "dist_sq"};
  std::string line;
  if (!std::getline(raw, line) || line != kRawHeader) throw FormatError("raw CSV: unexpected header");

  std::vector<std::string> arm_order;
  std::map<std::string, std::map<std::uint64_t, std::array<std::vector<double>, 3>>> table;
  std::set<std::string> reps;
  std::uint64_t max_epoch = 0;
  std::array<bool, 3> present{false, false, false};
  std::size_t lineno = 1;
  while (std::getline(raw, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != 8) throw FormatError("raw CSV line " + std::to_string(lineno) + ": expected 8 fields");
    const std::string& arm = cells[0];
    if (!table.count(arm)) arm_order.push_back(arm);
    reps.insert(cells[1]);
    std::uint64_t epoch = 0;
    try {
      epoch = std::stoull(cells[2]);
    } catch (const std::logic_error&) {
      throw FormatError("raw CSV line " + std::to_string(lineno) + ": bad epoch");
    }
    max_epoch = std::max(max_epoch, epoch);
    auto& slot = table[arm][epoch];
    for (std::size_t m = 0; m < 3; ++m) {
      const std::string& cell = cells[3 + m];
      if (cell.empty()) continue;
      try {
        slot[m].push_back(std::stod(cell));
      } catch (const std::logic_error&) {
        throw FormatError("raw CSV line " + std::to_string(lineno) + ": bad " + metric_names[m]);
      }
      present[m] = true;
    }
  }

  const std::size_t R = reps.size();
  std::ostringstream out;
  out << kAggregateHeader << '\n';
  for (const auto& arm : arm_order) {
    const auto& epochs = table[arm];
    for (std::uint64_t t = 1; t <= max_epoch; ++t) {
      const auto it = epochs.find(t);
      for (std::size_t m = 0; m < 3; ++m) {
        if (!present[m]) continue;
        const std::vector<double> empty;
        const auto& values = it == epochs.end() ? empty : it->second[m];
        out << arm << ',' << t << ',' << metric_names[m] << ',';
        if (!values.empty() && values.size() == R)
          out << fmt17(mean(values)) << ',' << fmt17(percentile(values, 0.05)) << ','
              << fmt17(percentile(values, 0.95));
        else
          out << ",,";
        out << ',' << values.size() << '\n';
      }
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Plans

ProblemStats problem_stats(const FiniteSumProblem& problem, const PlanRequest& request) {
  ProblemStats stats;
  const Vector w0 = problem.initial_point();
  const double f0 = problem.full_value(w0);
  const auto f_star = request.f_star ? request.f_star : problem.optimum_value();
  if (!f_star) throw ConfigError("f_star", problem.name() + ": optimum value unknown; supply a lower bound");
  stats.delta1 = std::max(0.0, f0 - *f_star);
  stats.n = problem.size();

  const auto w_star = problem.optimum_point();
  if (request.A && request.sigma) {
    stats.A = *request.A;
    stats.sigma = *request.sigma;
  } else {
    std::vector<Vector> points{w0};
    if (w_star) {
      points.push_back(*w_star);
      for (double s : {0.25, 0.5, 0.75}) points.push_back(w0 + s * (*w_star - w0));
    }
    CounterRng rng(hash64({request.seed, 0x5641}));
    const double radius = 0.1 * (1.0 + w0.norm());
    while (points.size() < 10) {
      Vector w = w0;
      for (auto& x : w) x += radius * (2.0 * rng.uniform() - 1.0);
      points.push_back(w);
    }
    const VarianceFit fit = estimate_variance_constants(problem, points);
    stats.A = request.A.value_or(fit.A_hat);
    stats.sigma = request.sigma.value_or(std::sqrt(fit.sigma2_hat));
    stats.estimated = true;
  }

  const auto mu = problem.strong_convexity();
  if (mu && *mu > 0.0) stats.mu = mu;
  if (w_star) {
    stats.sigma_star = component_gradient_rms(problem, *w_star);
    stats.dist0_sq = problem.distance_sq_to_optimum(w0);
  } else if (stats.mu) {
    stats.dist0_sq = 2.0 * stats.delta1 / *stats.mu;
  }
  const int id = theorem_id(request.theorem);
  if (id == 4 || id == 6) {
    SublevelOptions so;
    so.seed = request.seed;
    stats.gprime_sublevel = estimate_Gprime_sublevel(problem, request.sublevel_budget, so).value;
  }
  return stats;
}

StepsizePlan plan_for_problem(const FiniteSumProblem& problem, const PlanRequest& request) {
  std::optional<EllFunction> ell;
  if (request.ell)
    ell = EllFunction::parse(*request.ell);
  else
    ell = problem.declared_ell();
  if (!ell) throw ConfigError("ell", problem.name() + " declares no ell-function; pass one explicitly");
  const ProblemStats stats = problem_stats(problem, request);
  const ConstantsBundle c = constants_for_theorem(request.theorem, stats, *ell, request.delta, request.epsilon);
  return stepsize_plan(c, request.target_epochs);
}

// ---------------------------------------------------------------------------
// Check suites

namespace {

const char* verdict(bool ok) { return ok ? "PASS" : "FAIL"; }

Vector uniform_point(CounterRng& rng, std::size_t dim, double lo, double hi) {
  Vector w(static_cast<Eigen::Index>(dim));
  for (auto& x : w) x = lo + (hi - lo) * rng.uniform();
  return w;
}

bool check_gradients(const CheckOptions& options, std::ostream& out) {
  struct Case {
    std::string label;
    std::unique_ptr<FiniteSumProblem> problem;
    double lo, hi, tol;
  };
  std::vector<Case> cases;
  cases.push_back({"quartic", std::make_unique<QuarticProblem>(), -1.5, 1.5, 1e-5});
  cases.push_back({"exp", std::make_unique<ExpStrongProblem>(), -1.5, 1.5, 1e-5});
  {
    PhaseRetrievalProblem::Options o;
    o.measurements = 200;
    o.dim = 20;
    o.seed = options.seed;
    cases.push_back({"phase", std::make_unique<PhaseRetrievalProblem>(o), -2.0, 2.0, 1e-5});
  }
  {
    ProblemSpec spec;
    spec.id = "dro";
    spec.rows = 200;
    cases.push_back({"dro", make_problem(spec, options.seed), -1.0, 1.0, 1e-4});
  }
  cases.push_back({"tiny",
                   std::make_unique<TinyQuadraticProblem>(
                       std::vector<Vector>{Vector::Unit(2, 0), -Vector::Unit(2, 0), Vector::Unit(2, 1) * 2.0}),
                   -2.0, 2.0, 1e-5});

  bool all = true;
  for (const auto& c : cases) {
    CounterRng rng(hash64({options.seed, 0x4752, std::hash<std::string>{}(c.label)}));
    double worst_full = 0.0;
    double worst_component = 0.0;
    for (std::size_t p = 0; p < options.points; ++p) {
      const Vector w = uniform_point(rng, c.problem->dim(), c.lo, c.hi);
      worst_full = std::max(worst_full, gradient_relative_error(*c.problem, w, std::nullopt));
      const auto i = static_cast<std::size_t>(rng.below(c.problem->size()));
      worst_component = std::max(worst_component, gradient_relative_error(*c.problem, w, i));
    }
    const bool ok_full = worst_full <= c.tol;
    const bool ok_comp = worst_component <= c.tol;
    all = all && ok_full && ok_comp;
    out << verdict(ok_full) << " gradients " << c.label << " full: max rel err " << worst_full << " (tol "
        << c.tol << ")\n";
    out << verdict(ok_comp) << " gradients " << c.label << " component: max rel err " << worst_component
        << " (tol " << c.tol << ")\n";
  }
  return all;
}

bool check_variance(const CheckOptions& options, std::ostream& out) {
  bool all = true;
  {
    TinyQuadraticProblem tiny({Vector::Unit(2, 0), -Vector::Unit(2, 0), Vector::Unit(2, 1) * 2.0});
    std::vector<Vector> pts{*tiny.optimum_point(), Vector::Ones(2), Vector::Constant(2, -3.0)};
    const auto fit = estimate_variance_constants(tiny, pts);
    const double expected = tiny.center_spread();
    const bool ok = fit.A_hat == 0.0 && std::fabs(fit.sigma2_hat - expected) <= 1e-12 * expected;
    all = all && ok;
    out << verdict(ok) << " variance tiny: A_hat " << fit.A_hat << ", sigma2_hat " << fmt17(fit.sigma2_hat)
        << " (closed form " << fmt17(expected) << ")\n";
  }
  {
    QuarticProblem quartic;
    CounterRng rng(hash64({options.seed, 0x5651}));
    std::vector<Vector> pts{*quartic.optimum_point()};
    for (std::size_t p = 0; p < std::max<std::size_t>(options.points, 1); ++p)
      pts.push_back(uniform_point(rng, quartic.dim(), -1.0, 1.0));
    const auto fit = estimate_variance_constants(quartic, pts);
    const bool ok = fit.max_violation <= 0.0;
    all = all && ok;
    out << verdict(ok) << " variance quartic: A_hat " << fit.A_hat << ", sigma2_hat " << fmt17(fit.sigma2_hat)
        << ", max violation " << fit.max_violation << " over " << fit.points << " points\n";
  }
  return all;
}

bool check_ell_envelope(const CheckOptions& options, std::ostream& out) {
  const ProblemSpec spec = options.problem.value_or(ProblemSpec{});
  const auto problem = make_problem(spec, options.seed);
  std::optional<EllFunction> ell = options.ell ? std::optional(EllFunction::parse(*options.ell))
                                               : problem->declared_ell();
  if (!ell) throw UsageError(problem->name() + " declares no ell-function; pass --ell");

  const Vector w0 = problem->initial_point();
  std::vector<Vector> points{w0};
  if (const auto w_star = problem->optimum_point())
    for (int s = 1; s <= 10; ++s) points.push_back(w0 + (s / 10.0) * (*w_star - w0));
  CounterRng rng(hash64({options.seed, 0x454C}));
  const double radius = 0.1 * (1.0 + w0.norm());
  for (std::size_t p = 0; p < options.points; ++p) {
    Vector w = w0;
    for (auto& x : w) x += radius * (2.0 * rng.uniform() - 1.0);
    points.push_back(w);
  }
  ProbeOptions po;
  po.seed = options.seed;
  if (spec.id == "dro") po.perturbation = 1e-8;
  const auto report = probe_ell_envelope(*problem, points, ell, po);
  for (std::size_t k = 0; k < report.probes.size(); ++k) {
    const auto& p = report.probes[k];
    if (p.violated)
      out << "  violation at probe " << k << ": hessian " << p.hessian_estimate << " > ell(" << p.grad_norm
          << ") = " << p.ell_bound << '\n';
  }
  const bool ok = report.violations == 0;
  out << verdict(ok) << " ell-envelope " << problem->name() << " with " << ell->describe() << ": "
      << report.violations << " violations, " << report.flagged << " flagged of " << report.probes.size()
      << " probes\n";
  return ok;
}

bool check_permutation_oracle(const CheckOptions& options, std::ostream& out) {
  bool all = true;
  for (std::int64_t n = 2; n <= 6; ++n) {
    double worst = 0.0;
    bool exact = true;
    for (std::int64_t k = 1; k <= n; ++k) {
      const auto factor = without_replacement_variance_factor(n, k);
      const double f = boost::rational_cast<double>(factor);
      for (int family = 0; family < 20; ++family) {
        CounterRng rng(hash64({options.seed, 0x504F, static_cast<std::uint64_t>(n),
                               static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(family)}));
        std::vector<Vector> X;
        std::vector<std::int64_t> ints;
        for (std::int64_t i = 0; i < n; ++i) {
          X.push_back(uniform_point(rng, 3, -5.0, 5.0));
          ints.push_back(static_cast<std::int64_t>(rng.below(41)) - 20);
        }
        Vector mean = Vector::Zero(3);
        for (const auto& x : X) mean += x;
        mean /= static_cast<double>(n);
        double pop = 0.0;
        for (const auto& x : X) pop += (x - mean).squaredNorm();
        pop /= static_cast<double>(n);
        const double brute = brute_force_partial_average_variance(X, static_cast<std::size_t>(k));
        worst = std::max(worst, std::fabs(brute - f * pop) / std::max(1.0, pop));

        const std::int64_t S = std::accumulate(ints.begin(), ints.end(), std::int64_t{0});
        std::int64_t ss = 0;
        for (auto v : ints) ss += (n * v - S) * (n * v - S);
        const boost::rational<std::int64_t> pop_exact(ss, n * n * n);
        if (brute_force_partial_average_variance(ints, static_cast<std::size_t>(k)) != factor * pop_exact)
          exact = false;
      }
    }
    const bool ok = worst <= 1e-12 && exact;
    all = all && ok;
    out << verdict(ok) << " permutation-oracle n=" << n << ": max rel err " << worst
        << (exact ? ", rational mode exact" : ", rational mode MISMATCH") << '\n';
  }
  return all;
}

}  // namespace

bool run_check_suite(const std::string& suite, const CheckOptions& options, std::ostream& out) {
  if (suite == "gradients") return check_gradients(options, out);
  if (suite == "variance") return check_variance(options, out);
  if (suite == "ell-envelope") return check_ell_envelope(options, out);
  if (suite == "permutation-oracle") return check_permutation_oracle(options, out);
  throw UsageError("unknown check suite '" + suite +
                   "' (expected gradients, variance, ell-envelope or permutation-oracle)");
}

}  // namespace shufgrad
