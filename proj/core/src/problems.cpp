#include "shufgrad/problems.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "shufgrad/error.hpp"
#include "shufgrad/ingest.hpp"
#include "shufgrad/random.hpp"

namespace shufgrad {

// ---------------------------------------------------------------------------
// FiniteSumProblem

void FiniteSumProblem::check_point(const Vector& w) const {
  if (static_cast<std::size_t>(w.size()) != dim())
    throw UsageError(name() + ": point has dimension " + std::to_string(w.size()) +
                     ", expected " + std::to_string(dim()));
  if (!w.allFinite()) throw DomainError(name() + ": point has non-finite coordinates");
}

void FiniteSumProblem::check_index(std::size_t i) const {
  if (i >= size())
    throw UsageError(name() + ": component index " + std::to_string(i) + " out of range [0, " +
                     std::to_string(size()) + ")");
}

double FiniteSumProblem::distance_sq_to_optimum(const Vector& w) const {
  const auto opt = optimum_point();
  if (!opt) throw UsageError(name() + ": optimum point unknown");
  return (w - *opt).squaredNorm();
}

double FiniteSumProblem::component_value(const Vector& w, std::size_t i) const {
  check_point(w);
  check_index(i);
  return do_component_value(w, i);
}

void FiniteSumProblem::component_gradient(const Vector& w, std::size_t i, Vector& out) const {
  check_point(w);
  check_index(i);
  out.resize(w.size());
  do_component_gradient(w, i, out);
}

Vector FiniteSumProblem::component_gradient(const Vector& w, std::size_t i) const {
  Vector out(w.size());
  component_gradient(w, i, out);
  return out;
}

double FiniteSumProblem::full_value(const Vector& w) const {
  check_point(w);
  return do_full_value(w);
}

void FiniteSumProblem::full_gradient(const Vector& w, Vector& out) const {
  check_point(w);
  out.resize(w.size());
  do_full_gradient(w, out);
}

Vector FiniteSumProblem::full_gradient(const Vector& w) const {
  Vector out(w.size());
  full_gradient(w, out);
  return out;
}

void FiniteSumProblem::do_descend_component(Vector& w, std::size_t i, double step,
                                            Vector& scratch) const {
  do_component_gradient(w, i, scratch);
  w.noalias() -= step * scratch;
}

double FiniteSumProblem::do_full_value(const Vector& w) const {
  double sum = 0.0;
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) sum += do_component_value(w, i);
  return sum / static_cast<double>(n);
}

void FiniteSumProblem::do_full_gradient(const Vector& w, Vector& out) const {
  out.setZero(w.size());
  Vector g(w.size());
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    do_component_gradient(w, i, g);
    out += g;
  }
  out /= static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// QuarticProblem

QuarticProblem::QuarticProblem(std::size_t dim, int kmax) : dim_(dim), kmax_(kmax) {
  if (dim == 0 || kmax < 0) throw UsageError("quartic: need dim >= 1 and kmax >= 0");
}

std::optional<Vector> QuarticProblem::optimum_point() const {
  return Vector::Zero(static_cast<Eigen::Index>(dim_));
}

std::optional<EllFunction> QuarticProblem::declared_ell() const {
  return EllFunction::power(3.0, 2.0 / 3.0);
}

std::pair<std::size_t, int> QuarticProblem::decode(std::size_t i) const {
  const auto span = static_cast<std::size_t>(2 * kmax_ + 1);
  return {i / span, static_cast<int>(i % span) - kmax_};
}

double QuarticProblem::do_component_value(const Vector& w, std::size_t i) const {
  const auto [j, k] = decode(i);
  const double x = w[static_cast<Eigen::Index>(j)];
  const double x2 = x * x;
  return x2 * x2 + k * x;
}

void QuarticProblem::do_component_gradient(const Vector& w, std::size_t i, Vector& out) const {
  const auto [j, k] = decode(i);
  const double x = w[static_cast<Eigen::Index>(j)];
  out.setZero();
  out[static_cast<Eigen::Index>(j)] = 4.0 * x * x * x + k;
}

void QuarticProblem::do_descend_component(Vector& w, std::size_t i, double step, Vector&) const {
  const auto [j, k] = decode(i);
  double& x = w[static_cast<Eigen::Index>(j)];
  x -= step * (4.0 * x * x * x + k);
}

double QuarticProblem::do_full_value(const Vector& w) const {
  return w.array().square().square().sum() / static_cast<double>(dim_);
}

void QuarticProblem::do_full_gradient(const Vector& w, Vector& out) const {
  out = (4.0 / static_cast<double>(dim_)) * w.array().cube().matrix();
}

// ---------------------------------------------------------------------------
// ExpStrongProblem

ExpStrongProblem::ExpStrongProblem(std::size_t dim, int kmax) : dim_(dim), kmax_(kmax) {
  if (dim == 0 || kmax < 0) throw UsageError("exp: need dim >= 1 and kmax >= 0");
  double s = 0.0;
  for (int k = -kmax; k <= kmax; ++k) s += std::exp(static_cast<double>(k));
  weight_ = s / static_cast<double>(size());
}

std::optional<double> ExpStrongProblem::optimum_value() const {
  // F is separable and each coordinate term x^2/2 + weight*(e^x + e^-x) is minimized at 0.
  return 2.0 * weight_ * static_cast<double>(dim_);
}

std::optional<Vector> ExpStrongProblem::optimum_point() const {
  return Vector::Zero(static_cast<Eigen::Index>(dim_));
}

std::optional<EllFunction> ExpStrongProblem::declared_ell() const {
  return EllFunction::affine(5.0, 5.0);
}

std::pair<std::size_t, int> ExpStrongProblem::decode(std::size_t i) const {
  const auto span = static_cast<std::size_t>(2 * kmax_ + 1);
  return {i / span, static_cast<int>(i % span) - kmax_};
}

double ExpStrongProblem::do_component_value(const Vector& w, std::size_t i) const {
  const auto [j, k] = decode(i);
  const double x = w[static_cast<Eigen::Index>(j)];
  return std::exp(x - k) + std::exp(k - x) + 0.5 * w.squaredNorm();
}

void ExpStrongProblem::do_component_gradient(const Vector& w, std::size_t i, Vector& out) const {
  const auto [j, k] = decode(i);
  const double x = w[static_cast<Eigen::Index>(j)];
  out = w;
  out[static_cast<Eigen::Index>(j)] += std::exp(x - k) - std::exp(k - x);
}

void ExpStrongProblem::do_descend_component(Vector& w, std::size_t i, double step, Vector&) const {
  const auto [j, k] = decode(i);
  const auto jj = static_cast<Eigen::Index>(j);
  const double x = w[jj];
  const double extra = std::exp(x - k) - std::exp(k - x);
  w *= (1.0 - step);
  w[jj] -= step * extra;
}

double ExpStrongProblem::do_full_value(const Vector& w) const {
  const auto a = w.array();
  return 0.5 * w.squaredNorm() + weight_ * (a.exp() + (-a).exp()).sum();
}

void ExpStrongProblem::do_full_gradient(const Vector& w, Vector& out) const {
  const auto a = w.array();
  out = (a + weight_ * (a.exp() - (-a).exp())).matrix();
}

// ---------------------------------------------------------------------------
// PhaseRetrievalProblem

PhaseRetrievalProblem::PhaseRetrievalProblem(const Options& options) {
  if (options.measurements == 0 || options.dim == 0)
    throw UsageError("phase: need at least one measurement and dimension");
  if (!(options.noise_std >= 0.0) || !(options.signal_variance > 0.0))
    throw UsageError("phase: need noise_std >= 0 and signal_variance > 0");
  const auto m = static_cast<Eigen::Index>(options.measurements);
  const auto d = static_cast<Eigen::Index>(options.dim);
  auto engine = make_engine(options.seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(options.signal_variance));

  signal_.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) signal_[j] = gauss(engine);
  sensing_.resize(m, d);
  for (Eigen::Index r = 0; r < m; ++r)
    for (Eigen::Index j = 0; j < d; ++j) sensing_(r, j) = gauss(engine);
  init_.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) init_[j] = options.init_mean + gauss(engine);

  std::normal_distribution<double> noise(0.0, 1.0);
  observations_.resize(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const double s = sensing_.row(r).dot(signal_);
    observations_[r] = s * s + (options.noise_std > 0.0 ? options.noise_std * noise(engine) : 0.0);
  }
  noiseless_ = options.noise_std == 0.0;
}

PhaseRetrievalProblem::PhaseRetrievalProblem(Matrix sensing, Vector observations, Vector init,
                                             std::optional<Vector> signal)
    : sensing_(std::move(sensing)), observations_(std::move(observations)), init_(std::move(init)) {
  if (sensing_.rows() == 0 || sensing_.cols() == 0) throw UsageError("phase: empty sensing matrix");
  if (observations_.size() != sensing_.rows() || init_.size() != sensing_.cols())
    throw UsageError("phase: inconsistent data shapes");
  if (signal) {
    if (signal->size() != sensing_.cols()) throw UsageError("phase: signal has wrong dimension");
    signal_ = *signal;
    noiseless_ = true;
  }
}

std::optional<double> PhaseRetrievalProblem::optimum_value() const {
  if (!noiseless_) return std::nullopt;
  return 0.0;
}

std::optional<Vector> PhaseRetrievalProblem::optimum_point() const {
  if (!noiseless_) return std::nullopt;
  return signal_;
}

double PhaseRetrievalProblem::distance_sq_to_optimum(const Vector& w) const {
  if (!noiseless_) throw UsageError("phase: optimum unknown for noisy measurements");
  return std::min((w - signal_).squaredNorm(), (w + signal_).squaredNorm());
}

double PhaseRetrievalProblem::do_component_value(const Vector& w, std::size_t i) const {
  const auto r = static_cast<Eigen::Index>(i);
  const double s = sensing_.row(r).dot(w);
  const double resid = observations_[r] - s * s;
  return 0.5 * resid * resid;
}

void PhaseRetrievalProblem::do_component_gradient(const Vector& w, std::size_t i,
                                                  Vector& out) const {
  const auto r = static_cast<Eigen::Index>(i);
  const double s = sensing_.row(r).dot(w);
  out = (2.0 * (s * s - observations_[r]) * s) * sensing_.row(r).transpose();
}

void PhaseRetrievalProblem::do_descend_component(Vector& w, std::size_t i, double step,
                                                 Vector&) const {
  const auto r = static_cast<Eigen::Index>(i);
  const double s = sensing_.row(r).dot(w);
  w.noalias() -= (step * 2.0 * (s * s - observations_[r]) * s) * sensing_.row(r).transpose();
}

// ---------------------------------------------------------------------------
// DROProblem

double psi_star(double t) noexcept {
  const double p = std::max(t + 2.0, 0.0);
  return 0.25 * p * p - 1.0;
}

double psi_star_prime(double t) noexcept { return 0.5 * std::max(t + 2.0, 0.0); }

DROProblem::DROProblem(Matrix features, Vector targets, const Options& options)
    : features_(std::move(features)),
      targets_(std::move(targets)),
      lambda_(options.lambda),
      reg_(options.regularization) {
  if (features_.rows() == 0 || features_.cols() == 0) throw UsageError("dro: empty dataset");
  if (targets_.size() != features_.rows()) throw UsageError("dro: targets/features row mismatch");
  if (!(lambda_ > 0.0)) throw UsageError("dro: lambda must be positive");
  if (!(reg_ >= 0.0)) throw UsageError("dro: regularization must be non-negative");
  if (!features_.allFinite() || !targets_.allFinite()) throw DomainError("dro: non-finite data");
  const auto p = features_.cols();
  auto engine = make_engine(options.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  init_.resize(p + 1);
  for (Eigen::Index j = 0; j < p; ++j) init_[j] = gauss(engine);
  init_[p] = options.initial_theta;
}

DROProblem DROProblem::from_dataset(const RegressionDataset& data, const Options& options) {
  return DROProblem(data.features, data.targets, options);
}

double DROProblem::sample_loss(const Vector& weights, std::size_t i) const {
  const auto p = features_.cols();
  const auto r = static_cast<Eigen::Index>(i);
  const auto w = weights.head(p);
  const double resid = targets_[r] - features_.row(r).dot(w);
  return 0.5 * resid * resid + reg_ * w.array().abs().log1p().sum();
}

double DROProblem::do_component_value(const Vector& w, std::size_t i) const {
  const double theta = w[features_.cols()];
  return psi_star((sample_loss(w, i) - theta) / lambda_) + theta;
}

void DROProblem::do_component_gradient(const Vector& w, std::size_t i, Vector& out) const {
  const auto p = features_.cols();
  const auto r = static_cast<Eigen::Index>(i);
  const auto weights = w.head(p);
  const double theta = w[p];
  const double resid = targets_[r] - features_.row(r).dot(weights);
  const double loss = 0.5 * resid * resid + reg_ * weights.array().abs().log1p().sum();
  const double slope = psi_star_prime((loss - theta) / lambda_) / lambda_;

  out.resize(p + 1);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double wj = weights[j];
    const double sign = wj > 0.0 ? 1.0 : (wj < 0.0 ? -1.0 : 0.0);
    out[j] = slope * (-resid * features_(r, j) + reg_ * sign / (1.0 + std::abs(wj)));
  }
  out[p] = 1.0 - slope;
}

// ---------------------------------------------------------------------------
// TinyQuadraticProblem

TinyQuadraticProblem::TinyQuadraticProblem(std::vector<Vector> centers,
                                           std::optional<Vector> initial)
    : centers_(std::move(centers)) {
  if (centers_.empty() || centers_.size() > 6) throw UsageError("tiny: need 1..6 centers");
  const auto d = centers_.front().size();
  if (d == 0 || d > 3) throw UsageError("tiny: dimension must be 1..3");
  mean_ = Vector::Zero(d);
  for (const auto& c : centers_) {
    if (c.size() != d) throw UsageError("tiny: centers differ in dimension");
    mean_ += c;
  }
  mean_ /= static_cast<double>(centers_.size());
  double spread = 0.0;
  for (const auto& c : centers_) spread += (c - mean_).squaredNorm();
  optimum_value_ = 0.5 * spread / static_cast<double>(centers_.size());
  init_ = initial.value_or(Vector::Zero(d));
  if (init_.size() != d) throw UsageError("tiny: initial point has wrong dimension");
}

double TinyQuadraticProblem::do_component_value(const Vector& w, std::size_t i) const {
  return 0.5 * (w - centers_[i]).squaredNorm();
}

void TinyQuadraticProblem::do_component_gradient(const Vector& w, std::size_t i,
                                                 Vector& out) const {
  out = w - centers_[i];
}

void TinyQuadraticProblem::do_descend_component(Vector& w, std::size_t i, double step,
                                                Vector&) const {
  w -= step * (w - centers_[i]);
}

void TinyQuadraticProblem::do_full_gradient(const Vector& w, Vector& out) const { out = w - mean_; }

// ---------------------------------------------------------------------------
// Dual minimization

namespace {

double dual_derivative(std::span<const double> losses, double lambda, double theta) {
  double sum = 0.0;
  for (double l : losses) sum += psi_star_prime((l - theta) / lambda);
  return 1.0 - sum / (static_cast<double>(losses.size()) * lambda);
}

double dual_value(std::span<const double> losses, double lambda, double theta) {
  double sum = 0.0;
  for (double l : losses) sum += psi_star((l - theta) / lambda);
  return sum / static_cast<double>(losses.size()) + theta;
}

}  // namespace

DualMinimum minimize_dual(std::span<const double> losses, double lambda,
                          std::optional<ThetaBracket> bracket) {
  if (losses.empty()) throw UsageError("minimize_dual: no losses");
  if (!(lambda > 0.0)) throw UsageError("minimize_dual: lambda must be positive");
  for (double l : losses)
    if (!std::isfinite(l)) throw DomainError("minimize_dual: non-finite loss");

  double lo;
  double hi;
  if (bracket) {
    lo = bracket->lo;
    hi = bracket->hi;
  } else {
    const auto [mn, mx] = std::minmax_element(losses.begin(), losses.end());
    lo = *mn - 2.0 * lambda - 1.0;
    hi = *mx + 2.0 * lambda + 1.0;
  }
  if (!(lo < hi)) throw UsageError("minimize_dual: empty theta bracket");

  // The derivative is non-decreasing in theta; widen until it changes sign.
  constexpr int kMaxExpansions = 200;
  int expansions = 0;
  while (dual_derivative(losses, lambda, lo) > 0.0 || dual_derivative(losses, lambda, hi) < 0.0) {
    if (++expansions > kMaxExpansions || !std::isfinite(hi - lo))
      throw BracketError(lo, hi,
                         "minimize_dual: no sign change of the theta-derivative in [" +
                             std::to_string(lo) + ", " + std::to_string(hi) + "]");
    const double width = hi - lo;
    if (dual_derivative(losses, lambda, lo) > 0.0) lo -= width;
    if (dual_derivative(losses, lambda, hi) < 0.0) hi += width;
  }

  while (hi - lo > 1e-8) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (dual_derivative(losses, lambda, mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  const double theta = 0.5 * (lo + hi);
  return {theta, dual_value(losses, lambda, theta)};
}

DualMinimum dro_partial_objective(const DROProblem& problem, const Vector& weights,
                                  std::optional<ThetaBracket> bracket) {
  const auto p = problem.weight_dim();
  const auto size = static_cast<std::size_t>(weights.size());
  if (size != p && size != p + 1)
    throw UsageError("dro_partial_objective: weights have dimension " + std::to_string(size));
  if (!weights.head(static_cast<Eigen::Index>(p)).allFinite())
    throw DomainError("dro_partial_objective: non-finite weights");
  std::vector<double> losses(problem.size());
  for (std::size_t i = 0; i < losses.size(); ++i) losses[i] = problem.sample_loss(weights, i);
  return minimize_dual(losses, problem.lambda(), bracket);
}

}  // namespace shufgrad
