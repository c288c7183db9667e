#ifndef SHUFGRAD_PROBLEMS_HPP
#define SHUFGRAD_PROBLEMS_HPP

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shufgrad/ell.hpp"

namespace shufgrad {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct RegressionDataset;

/// F(w) = (1/n) sum_i f(w; i).
///
/// Component indices are 0-based. The public evaluators validate their
/// arguments (index range, finite w); `descend_component` is the unchecked hot
/// path used inside optimizer loops. Implementations are immutable after
/// construction and safe for concurrent read-only use.
class FiniteSumProblem {
 public:
  virtual ~FiniteSumProblem() = default;

  virtual std::string name() const = 0;
  virtual std::size_t size() const = 0;
  virtual std::size_t dim() const = 0;
  virtual Vector initial_point() const = 0;

  virtual std::optional<double> optimum_value() const { return std::nullopt; }
  virtual std::optional<Vector> optimum_point() const { return std::nullopt; }
  virtual std::optional<double> strong_convexity() const { return std::nullopt; }
  /// The ell-function this problem is claimed to satisfy, if any.
  virtual std::optional<EllFunction> declared_ell() const { return std::nullopt; }

  /// Squared distance to the known optimum set. Requires optimum_point().
  virtual double distance_sq_to_optimum(const Vector& w) const;

  double component_value(const Vector& w, std::size_t i) const;
  void component_gradient(const Vector& w, std::size_t i, Vector& out) const;
  Vector component_gradient(const Vector& w, std::size_t i) const;
  double full_value(const Vector& w) const;
  void full_gradient(const Vector& w, Vector& out) const;
  Vector full_gradient(const Vector& w) const;

  /// w <- w - step * grad f(w; i). `scratch` is a dim()-sized work buffer.
  void descend_component(Vector& w, std::size_t i, double step, Vector& scratch) const {
    do_descend_component(w, i, step, scratch);
  }

 protected:
  virtual double do_component_value(const Vector& w, std::size_t i) const = 0;
  virtual void do_component_gradient(const Vector& w, std::size_t i, Vector& out) const = 0;
  virtual void do_descend_component(Vector& w, std::size_t i, double step, Vector& scratch) const;
  /// Defaults average the components.
  virtual double do_full_value(const Vector& w) const;
  virtual void do_full_gradient(const Vector& w, Vector& out) const;

 private:
  void check_point(const Vector& w) const;
  void check_index(std::size_t i) const;
};

/// f_{i,k}(x) = x_i^4 + k x_i over (i, k) in [dim] x {-kmax..kmax}.
/// Components are ordered (1,-kmax), (1,-kmax+1), ..., (dim,kmax).
class QuarticProblem final : public FiniteSumProblem {
 public:
  explicit QuarticProblem(std::size_t dim = 50, int kmax = 10);

  std::string name() const override { return "quartic"; }
  std::size_t size() const override { return dim_ * static_cast<std::size_t>(2 * kmax_ + 1); }
  std::size_t dim() const override { return dim_; }
  Vector initial_point() const override { return Vector::Ones(static_cast<Eigen::Index>(dim_)); }
  std::optional<double> optimum_value() const override { return 0.0; }
  std::optional<Vector> optimum_point() const override;
  std::optional<double> strong_convexity() const override { return 0.0; }
  std::optional<EllFunction> declared_ell() const override;

  /// (coordinate, k) for component index i.
  std::pair<std::size_t, int> decode(std::size_t i) const;

 protected:
  double do_component_value(const Vector& w, std::size_t i) const override;
  void do_component_gradient(const Vector& w, std::size_t i, Vector& out) const override;
  void do_descend_component(Vector& w, std::size_t i, double step, Vector& scratch) const override;
  double do_full_value(const Vector& w) const override;
  void do_full_gradient(const Vector& w, Vector& out) const override;

 private:
  std::size_t dim_;
  int kmax_;
};

/// f_{j,k}(x) = exp(x_j - k) + exp(k - x_j) + |x|^2 / 2; 1-strongly convex.
class ExpStrongProblem final : public FiniteSumProblem {
 public:
  explicit ExpStrongProblem(std::size_t dim = 50, int kmax = 10);

  std::string name() const override { return "exp"; }
  std::size_t size() const override { return dim_ * static_cast<std::size_t>(2 * kmax_ + 1); }
  std::size_t dim() const override { return dim_; }
  Vector initial_point() const override { return Vector::Ones(static_cast<Eigen::Index>(dim_)); }
  std::optional<double> optimum_value() const override;
  std::optional<Vector> optimum_point() const override;
  std::optional<double> strong_convexity() const override { return 1.0; }
  std::optional<EllFunction> declared_ell() const override;

  /// Weight of sum_j (e^{x_j} + e^{-x_j}) in F: (sum_k e^k) / n.
  double cosh_weight() const noexcept { return weight_; }
  std::pair<std::size_t, int> decode(std::size_t i) const;

 protected:
  double do_component_value(const Vector& w, std::size_t i) const override;
  void do_component_gradient(const Vector& w, std::size_t i, Vector& out) const override;
  void do_descend_component(Vector& w, std::size_t i, double step, Vector& scratch) const override;
  double do_full_value(const Vector& w) const override;
  void do_full_gradient(const Vector& w, Vector& out) const override;

 private:
  std::size_t dim_;
  int kmax_;
  double weight_;
};

/// f_r(z) = (y_r - (a_r^T z)^2)^2 / 2, so F(z) = (1/2m) sum_r (y_r - (a_r^T z)^2)^2.
class PhaseRetrievalProblem final : public FiniteSumProblem {
 public:
  struct Options {
    std::size_t measurements = 3000;
    std::size_t dim = 100;
    double noise_std = 4.0;
    double signal_variance = 0.5;
    double init_mean = 5.0;
    std::uint64_t seed = 0;
  };

  /// Draws x, a_r ~ N(0, v I), z0 ~ N(init_mean, v I), y_r = (a_r^T x)^2 + N(0, noise_std^2).
  explicit PhaseRetrievalProblem(const Options& options);
  /// Explicit data; `signal` is the noiseless ground truth when known.
  PhaseRetrievalProblem(Matrix sensing, Vector observations, Vector init,
                        std::optional<Vector> signal = std::nullopt);

  std::string name() const override { return "phase"; }
  std::size_t size() const override { return static_cast<std::size_t>(sensing_.rows()); }
  std::size_t dim() const override { return static_cast<std::size_t>(sensing_.cols()); }
  Vector initial_point() const override { return init_; }
  std::optional<double> optimum_value() const override;
  std::optional<Vector> optimum_point() const override;
  /// Sign ambiguity: distance to the nearer of +x and -x.
  double distance_sq_to_optimum(const Vector& w) const override;

  const RowMatrix& sensing() const noexcept { return sensing_; }
  const Vector& observations() const noexcept { return observations_; }
  const Vector& signal() const noexcept { return signal_; }

 protected:
  double do_component_value(const Vector& w, std::size_t i) const override;
  void do_component_gradient(const Vector& w, std::size_t i, Vector& out) const override;
  void do_descend_component(Vector& w, std::size_t i, double step, Vector& scratch) const override;

 private:
  RowMatrix sensing_;
  Vector observations_;
  Vector init_;
  Vector signal_;
  bool noiseless_ = false;
};

/// Conjugate of the chi-square divergence: psi*(t) = (t+2)_+^2 / 4 - 1.
double psi_star(double t) noexcept;
/// psi*'(t) = (t+2)_+ / 2.
double psi_star_prime(double t) noexcept;

/// Chi-square penalized DRO over the joint variable v = (w, theta):
/// f_i(v) = psi*((loss_i(w) - theta) / lambda) + theta with
/// loss_i(w) = (y_i - x_i^T w)^2 / 2 + reg * sum_j ln(1 + |w_j|).
/// The subgradient of ln(1 + |w_j|) at w_j = 0 is taken as 0.
class DROProblem final : public FiniteSumProblem {
 public:
  struct Options {
    double lambda = 0.01;
    double regularization = 0.1;
    double initial_theta = 0.1;
    std::uint64_t seed = 0;  // drives the N(0, I) initial weights
  };

  DROProblem(Matrix features, Vector targets, const Options& options);
  static DROProblem from_dataset(const RegressionDataset& data, const Options& options);

  std::string name() const override { return "dro"; }
  std::size_t size() const override { return static_cast<std::size_t>(features_.rows()); }
  std::size_t dim() const override { return static_cast<std::size_t>(features_.cols()) + 1; }
  Vector initial_point() const override { return init_; }

  std::size_t weight_dim() const noexcept { return static_cast<std::size_t>(features_.cols()); }
  double lambda() const noexcept { return lambda_; }
  /// Inner loss of sample i at weights w (length weight_dim()).
  double sample_loss(const Vector& weights, std::size_t i) const;

 protected:
  double do_component_value(const Vector& w, std::size_t i) const override;
  void do_component_gradient(const Vector& w, std::size_t i, Vector& out) const override;

 private:
  RowMatrix features_;
  Vector targets_;
  double lambda_;
  double reg_;
  Vector init_;
};

/// f_i(w) = |w - c_i|^2 / 2 with a handful of small centers; closed-form optimum.
class TinyQuadraticProblem final : public FiniteSumProblem {
 public:
  explicit TinyQuadraticProblem(std::vector<Vector> centers,
                                std::optional<Vector> initial = std::nullopt);

  std::string name() const override { return "tiny"; }
  std::size_t size() const override { return centers_.size(); }
  std::size_t dim() const override { return static_cast<std::size_t>(mean_.size()); }
  Vector initial_point() const override { return init_; }
  std::optional<double> optimum_value() const override { return optimum_value_; }
  std::optional<Vector> optimum_point() const override { return mean_; }
  std::optional<double> strong_convexity() const override { return 1.0; }
  std::optional<EllFunction> declared_ell() const override { return EllFunction::constant(1.0); }

  const std::vector<Vector>& centers() const noexcept { return centers_; }
  /// (1/n) sum_i |c_i - mean|^2
  double center_spread() const noexcept { return 2.0 * optimum_value_; }

 protected:
  double do_component_value(const Vector& w, std::size_t i) const override;
  void do_component_gradient(const Vector& w, std::size_t i, Vector& out) const override;
  void do_descend_component(Vector& w, std::size_t i, double step, Vector& scratch) const override;
  void do_full_gradient(const Vector& w, Vector& out) const override;

 private:
  std::vector<Vector> centers_;
  Vector mean_;
  Vector init_;
  double optimum_value_ = 0.0;
};

/// Search interval for the dual variable theta.
struct ThetaBracket {
  double lo;
  double hi;
};

struct DualMinimum {
  double theta;
  double value;
};

/// min over theta of (1/n) sum_i psi*((losses_i - theta) / lambda) + theta.
/// Bisects the monotone theta-derivative to an absolute tolerance of 1e-8.
/// Throws BracketError when no sign change is found after expanding the
/// bracket 200 times.
DualMinimum minimize_dual(std::span<const double> losses, double lambda,
                          std::optional<ThetaBracket> bracket = std::nullopt);

/// Psi(w) = min_theta L(w, theta) at fixed weights (length weight_dim(), or a
/// full dim() variable whose theta entry is ignored).
DualMinimum dro_partial_objective(const DROProblem& problem, const Vector& weights,
                                  std::optional<ThetaBracket> bracket = std::nullopt);

}  // namespace shufgrad

#endif  // SHUFGRAD_PROBLEMS_HPP
