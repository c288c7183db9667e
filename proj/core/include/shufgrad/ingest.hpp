#ifndef SHUFGRAD_INGEST_HPP
#define SHUFGRAD_INGEST_HPP

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace shufgrad {

/// Regression samples for the DRO benchmark.
struct RegressionDataset {
  std::vector<std::string> feature_names;
  std::string target_name;
  Eigen::MatrixXd features;  // rows x features
  Eigen::VectorXd targets;
  std::string provenance;
  /// Set once Gaussian noise has been added to the targets; preprocessing
  /// never adds it twice.
  bool target_noise_applied = false;
  /// Ground-truth weights, present for synthetic data.
  std::optional<Eigen::VectorXd> planted_weights;

  std::size_t rows() const noexcept { return static_cast<std::size_t>(features.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(features.cols()); }
};

struct PreprocessOptions {
  /// Categorical columns removed before anything else (case-insensitive).
  std::vector<std::string> drop_columns = {"country", "status"};
  std::string target_column = "life expectancy";
  std::size_t max_rows = 2000;
  /// Winsorization quantiles ("censoring"): values are clipped to the order
  /// statistics at floor(lower*(n-1)) and ceil(upper*(n-1)).
  double winsor_lower = 0.01;
  double winsor_upper = 0.99;
  bool add_target_noise = true;
  std::uint64_t noise_seed = 0;
};

/// Reads a header-first, comma-separated file. Empty cells are missing values.
/// Lines starting with '#' are comments; a leading "# shufgrad-dataset" comment
/// written by write_csv() restores the source tag and the noise flag.
RegressionDataset load_csv(const std::filesystem::path& path, const PreprocessOptions& options = {});
RegressionDataset parse_csv(std::istream& in, const PreprocessOptions& options = {},
                            const std::string& provenance = "stream");

/// Median fill, winsorization and z-scoring of every feature column (over the
/// first max_rows rows), then N(0,1) target noise unless already applied.
/// Zero-variance columns divide by 1. Re-running on its own output is a no-op
/// up to rounding.
void preprocess(RegressionDataset& data, const PreprocessOptions& options);

/// Features ~ N(0,1), planted w ~ N(0,1), targets = X w + N(0,1).
RegressionDataset synthesize(std::uint64_t seed, std::size_t rows, std::size_t dim = 34);

/// CSV dump with a one-line '#' provenance comment and 17 significant digits.
void write_csv(const RegressionDataset& data, std::ostream& out);

}  // namespace shufgrad

#endif  // SHUFGRAD_INGEST_HPP
