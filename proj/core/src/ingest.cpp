#include "shufgrad/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "shufgrad/error.hpp"
#include "shufgrad/random.hpp"

namespace shufgrad {

namespace {

constexpr const char* kProvenanceTag = "# shufgrad-dataset";
constexpr std::uint64_t kNoiseStream = 0x4E4F495345ULL;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string> split_record(const std::string& line, std::size_t lineno) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  if (quoted) throw FormatError("line " + std::to_string(lineno) + ": unterminated quote");
  cells.push_back(trim(cell));
  return cells;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

double parse_cell(const std::string& text, std::size_t line, const std::string& column) {
  if (text.empty()) return std::numeric_limits<double>::quiet_NaN();
  double value = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value))
    throw FormatError("line " + std::to_string(line) + ", column '" + column +
                      "': cannot parse '" + text + "' as a number");
  return value;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void fill_missing(Eigen::Ref<Eigen::VectorXd> column) {
  std::vector<double> present;
  for (Eigen::Index i = 0; i < column.size(); ++i)
    if (!std::isnan(column[i])) present.push_back(column[i]);
  if (present.size() == static_cast<std::size_t>(column.size())) return;
  const double fill = present.empty() ? 0.0 : median_of(std::move(present));
  for (Eigen::Index i = 0; i < column.size(); ++i)
    if (std::isnan(column[i])) column[i] = fill;
}

void winsorize(Eigen::Ref<Eigen::VectorXd> column, double lower_q, double upper_q) {
  const auto n = static_cast<std::size_t>(column.size());
  if (n < 2) return;
  std::vector<double> sorted(column.data(), column.data() + n);
  std::sort(sorted.begin(), sorted.end());
  const double span = static_cast<double>(n - 1);
  const double lo = sorted[static_cast<std::size_t>(std::floor(lower_q * span))];
  const double hi = sorted[static_cast<std::size_t>(std::ceil(upper_q * span))];
  for (std::size_t i = 0; i < n; ++i) column[static_cast<Eigen::Index>(i)] = std::clamp(column[static_cast<Eigen::Index>(i)], lo, hi);
}

void standardize(Eigen::Ref<Eigen::VectorXd> column) {
  const auto n = column.size();
  const double m = column.mean();
  column.array() -= m;
  double sd = n > 1 ? std::sqrt(column.squaredNorm() / static_cast<double>(n - 1)) : 0.0;
  if (!(sd > 0.0)) sd = 1.0;
  column /= sd;
}

}  // namespace

RegressionDataset parse_csv(std::istream& in, const PreprocessOptions& options,
                            const std::string& provenance) {
  RegressionDataset data;
  data.provenance = provenance;

  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> records;
  std::vector<std::size_t> record_lines;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (line[0] == '#') {
      if (line.rfind(kProvenanceTag, 0) == 0) {
        std::istringstream tokens(line.substr(std::string(kProvenanceTag).size()));
        std::string tok;
        while (tokens >> tok) {
          if (tok == "target_noise=1") data.target_noise_applied = true;
          if (tok.rfind("source=", 0) == 0) {
            std::string rest;
            std::getline(tokens, rest);
            data.provenance = tok.substr(7) + rest;
            break;
          }
        }
      }
      continue;
    }
    if (header.empty()) {
      header = split_record(line, lineno);
      continue;
    }
    records.push_back(split_record(line, lineno));
    record_lines.push_back(lineno);
  }
  if (header.empty()) throw FormatError(provenance + ": missing header row");
  if (records.empty()) throw FormatError(provenance + ": no data rows");

  std::vector<std::string> drop;
  for (const auto& name : options.drop_columns) drop.push_back(lower(trim(name)));
  const std::string target = lower(trim(options.target_column));

  std::optional<std::size_t> target_index;
  std::vector<std::size_t> feature_index;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const std::string key = lower(header[j]);
    if (key.empty()) throw FormatError(provenance + ": empty column name at position " + std::to_string(j + 1));
    if (key == target) {
      target_index = j;
    } else if (std::find(drop.begin(), drop.end(), key) == drop.end()) {
      feature_index.push_back(j);
      data.feature_names.push_back(header[j]);
    }
  }
  if (!target_index) throw FormatError(provenance + ": missing target column '" + options.target_column + "'");
  if (feature_index.empty()) throw FormatError(provenance + ": no feature columns");
  data.target_name = header[*target_index];

  const std::size_t rows = std::min(records.size(), options.max_rows);
  data.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(feature_index.size()));
  data.targets.resize(static_cast<Eigen::Index>(rows));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& cells = records[r];
    if (cells.size() != header.size())
      throw FormatError("line " + std::to_string(record_lines[r]) + ": expected " +
                        std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
    for (std::size_t c = 0; c < feature_index.size(); ++c)
      data.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          parse_cell(cells[feature_index[c]], record_lines[r], header[feature_index[c]]);
    data.targets[static_cast<Eigen::Index>(r)] =
        parse_cell(cells[*target_index], record_lines[r], header[*target_index]);
  }
  preprocess(data, options);
  return data;
}

RegressionDataset load_csv(const std::filesystem::path& path, const PreprocessOptions& options) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dataset file " + path.string());
  return parse_csv(in, options, path.string());
}

void preprocess(RegressionDataset& data, const PreprocessOptions& options) {
  if (!(options.winsor_lower >= 0.0 && options.winsor_lower <= options.winsor_upper &&
        options.winsor_upper <= 1.0))
    throw UsageError("preprocess: need 0 <= winsor_lower <= winsor_upper <= 1");
  if (data.rows() == 0) throw UsageError("preprocess: empty dataset");
  if (data.rows() > options.max_rows) {
    const auto keep = static_cast<Eigen::Index>(options.max_rows);
    data.features.conservativeResize(keep, Eigen::NoChange);
    data.targets.conservativeResize(keep);
  }
  for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
    auto column = data.features.col(j);
    fill_missing(column);
    winsorize(column, options.winsor_lower, options.winsor_upper);
    standardize(column);
  }
  fill_missing(data.targets);
  if (options.add_target_noise && !data.target_noise_applied) {
    auto engine = make_engine(hash64({options.noise_seed, kNoiseStream}));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Eigen::Index i = 0; i < data.targets.size(); ++i) data.targets[i] += gauss(engine);
    data.target_noise_applied = true;
  }
}

RegressionDataset synthesize(std::uint64_t seed, std::size_t rows, std::size_t dim) {
  if (rows == 0 || dim == 0) throw UsageError("synthesize: rows and dim must be positive");
  auto engine = make_engine(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto r = static_cast<Eigen::Index>(rows);
  const auto d = static_cast<Eigen::Index>(dim);

  RegressionDataset data;
  Eigen::VectorXd planted(d);
  for (Eigen::Index j = 0; j < d; ++j) planted[j] = gauss(engine);
  data.features.resize(r, d);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < d; ++j) data.features(i, j) = gauss(engine);
  data.targets = data.features * planted;
  for (Eigen::Index i = 0; i < r; ++i) data.targets[i] += gauss(engine);

  for (std::size_t j = 0; j < dim; ++j) data.feature_names.push_back("x" + std::to_string(j + 1));
  data.target_name = "y";
  data.planted_weights = std::move(planted);
  data.provenance = "synthetic:seed=" + std::to_string(seed);
  // The planted model already carries its N(0,1) observation noise.
  data.target_noise_applied = true;
  return data;
}

void write_csv(const RegressionDataset& data, std::ostream& out) {
  out << kProvenanceTag << " target_noise=" << (data.target_noise_applied ? 1 : 0)
      << " source=" << data.provenance << '\n';
  for (const auto& name : data.feature_names) out << quote_if_needed(name) << ',';
  out << quote_if_needed(data.target_name) << '\n';
  char buf[32];
  const auto emit = [&](double v) {
    const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
    out.write(buf, len);
  };
  for (Eigen::Index i = 0; i < data.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
      emit(data.features(i, j));
      out << ',';
    }
    emit(data.targets[i]);
    out << '\n';
  }
}

}  // namespace shufgrad
