#pragma once

#include "particle_em/types.hpp"

#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pem::data {

class FileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input. `line` and `column` are 1-based; column 0 means the whole line.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

struct TabularDataset {
  Matrix features;
  Vector labels;  // 0/1
  std::vector<std::string> feature_names;
  /// Statistics applied by normalize(); empty until then.
  Vector feature_means;
  Vector feature_stds;
  /// Rows dropped at load time because of missing values.
  std::size_t dropped_rows = 0;

  std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
};

/// Reads a CSV with a header row. Every column except `label_column` must be
/// numeric; a row is dropped when any cell is empty, "NA", "NaN" or "?".
/// Labels equal to `positive_label` map to 1, all others to 0.
TabularDataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                        const std::string& positive_label);

/// Column means and population standard deviations (constant columns get 1).
std::pair<Vector, Vector> feature_statistics(const Matrix& features);

/// Standardizes in place with the given statistics and records them.
void normalize(TabularDataset& dataset, const Vector& means, const Vector& stds);

/// Inverse of normalize() using the recorded statistics.
Matrix denormalize(const TabularDataset& dataset);

struct Split {
  TabularDataset train;
  TabularDataset test;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
};

/// Seeded random partition with ceil(n * test_fraction) test rows. Both parts
/// are standardized with statistics of the training part.
Split train_test_split(const TabularDataset& dataset, double test_fraction, std::uint64_t seed);

struct ToyData {
  Vector x;
  Vector z;
};

/// z_i ~ N(theta_true, 1), x_i ~ N(z_i, 1).
ToyData generate_toy_data(std::size_t dim, double theta_true, std::uint64_t seed);

struct AdjacencyNetwork {
  std::size_t n = 0;
  std::set<std::pair<std::size_t, std::size_t>> edges;  // (u, v) with u < v
  std::vector<std::string> node_labels;
  std::size_t self_loops_dropped = 0;

  Matrix adjacency() const;
  std::vector<std::size_t> degrees() const;
};

/// Edge list of "u v" lines (whitespace or comma separated, '#' comments).
/// Node tokens are numbered in order of first appearance. The optional label
/// file maps "token label..." per line.
AdjacencyNetwork load_edgelist(const std::filesystem::path& path,
                               const std::optional<std::filesystem::path>& labels = std::nullopt);

/// Stochastic block model: edge probability p_in within a block, p_out across.
AdjacencyNetwork planted_partition(const std::vector<std::size_t>& block_sizes, double p_in, double p_out,
                                   std::uint64_t seed);

}  // namespace pem::data
