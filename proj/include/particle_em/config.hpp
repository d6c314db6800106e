#pragma once

#include "particle_em/algorithms.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pem::cli {

struct SweepSpec {
  std::string param;  // "gamma" or "particles"
  std::vector<double> values;
};

/// Resolved experiment description. Every field has a documented default;
/// see README.md for the key list.
struct ExperimentConfig {
  // model
  std::string model = "toy";
  std::size_t toy_dim = 100;
  double toy_theta_true = 1.0;
  std::uint64_t data_seed = 0;

  std::string data_path;
  std::string label_column = "class";
  std::string positive_label = "malignant";
  double test_fraction = 0.2;
  std::optional<std::uint64_t> split_seed;

  std::string edgelist;
  std::string node_labels;
  std::vector<std::size_t> planted_blocks{5, 5};
  double p_in = 0.9;
  double p_out = 0.1;
  std::size_t embed_dim = 2;
  double prior_var_z = 1.0;
  double link_sign = -1.0;

  // algorithm
  Algorithm algorithm = Algorithm::adaptive_coin_em;
  std::size_t particles = 10;
  std::size_t iterations = 500;
  std::optional<double> gamma;
  std::uint64_t seed = 0;
  std::size_t record_every = 1;
  std::string bandwidth = "median";  // "median", "frozen" or a positive number
  CoinOrdering ordering = CoinOrdering::updated_theta;
  Denominator denominator = Denominator::standard;

  // outputs
  std::optional<SweepSpec> sweep;
  std::filesystem::path output_dir = "out";
  std::string variance_reduction = "final";  // or "time_averaged"
  std::string summary_metric;                // empty: model default
  std::vector<std::size_t> dump_at;          // empty: {0, iterations}

  /// Defaults that were filled in, for logging.
  std::vector<std::string> notices;
  /// key = value pairs as resolved, in key order.
  std::map<std::string, std::string> resolved;
};

/// Parses "key = value" lines ('#' starts a comment) and applies `overrides`
/// on top (command-line flags win). Throws ConfigError listing every violation.
ExperimentConfig parse_config(const std::string& text, const std::map<std::string, std::string>& overrides = {});

ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                             const std::map<std::string, std::string>& overrides = {});

/// `count` values evenly spaced in log10 between lo and hi inclusive.
std::vector<double> logspace(double lo, double hi, std::size_t count);

/// All recognized configuration keys.
const std::vector<std::string>& known_keys();

}  // namespace pem::cli
