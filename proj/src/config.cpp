#include "particle_em/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace pem::cli {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Collects conversion failures instead of stopping at the first.
class Reader {
 public:
  Reader(std::map<std::string, std::string> raw, std::vector<std::string>& violations)
      : raw_(std::move(raw)), violations_(violations) {}

  bool has(const std::string& key) const { return raw_.count(key) > 0; }
  const std::string& text(const std::string& key) const { return raw_.at(key); }

  void string(const std::string& key, std::string& out) const {
    if (has(key)) out = text(key);
  }

  void real(const std::string& key, double& out) const {
    if (auto v = parse_real(key)) out = *v;
  }

  void real(const std::string& key, std::optional<double>& out) const {
    if (auto v = parse_real(key)) out = *v;
  }

  template <class Int>
  void integer(const std::string& key, Int& out) const {
    if (!has(key)) return;
    Int v{};
    const std::string& s = text(key);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      violations_.push_back(key + ": expected a non-negative integer, got '" + s + "'");
      return;
    }
    out = v;
  }

  template <class Int>
  void integer(const std::string& key, std::optional<Int>& out) const {
    if (!has(key)) return;
    Int v{};
    integer(key, v);
    out = v;
  }

  std::optional<double> parse_real(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    const std::string& s = text(key);
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      violations_.push_back(key + ": expected a number, got '" + s + "'");
      return std::nullopt;
    }
    return v;
  }

  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_list(text(key))) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (ec != std::errc() || ptr != item.data() + item.size()) {
        violations_.push_back(key + ": expected a number, got '" + item + "'");
        continue;
      }
      out.push_back(v);
    }
    return out;
  }

 private:
  std::map<std::string, std::string> raw_;
  std::vector<std::string>& violations_;
};

std::map<std::string, std::string> parse_pairs(const std::string& text, std::vector<std::string>& violations) {
  std::map<std::string, std::string> raw;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      violations.push_back("line " + std::to_string(line_no) + ": expected 'key = value'");
      continue;
    }
    raw[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return raw;
}

}  // namespace

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys{
      "algorithm",      "bandwidth",    "coin_ordering", "data_path",     "data_seed",      "denominator",
      "dump_at",        "edgelist",     "embed_dim",     "gamma",         "iterations",     "label_column",
      "link_sign",      "model",        "node_labels",   "output_dir",    "p_in",           "p_out",
      "particles",      "planted_blocks", "positive_label", "prior_var_z", "record_every",   "seed",
      "split_seed",     "summary_metric", "sweep",       "sweep_logspace", "sweep_values",  "test_fraction",
      "toy_dim",        "toy_theta_true", "variance_reduction"};
  return keys;
}

std::vector<double> logspace(double lo, double hi, std::size_t count) {
  std::vector<double> out;
  if (count == 0) return out;
  if (count == 1) return {lo};
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (std::size_t k = 0; k < count; ++k) {
    out.push_back(std::pow(10.0, a + (b - a) * static_cast<double>(k) / static_cast<double>(count - 1)));
  }
  return out;
}

ExperimentConfig parse_config(const std::string& text, const std::map<std::string, std::string>& overrides) {
  std::vector<std::string> violations;
  auto raw = parse_pairs(text, violations);
  for (const auto& [k, v] : overrides) raw[k] = v;

  const auto& keys = known_keys();
  for (const auto& [k, v] : raw) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) violations.push_back("unknown key '" + k + "'");
  }

  ExperimentConfig cfg;
  cfg.resolved = raw;
  Reader r(raw, violations);

  r.string("model", cfg.model);
  if (cfg.model != "toy" && cfg.model != "logreg" && cfg.model != "network") {
    violations.push_back("model: expected toy, logreg or network, got '" + cfg.model + "'");
  }
  r.integer("toy_dim", cfg.toy_dim);
  r.real("toy_theta_true", cfg.toy_theta_true);
  r.integer("data_seed", cfg.data_seed);
  r.string("data_path", cfg.data_path);
  r.string("label_column", cfg.label_column);
  r.string("positive_label", cfg.positive_label);
  r.real("test_fraction", cfg.test_fraction);
  r.integer("split_seed", cfg.split_seed);
  r.string("edgelist", cfg.edgelist);
  r.string("node_labels", cfg.node_labels);
  if (r.has("planted_blocks")) {
    cfg.planted_blocks.clear();
    for (double b : r.reals("planted_blocks")) cfg.planted_blocks.push_back(static_cast<std::size_t>(b));
  }
  r.real("p_in", cfg.p_in);
  r.real("p_out", cfg.p_out);
  r.integer("embed_dim", cfg.embed_dim);
  r.real("prior_var_z", cfg.prior_var_z);
  r.real("link_sign", cfg.link_sign);

  if (r.has("algorithm")) {
    try {
      cfg.algorithm = parse_algorithm(r.text("algorithm"));
    } catch (const std::invalid_argument& e) {
      violations.push_back(std::string("algorithm: ") + e.what());
    }
  }
  if (r.has("particles")) {
    r.integer("particles", cfg.particles);
  } else {
    cfg.notices.push_back("particles not set; defaulting to N = 10");
  }
  if (!r.has("iterations")) cfg.notices.push_back("iterations not set; defaulting to T = 500");
  r.integer("iterations", cfg.iterations);
  r.real("gamma", cfg.gamma);
  r.integer("seed", cfg.seed);
  r.integer("record_every", cfg.record_every);
  r.string("bandwidth", cfg.bandwidth);
  if (r.has("coin_ordering")) {
    const auto& v = r.text("coin_ordering");
    if (v == "updated_theta") cfg.ordering = CoinOrdering::updated_theta;
    else if (v == "previous_theta") cfg.ordering = CoinOrdering::previous_theta;
    else violations.push_back("coin_ordering: expected updated_theta or previous_theta");
  }
  if (r.has("denominator")) {
    const auto& v = r.text("denominator");
    if (v == "standard") cfg.denominator = Denominator::standard;
    else if (v == "bnn") cfg.denominator = Denominator::bnn;
    else violations.push_back("denominator: expected standard or bnn");
  }

  if (r.has("output_dir")) cfg.output_dir = r.text("output_dir");
  r.string("variance_reduction", cfg.variance_reduction);
  r.string("summary_metric", cfg.summary_metric);
  if (r.has("dump_at")) {
    for (double v : r.reals("dump_at")) cfg.dump_at.push_back(static_cast<std::size_t>(v));
  }

  if (r.has("sweep")) {
    SweepSpec sweep{r.text("sweep"), {}};
    if (sweep.param != "gamma" && sweep.param != "particles") {
      violations.push_back("sweep: expected gamma or particles, got '" + sweep.param + "'");
    }
    if (r.has("sweep_values") == r.has("sweep_logspace")) {
      violations.push_back("sweep: give exactly one of sweep_values or sweep_logspace");
    } else if (r.has("sweep_values")) {
      sweep.values = r.reals("sweep_values");
    } else {
      const auto spec = r.reals("sweep_logspace");
      if (spec.size() != 3 || !(spec[0] > 0.0) || !(spec[1] > spec[0]) || !(spec[2] >= 1.0)) {
        violations.push_back("sweep_logspace: expected 'lo, hi, count' with 0 < lo < hi");
      } else {
        sweep.values = logspace(spec[0], spec[1], static_cast<std::size_t>(spec[2]));
      }
    }
    cfg.sweep = std::move(sweep);
  } else if (r.has("sweep_values") || r.has("sweep_logspace")) {
    violations.push_back("sweep values given without 'sweep = gamma|particles'");
  }

  // Cross-field invariants.
  const bool needs_gamma = uses_learning_rate(cfg.algorithm);
  const bool gamma_swept = cfg.sweep && cfg.sweep->param == "gamma";
  if (!needs_gamma && (cfg.gamma || gamma_swept)) violations.push_back("gamma forbidden for coin algorithms");
  if (needs_gamma && !cfg.gamma && !gamma_swept) {
    violations.push_back("gamma is required for " + std::string(to_string(cfg.algorithm)));
  }
  if (gamma_swept && cfg.gamma) violations.push_back("gamma is set but also swept");
  if (cfg.gamma && !(*cfg.gamma > 0.0)) violations.push_back("gamma must be positive");
  if (cfg.sweep) {
    for (double v : cfg.sweep->values) {
      if (!(v > 0.0)) violations.push_back("sweep values must be positive");
    }
  }
  if (cfg.particles == 0) violations.push_back("particles must be at least 1");
  if (cfg.record_every == 0) violations.push_back("record_every must be at least 1");
  if (cfg.toy_dim == 0) violations.push_back("toy_dim must be at least 1");
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0)) violations.push_back("test_fraction must lie in (0, 1)");
  if (cfg.model == "logreg" && cfg.data_path.empty()) violations.push_back("data_path is required for logreg");
  if (cfg.link_sign != 1.0 && cfg.link_sign != -1.0) violations.push_back("link_sign must be 1 or -1");
  if (cfg.variance_reduction != "final" && cfg.variance_reduction != "time_averaged") {
    violations.push_back("variance_reduction: expected final or time_averaged");
  }
  if (cfg.bandwidth != "median" && cfg.bandwidth != "frozen") {
    double h = 0.0;
    const auto& s = cfg.bandwidth;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), h);
    if (ec != std::errc() || ptr != s.data() + s.size() || !(h > 0.0)) {
      violations.push_back("bandwidth: expected median, frozen or a positive number");
    }
  }

  if (!violations.empty()) throw ConfigError(std::move(violations));
  return cfg;
}

ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                             const std::map<std::string, std::string>& overrides) {
  std::string text;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError({"cannot read config file " + path->string()});
    std::ostringstream buf;
    buf << in.rdbuf();
    text = buf.str();
  }
  return parse_config(text, overrides);
}

}  // namespace pem::cli
