#include "particle_em/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

namespace pem::data {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

/// RFC 4180 style: commas separate, double quotes enclose, "" escapes a quote.
std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
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
  if (quoted) throw ParseError(line_no, cells.size() + 1, "unterminated quoted field");
  cells.push_back(trim(cell));
  return cells;
}

bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "?";
}

std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open " + path.string());
  return in;
}

TabularDataset take_rows(const TabularDataset& source, const std::vector<std::size_t>& rows) {
  TabularDataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), source.features.cols());
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.features.row(static_cast<Eigen::Index>(r)) = source.features.row(static_cast<Eigen::Index>(rows[r]));
    out.labels[static_cast<Eigen::Index>(r)] = source.labels[static_cast<Eigen::Index>(rows[r])];
  }
  out.feature_names = source.feature_names;
  return out;
}

}  // namespace

ParseError::ParseError(std::size_t line, std::size_t column, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + (column ? ", column " + std::to_string(column) : "") +
                         ": " + what),
      line_(line),
      column_(column) {}

TabularDataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                        const std::string& positive_label) {
  std::ifstream in = open(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, 0, "missing header row in " + path.string());
  const std::vector<std::string> header = split_csv_line(line, 1);

  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) throw ParseError(1, 0, "no column named '" + label_column + "'");
  const auto label_idx = static_cast<std::size_t>(label_it - header.begin());

  TabularDataset ds;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != label_idx) ds.feature_names.push_back(header[c]);
  }

  std::vector<double> values;
  std::vector<double> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line, line_no);
    if (cells.size() != header.size()) {
      throw ParseError(line_no, 0,
                       "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(cells.size()));
    }
    if (std::any_of(cells.begin(), cells.end(), is_missing)) {
      ++ds.dropped_rows;
      continue;
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == label_idx) continue;
      const auto v = parse_double(cells[c]);
      if (!v) {
        throw ParseError(line_no, c + 1, "non-numeric value '" + cells[c] + "' in column '" + header[c] + "'");
      }
      values.push_back(*v);
    }
    labels.push_back(cells[label_idx] == positive_label ? 1.0 : 0.0);
  }

  const auto n = static_cast<Eigen::Index>(labels.size());
  const auto d = static_cast<Eigen::Index>(ds.feature_names.size());
  ds.features = Eigen::Map<const Matrix>(values.data(), n, d);
  ds.labels = Eigen::Map<const Vector>(labels.data(), n);
  if (n == 0) std::clog << "warning: " << path.string() << " contains no data rows\n";
  if (ds.dropped_rows > 0) {
    std::clog << "note: dropped " << ds.dropped_rows << " rows with missing values from " << path.string() << "\n";
  }
  return ds;
}

std::pair<Vector, Vector> feature_statistics(const Matrix& features) {
  const Eigen::Index d = features.cols();
  Vector means = Vector::Zero(d);
  Vector stds = Vector::Ones(d);
  if (features.rows() == 0) return {means, stds};
  means = features.colwise().mean().transpose();
  for (Eigen::Index c = 0; c < d; ++c) {
    const double var = (features.col(c).array() - means[c]).square().mean();
    const double sd = std::sqrt(var);
    stds[c] = sd > 0.0 ? sd : 1.0;
  }
  return {means, stds};
}

void normalize(TabularDataset& dataset, const Vector& means, const Vector& stds) {
  if (means.size() != dataset.features.cols() || stds.size() != dataset.features.cols()) {
    throw DimensionError("normalize: statistics do not match the feature count");
  }
  for (Eigen::Index c = 0; c < dataset.features.cols(); ++c) {
    dataset.features.col(c) = (dataset.features.col(c).array() - means[c]) / stds[c];
  }
  dataset.feature_means = means;
  dataset.feature_stds = stds;
}

Matrix denormalize(const TabularDataset& dataset) {
  if (dataset.feature_means.size() != dataset.features.cols()) {
    throw std::logic_error("denormalize: dataset was never normalized");
  }
  Matrix out = dataset.features;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    out.col(c) = out.col(c).array() * dataset.feature_stds[c] + dataset.feature_means[c];
  }
  return out;
}

Split train_test_split(const TabularDataset& dataset, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("train_test_split: test_fraction must lie in (0, 1)");
  }
  const std::size_t n = dataset.size();
  if (n == 0) throw std::invalid_argument("train_test_split: empty dataset");

  // The small slack keeps products such as 10 * 0.2 from rounding up.
  auto n_test = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * test_fraction - 1e-9));
  n_test = std::clamp<std::size_t>(n_test, 1, n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  Split split;
  split.test_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  split.train_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(split.test_rows.begin(), split.test_rows.end());
  std::sort(split.train_rows.begin(), split.train_rows.end());

  split.train = take_rows(dataset, split.train_rows);
  split.test = take_rows(dataset, split.test_rows);
  const auto [means, stds] = feature_statistics(split.train.features);
  normalize(split.train, means, stds);
  normalize(split.test, means, stds);
  return split;
}

ToyData generate_toy_data(std::size_t dim, double theta_true, std::uint64_t seed) {
  if (dim == 0) throw std::invalid_argument("generate_toy_data: dimension must be positive");
  Rng rng(seed);
  const auto d = static_cast<Eigen::Index>(dim);
  Vector z = standard_normal(d, rng).array() + theta_true;
  Vector x = z + standard_normal(d, rng);
  return {std::move(x), std::move(z)};
}

Matrix AdjacencyNetwork::adjacency() const {
  const auto size = static_cast<Eigen::Index>(n);
  Matrix y = Matrix::Zero(size, size);
  for (const auto& [u, v] : edges) {
    y(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) = 1.0;
    y(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(u)) = 1.0;
  }
  return y;
}

std::vector<std::size_t> AdjacencyNetwork::degrees() const {
  std::vector<std::size_t> deg(n, 0);
  for (const auto& [u, v] : edges) {
    ++deg[u];
    ++deg[v];
  }
  return deg;
}

AdjacencyNetwork load_edgelist(const std::filesystem::path& path,
                               const std::optional<std::filesystem::path>& labels) {
  std::ifstream in = open(path);
  AdjacencyNetwork net;
  std::map<std::string, std::size_t> index;
  std::vector<std::string> tokens_in_order;
  auto node = [&](const std::string& token) {
    auto [it, inserted] = index.emplace(token, tokens_in_order.size());
    if (inserted) tokens_in_order.push_back(token);
    return it->second;
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    std::vector<std::string> parts;
    for (std::string tok; fields >> tok;) parts.push_back(tok);
    if (parts.empty()) continue;
    if (parts.size() != 2) {
      throw ParseError(line_no, 0, "expected two node tokens, found " + std::to_string(parts.size()));
    }
    const std::size_t u = node(parts[0]);
    const std::size_t v = node(parts[1]);
    if (u == v) {
      ++net.self_loops_dropped;
      continue;
    }
    net.edges.emplace(std::min(u, v), std::max(u, v));
  }
  net.n = tokens_in_order.size();
  net.node_labels = tokens_in_order;
  if (net.self_loops_dropped > 0) {
    std::clog << "warning: dropped " << net.self_loops_dropped << " self-loop(s) from " << path.string() << "\n";
  }

  if (labels) {
    std::ifstream lin = open(*labels);
    std::size_t lno = 0;
    while (std::getline(lin, line)) {
      ++lno;
      const std::string t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      const auto sep = t.find_first_of(" \t,");
      if (sep == std::string::npos) throw ParseError(lno, 0, "expected 'token label'");
      const auto it = index.find(t.substr(0, sep));
      if (it != index.end()) net.node_labels[it->second] = trim(t.substr(sep + 1));
    }
  }
  return net;
}

AdjacencyNetwork planted_partition(const std::vector<std::size_t>& block_sizes, double p_in, double p_out,
                                   std::uint64_t seed) {
  AdjacencyNetwork net;
  std::vector<std::size_t> block;
  for (std::size_t b = 0; b < block_sizes.size(); ++b) block.insert(block.end(), block_sizes[b], b);
  net.n = block.size();
  for (std::size_t i = 0; i < net.n; ++i) {
    net.node_labels.push_back("b" + std::to_string(block[i]) + "_" + std::to_string(i));
  }
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t i = 0; i < net.n; ++i) {
    for (std::size_t j = i + 1; j < net.n; ++j) {
      const double p = block[i] == block[j] ? p_in : p_out;
      if (unif(rng) < p) net.edges.emplace(i, j);
    }
  }
  return net;
}

}  // namespace pem::data
