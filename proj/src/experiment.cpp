#include "particle_em/experiment.hpp"

#include "particle_em/data.hpp"
#include "particle_em/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <iomanip>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace pem::cli {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Pooled per-coordinate Welford accumulator over particles from the second
/// half of a run, used for the time-averaged posterior variance.
class PooledVariance {
 public:
  PooledVariance(std::size_t dim, std::size_t burn_in)
      : burn_in_(burn_in), mean_(Vector::Zero(static_cast<Eigen::Index>(dim))), m2_(mean_) {}

  void observe(std::size_t t, const ParticleCloud& particles) {
    if (t <= burn_in_) return;
    for (std::size_t i = 0; i < particles.size(); ++i) {
      ++count_;
      const Vector delta = particles.particle(i) - mean_;
      mean_ += delta / static_cast<double>(count_);
      m2_ += (delta.array() * (particles.particle(i) - mean_).array()).matrix();
    }
  }

  std::optional<Vector> variance() const {
    if (count_ < 2) return std::nullopt;
    return m2_ / static_cast<double>(count_ - 1);
  }

 private:
  std::size_t burn_in_;
  std::size_t count_ = 0;
  Vector mean_;
  Vector m2_;
};

std::string stem_for(std::size_t index) {
  std::ostringstream s;
  s << "run_" << std::setw(3) << std::setfill('0') << index;
  return s.str();
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw data::FileError("cannot create " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data::FileError("cannot write " + path.string());
  return out;
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

nlohmann::json vector_json(const Vector& v) {
  auto arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

void write_sidecar(const std::filesystem::path& path, const ExperimentConfig& config, std::uint64_t run_seed,
                   double seconds, const RunOutcome& outcome) {
  nlohmann::json j;
  j["config"] = config.resolved;
  j["config"]["algorithm"] = std::string(to_string(config.algorithm));
  j["config"]["particles"] = config.particles;
  j["config"]["iterations"] = config.iterations;
  j["config"]["model"] = config.model;
  j["config"]["variance_reduction"] = config.variance_reduction;
  if (config.gamma) j["config"]["gamma"] = *config.gamma;
  j["master_seed"] = config.seed;
  j["run_seed"] = run_seed;
  j["wall_clock_seconds"] = seconds;
  j["final_theta"] = vector_json(outcome.final_theta);
  j["status"] = outcome.diverged ? "diverged" : "completed";
  if (outcome.diverged) j["diverged_at"] = outcome.diverged_at;
  j["final_metric"] = format_double(outcome.final_metric);
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

ExperimentConfig with_sweep_value(const ExperimentConfig& base, double value) {
  ExperimentConfig cfg = base;
  cfg.sweep.reset();
  if (base.sweep->param == "gamma") {
    cfg.gamma = value;
    cfg.resolved["gamma"] = format_double(value);
  } else {
    cfg.particles = static_cast<std::size_t>(std::llround(value));
    cfg.resolved["particles"] = std::to_string(cfg.particles);
  }
  cfg.resolved.erase("sweep");
  cfg.resolved.erase("sweep_values");
  cfg.resolved.erase("sweep_logspace");
  return cfg;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::size_t run_index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(run_index) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

std::size_t worker_count() {
  if (const char* env = std::getenv("PARTICLE_EM_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

PreparedModel prepare_model(const ExperimentConfig& config) {
  PreparedModel prepared;
  if (config.model == "toy") {
    auto toy = data::generate_toy_data(config.toy_dim, config.toy_theta_true, config.data_seed);
    prepared.model = std::make_shared<ToyHierarchical>(std::move(toy.x));
    prepared.default_metric = "theta_mse";
  } else if (config.model == "logreg") {
    const auto dataset = data::load_csv(config.data_path, config.label_column, config.positive_label);
    auto split = data::train_test_split(dataset, config.test_fraction, config.split_seed.value_or(config.seed));
    prepared.model = std::make_shared<BayesLogReg>(split.train.features, split.train.labels);
    prepared.test_features = split.test.features;
    prepared.test_labels = split.test.labels.cast<int>();
    prepared.default_metric = "test_error";
  } else {
    data::AdjacencyNetwork net =
        config.edgelist.empty()
            ? data::planted_partition(config.planted_blocks, config.p_in, config.p_out, config.data_seed)
            : data::load_edgelist(config.edgelist, config.node_labels.empty()
                                                       ? std::nullopt
                                                       : std::optional<std::filesystem::path>(config.node_labels));
    LatentSpaceNetwork::Options options;
    options.embed_dim = config.embed_dim;
    options.prior_var_z = config.prior_var_z;
    options.link_sign = config.link_sign;
    prepared.model = std::make_shared<LatentSpaceNetwork>(net.adjacency(), options);
    prepared.node_labels = net.node_labels;
    prepared.default_metric = "theta";
  }
  return prepared;
}

RunOutcome run_once(const ExperimentConfig& config, const PreparedModel& prepared, std::uint64_t run_seed,
                    std::vector<Snapshot>* snapshots) {
  const Model& model = *prepared.model;

  RunConfig rc;
  rc.algorithm = config.algorithm;
  rc.particles = config.particles;
  rc.iterations = config.iterations;
  rc.gamma = config.gamma;
  rc.seed = run_seed;
  rc.record_every = config.record_every;
  rc.ordering = config.ordering;
  rc.denominator = config.denominator;
  if (config.bandwidth == "frozen") {
    rc.freeze_bandwidth = true;
  } else if (config.bandwidth != "median") {
    rc.fixed_bandwidth = Bandwidth(std::stod(config.bandwidth));
  }

  if (model.theta_dim() == 1) {
    rc.metrics.push_back({"theta", [](const Vector& theta, const ParticleCloud&) { return theta[0]; }});
  } else {
    rc.metrics.push_back({"theta_norm", [](const Vector& theta, const ParticleCloud&) { return theta.norm(); }});
  }

  auto pooled = std::make_shared<PooledVariance>(model.latent_dim(), config.iterations / 2);
  const bool time_averaged = config.variance_reduction == "time_averaged";

  if (const auto* toy = dynamic_cast<const ToyHierarchical*>(&model)) {
    const double theta_star = (*toy->theta_star())[0];
    const Vector post_mean = toy->posterior_moments(theta_star).mean;
    rc.metrics.push_back({"theta_mse", [theta_star](const Vector& theta, const ParticleCloud&) {
                            return (theta[0] - theta_star) * (theta[0] - theta_star);
                          }});
    rc.metrics.push_back({"posterior_mean_mse", [post_mean](const Vector&, const ParticleCloud& p) {
                            return metrics::mse(p.mean(), post_mean);
                          }});
    if (config.particles >= 2 || time_averaged) {
      auto variance = [pooled, time_averaged](const ParticleCloud& p) -> std::optional<Vector> {
        if (time_averaged) {
          if (auto v = pooled->variance()) return v;
        }
        if (p.size() < 2) return std::nullopt;
        return metrics::particle_moments(p).variance;
      };
      rc.metrics.push_back({"posterior_var", [variance](const Vector&, const ParticleCloud& p) {
                              const auto v = variance(p);
                              return v ? v->mean() : std::numeric_limits<double>::quiet_NaN();
                            }});
      rc.metrics.push_back({"posterior_var_mse", [variance](const Vector&, const ParticleCloud& p) {
                              const auto v = variance(p);
                              if (!v) return std::numeric_limits<double>::quiet_NaN();
                              return metrics::mse(*v, Vector::Constant(v->size(), 0.5));
                            }});
    }
  } else if (const auto* logreg = dynamic_cast<const BayesLogReg*>(&model)) {
    if (prepared.test_features && prepared.test_features->rows() > 0) {
      const Matrix* x = &*prepared.test_features;
      const Eigen::VectorXi* y = &*prepared.test_labels;
      rc.metrics.push_back({"test_error", [logreg, x, y](const Vector&, const ParticleCloud& p) {
                              return metrics::test_error(logreg->predict(p, *x), *y);
                            }});
    }
  } else {
    rc.metrics.push_back({"log_joint_at_mean", [&model](const Vector& theta, const ParticleCloud& p) {
                            return model.log_joint(theta, p.mean());
                          }});
  }

  std::vector<std::size_t> dump_at = config.dump_at;
  if (dump_at.empty()) dump_at = {0, config.iterations};
  rc.observer = [&, pooled, time_averaged](std::size_t t, const Vector&, const ParticleCloud& particles) {
    if (time_averaged) pooled->observe(t, particles);
    if (snapshots && std::find(dump_at.begin(), dump_at.end(), t) != dump_at.end()) {
      snapshots->push_back({t, particles.positions()});
    }
  };

  const std::string metric = config.summary_metric.empty() ? prepared.default_metric : config.summary_metric;
  RunOutcome outcome;
  try {
    outcome.trace = run(model, rc);
  } catch (const DivergedError& e) {
    outcome.trace = e.partial_trace();
    outcome.diverged = true;
    outcome.diverged_at = e.iteration();
  }

  if (!outcome.trace.records.empty()) outcome.final_theta = outcome.trace.records.back().theta;
  if (outcome.diverged) {
    outcome.final_metric = kInf;
  } else {
    const auto& last = outcome.trace.records.back().metrics;
    const auto it = last.find(metric);
    if (it == last.end()) throw ConfigError({"summary_metric '" + metric + "' is not recorded for this model"});
    outcome.final_metric = it->second;
  }
  return outcome;
}

void write_trace_csv(const Trace& trace, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "iteration,metric,value\n";
  for (const auto& record : trace.records) {
    for (const auto& [name, value] : record.metrics) {
      out << record.iteration << ',' << name << ',' << format_double(value) << '\n';
    }
  }
  if (!out) throw data::FileError("write failed for " + path.string());
}

std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw data::FileError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "iteration,metric,value") throw data::ParseError(1, 0, "unexpected trace header");
  std::vector<TraceRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto a = line.find(',');
    const auto b = line.rfind(',');
    if (a == std::string::npos || a == b) throw data::ParseError(line_no, 0, "expected three fields");
    TraceRow row{};
    const std::string it = line.substr(0, a);
    const std::string val = line.substr(b + 1);
    row.metric = line.substr(a + 1, b - a - 1);
    const auto r1 = std::from_chars(it.data(), it.data() + it.size(), row.iteration);
    const auto r2 = std::from_chars(val.data(), val.data() + val.size(), row.value);
    if (r1.ec != std::errc() || r2.ec != std::errc()) throw data::ParseError(line_no, 0, "malformed number");
    rows.push_back(std::move(row));
  }
  return rows;
}

int run_experiment(const ExperimentConfig& config, std::ostream& log) {
  for (const auto& note : config.notices) log << "note: " << note << "\n";
  try {
    ensure_dir(config.output_dir);
    const PreparedModel prepared = prepare_model(config);

    if (!config.sweep) {
      const std::uint64_t run_seed = derive_seed(config.seed, 0);
      const auto start = std::chrono::steady_clock::now();
      const RunOutcome outcome = run_once(config, prepared, run_seed);
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      write_trace_csv(outcome.trace, config.output_dir / "run.csv");
      write_sidecar(config.output_dir / "run.json", config, run_seed, seconds, outcome);
      log << (outcome.diverged ? "diverged at iteration " + std::to_string(outcome.diverged_at) : "completed")
          << "; final metric " << format_double(outcome.final_metric) << "\n";
      return 0;
    }

    const auto& values = config.sweep->values;
    std::vector<double> finals(values.size(), kInf);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
      for (std::size_t k = next++; k < values.size(); k = next++) {
        try {
          const ExperimentConfig point = with_sweep_value(config, values[k]);
          const std::uint64_t run_seed = derive_seed(config.seed, k);
          const auto start = std::chrono::steady_clock::now();
          const RunOutcome outcome = run_once(point, prepared, run_seed);
          const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
          write_trace_csv(outcome.trace, config.output_dir / (stem_for(k) + ".csv"));
          write_sidecar(config.output_dir / (stem_for(k) + ".json"), point, run_seed, seconds, outcome);
          finals[k] = outcome.final_metric;
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    };

    const std::size_t n_workers = std::min(worker_count(), std::max<std::size_t>(values.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);

    auto out = open_out(config.output_dir / "sweep_summary.csv");
    out << "sweep_value,final_metric\n";
    for (std::size_t k = 0; k < values.size(); ++k) {
      out << format_double(values[k]) << ',' << format_double(finals[k]) << '\n';
    }
    log << "sweep over " << config.sweep->param << ": " << values.size() << " runs written to "
        << config.output_dir.string() << "\n";
    return 0;
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return 1;
  }
}

int dump_particles(const ExperimentConfig& config, std::ostream& log) {
  for (const auto& note : config.notices) log << "note: " << note << "\n";
  if (config.sweep) {
    log << "error: dump does not take a sweep\n";
    return 2;
  }
  try {
    ensure_dir(config.output_dir);
    const PreparedModel prepared = prepare_model(config);
    std::vector<Snapshot> snapshots;
    const RunOutcome outcome = run_once(config, prepared, derive_seed(config.seed, 0), &snapshots);

    const auto* network = dynamic_cast<const LatentSpaceNetwork*>(prepared.model.get());
    auto out = open_out(config.output_dir / "particles.csv");
    if (network) {
      out << "iteration,particle,node,label";
      for (std::size_t c = 0; c < network->options().embed_dim; ++c) out << ",x" << c;
    } else {
      out << "iteration,particle";
      for (std::size_t c = 0; c < prepared.model->latent_dim(); ++c) out << ",z" << c;
    }
    out << '\n';
    for (const auto& snap : snapshots) {
      for (Eigen::Index i = 0; i < snap.positions.rows(); ++i) {
        if (network) {
          const Matrix e = network->embedding(snap.positions.row(i).transpose());
          for (Eigen::Index node = 0; node < e.rows(); ++node) {
            out << snap.iteration << ',' << i << ',' << node << ','
                << csv_cell(prepared.node_labels.at(static_cast<std::size_t>(node)));
            for (Eigen::Index c = 0; c < e.cols(); ++c) out << ',' << format_double(e(node, c));
            out << '\n';
          }
        } else {
          out << snap.iteration << ',' << i;
          for (Eigen::Index c = 0; c < snap.positions.cols(); ++c) out << ',' << format_double(snap.positions(i, c));
          out << '\n';
        }
      }
    }
    if (outcome.diverged) log << "warning: run diverged at iteration " << outcome.diverged_at << "\n";
    log << "wrote " << snapshots.size() << " snapshot(s) to " << (config.output_dir / "particles.csv").string()
        << "\n";
    return 0;
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace pem::cli
