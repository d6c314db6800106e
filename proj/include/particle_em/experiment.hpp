#pragma once

#include "particle_em/algorithms.hpp"
#include "particle_em/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace pem::cli {

/// Model plus the immutable data needed to evaluate its metrics. Built once
/// per experiment and shared read-only by every run of a sweep.
struct PreparedModel {
  std::shared_ptr<const Model> model;
  std::optional<Matrix> test_features;
  std::optional<Eigen::VectorXi> test_labels;
  std::vector<std::string> node_labels;
  std::string default_metric;
};

PreparedModel prepare_model(const ExperimentConfig& config);

/// Per-run seed: the master seed mixed with the run index (splitmix64).
std::uint64_t derive_seed(std::uint64_t master, std::size_t run_index);

/// Shortest decimal that parses back to the same double ("inf", "-inf", "nan" for non-finite).
std::string format_double(double v);

struct RunOutcome {
  Trace trace;
  bool diverged = false;
  std::size_t diverged_at = 0;
  Vector final_theta;
  double final_metric = 0.0;
};

struct Snapshot {
  std::size_t iteration;
  Matrix positions;
};

/// Runs one configuration (no sweep). `snapshots`, when given, receives the
/// particles at every iteration listed in config.dump_at.
RunOutcome run_once(const ExperimentConfig& config, const PreparedModel& prepared, std::uint64_t run_seed,
                    std::vector<Snapshot>* snapshots = nullptr);

/// Long-format trace: header "iteration,metric,value".
void write_trace_csv(const Trace& trace, const std::filesystem::path& path);

/// Parses a file written by write_trace_csv back into (iteration, metric, value) rows.
struct TraceRow {
  std::size_t iteration;
  std::string metric;
  double value;
};
std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path);

/// `run`: one trace CSV plus JSON sidecar under config.output_dir.
/// `sweep`: one pair per grid point and sweep_summary.csv.
/// Returns the process exit code.
int run_experiment(const ExperimentConfig& config, std::ostream& log);

/// Writes particles.csv with the particle cloud at each config.dump_at iteration.
int dump_particles(const ExperimentConfig& config, std::ostream& log);

/// Worker count for sweeps: PARTICLE_EM_WORKERS if set, else hardware concurrency.
std::size_t worker_count();

}  // namespace pem::cli
