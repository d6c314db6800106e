// particle-em: run, sweep and dump particle EM experiments.
//
//   particle-em run   --config exp.cfg [--seed S] [--algorithm A] [--gamma G]
//                     [--particles N] [--iters T] [--out DIR] [--set key=value]...
//   particle-em sweep --config sweep.cfg [same overrides]
//   particle-em dump  --config exp.cfg [same overrides]
//
// PARTICLE_EM_WORKERS sets the number of concurrent sweep runs.

#include "particle_em/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Overrides {
  std::string config;
  std::string seed;
  std::string algorithm;
  std::string gamma;
  std::string particles;
  std::string iters;
  std::string out;
  std::vector<std::string> sets;

  std::map<std::string, std::string> to_map() const {
    std::map<std::string, std::string> m;
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw pem::ConfigError({"--set expects key=value, got '" + kv + "'"});
      m[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    auto put = [&](const char* key, const std::string& v) {
      if (!v.empty()) m[key] = v;
    };
    put("seed", seed);
    put("algorithm", algorithm);
    put("gamma", gamma);
    put("particles", particles);
    put("iterations", iters);
    put("output_dir", out);
    return m;
  }
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Key-value config file");
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--algorithm", o.algorithm,
                  "svgd_em | coin_em | adaptive_coin_em | marginal_svgd_em | marginal_coin_em | pgd");
  cmd->add_option("--gamma", o.gamma, "Learning rate (SVGD EM, marginal SVGD EM, PGD only)");
  cmd->add_option("--particles", o.particles, "Number of particles N");
  cmd->add_option("--iters", o.iters, "Number of iterations T");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--set", o.sets, "Override any config key: key=value");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle-based marginal maximum likelihood (SVGD EM, Coin EM, PGD)"};
  app.require_subcommand(1);

  Overrides run_o, sweep_o, dump_o;
  auto* run_cmd = app.add_subcommand("run", "Run one experiment and write its trace");
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a learning-rate or particle-count sweep");
  auto* dump_cmd = app.add_subcommand("dump", "Run and write particle snapshots");
  add_common(run_cmd, run_o);
  add_common(sweep_cmd, sweep_o);
  add_common(dump_cmd, dump_o);

  CLI11_PARSE(app, argc, argv);

  const Overrides& o = run_cmd->parsed() ? run_o : sweep_cmd->parsed() ? sweep_o : dump_o;
  try {
    std::optional<std::filesystem::path> path;
    if (!o.config.empty()) path = o.config;
    const pem::cli::ExperimentConfig config = pem::cli::load_config(path, o.to_map());

    if (run_cmd->parsed()) {
      if (config.sweep) {
        std::cerr << "error: config describes a sweep; use the 'sweep' subcommand\n";
        return 2;
      }
      return pem::cli::run_experiment(config, std::cerr);
    }
    if (sweep_cmd->parsed()) {
      if (!config.sweep) {
        std::cerr << "error: no sweep given (set 'sweep' and 'sweep_values' or 'sweep_logspace')\n";
        return 2;
      }
      return pem::cli::run_experiment(config, std::cerr);
    }
    return pem::cli::dump_particles(config, std::cerr);
  } catch (const pem::ConfigError& e) {
    std::cerr << "configuration error:\n";
    for (const auto& v : e.violations()) std::cerr << "  - " << v << "\n";
    return 2;
  }
}
