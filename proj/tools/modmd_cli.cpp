#include "modmd/errors.hpp"
#include "modmd/harness.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace modmd;

namespace {

struct Overrides {
  std::string config_path;
  std::string output_dir;
  int workers = 0, trials = 0, L = 0, n_eig = 0, n_obs = 0, fixed_K = 0, horizon = 0, shots = 0;
  std::uint64_t seed = 0;
  double J = 0, h = 0, noise_eps = 0, delta = 0, dt = 0;
  std::string mode, source, policy, hamiltonian_file;
  std::vector<int> k_grid, kstar_grid;
  std::vector<double> h_grid, eps_grid;
  std::vector<std::string> reference;
};

void add_options(CLI::App& app, Overrides& o) {
  app.add_option("-c,--config", o.config_path, "JSON config file or run manifest");
  app.add_option("-o,--output", o.output_dir, "output directory (overrides $" + std::string(kOutputDirEnv) + ")");
  app.add_option("--workers", o.workers, "worker threads (0: all cores)");
  app.add_option("--trials", o.trials, "trials per grid point");
  app.add_option("--seed", o.seed, "master seed");
  app.add_option("--L", o.L, "TFIM qubit count");
  app.add_option("--J", o.J, "TFIM coupling");
  app.add_option("--field", o.h, "TFIM transverse field h");
  app.add_option("--hamiltonian-file", o.hamiltonian_file, "Pauli-sum file instead of the TFIM");
  app.add_option("--reference", o.reference, "reference bitstrings");
  app.add_option("--noise-eps", o.noise_eps, "Gaussian noise standard deviation");
  app.add_option("--delta", o.delta, "explicit SVD threshold");
  app.add_option("--dt", o.dt, "explicit time step");
  app.add_option("--n-eig", o.n_eig, "tracked energy levels");
  app.add_option("--observables", o.n_obs, "observable count I");
  app.add_option("--policy", o.policy, "observable policy");
  app.add_option("--mode", o.mode, "signal mode: real or complex");
  app.add_option("--source", o.source, "signal source: exact or shadow");
  app.add_option("--shots", o.shots, "shadows per time step");
  app.add_option("--fixed-K", o.fixed_K, "K for gap, noise and solve runs");
  app.add_option("--k-grid", o.k_grid, "K grid for sweep-k");
  app.add_option("--h-grid", o.h_grid, "field grid for sweep-gap");
  app.add_option("--eps-grid", o.eps_grid, "noise grid for sweep-noise");
  app.add_option("--kstar-grid", o.kstar_grid, "k* grid for forecast");
  app.add_option("--horizon", o.horizon, "forecast horizon in steps");
}

ExperimentConfig resolve(const CLI::App& app, const Overrides& o) {
  ExperimentConfig c = o.config_path.empty() ? ExperimentConfig{} : load_config_file(o.config_path);
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) c.output_dir = env;
  const auto set = [&](const char* name) { return app.count(name) > 0; };
  if (set("--output")) c.output_dir = o.output_dir;
  if (set("--workers")) c.workers = o.workers;
  if (set("--trials")) c.trials = o.trials;
  if (set("--seed")) c.seed = o.seed;
  if (set("--L")) c.hamiltonian.L = o.L;
  if (set("--J")) c.hamiltonian.J = o.J;
  if (set("--field")) c.hamiltonian.h = o.h;
  if (set("--hamiltonian-file")) {
    c.hamiltonian.type = "file";
    c.hamiltonian.path = o.hamiltonian_file;
  }
  if (set("--reference")) c.reference = o.reference;
  if (set("--noise-eps")) c.noise_eps = o.noise_eps;
  if (set("--delta")) {
    c.delta_policy = "explicit";
    c.delta = o.delta;
  }
  if (set("--dt")) {
    c.dt_policy = "explicit";
    c.dt = o.dt;
  }
  if (set("--n-eig")) c.n_eig = o.n_eig;
  if (set("--observables")) c.n_observables = o.n_obs;
  if (set("--policy")) c.observable_policy = observable_policy_from_string(o.policy);
  if (set("--mode")) {
    try {
      c.mode = signal_mode_from_string(o.mode);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (set("--source")) c.signal_source = o.source;
  if (set("--shots")) c.shots = o.shots;
  if (set("--fixed-K")) c.fixed_K = o.fixed_K;
  if (set("--k-grid")) c.k_grid = o.k_grid;
  if (set("--h-grid")) c.h_grid = o.h_grid;
  if (set("--eps-grid")) c.eps_grid = o.eps_grid;
  if (set("--kstar-grid")) c.kstar_grid = o.kstar_grid;
  if (set("--horizon")) c.horizon = o.horizon;
  validate(c);
  return c;
}

void report(const OutputFiles& f) {
  for (const auto& p : f.paths) std::cout << p << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-observable DMD eigenenergy estimation"};
  app.require_subcommand(1);
  Overrides o;
  struct Verb {
    const char* name;
    const char* help;
  };
  const Verb verbs[] = {
      {"sweep-k", "error vs K for MODMD and the single-observable baseline"},
      {"sweep-gap", "first-excited-state error vs spectral gap (TFIM field sweep)"},
      {"sweep-noise", "error vs noise level with threshold 10*epsilon"},
      {"forecast", "fit on samples 0..k* and predict the next horizon steps"},
      {"solve", "one MODMD solve at fixed K, printed as JSON"},
      {"validate-config", "check and print the resolved config"},
  };
  std::vector<CLI::App*> subs;
  for (const auto& v : verbs) {
    CLI::App* s = app.add_subcommand(v.name, v.help);
    add_options(*s, o);
    subs.push_back(s);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    for (CLI::App* s : subs) {
      if (!s->parsed()) continue;
      const std::string verb = s->get_name();
      const ExperimentConfig c = resolve(*s, o);
      if (verb == "validate-config") {
        std::cout << to_json(c).dump(2) << "\n";
      } else if (verb == "sweep-k") {
        report(emit_outputs(run_convergence_sweep(c), c, c.output_dir));
      } else if (verb == "sweep-gap") {
        report(emit_outputs(run_gap_sweep(c, c.h_grid), c, c.output_dir));
      } else if (verb == "sweep-noise") {
        report(emit_outputs(run_noise_sweep(c, c.eps_grid), c, c.output_dir));
      } else if (verb == "forecast") {
        report(emit_outputs(run_forecast_experiment(c, c.kstar_grid, c.horizon), c, c.output_dir));
      } else if (verb == "solve") {
        const SolveResult r = run_solve(c);
        nlohmann::json j;
        j["energies"] = r.energies;
        j["exact"] = r.problem.levels;
        j["errors"] = r.errors;
        j["dt"] = r.problem.dt;
        j["K"] = c.fixed_K;
        j["d"] = depth_for(c.fixed_K, c.kd_ratio);
        j["residual"] = r.run.residual;
        j["retained_rank"] = r.run.estimate.retained_rank;
        j["eigvec_condition"] = r.run.estimate.eigvec_condition;
        j["ill_conditioned"] = r.run.estimate.ill_conditioned;
        std::filesystem::create_directories(c.output_dir);
        std::ofstream(std::filesystem::path(c.output_dir) / "solve.json") << j.dump(2) << "\n";
        std::cout << j.dump(2) << "\n";
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const ResourceError& e) {
    std::cerr << "resource cap exceeded: " << e.what() << "\n";
    return 3;
  } catch (const ShortfallError& e) {
    std::cerr << "solver shortfall: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
