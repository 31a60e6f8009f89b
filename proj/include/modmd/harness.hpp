#pragma once

#include "modmd/pauli.hpp"
#include "modmd/quantum_sim.hpp"
#include "modmd/shadow.hpp"
#include "modmd/solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace modmd {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kOutputDirEnv = "MODMD_OUTPUT_DIR";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ObservablePolicy {
  identity_only,
  random_one_local,
  hamiltonian_partial_sums,
  weight_window,
  explicit_list,
};

struct HamiltonianSource {
  std::string type = "tfim";  // "tfim" or "file"
  int L = 10;
  double J = 1.0;
  double h = 1.0;
  std::string path;
  // Optional particle-number sector: eigenstates whose count of |1> on
  // sector_qubits equals sector_count are the reference levels.
  std::vector<int> sector_qubits;
  int sector_count = -1;
};

struct ExperimentConfig {
  HamiltonianSource hamiltonian;
  std::vector<std::string> reference;  // empty: default TFIM rule
  ObservablePolicy observable_policy = ObservablePolicy::random_one_local;
  int n_observables = 6;
  int window_start = 0;
  std::vector<std::string> explicit_observables;

  std::string dt_policy = "auto";  // "auto" or "explicit"
  double dt = 0.0;
  double dt_safety = 0.8;
  bool spectral_shift = false;
  double shift_C = 0.9;

  std::vector<int> k_grid{10, 14, 20, 28, 40, 56, 80, 113, 160, 226, 320, 400, 500};
  double kd_ratio = 2.5;
  std::string delta_policy = "explicit";  // "explicit" or "ten-eps"
  double delta = 1e-2;
  double noise_eps = 1e-3;
  std::string signal_source = "exact";  // "exact" (+ Gaussian noise) or "shadow"
  int shots = 1000;
  SignalMode mode = SignalMode::real;
  int trials = 20;
  std::uint64_t seed = 20240601;
  int n_eig = 4;
  double magnitude_floor = kDefaultMagnitudeFloor;
  int workers = 0;  // 0: hardware concurrency
  std::string output_dir = "results";

  int fixed_K = 500;
  std::vector<double> h_grid{0.38, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9};
  std::vector<double> eps_grid{1e-5, 3.1622776601683795e-5, 1e-4, 3.1622776601683795e-4,
                               1e-3, 3.1622776601683795e-3, 1e-2};
  std::vector<int> kstar_grid{60, 100, 150, 200, 300};
  int horizon = 200;
};

nlohmann::json to_json(const ExperimentConfig& c);
// Accepts a bare config object or a run manifest (uses its "config" key).
// Unknown keys and wrong types raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config_file(const std::string& path);
void validate(const ExperimentConfig& c);

std::string to_string(ObservablePolicy p);
ObservablePolicy observable_policy_from_string(const std::string& s);

int depth_for(int K, double kd_ratio);

// Basis states 0^L, 1^L, 10^{L-1} and 0^{L-k}1^k for k = ceil(L/2)-1 .. ceil(L/2)+1.
std::vector<std::string> default_tfim_reference(int L);

// Everything fixed per Hamiltonian: one diagonalization, reference state
// and the derived time step.
struct Problem {
  PauliSum H;            // as simulated (shifted when enabled)
  AffineShift shift;     // simulated energy -> physical energy
  SpectralDecomposition spec;
  StateVector phi0;
  StateVector phi_perp;
  std::vector<double> levels;  // physical reference energies, ascending
  double dt = 0.0;
  double gap = 0.0;  // levels[1] - levels[0]
  double overlap_low = 0.0;  // sum of |<psi_n|phi0>|^2 over reference levels
};

Problem prepare_problem(const ExperimentConfig& c, std::optional<double> h_override = std::nullopt);

std::vector<PauliSum> observable_pool(const ExperimentConfig& c, const Problem& p, int trial);

struct SweepRow {
  int point = 0;
  double param = 0.0;  // K, h or epsilon
  double x = 0.0;      // plotted abscissa: K, gap or epsilon
  int K = 0;
  int d = 0;
  int trial = 0;
  std::string method;  // "MODMD" or "ODMD"
  std::string status;  // "ok" or "shortfall"
  std::vector<double> estimates;  // physical units; NaN when missing
  std::vector<double> exact;
  std::vector<double> errors;
  double residual = 0.0;
  int rank = 0;
  double eigvec_condition = 0.0;
  double wall_seconds = 0.0;
};

struct SweepResult {
  std::string sweep;       // "sweep-k", "sweep-gap", "sweep-noise"
  std::string param_name;  // "K", "h", "epsilon"
  std::string x_name;      // "K", "gap", "epsilon"
  int n_eig = 0;
  std::vector<int> tracked_levels;
  std::vector<double> point_dt;
  std::vector<SweepRow> rows;  // ordered by (point, trial, method)
};

struct AggregateRow {
  int point = 0;
  double param = 0.0;
  double x = 0.0;
  int K = 0;
  int d = 0;
  std::string method;
  int level = 0;
  int n_valid = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double median = 0.0;
};

std::vector<AggregateRow> aggregate(const SweepResult& r);
// Convenience lookup; NaN when absent.
double aggregate_value(const std::vector<AggregateRow>& a, int point, const std::string& method,
                       int level, const std::string& stat);

SweepResult run_convergence_sweep(const ExperimentConfig& c);
SweepResult run_gap_sweep(const ExperimentConfig& c, const std::vector<double>& h_grid);
SweepResult run_noise_sweep(const ExperimentConfig& c, const std::vector<double>& eps_grid);

struct ForecastRow {
  int point = 0;
  int kstar = 0;
  int K = 0;
  int d = 0;
  int trial = 0;
  std::string status;
  std::vector<double> rmse;  // per observable
  double mean_rmse = 0.0;
  double wall_seconds = 0.0;
};

struct ForecastSeries {
  int kstar = 0;
  Eigen::MatrixXd predicted;  // I x horizon, trial 0
  Eigen::MatrixXd exact;
};

struct ForecastResult {
  int horizon = 0;
  double dt = 0.0;
  std::vector<ForecastRow> rows;  // ordered by (point, trial)
  std::vector<ForecastSeries> series;
};

ForecastResult run_forecast_experiment(const ExperimentConfig& c, const std::vector<int>& kstar_grid,
                                       int horizon);

struct SolveResult {
  ModmdRun run;
  Problem problem;
  std::vector<double> energies;  // physical units
  std::vector<double> errors;
};

SolveResult run_solve(const ExperimentConfig& c);

struct OutputFiles {
  std::vector<std::string> paths;
};

OutputFiles emit_outputs(const SweepResult& r, const ExperimentConfig& c, const std::string& dir);
OutputFiles emit_outputs(const ForecastResult& r, const ExperimentConfig& c, const std::string& dir);

// Deterministic text of the results table (also what emit_outputs writes).
std::string results_csv(const SweepResult& r);
std::string forecast_csv(const ForecastResult& r);

// Runs fn(0..n-1) on up to `workers` threads; the first exception by task
// index is rethrown after all workers finish.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);
int resolve_workers(int requested);

}  // namespace modmd
