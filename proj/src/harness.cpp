#include "modmd/harness.hpp"

#include "modmd/errors.hpp"
#include "modmd/seed.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

namespace modmd {

using nlohmann::json;

namespace {

// Stream tags for derive_seed.
enum Stream : std::uint64_t { kObservables = 1, kNoise = 2, kShadow = 3, kOdmdNoise = 4, kOdmdShadow = 5 };

constexpr double kMinDelta = 1e-12;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <class T>
T take(const json& obj, const std::string& key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + where + key + "': " + e.what());
  }
}

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object()) throw ConfigError("config section '" + where + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("unknown config key '" + where + it.key() + "'");
}

}  // namespace

std::string to_string(ObservablePolicy p) {
  switch (p) {
    case ObservablePolicy::identity_only: return "identity-only";
    case ObservablePolicy::random_one_local: return "random-1-local";
    case ObservablePolicy::hamiltonian_partial_sums: return "hamiltonian-partial-sums";
    case ObservablePolicy::weight_window: return "weight-window";
    case ObservablePolicy::explicit_list: return "explicit";
  }
  return "?";
}

ObservablePolicy observable_policy_from_string(const std::string& s) {
  for (auto p : {ObservablePolicy::identity_only, ObservablePolicy::random_one_local,
                 ObservablePolicy::hamiltonian_partial_sums, ObservablePolicy::weight_window,
                 ObservablePolicy::explicit_list})
    if (to_string(p) == s) return p;
  throw ConfigError("unknown observable policy '" + s + "'");
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["hamiltonian"] = {{"type", c.hamiltonian.type},
                      {"L", c.hamiltonian.L},
                      {"J", c.hamiltonian.J},
                      {"h", c.hamiltonian.h},
                      {"path", c.hamiltonian.path},
                      {"sector_qubits", c.hamiltonian.sector_qubits},
                      {"sector_count", c.hamiltonian.sector_count}};
  j["reference"] = c.reference;
  j["observables"] = {{"policy", to_string(c.observable_policy)},
                      {"count", c.n_observables},
                      {"window_start", c.window_start},
                      {"explicit", c.explicit_observables}};
  j["time_step"] = {{"policy", c.dt_policy}, {"value", c.dt}, {"safety", c.dt_safety}};
  j["spectral_shift"] = {{"enabled", c.spectral_shift}, {"C", c.shift_C}};
  j["k_grid"] = c.k_grid;
  j["kd_ratio"] = c.kd_ratio;
  j["svd_threshold"] = {{"policy", c.delta_policy}, {"value", c.delta}};
  j["noise_eps"] = c.noise_eps;
  j["signal"] = {{"source", c.signal_source}, {"shots", c.shots}, {"mode", to_string(c.mode)}};
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["n_eig"] = c.n_eig;
  j["magnitude_floor"] = c.magnitude_floor;
  j["workers"] = c.workers;
  j["output_dir"] = c.output_dir;
  j["fixed_K"] = c.fixed_K;
  j["h_grid"] = c.h_grid;
  j["eps_grid"] = c.eps_grid;
  j["kstar_grid"] = c.kstar_grid;
  j["horizon"] = c.horizon;
  return j;
}

ExperimentConfig config_from_json(const json& in) {
  const json& j = (in.is_object() && in.contains("config") && in.contains("manifest_version"))
                      ? in.at("config")
                      : in;
  reject_unknown(j,
                 {"hamiltonian", "reference", "observables", "time_step", "spectral_shift", "k_grid",
                  "kd_ratio", "svd_threshold", "noise_eps", "signal", "trials", "seed", "n_eig",
                  "magnitude_floor", "workers", "output_dir", "fixed_K", "h_grid", "eps_grid",
                  "kstar_grid", "horizon"},
                 "");
  ExperimentConfig c;
  if (j.contains("hamiltonian")) {
    const json& h = j.at("hamiltonian");
    reject_unknown(h, {"type", "L", "J", "h", "path", "sector_qubits", "sector_count"}, "hamiltonian.");
    if (h.contains("type")) c.hamiltonian.type = take<std::string>(h, "type", "hamiltonian.");
    if (h.contains("L")) c.hamiltonian.L = take<int>(h, "L", "hamiltonian.");
    if (h.contains("J")) c.hamiltonian.J = take<double>(h, "J", "hamiltonian.");
    if (h.contains("h")) c.hamiltonian.h = take<double>(h, "h", "hamiltonian.");
    if (h.contains("path")) c.hamiltonian.path = take<std::string>(h, "path", "hamiltonian.");
    if (h.contains("sector_qubits"))
      c.hamiltonian.sector_qubits = take<std::vector<int>>(h, "sector_qubits", "hamiltonian.");
    if (h.contains("sector_count")) c.hamiltonian.sector_count = take<int>(h, "sector_count", "hamiltonian.");
  }
  if (j.contains("reference")) c.reference = take<std::vector<std::string>>(j, "reference", "");
  if (j.contains("observables")) {
    const json& o = j.at("observables");
    reject_unknown(o, {"policy", "count", "window_start", "explicit"}, "observables.");
    if (o.contains("policy"))
      c.observable_policy = observable_policy_from_string(take<std::string>(o, "policy", "observables."));
    if (o.contains("count")) c.n_observables = take<int>(o, "count", "observables.");
    if (o.contains("window_start")) c.window_start = take<int>(o, "window_start", "observables.");
    if (o.contains("explicit"))
      c.explicit_observables = take<std::vector<std::string>>(o, "explicit", "observables.");
  }
  if (j.contains("time_step")) {
    const json& t = j.at("time_step");
    reject_unknown(t, {"policy", "value", "safety"}, "time_step.");
    if (t.contains("policy")) c.dt_policy = take<std::string>(t, "policy", "time_step.");
    if (t.contains("value")) c.dt = take<double>(t, "value", "time_step.");
    if (t.contains("safety")) c.dt_safety = take<double>(t, "safety", "time_step.");
  }
  if (j.contains("spectral_shift")) {
    const json& s = j.at("spectral_shift");
    reject_unknown(s, {"enabled", "C"}, "spectral_shift.");
    if (s.contains("enabled")) c.spectral_shift = take<bool>(s, "enabled", "spectral_shift.");
    if (s.contains("C")) c.shift_C = take<double>(s, "C", "spectral_shift.");
  }
  if (j.contains("k_grid")) c.k_grid = take<std::vector<int>>(j, "k_grid", "");
  if (j.contains("kd_ratio")) c.kd_ratio = take<double>(j, "kd_ratio", "");
  if (j.contains("svd_threshold")) {
    const json& s = j.at("svd_threshold");
    reject_unknown(s, {"policy", "value"}, "svd_threshold.");
    if (s.contains("policy")) c.delta_policy = take<std::string>(s, "policy", "svd_threshold.");
    if (s.contains("value")) c.delta = take<double>(s, "value", "svd_threshold.");
  }
  if (j.contains("noise_eps")) c.noise_eps = take<double>(j, "noise_eps", "");
  if (j.contains("signal")) {
    const json& s = j.at("signal");
    reject_unknown(s, {"source", "shots", "mode"}, "signal.");
    if (s.contains("source")) c.signal_source = take<std::string>(s, "source", "signal.");
    if (s.contains("shots")) c.shots = take<int>(s, "shots", "signal.");
    if (s.contains("mode")) {
      try {
        c.mode = signal_mode_from_string(take<std::string>(s, "mode", "signal."));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
  }
  if (j.contains("trials")) c.trials = take<int>(j, "trials", "");
  if (j.contains("seed")) c.seed = take<std::uint64_t>(j, "seed", "");
  if (j.contains("n_eig")) c.n_eig = take<int>(j, "n_eig", "");
  if (j.contains("magnitude_floor")) c.magnitude_floor = take<double>(j, "magnitude_floor", "");
  if (j.contains("workers")) c.workers = take<int>(j, "workers", "");
  if (j.contains("output_dir")) c.output_dir = take<std::string>(j, "output_dir", "");
  if (j.contains("fixed_K")) c.fixed_K = take<int>(j, "fixed_K", "");
  if (j.contains("h_grid")) c.h_grid = take<std::vector<double>>(j, "h_grid", "");
  if (j.contains("eps_grid")) c.eps_grid = take<std::vector<double>>(j, "eps_grid", "");
  if (j.contains("kstar_grid")) c.kstar_grid = take<std::vector<int>>(j, "kstar_grid", "");
  if (j.contains("horizon")) c.horizon = take<int>(j, "horizon", "");
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

void validate(const ExperimentConfig& c) {
  const auto fail = [](const std::string& m) { throw ConfigError(m); };
  const auto& h = c.hamiltonian;
  if (h.type == "tfim") {
    if (h.L < 2) fail("hamiltonian.L must be >= 2");
    if (h.L > kDenseMatrixQubitCap) throw ResourceError("hamiltonian.L exceeds the dense cap of " +
                                                        std::to_string(kDenseMatrixQubitCap));
  } else if (h.type == "file") {
    if (h.path.empty()) fail("hamiltonian.path is required for type 'file'");
    if (!std::ifstream(h.path)) fail("hamiltonian file '" + h.path + "' does not exist");
  } else {
    fail("hamiltonian.type must be 'tfim' or 'file'");
  }
  if (!h.sector_qubits.empty() && h.sector_count < 0) fail("sector_count must be set with sector_qubits");
  if (c.n_observables < 1) fail("observables.count must be >= 1");
  if (c.observable_policy == ObservablePolicy::identity_only && c.n_observables != 1)
    fail("identity-only policy needs observables.count = 1");
  if (c.observable_policy == ObservablePolicy::explicit_list &&
      static_cast<int>(c.explicit_observables.size()) != c.n_observables)
    fail("observables.explicit must list observables.count labels");
  if (c.dt_policy != "auto" && c.dt_policy != "explicit") fail("time_step.policy must be auto or explicit");
  if (c.dt_policy == "explicit" && !(c.dt > 0.0)) fail("time_step.value must be positive");
  if (!(c.dt_safety > 0.0 && c.dt_safety <= 1.0)) fail("time_step.safety must lie in (0, 1]");
  if (!(c.shift_C > 0.0 && c.shift_C < 1.0)) fail("spectral_shift.C must lie in (0, 1)");
  if (c.k_grid.empty()) fail("k_grid is empty");
  for (int K : c.k_grid)
    if (K < 1) fail("k_grid entries must be >= 1");
  if (!(c.kd_ratio > 0.0)) fail("kd_ratio must be positive");
  if (c.delta_policy != "explicit" && c.delta_policy != "ten-eps")
    fail("svd_threshold.policy must be explicit or ten-eps");
  if (c.delta_policy == "explicit" && !(c.delta > 0.0 && c.delta < 1.0))
    fail("svd_threshold.value must lie in (0, 1)");
  if (!(c.noise_eps >= 0.0)) fail("noise_eps must be >= 0");
  if (c.signal_source != "exact" && c.signal_source != "shadow") fail("signal.source must be exact or shadow");
  if (c.shots < 1) fail("signal.shots must be >= 1");
  if (c.trials < 1) fail("trials must be >= 1");
  if (c.n_eig < 1) fail("n_eig must be >= 1");
  if (!(c.magnitude_floor >= 0.0)) fail("magnitude_floor must be >= 0");
  if (c.workers < 0) fail("workers must be >= 0");
  if (c.fixed_K < 1) fail("fixed_K must be >= 1");
  if (c.h_grid.empty()) fail("h_grid is empty");
  if (c.eps_grid.empty()) fail("eps_grid is empty");
  for (double e : c.eps_grid)
    if (!(e >= 0.0)) fail("eps_grid entries must be >= 0");
  if (c.kstar_grid.empty()) fail("kstar_grid is empty");
  for (int k : c.kstar_grid)
    if (k < 2) fail("kstar_grid entries must be >= 2");
  if (c.horizon < 1) fail("horizon must be >= 1");
}

int depth_for(int K, double kd_ratio) {
  return std::max(1, static_cast<int>(std::lround(K / kd_ratio)));
}

std::vector<std::string> default_tfim_reference(int L) {
  std::set<std::string> picked;
  std::vector<std::string> out;
  const auto push = [&](const std::string& s) {
    if (picked.insert(s).second) out.push_back(s);
  };
  push(std::string(L, '0'));
  push(std::string(L, '1'));
  push("1" + std::string(L - 1, '0'));
  const int mid = (L + 1) / 2;
  for (int k = mid - 1; k <= mid + 1; ++k)
    if (k >= 1 && k <= L) push(std::string(L - k, '0') + std::string(k, '1'));
  return out;
}

Problem prepare_problem(const ExperimentConfig& c, std::optional<double> h_override) {
  Problem p;
  PauliSum H;
  if (c.hamiltonian.type == "tfim") {
    H = build_tfim(c.hamiltonian.L, c.hamiltonian.J, h_override.value_or(c.hamiltonian.h));
  } else {
    if (h_override) throw ConfigError("field sweeps need a TFIM Hamiltonian");
    try {
      H = read_pauli_sum_file(c.hamiltonian.path);
    } catch (const ParseError& e) {
      throw ConfigError("hamiltonian file '" + c.hamiltonian.path + "': " + e.what());
    }
  }
  const int L = H.n_qubits();
  if (c.spectral_shift) {
    auto [Hs, s] = shift_and_scale(H, H.l1_norm(), c.shift_C);
    p.H = std::move(Hs);
    p.shift = s;
  } else {
    p.H = H;
  }
  p.spec = diagonalize(p.H);

  std::vector<std::string> ref = c.reference;
  if (ref.empty()) {
    if (c.hamiltonian.type != "tfim") throw ConfigError("reference bitstrings are required for file Hamiltonians");
    ref = default_tfim_reference(L);
  }
  try {
    p.phi0 = build_reference_superposition(L, ref);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("reference: ") + e.what());
  }
  p.phi_perp = StateVector::basis(L, 0);

  std::vector<Eigen::Index> level_idx;
  if (c.hamiltonian.sector_qubits.empty()) {
    for (Eigen::Index n = 0; n < p.spec.dim() && static_cast<int>(level_idx.size()) < c.n_eig; ++n)
      level_idx.push_back(n);
  } else {
    std::uint32_t mask = 0;
    for (int q : c.hamiltonian.sector_qubits) {
      if (q < 0 || q >= L) throw ConfigError("sector qubit out of range");
      mask |= std::uint32_t{1} << (L - 1 - q);
    }
    for (Eigen::Index n = 0; n < p.spec.dim() && static_cast<int>(level_idx.size()) < c.n_eig; ++n) {
      double count = 0.0;
      for (Eigen::Index b = 0; b < p.spec.dim(); ++b)
        count += std::norm(p.spec.eigenvectors(b, n)) * std::popcount(static_cast<std::uint32_t>(b) & mask);
      if (std::abs(count - c.hamiltonian.sector_count) < 1e-6) level_idx.push_back(n);
    }
  }
  if (static_cast<int>(level_idx.size()) < c.n_eig)
    throw ConfigError("only " + std::to_string(level_idx.size()) + " reference levels available");
  const Eigen::VectorXd ov = overlaps_sq(p.spec, p.phi0);
  for (Eigen::Index n : level_idx) {
    p.levels.push_back(p.shift.inverse(p.spec.energies(n)));
    p.overlap_low += ov(n);
  }
  p.gap = p.levels.size() > 1 ? p.levels[1] - p.levels[0] : 0.0;

  if (c.dt_policy == "explicit") {
    p.dt = c.dt;
  } else {
    const Eigen::VectorXd& E = p.spec.energies;
    std::vector<double> gaps;
    for (Eigen::Index n = 0; n + 1 < E.size(); ++n) gaps.push_back(E(n + 1) - E(n));
    p.dt = select_time_step(E(0), E(E.size() - 1), gaps, c.dt_safety);
  }
  return p;
}

std::vector<PauliSum> observable_pool(const ExperimentConfig& c, const Problem& p, int trial) {
  const int L = p.H.n_qubits();
  const int I = c.n_observables;
  std::vector<PauliSum> out;
  try {
    switch (c.observable_policy) {
      case ObservablePolicy::identity_only:
        out.push_back(PauliSum::identity(L));
        break;
      case ObservablePolicy::random_one_local: {
        out.push_back(PauliSum::identity(L));
        if (I > 1) {
          auto rnd = random_one_local(
              L, I - 1, derive_seed(c.seed, {kObservables, static_cast<std::uint64_t>(trial)}));
          out.insert(out.end(), rnd.begin(), rnd.end());
        }
        break;
      }
      case ObservablePolicy::hamiltonian_partial_sums:
        out = partial_sum_observables(p.H, I, c.window_start);
        break;
      case ObservablePolicy::weight_window:
        out = weight_window_observables(p.H, c.window_start, I);
        break;
      case ObservablePolicy::explicit_list:
        for (const auto& label : c.explicit_observables) {
          PauliSum O(L);
          O.add(1.0, PauliString::from_label(label));
          out.push_back(std::move(O));
        }
        break;
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("observables: ") + e.what());
  }
  return out;
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  const int w = std::min(resolve_workers(workers), n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<int> next{0};
  const auto body = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (w == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < w; ++t) pool.emplace_back(body);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace {

bool is_plain_identity(const PauliSum& O) {
  return O.size() == 1 && O.terms()[0].string.is_identity() && O.terms()[0].coeff == 1.0;
}

double delta_for(const ExperimentConfig& c, double eps) {
  if (c.delta_policy == "explicit") return c.delta;
  return std::min(0.5, std::max(kMinDelta, 10.0 * eps));
}

MultiObservableSignal clean_signal(const ExperimentConfig& c, const Problem& p,
                                   const std::vector<PauliSum>& obs, int k_max, std::uint64_t shadow_seed) {
  if (c.signal_source == "shadow")
    return shadow_signal(p.spec, p.phi0, p.phi_perp, obs, p.dt, k_max, c.shots, shadow_seed, c.mode);
  return exact_signal(p.spec, p.phi0, obs, p.dt, k_max, c.mode);
}

MultiObservableSignal noisy(const ExperimentConfig& c, const MultiObservableSignal& s, double eps,
                            std::uint64_t seed) {
  if (c.signal_source == "shadow") return s;
  return gaussian_noise_channel(s, {eps, seed, NoiseTarget::both});
}

// Signals for one (trial) record: MODMD pool and the ODMD identity row.
struct TrialSignals {
  std::vector<PauliSum> obs;
  MultiObservableSignal pool;
  MultiObservableSignal identity;  // empty when pool row 0 is the identity
  bool shares_row0 = false;
};

TrialSignals trial_signals(const ExperimentConfig& c, const Problem& p, int trial, int k_max) {
  TrialSignals t;
  t.obs = observable_pool(c, p, trial);
  const auto tr = static_cast<std::uint64_t>(trial);
  t.pool = clean_signal(c, p, t.obs, k_max, derive_seed(c.seed, {kShadow, tr}));
  t.shares_row0 = is_plain_identity(t.obs.front());
  if (!t.shares_row0)
    t.identity = clean_signal(c, p, {PauliSum::identity(p.H.n_qubits())}, k_max,
                              derive_seed(c.seed, {kOdmdShadow, tr}));
  return t;
}

std::pair<MultiObservableSignal, MultiObservableSignal> noisy_pair(const ExperimentConfig& c,
                                                                   const TrialSignals& t, double eps,
                                                                   int point, int trial) {
  const auto pt = static_cast<std::uint64_t>(point), tr = static_cast<std::uint64_t>(trial);
  MultiObservableSignal pool = noisy(c, t.pool, eps, derive_seed(c.seed, {kNoise, pt, tr}));
  MultiObservableSignal odmd = t.shares_row0
                                   ? select_rows(pool, {0})
                                   : noisy(c, t.identity, eps, derive_seed(c.seed, {kOdmdNoise, pt, tr}));
  return {std::move(pool), std::move(odmd)};
}

SweepRow evaluate(const ExperimentConfig& c, const Problem& p, const MultiObservableSignal& s, int K,
                  double delta, const std::string& method) {
  SweepRow row;
  row.K = K;
  row.d = depth_for(K, c.kd_ratio);
  row.method = method;
  row.exact = p.levels;
  row.estimates.assign(c.n_eig, kNaN);
  row.errors.assign(c.n_eig, kNaN);
  const auto t0 = std::chrono::steady_clock::now();
  ModmdConfig mc;
  mc.d = row.d;
  mc.K = K;
  mc.svd_threshold = delta;
  mc.n_eig = std::min(c.n_eig, row.d * s.n_observables());
  mc.magnitude_floor = c.magnitude_floor;
  try {
    const ModmdRun run = run_modmd_full(s, mc);
    for (int n = 0; n < mc.n_eig; ++n) row.estimates[n] = p.shift.inverse(run.estimate.energies(n));
    row.residual = run.residual;
    row.rank = run.estimate.retained_rank;
    row.eigvec_condition = run.estimate.eigvec_condition;
    row.status = mc.n_eig < c.n_eig ? "shortfall" : "ok";
  } catch (const ShortfallError& e) {
    row.status = "shortfall";
    const auto& sv = e.survivors();
    for (std::size_t n = 0; n < sv.size() && n < row.estimates.size(); ++n)
      row.estimates[n] = p.shift.inverse(-std::arg(sv[n]) / s.dt);
  } catch (const DegenerateInputError&) {
    row.status = "degenerate";
  }
  for (int n = 0; n < c.n_eig; ++n) row.errors[n] = std::abs(row.estimates[n] - p.levels[n]);
  row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

void stamp(SweepRow& r, int point, double param, double x, int trial) {
  r.point = point;
  r.param = param;
  r.x = x;
  r.trial = trial;
}

}  // namespace

SweepResult run_convergence_sweep(const ExperimentConfig& c) {
  validate(c);
  const Problem p = prepare_problem(c);
  SweepResult r;
  r.sweep = "sweep-k";
  r.param_name = "K";
  r.x_name = "K";
  r.n_eig = c.n_eig;
  for (int n = 0; n < c.n_eig; ++n) r.tracked_levels.push_back(n);
  const int P = static_cast<int>(c.k_grid.size());
  r.point_dt.assign(P, p.dt);
  int k_max = 0;
  for (int K : c.k_grid) k_max = std::max(k_max, K + depth_for(K, c.kd_ratio));
  r.rows.resize(static_cast<std::size_t>(P) * c.trials * 2);
  const double delta = delta_for(c, c.noise_eps);
  parallel_for(c.trials, c.workers, [&](int trial) {
    const TrialSignals t = trial_signals(c, p, trial, k_max);
    for (int pt = 0; pt < P; ++pt) {
      const int K = c.k_grid[pt];
      auto [pool, odmd] = noisy_pair(c, t, c.noise_eps, pt, trial);
      const std::size_t base = (static_cast<std::size_t>(pt) * c.trials + trial) * 2;
      r.rows[base] = evaluate(c, p, pool, K, delta, "MODMD");
      r.rows[base + 1] = evaluate(c, p, odmd, K, delta, "ODMD");
      stamp(r.rows[base], pt, K, K, trial);
      stamp(r.rows[base + 1], pt, K, K, trial);
    }
  });
  return r;
}

SweepResult run_gap_sweep(const ExperimentConfig& c, const std::vector<double>& h_grid) {
  validate(c);
  if (c.hamiltonian.type != "tfim") throw ConfigError("gap sweep needs a TFIM Hamiltonian");
  if (h_grid.empty()) throw ConfigError("h grid is empty");
  if (c.n_eig < 2) throw ConfigError("gap sweep needs n_eig >= 2");
  SweepResult r;
  r.sweep = "sweep-gap";
  r.param_name = "h";
  r.x_name = "gap";
  r.n_eig = c.n_eig;
  r.tracked_levels = {1};
  const int P = static_cast<int>(h_grid.size());
  std::vector<Problem> problems(P);
  parallel_for(P, c.workers, [&](int pt) { problems[pt] = prepare_problem(c, h_grid[pt]); });
  for (const auto& p : problems) r.point_dt.push_back(p.dt);
  const int K = c.fixed_K;
  const int k_max = K + depth_for(K, c.kd_ratio);
  const double delta = delta_for(c, c.noise_eps);
  r.rows.resize(static_cast<std::size_t>(P) * c.trials * 2);
  parallel_for(P * c.trials, c.workers, [&](int task) {
    const int pt = task / c.trials, trial = task % c.trials;
    const Problem& p = problems[pt];
    const TrialSignals t = trial_signals(c, p, trial, k_max);
    auto [pool, odmd] = noisy_pair(c, t, c.noise_eps, pt, trial);
    const std::size_t base = static_cast<std::size_t>(task) * 2;
    r.rows[base] = evaluate(c, p, pool, K, delta, "MODMD");
    r.rows[base + 1] = evaluate(c, p, odmd, K, delta, "ODMD");
    stamp(r.rows[base], pt, h_grid[pt], p.gap, trial);
    stamp(r.rows[base + 1], pt, h_grid[pt], p.gap, trial);
  });
  return r;
}

SweepResult run_noise_sweep(const ExperimentConfig& c, const std::vector<double>& eps_grid) {
  validate(c);
  if (c.signal_source != "exact") throw ConfigError("noise sweep needs the exact+Gaussian signal source");
  if (eps_grid.empty()) throw ConfigError("epsilon grid is empty");
  const Problem p = prepare_problem(c);
  SweepResult r;
  r.sweep = "sweep-noise";
  r.param_name = "epsilon";
  r.x_name = "epsilon";
  r.n_eig = c.n_eig;
  for (int n = 0; n < c.n_eig; ++n) r.tracked_levels.push_back(n);
  const int P = static_cast<int>(eps_grid.size());
  r.point_dt.assign(P, p.dt);
  const int K = c.fixed_K;
  const int k_max = K + depth_for(K, c.kd_ratio);
  ExperimentConfig ce = c;
  ce.delta_policy = "ten-eps";
  r.rows.resize(static_cast<std::size_t>(P) * c.trials * 2);
  parallel_for(c.trials, c.workers, [&](int trial) {
    const TrialSignals t = trial_signals(ce, p, trial, k_max);
    for (int pt = 0; pt < P; ++pt) {
      const double eps = eps_grid[pt];
      auto [pool, odmd] = noisy_pair(ce, t, eps, pt, trial);
      const std::size_t base = (static_cast<std::size_t>(pt) * c.trials + trial) * 2;
      r.rows[base] = evaluate(ce, p, pool, K, delta_for(ce, eps), "MODMD");
      r.rows[base + 1] = evaluate(ce, p, odmd, K, delta_for(ce, eps), "ODMD");
      stamp(r.rows[base], pt, eps, eps, trial);
      stamp(r.rows[base + 1], pt, eps, eps, trial);
    }
  });
  return r;
}

std::vector<AggregateRow> aggregate(const SweepResult& r) {
  std::vector<AggregateRow> out;
  if (r.rows.empty()) return out;
  int n_points = 0;
  for (const auto& row : r.rows) n_points = std::max(n_points, row.point + 1);
  for (int pt = 0; pt < n_points; ++pt) {
    for (const std::string method : {"MODMD", "ODMD"}) {
      std::vector<const SweepRow*> group;
      for (const auto& row : r.rows)
        if (row.point == pt && row.method == method) group.push_back(&row);
      if (group.empty()) continue;
      for (int n = 0; n < r.n_eig; ++n) {
        std::vector<double> v;
        for (const auto* g : group)
          if (std::isfinite(g->errors[n])) v.push_back(g->errors[n]);
        AggregateRow a;
        a.point = pt;
        a.param = group.front()->param;
        a.x = group.front()->x;
        a.K = group.front()->K;
        a.d = group.front()->d;
        a.method = method;
        a.level = n;
        a.n_valid = static_cast<int>(v.size());
        if (v.empty()) {
          a.mean = a.stddev = a.median = kNaN;
        } else {
          double sum = 0.0;
          for (double x : v) sum += x;
          a.mean = sum / v.size();
          double ss = 0.0;
          for (double x : v) ss += (x - a.mean) * (x - a.mean);
          a.stddev = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
          std::sort(v.begin(), v.end());
          const std::size_t m = v.size() / 2;
          a.median = v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
        }
        out.push_back(a);
      }
    }
  }
  return out;
}

double aggregate_value(const std::vector<AggregateRow>& a, int point, const std::string& method,
                       int level, const std::string& stat) {
  for (const auto& r : a) {
    if (r.point != point || r.method != method || r.level != level) continue;
    if (stat == "mean") return r.mean;
    if (stat == "std") return r.stddev;
    if (stat == "median") return r.median;
    if (stat == "n") return r.n_valid;
  }
  return kNaN;
}

ForecastResult run_forecast_experiment(const ExperimentConfig& c, const std::vector<int>& kstar_grid,
                                       int horizon) {
  validate(c);
  if (kstar_grid.empty()) throw ConfigError("k* grid is empty");
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  const Problem p = prepare_problem(c);
  ForecastResult r;
  r.horizon = horizon;
  r.dt = p.dt;
  const int P = static_cast<int>(kstar_grid.size());
  int k_max = 0;
  for (int ks : kstar_grid) {
    if (ks < 2) throw ConfigError("k* must be >= 2");
    k_max = std::max(k_max, ks + horizon);
  }
  r.rows.resize(static_cast<std::size_t>(P) * c.trials);
  r.series.resize(P);
  const double delta = delta_for(c, c.noise_eps);
  parallel_for(c.trials, c.workers, [&](int trial) {
    const auto tr = static_cast<std::uint64_t>(trial);
    const auto obs = observable_pool(c, p, trial);
    const MultiObservableSignal exact = exact_signal(p.spec, p.phi0, obs, p.dt, k_max, c.mode);
    const MultiObservableSignal clean =
        c.signal_source == "shadow" ? clean_signal(c, p, obs, k_max, derive_seed(c.seed, {kShadow, tr}))
                                    : exact;
    const MultiObservableSignal data = noisy(c, clean, c.noise_eps, derive_seed(c.seed, {kNoise, 0, tr}));
    const int I = static_cast<int>(obs.size());
    for (int pt = 0; pt < P; ++pt) {
      const auto t0 = std::chrono::steady_clock::now();
      const int ks = kstar_grid[pt];
      ForecastRow row;
      row.point = pt;
      row.kstar = ks;
      row.trial = trial;
      row.d = std::max(1, static_cast<int>(std::lround(ks / (1.0 + c.kd_ratio))));
      row.K = ks - row.d;
      row.rmse.assign(I, kNaN);
      try {
        const HankelPair pair = build_hankel(data, row.d, row.K);
        const SystemMatrix A = solve_factored(pair, delta);
        const Eigen::MatrixXcd pred = forecast(A, pair, horizon);
        const Eigen::MatrixXcd truth = exact.values.block(0, ks + 1, I, horizon);
        double total = 0.0;
        for (int i = 0; i < I; ++i) {
          row.rmse[i] = std::sqrt((pred.row(i) - truth.row(i)).squaredNorm() / horizon);
          total += row.rmse[i];
        }
        row.mean_rmse = total / I;
        row.status = "ok";
        if (trial == 0) r.series[pt] = {ks, pred.real(), truth.real()};
      } catch (const DegenerateInputError&) {
        row.status = "degenerate";
        row.mean_rmse = kNaN;
      }
      row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      r.rows[static_cast<std::size_t>(pt) * c.trials + trial] = std::move(row);
    }
  });
  return r;
}

SolveResult run_solve(const ExperimentConfig& c) {
  validate(c);
  SolveResult out;
  out.problem = prepare_problem(c);
  const int K = c.fixed_K;
  const int d = depth_for(K, c.kd_ratio);
  const TrialSignals t = trial_signals(c, out.problem, 0, K + d);
  auto [pool, odmd] = noisy_pair(c, t, c.noise_eps, 0, 0);
  ModmdConfig mc;
  mc.d = d;
  mc.K = K;
  mc.svd_threshold = delta_for(c, c.noise_eps);
  mc.n_eig = c.n_eig;
  mc.magnitude_floor = c.magnitude_floor;
  out.run = run_modmd_full(pool, mc);
  for (int n = 0; n < c.n_eig; ++n) {
    out.energies.push_back(out.problem.shift.inverse(out.run.estimate.energies(n)));
    out.errors.push_back(std::abs(out.energies.back() - out.problem.levels[n]));
  }
  return out;
}

}  // namespace modmd
