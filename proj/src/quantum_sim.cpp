#include "modmd/quantum_sim.hpp"

#include "modmd/errors.hpp"

#include <bit>
#include <cmath>
#include <set>
#include <stdexcept>

namespace modmd {

namespace {

void check_state_cap(int n) {
  if (n > kStateVectorQubitCap)
    throw ResourceError("state vector on " + std::to_string(n) + " qubits exceeds cap of " +
                        std::to_string(kStateVectorQubitCap));
}

void check_signal_args(const std::vector<PauliSum>& observables, double dt, int k_max, int L) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (k_max < 0) throw std::invalid_argument("k_max must be nonnegative");
  if (observables.empty()) throw std::invalid_argument("observable list is empty");
  for (const auto& O : observables)
    if (O.n_qubits() != L) throw std::invalid_argument("observable qubit count mismatch");
}

void apply_mode(MultiObservableSignal& s) {
  if (s.mode == SignalMode::real) s.values = s.values.real().cast<cplx>();
}

}  // namespace

StateVector::StateVector(int n, Eigen::VectorXcd amps) : n_qubits(n), amplitudes(std::move(amps)) {
  if (n < 1) throw std::invalid_argument("state needs at least one qubit");
  check_state_cap(n);
  if (amplitudes.size() != (Eigen::Index{1} << n))
    throw std::invalid_argument("amplitude count does not match 2^L");
  if (std::abs(amplitudes.norm() - 1.0) > 1e-10)
    throw std::invalid_argument("state is not normalized");
}

StateVector StateVector::basis(int n, std::uint32_t index) {
  check_state_cap(n);
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(Eigen::Index{1} << n);
  if (index >= static_cast<std::uint32_t>(v.size()))
    throw std::invalid_argument("basis index out of range");
  v(index) = 1.0;
  return StateVector(n, std::move(v));
}

int SpectralDecomposition::n_qubits() const {
  return std::countr_zero(static_cast<std::uint64_t>(energies.size()));
}

std::string to_string(SignalMode m) { return m == SignalMode::real ? "real" : "complex"; }

SignalMode signal_mode_from_string(const std::string& s) {
  if (s == "real") return SignalMode::real;
  if (s == "complex") return SignalMode::complex;
  throw std::invalid_argument("unknown signal mode '" + s + "'");
}

SpectralDecomposition diagonalize(const Eigen::MatrixXcd& H) {
  if (H.rows() != H.cols() || H.rows() == 0)
    throw std::invalid_argument("diagonalize needs a nonempty square matrix");
  const double scale = std::max(H.norm(), 1e-300);
  if ((H - H.adjoint()).norm() > 1e-10 * scale)
    throw std::invalid_argument("matrix is not Hermitian");
  SpectralDecomposition out;
  if (H.imag().cwiseAbs().maxCoeff() == 0.0) {
    // Real symmetric input: the real solver is several times faster.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H.real());
    if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver failed");
    out.energies = es.eigenvalues();
    out.eigenvectors = es.eigenvectors().cast<cplx>();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver failed");
    out.energies = es.eigenvalues();
    out.eigenvectors = es.eigenvectors();
  }
  return out;
}

SpectralDecomposition diagonalize(const PauliSum& H) { return diagonalize(to_dense(H)); }

StateVector evolve(const SpectralDecomposition& spec, const StateVector& psi, double t) {
  if (psi.amplitudes.size() != spec.dim())
    throw std::invalid_argument("state dimension does not match Hamiltonian");
  Eigen::VectorXcd c = spec.eigenvectors.adjoint() * psi.amplitudes;
  for (Eigen::Index n = 0; n < c.size(); ++n) c(n) *= std::polar(1.0, -spec.energies(n) * t);
  StateVector out;
  out.n_qubits = psi.n_qubits;
  out.amplitudes = spec.eigenvectors * c;
  return out;
}

StateVector trotter_evolve(const PauliSum& H, const StateVector& psi, double t, int r) {
  if (r < 1) throw std::invalid_argument("Trotter step count must be >= 1");
  if (H.n_qubits() != psi.n_qubits) throw std::invalid_argument("qubit count mismatch");
  const double tau = t / r;
  Eigen::VectorXcd v = psi.amplitudes;
  for (int step = 0; step < r; ++step) {
    for (const auto& term : H.terms()) {
      // exp(-i k tau P) = cos(k tau) - i sin(k tau) P for P^2 = 1.
      const double angle = term.coeff * tau;
      Eigen::VectorXcd Pv = modmd::apply(term.string, v);
      v = std::cos(angle) * v - cplx(0.0, std::sin(angle)) * Pv;
    }
  }
  StateVector out;
  out.n_qubits = psi.n_qubits;
  out.amplitudes = std::move(v);
  return out;
}

int trotter_steps(int M, double kappa_inf, double dt, double eps1) {
  if (M < 1 || !(kappa_inf > 0.0) || !(dt > 0.0) || !(eps1 > 0.0))
    throw std::invalid_argument("trotter_steps needs positive arguments");
  const double r = std::ceil(static_cast<double>(M) * M * kappa_inf * kappa_inf * dt * dt / eps1);
  return std::max(1, static_cast<int>(r));
}

StateVector build_reference_superposition(int L, const std::vector<std::string>& bitstrings) {
  if (bitstrings.empty()) throw std::invalid_argument("reference needs at least one bitstring");
  check_state_cap(L);
  std::set<std::uint32_t> seen;
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(Eigen::Index{1} << L);
  for (const auto& b : bitstrings) {
    if (static_cast<int>(b.size()) != L)
      throw std::invalid_argument("bitstring '" + b + "' does not have length " + std::to_string(L));
    std::uint32_t idx = 0;
    for (char c : b) {
      if (c != '0' && c != '1') throw std::invalid_argument("bitstring '" + b + "' is not binary");
      idx = (idx << 1) | static_cast<std::uint32_t>(c == '1');
    }
    if (!seen.insert(idx).second) throw std::invalid_argument("duplicate bitstring '" + b + "'");
    v(idx) = 1.0;
  }
  v /= std::sqrt(static_cast<double>(bitstrings.size()));
  return StateVector(L, std::move(v));
}

CompositeState composite_state(const StateVector& phi_perp, const StateVector& phi0,
                               const SpectralDecomposition& spec, double t) {
  if (phi_perp.n_qubits != phi0.n_qubits || phi0.amplitudes.size() != spec.dim())
    throw std::invalid_argument("composite state dimension mismatch");
  check_state_cap(phi0.n_qubits + 1);
  const Eigen::Index N = phi0.amplitudes.size();
  CompositeState out;
  out.n_system = phi0.n_qubits;
  out.amplitudes.resize(2 * N);
  const double s = 1.0 / std::sqrt(2.0);
  out.amplitudes.head(N) = s * phi_perp.amplitudes;
  out.amplitudes.tail(N) = s * evolve(spec, phi0, t).amplitudes;
  return out;
}

MultiObservableSignal exact_signal(const SpectralDecomposition& spec, const StateVector& phi0,
                                   const std::vector<PauliSum>& observables, double dt, int k_max,
                                   SignalMode mode) {
  check_signal_args(observables, dt, k_max, phi0.n_qubits);
  if (phi0.amplitudes.size() != spec.dim()) throw std::invalid_argument("dimension mismatch");
  const Eigen::Index N = spec.dim();
  const int I = static_cast<int>(observables.size());
  const Eigen::VectorXcd alpha = spec.eigenvectors.adjoint() * phi0.amplitudes;

  // Only modes with nonzero weight contribute; skipping them keeps large-N sweeps cheap.
  std::vector<Eigen::Index> active;
  for (Eigen::Index n = 0; n < N; ++n)
    if (alpha(n) != cplx(0.0)) active.push_back(n);

  Eigen::MatrixXcd c(I, active.size());
  for (int i = 0; i < I; ++i) {
    const Eigen::VectorXcd beta = spec.eigenvectors.adjoint() * modmd::apply(observables[i], phi0.amplitudes);
    for (std::size_t m = 0; m < active.size(); ++m)
      c(i, m) = std::conj(beta(active[m])) * alpha(active[m]);
  }

  MultiObservableSignal s;
  s.dt = dt;
  s.mode = mode;
  s.values.resize(I, k_max + 1);
  Eigen::VectorXcd phases(active.size());
  for (int k = 0; k <= k_max; ++k) {
    for (std::size_t m = 0; m < active.size(); ++m)
      phases(m) = std::polar(1.0, -spec.energies(active[m]) * dt * k);
    s.values.col(k) = c * phases;
  }
  apply_mode(s);
  return s;
}

MultiObservableSignal exact_signal_direct(const SpectralDecomposition& spec,
                                          const StateVector& phi0,
                                          const std::vector<PauliSum>& observables, double dt,
                                          int k_max, SignalMode mode) {
  check_signal_args(observables, dt, k_max, phi0.n_qubits);
  const int I = static_cast<int>(observables.size());
  std::vector<Eigen::VectorXcd> Ophi;
  for (const auto& O : observables) Ophi.push_back(modmd::apply(O, phi0.amplitudes));
  MultiObservableSignal s;
  s.dt = dt;
  s.mode = mode;
  s.values.resize(I, k_max + 1);
  for (int k = 0; k <= k_max; ++k) {
    const StateVector phit = evolve(spec, phi0, k * dt);
    for (int i = 0; i < I; ++i) s.values(i, k) = Ophi[i].dot(phit.amplitudes);
  }
  apply_mode(s);
  return s;
}

Eigen::VectorXd overlaps_sq(const SpectralDecomposition& spec, const StateVector& phi0) {
  return (spec.eigenvectors.adjoint() * phi0.amplitudes).cwiseAbs2();
}

}  // namespace modmd
