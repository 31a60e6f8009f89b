#pragma once

#include "modmd/pauli.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace modmd {

struct StateVector {
  int n_qubits = 0;
  Eigen::VectorXcd amplitudes;

  StateVector() = default;
  // Throws unless the length is 2^n_qubits and the norm is 1 within 1e-10.
  StateVector(int n_qubits, Eigen::VectorXcd amplitudes);

  static StateVector basis(int n_qubits, std::uint32_t index);
  std::size_t dim() const { return static_cast<std::size_t>(amplitudes.size()); }
};

struct SpectralDecomposition {
  Eigen::VectorXd energies;       // ascending
  Eigen::MatrixXcd eigenvectors;  // columns |psi_n>

  int n_qubits() const;
  Eigen::Index dim() const { return energies.size(); }
};

// Ancilla is the leading (most significant) qubit: index = a * 2^L + sys.
struct CompositeState {
  int n_system = 0;
  Eigen::VectorXcd amplitudes;
};

enum class SignalMode { real, complex };

std::string to_string(SignalMode m);
SignalMode signal_mode_from_string(const std::string& s);

struct MultiObservableSignal {
  double dt = 0.0;
  SignalMode mode = SignalMode::real;
  // I x (k_max+1); in real mode every imaginary part is zero.
  Eigen::MatrixXcd values;

  int n_observables() const { return static_cast<int>(values.rows()); }
  int n_steps() const { return static_cast<int>(values.cols()); }
};

SpectralDecomposition diagonalize(const Eigen::MatrixXcd& H);
SpectralDecomposition diagonalize(const PauliSum& H);

StateVector evolve(const SpectralDecomposition& spec, const StateVector& psi, double t);

// First-order product formula, terms applied in PauliSum order each step.
StateVector trotter_evolve(const PauliSum& H, const StateVector& psi, double t, int r);

int trotter_steps(int M, double kappa_inf, double dt, double eps1);

// Bitstrings use the Pauli label convention: character j is qubit j.
StateVector build_reference_superposition(int L, const std::vector<std::string>& bitstrings);

CompositeState composite_state(const StateVector& phi_perp, const StateVector& phi0,
                               const SpectralDecomposition& spec, double t);

// Eigenbasis path: c_{n,i} = conj(<psi_n|O_i phi0>) <psi_n|phi0>.
MultiObservableSignal exact_signal(const SpectralDecomposition& spec, const StateVector& phi0,
                                   const std::vector<PauliSum>& observables, double dt, int k_max,
                                   SignalMode mode = SignalMode::real);

// Direct path: evolve phi0 to each k*dt and take <O_i phi0 | phi0(t)>.
MultiObservableSignal exact_signal_direct(const SpectralDecomposition& spec,
                                          const StateVector& phi0,
                                          const std::vector<PauliSum>& observables, double dt,
                                          int k_max, SignalMode mode = SignalMode::real);

// Squared overlaps |<psi_n|phi0>|^2 in eigen order.
Eigen::VectorXd overlaps_sq(const SpectralDecomposition& spec, const StateVector& phi0);

}  // namespace modmd
