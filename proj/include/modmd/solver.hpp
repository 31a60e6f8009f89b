#pragma once

#include "modmd/quantum_sim.hpp"

#include <Eigen/Dense>

#include <vector>

namespace modmd {

// Row index of X is a*I + i for block a and observable i.
struct HankelPair {
  Eigen::MatrixXcd X;
  Eigen::MatrixXcd Xp;
  int d = 0;
  int I = 0;
  double dt = 0.0;
  SignalMode mode = SignalMode::real;
};

HankelPair build_hankel(const MultiObservableSignal& signal, int d, int K);

// X^+ restricted to singular values strictly above delta * sigma_max.
struct TruncatedPinv {
  Eigen::MatrixXcd U;  // dI x r
  Eigen::VectorXd sigma;  // retained, descending
  Eigen::MatrixXcd V;  // (K+1) x r
  Eigen::VectorXd singular_values;  // full spectrum of X
  int rank = 0;

  Eigen::MatrixXcd dense() const;  // V diag(1/sigma) U^dag
};

TruncatedPinv truncated_pinv(const Eigen::MatrixXcd& X, double delta);

// A = Xp X^+ kept in the factored form A = B U^dag with B = Xp V diag(1/sigma).
struct SystemMatrix {
  Eigen::MatrixXcd B;  // dI x r
  Eigen::MatrixXcd U;  // dI x r
  TruncatedPinv pinv;
  SignalMode mode = SignalMode::real;

  Eigen::MatrixXcd dense() const { return B * U.adjoint(); }
  Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const { return B * (U.adjoint() * x); }
  Eigen::MatrixXcd apply(const Eigen::MatrixXcd& x) const { return B * (U.adjoint() * x); }
  Eigen::Index dim() const { return B.rows(); }
};

SystemMatrix solve_factored(const HankelPair& pair, double delta);
Eigen::MatrixXcd solve_system_matrix(const HankelPair& pair, double delta);

struct ModmdEstimate {
  // Survivors of the magnitude floor (and, in real mode, the conjugate
  // deduplication) in descending phase order.
  Eigen::VectorXcd eigenvalues;
  Eigen::VectorXd magnitudes;
  // First n_eig of the survivors.
  Eigen::VectorXd energies;
  // Row n is the left eigenvector for energies(n), normalized so that it
  // pairs to 1 with the matching right eigenvector.
  Eigen::MatrixXcd left_vectors;
  Eigen::MatrixXcd right_vectors;  // columns
  Eigen::VectorXd singular_values;
  int retained_rank = 0;
  // 1-norm condition number of the eigenvector basis.
  double eigvec_condition = 1.0;
  bool ill_conditioned = false;
  double dt = 0.0;
  int d = 0;
  int I = 0;
};

inline constexpr double kDefaultMagnitudeFloor = 0.2;
inline constexpr double kIllConditionedThreshold = 1e10;

// Dense eigendecomposition of A.
ModmdEstimate extract_eigen(const Eigen::MatrixXcd& A, double dt, int n_eig,
                            double magnitude_floor = kDefaultMagnitudeFloor,
                            SignalMode mode = SignalMode::complex);

// Same spectrum through the r x r projected matrix U^dag B.
ModmdEstimate extract_eigen(const SystemMatrix& A, double dt, int n_eig,
                            double magnitude_floor = kDefaultMagnitudeFloor);

struct ModmdConfig {
  int d = 1;
  int K = 0;
  double dt = 0.0;  // 0 means take the signal's dt
  double svd_threshold = 1e-2;
  int n_eig = 1;
  double magnitude_floor = kDefaultMagnitudeFloor;

  double ratio() const { return d > 0 ? static_cast<double>(K) / d : 0.0; }
  void validate(int I) const;
};

struct ModmdRun {
  ModmdEstimate estimate;
  SystemMatrix system;
  HankelPair pair;
  double residual = 0.0;
};

ModmdEstimate run_modmd(const MultiObservableSignal& signal, const ModmdConfig& config);
// Keeps the Hankel pair and system matrix for forecasting and diagnostics.
ModmdRun run_modmd_full(const MultiObservableSignal& signal, const ModmdConfig& config);

// Single-observable baseline on row `row` of the signal.
ModmdEstimate run_odmd(const MultiObservableSignal& signal, const ModmdConfig& config, int row = 0);

MultiObservableSignal select_rows(const MultiObservableSignal& signal, const std::vector<int>& rows);

StateVector estimate_eigenstate(const ModmdEstimate& est, int n, const SpectralDecomposition& spec,
                                const StateVector& phi0, const std::vector<PauliSum>& observables);

// Predicted s_{K+d+1}, ..., s_{K+d+horizon} as an I x horizon block.
Eigen::MatrixXcd forecast(const Eigen::MatrixXcd& A, const HankelPair& pair, int horizon);
Eigen::MatrixXcd forecast(const SystemMatrix& A, const HankelPair& pair, int horizon);

// Last row block of A^j x0 for j = 0..steps-1.
Eigen::MatrixXcd propagate(const Eigen::MatrixXcd& A, const Eigen::VectorXcd& x0, int I, int steps);

double residual(const Eigen::MatrixXcd& A, const HankelPair& pair);
double residual(const SystemMatrix& A, const HankelPair& pair);

double select_time_step(double E_min_bound, double E_max_bound, const std::vector<double>& gap_bounds,
                        double safety = 1.0);

double theorem1_bound(int d, double dt, double E0, double E1, double Emax, double overlap_sq);

}  // namespace modmd
