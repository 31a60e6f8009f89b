#include "modmd/solver.hpp"

#include "modmd/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace modmd {

HankelPair build_hankel(const MultiObservableSignal& signal, int d, int K) {
  if (d < 1) throw std::invalid_argument("block depth d must be >= 1");
  if (K < 0) throw std::invalid_argument("K must be >= 0");
  const int I = signal.n_observables();
  if (I < 1) throw std::invalid_argument("signal has no observables");
  if (signal.n_steps() < K + d + 1)
    throw std::invalid_argument("Hankel pair needs " + std::to_string(K + d + 1) +
                                " samples, signal has " + std::to_string(signal.n_steps()));
  HankelPair p;
  p.d = d;
  p.I = I;
  p.dt = signal.dt;
  p.mode = signal.mode;
  p.X.resize(static_cast<Eigen::Index>(d) * I, K + 1);
  p.Xp.resize(static_cast<Eigen::Index>(d) * I, K + 1);
  for (int k = 0; k <= K; ++k) {
    for (int a = 0; a < d; ++a) {
      p.X.block(a * I, k, I, 1) = signal.values.col(k + a);
      p.Xp.block(a * I, k, I, 1) = signal.values.col(k + a + 1);
    }
  }
  return p;
}

Eigen::MatrixXcd TruncatedPinv::dense() const {
  return V * sigma.cwiseInverse().asDiagonal() * U.adjoint();
}

namespace {

bool is_real(const Eigen::MatrixXcd& M) { return M.imag().cwiseAbs().maxCoeff() == 0.0; }

template <class Matrix>
TruncatedPinv pinv_from_svd(const Matrix& X, double delta) {
  Eigen::BDCSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  TruncatedPinv out;
  out.singular_values = svd.singularValues();
  const double smax = out.singular_values.size() ? out.singular_values(0) : 0.0;
  if (!(smax > 0.0)) throw DegenerateInputError("data matrix is identically zero");
  int r = 0;
  while (r < out.singular_values.size() && out.singular_values(r) > delta * smax) ++r;
  out.rank = r;
  out.sigma = out.singular_values.head(r);
  out.U = svd.matrixU().leftCols(r).template cast<cplx>();
  out.V = svd.matrixV().leftCols(r).template cast<cplx>();
  return out;
}

}  // namespace

TruncatedPinv truncated_pinv(const Eigen::MatrixXcd& X, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("SVD threshold must lie in (0, 1)");
  if (X.size() == 0) throw DegenerateInputError("data matrix is empty");
  if (is_real(X)) return pinv_from_svd<Eigen::MatrixXd>(X.real(), delta);
  return pinv_from_svd<Eigen::MatrixXcd>(X, delta);
}

SystemMatrix solve_factored(const HankelPair& pair, double delta) {
  SystemMatrix A;
  A.pinv = truncated_pinv(pair.X, delta);
  A.U = A.pinv.U;
  A.B = pair.Xp * A.pinv.V * A.pinv.sigma.cwiseInverse().asDiagonal();
  A.mode = pair.mode;
  return A;
}

Eigen::MatrixXcd solve_system_matrix(const HankelPair& pair, double delta) {
  return solve_factored(pair, delta).dense();
}

namespace {

struct SmallEigen {
  Eigen::VectorXcd values;
  Eigen::MatrixXcd vectors;
};

SmallEigen small_eigen(const Eigen::MatrixXcd& M, bool real_input) {
  SmallEigen out;
  if (M.rows() == 0) return out;
  if (real_input) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(M.real());
    if (es.info() != Eigen::Success) throw std::runtime_error("nonsymmetric eigensolver failed");
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors();
  } else {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(M);
    if (es.info() != Eigen::Success) throw std::runtime_error("nonsymmetric eigensolver failed");
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors();
  }
  return out;
}

// Eigenpairs of the small matrix M, lifted to the full space by
// right = R_map(w, lambda) and left = L_map(y).
template <class RightMap, class LeftMap>
ModmdEstimate assemble(const Eigen::MatrixXcd& M, bool real_mode, double dt, int n_eig,
                       double floor, RightMap right_map, LeftMap left_map) {
  if (n_eig < 1) throw std::invalid_argument("n_eig must be >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const SmallEigen eig = small_eigen(M, real_mode && is_real(M));

  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < eig.values.size(); ++j) {
    const cplx lam = eig.values(j);
    if (std::abs(lam) < floor) continue;
    // A real signal carries e^{+iEt} and e^{-iEt}; keep the upper half plane.
    if (real_mode && lam.imag() < 0.0) continue;
    keep.push_back(j);
  }
  std::stable_sort(keep.begin(), keep.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::arg(eig.values(a)) > std::arg(eig.values(b));
  });

  ModmdEstimate est;
  est.dt = dt;
  est.eigenvalues.resize(keep.size());
  est.magnitudes.resize(keep.size());
  for (std::size_t j = 0; j < keep.size(); ++j) {
    est.eigenvalues(j) = eig.values(keep[j]);
    est.magnitudes(j) = std::abs(eig.values(keep[j]));
  }
  if (static_cast<int>(keep.size()) < n_eig) {
    std::vector<cplx> survivors(est.eigenvalues.data(), est.eigenvalues.data() + keep.size());
    throw ShortfallError("only " + std::to_string(keep.size()) + " eigenvalues survived, " +
                             std::to_string(n_eig) + " requested",
                         std::move(survivors));
  }

  const Eigen::Index r = M.rows();
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(eig.vectors);
  Eigen::MatrixXcd Y = lu.inverse();
  const auto norm1 = [](const Eigen::MatrixXcd& A) { return A.cwiseAbs().colwise().sum().maxCoeff(); };
  est.eigvec_condition = norm1(eig.vectors) * norm1(Y);
  if (!std::isfinite(est.eigvec_condition)) est.eigvec_condition = std::numeric_limits<double>::infinity();
  est.ill_conditioned = !(est.eigvec_condition <= kIllConditionedThreshold);

  est.energies.resize(n_eig);
  for (int n = 0; n < n_eig; ++n) {
    const Eigen::Index j = keep[n];
    const cplx lam = eig.values(j);
    est.energies(n) = -std::arg(lam) / dt;
    Eigen::VectorXcd w = eig.vectors.col(j);
    Eigen::RowVectorXcd y = Y.row(j);
    if (est.ill_conditioned) {
      // Nullspace vectors of M - lambda; does not depend on the inverse.
      Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M - lam * Eigen::MatrixXcd::Identity(r, r),
                                             Eigen::ComputeFullU | Eigen::ComputeFullV);
      w = svd.matrixV().col(r - 1);
      y = svd.matrixU().col(r - 1).adjoint();
      const cplx pair = y * w;
      if (std::abs(pair) > 0.0) y /= pair;
    }
    const Eigen::VectorXcd right = right_map(w, lam);
    const Eigen::RowVectorXcd left = left_map(y);
    if (n == 0) {
      est.left_vectors.resize(n_eig, left.size());
      est.right_vectors.resize(right.size(), n_eig);
    }
    est.left_vectors.row(n) = left;
    est.right_vectors.col(n) = right;
  }
  return est;
}

}  // namespace

ModmdEstimate extract_eigen(const Eigen::MatrixXcd& A, double dt, int n_eig, double magnitude_floor,
                            SignalMode mode) {
  if (A.rows() != A.cols()) throw std::invalid_argument("system matrix must be square");
  return assemble(
      A, mode == SignalMode::real, dt, n_eig, magnitude_floor,
      [](const Eigen::VectorXcd& w, cplx) { return w; },
      [](const Eigen::RowVectorXcd& y) { return y; });
}

ModmdEstimate extract_eigen(const SystemMatrix& A, double dt, int n_eig, double magnitude_floor) {
  const Eigen::MatrixXcd M = A.U.adjoint() * A.B;
  ModmdEstimate est = assemble(
      M, A.mode == SignalMode::real, dt, n_eig, magnitude_floor,
      [&](const Eigen::VectorXcd& w, cplx lam) -> Eigen::VectorXcd { return A.B * w / lam; },
      [&](const Eigen::RowVectorXcd& y) -> Eigen::RowVectorXcd { return y * A.U.adjoint(); });
  est.singular_values = A.pinv.singular_values;
  est.retained_rank = A.pinv.rank;
  return est;
}

void ModmdConfig::validate(int I) const {
  if (d < 1) throw std::invalid_argument("d must be >= 1");
  if (K < 0) throw std::invalid_argument("K must be >= 0");
  if (!(svd_threshold > 0.0 && svd_threshold < 1.0))
    throw std::invalid_argument("svd_threshold must lie in (0, 1)");
  if (n_eig < 1 || n_eig > d * I) throw std::invalid_argument("n_eig must lie in [1, d*I]");
  if (dt < 0.0) throw std::invalid_argument("dt must be nonnegative");
  if (!(magnitude_floor >= 0.0)) throw std::invalid_argument("magnitude floor must be >= 0");
}

ModmdRun run_modmd_full(const MultiObservableSignal& signal, const ModmdConfig& config) {
  config.validate(signal.n_observables());
  if (config.dt > 0.0 && std::abs(config.dt - signal.dt) > 1e-14 * signal.dt)
    throw std::invalid_argument("config dt differs from the signal's time step");
  ModmdRun run;
  run.pair = build_hankel(signal, config.d, config.K);
  run.system = solve_factored(run.pair, config.svd_threshold);
  run.estimate = extract_eigen(run.system, signal.dt, config.n_eig, config.magnitude_floor);
  run.estimate.d = config.d;
  run.estimate.I = signal.n_observables();
  run.residual = residual(run.system, run.pair);
  return run;
}

ModmdEstimate run_modmd(const MultiObservableSignal& signal, const ModmdConfig& config) {
  return run_modmd_full(signal, config).estimate;
}

MultiObservableSignal select_rows(const MultiObservableSignal& signal, const std::vector<int>& rows) {
  MultiObservableSignal out;
  out.dt = signal.dt;
  out.mode = signal.mode;
  out.values.resize(rows.size(), signal.n_steps());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (rows[j] < 0 || rows[j] >= signal.n_observables())
      throw std::invalid_argument("signal row out of range");
    out.values.row(j) = signal.values.row(rows[j]);
  }
  return out;
}

ModmdEstimate run_odmd(const MultiObservableSignal& signal, const ModmdConfig& config, int row) {
  return run_modmd(select_rows(signal, {row}), config);
}

StateVector estimate_eigenstate(const ModmdEstimate& est, int n, const SpectralDecomposition& spec,
                                const StateVector& phi0, const std::vector<PauliSum>& observables) {
  if (n < 0 || n >= est.left_vectors.rows()) throw std::invalid_argument("eigenstate index out of range");
  const int I = static_cast<int>(observables.size());
  if (I != est.I || est.left_vectors.cols() != static_cast<Eigen::Index>(est.d) * I)
    throw std::invalid_argument("observable list does not match the estimate");
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(phi0.amplitudes.size());
  for (int a = 0; a < est.d; ++a) {
    const StateVector phit = evolve(spec, phi0, a * est.dt);
    for (int i = 0; i < I; ++i)
      psi += est.left_vectors(n, a * I + i) * modmd::apply(observables[i], phit.amplitudes);
  }
  const double nrm = psi.norm();
  if (!(nrm > 0.0)) throw DegenerateInputError("eigenstate combination vanished");
  return StateVector(phi0.n_qubits, psi / nrm);
}

namespace {

template <class Op>
Eigen::MatrixXcd forecast_impl(const Op& A, const HankelPair& pair, int horizon) {
  if (horizon < 0) throw std::invalid_argument("horizon must be >= 0");
  const Eigen::Index n = pair.X.rows();
  if (A.rows() != n) throw std::invalid_argument("system matrix does not match Hankel rows");
  Eigen::MatrixXcd out(pair.I, horizon);
  Eigen::VectorXcd x = pair.X.col(pair.X.cols() - 1);
  x = A.apply(x);  // last block is now s_{K+d}, already observed
  for (int j = 0; j < horizon; ++j) {
    x = A.apply(x);
    out.col(j) = x.tail(pair.I);
  }
  if (pair.mode == SignalMode::real) out = out.real().cast<cplx>();
  return out;
}

struct DenseOp {
  const Eigen::MatrixXcd& M;
  Eigen::Index rows() const { return M.rows(); }
  Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const { return M * x; }
};

struct FactoredOp {
  const SystemMatrix& S;
  Eigen::Index rows() const { return S.dim(); }
  Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const { return S.apply(x); }
};

}  // namespace

Eigen::MatrixXcd forecast(const Eigen::MatrixXcd& A, const HankelPair& pair, int horizon) {
  return forecast_impl(DenseOp{A}, pair, horizon);
}

Eigen::MatrixXcd forecast(const SystemMatrix& A, const HankelPair& pair, int horizon) {
  return forecast_impl(FactoredOp{A}, pair, horizon);
}

Eigen::MatrixXcd propagate(const Eigen::MatrixXcd& A, const Eigen::VectorXcd& x0, int I, int steps) {
  if (A.rows() != A.cols() || A.rows() != x0.size() || I < 1 || x0.size() % I != 0)
    throw std::invalid_argument("propagate: dimension mismatch");
  Eigen::MatrixXcd out(I, steps);
  Eigen::VectorXcd x = x0;
  for (int j = 0; j < steps; ++j) {
    out.col(j) = x.tail(I);
    x = A * x;
  }
  return out;
}

double residual(const Eigen::MatrixXcd& A, const HankelPair& pair) {
  const double denom = pair.Xp.norm();
  if (denom == 0.0) return 0.0;
  return (pair.Xp - A * pair.X).norm() / denom;
}

double residual(const SystemMatrix& A, const HankelPair& pair) {
  const double denom = pair.Xp.norm();
  if (denom == 0.0) return 0.0;
  return (pair.Xp - A.B * (A.U.adjoint() * pair.X)).norm() / denom;
}

double select_time_step(double E_min_bound, double E_max_bound, const std::vector<double>& gap_bounds,
                        double safety) {
  if (!(E_max_bound > E_min_bound)) throw std::invalid_argument("degenerate spectral range");
  if (!(safety > 0.0 && safety <= 1.0)) throw std::invalid_argument("safety must lie in (0, 1]");
  const double range = E_max_bound - E_min_bound;
  double dt;
  if (gap_bounds.empty()) {
    dt = safety * 2.0 * std::numbers::pi / (2.0 * range);
  } else {
    double below = 0.0;  // Delta_{0,n}
    double worst = -std::numeric_limits<double>::infinity();
    for (double g : gap_bounds) {
      if (g < 0.0) throw std::invalid_argument("gap bounds must be nonnegative");
      worst = std::max(worst, g - below);
      below += g;
    }
    dt = safety * 2.0 * std::numbers::pi / (range + worst);
  }
  if (!(dt * range < 2.0 * std::numbers::pi))
    dt = std::nextafter(2.0 * std::numbers::pi / range, 0.0);
  return dt;
}

double theorem1_bound(int d, double dt, double E0, double E1, double Emax, double overlap_sq) {
  if (!(overlap_sq > 0.0 && overlap_sq <= 1.0)) throw std::invalid_argument("overlap must lie in (0, 1]");
  if (d < 1) throw std::invalid_argument("d must be >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const double eps = 1.0 + 3.0 * (E1 - E0) * dt / (2.0 * std::numbers::pi);
  const double tan2 = (1.0 - overlap_sq) / overlap_sq;
  return std::abs(std::sin((Emax - E0) * dt)) / (std::pow(eps, 2.0 * (d - 1)) * dt) * tan2;
}

}  // namespace modmd
