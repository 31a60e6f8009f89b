#pragma once

#include "modmd/quantum_sim.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace modmd {

enum class GammaPart { real, imag };

// Gamma = u v^dag + v u^dag (real) or i u v^dag - i v u^dag (imag), on the
// ancilla+system register. Never materialized except by dense_gamma.
struct RankTwoObservable {
  int n_system = 0;
  Eigen::VectorXcd u;  // (Id_a x O)|1, phi0>
  Eigen::VectorXcd v;  // |0, phi_perp>
  GammaPart part = GammaPart::real;
};

RankTwoObservable build_gamma(const PauliSum& O, const StateVector& phi0,
                              const StateVector& phi_perp, GammaPart part = GammaPart::real);

Eigen::MatrixXcd dense_gamma(const RankTwoObservable& g);
double trace_gamma_sq(const RankTwoObservable& g);
// Tr[rho Gamma] for rho = |state><state|.
double exact_trace(const CompositeState& state, const RankTwoObservable& g);
// <w|Gamma|w>.
double gamma_quadratic_form(const RankTwoObservable& g, const Eigen::VectorXcd& w);

// 3 Tr[Gamma^2], the shadow-norm bound on the single-shot variance.
double variance_bound(const RankTwoObservable& g);

enum class UnitaryEnsemble { haar, identity };

// Haar unitary on dimension D, regenerated from a seed as a product of
// D-1 Householder reflections of Gaussian vectors times a diagonal of
// uniform phases. Application costs O(D^2) and storage O(D^2) only while
// the object lives.
class RandomUnitary {
 public:
  RandomUnitary(std::size_t dim, std::uint64_t seed, UnitaryEnsemble ensemble = UnitaryEnsemble::haar);

  Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const;          // U x
  Eigen::VectorXcd apply_adjoint(const Eigen::VectorXcd& x) const;  // U^dag x
  Eigen::MatrixXcd materialize() const;
  std::size_t dim() const { return dim_; }

 private:
  std::size_t dim_;
  UnitaryEnsemble ensemble_;
  // Column j holds the reflector acting on coordinates j..D-1 (unit norm).
  std::vector<Eigen::VectorXcd> reflectors_;
  Eigen::VectorXcd phases_;
};

struct ShadowSample {
  std::uint64_t unitary_seed = 0;
  std::uint32_t outcome = 0;
  int n_bits = 0;
};

std::vector<ShadowSample> sample_shadows(const CompositeState& state, int Q, std::uint64_t seed,
                                         UnitaryEnsemble ensemble = UnitaryEnsemble::haar);

// Single-shot estimator values (D+1)<w|Gamma|w> - Tr Gamma, w = U^dag|b>.
std::vector<double> shot_values(const std::vector<ShadowSample>& shadows,
                                const RankTwoObservable& gamma,
                                UnitaryEnsemble ensemble = UnitaryEnsemble::haar);

double estimate_trace(const std::vector<ShadowSample>& shadows, const RankTwoObservable& gamma,
                      UnitaryEnsemble ensemble = UnitaryEnsemble::haar);

// All gammas from one pass; each unitary is regenerated once.
std::vector<double> estimate_traces(const std::vector<ShadowSample>& shadows,
                                    const std::vector<RankTwoObservable>& gammas,
                                    UnitaryEnsemble ensemble = UnitaryEnsemble::haar);

struct ShadowRunInfo {
  int batches = 0;
  long long shots = 0;
};

// One fresh batch of Q shadows per time step; all observables (and in
// complex mode both parts) are estimated from that batch.
MultiObservableSignal shadow_signal(const SpectralDecomposition& spec, const StateVector& phi0,
                                    const StateVector& phi_perp,
                                    const std::vector<PauliSum>& observables, double dt, int k_max,
                                    int Q, std::uint64_t seed, SignalMode mode = SignalMode::real,
                                    ShadowRunInfo* info = nullptr);

enum class NoiseTarget { real, imag, both };

struct NoiseSpec {
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  NoiseTarget target = NoiseTarget::both;
};

MultiObservableSignal gaussian_noise_channel(const MultiObservableSignal& signal,
                                             const NoiseSpec& noise);

int shot_budget(int I, double max_kappa_l1, double eps1, double c0 = 34.0);

}  // namespace modmd
