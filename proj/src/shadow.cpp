#include "modmd/shadow.hpp"

#include "modmd/errors.hpp"
#include "modmd/seed.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace modmd {

RankTwoObservable build_gamma(const PauliSum& O, const StateVector& phi0,
                              const StateVector& phi_perp, GammaPart part) {
  if (O.n_qubits() != phi0.n_qubits || phi_perp.n_qubits != phi0.n_qubits)
    throw std::invalid_argument("gamma: qubit count mismatch");
  if (phi0.n_qubits + 1 > kStateVectorQubitCap)
    throw ResourceError("gamma register exceeds state-vector cap");
  const Eigen::Index N = phi0.amplitudes.size();
  RankTwoObservable g;
  g.n_system = phi0.n_qubits;
  g.part = part;
  g.u = Eigen::VectorXcd::Zero(2 * N);
  g.v = Eigen::VectorXcd::Zero(2 * N);
  g.u.tail(N) = modmd::apply(O, phi0.amplitudes);
  g.v.head(N) = phi_perp.amplitudes;
  return g;
}

Eigen::MatrixXcd dense_gamma(const RankTwoObservable& g) {
  const Eigen::MatrixXcd uv = g.u * g.v.adjoint();
  if (g.part == GammaPart::real) return uv + uv.adjoint();
  const Eigen::MatrixXcd iuv = cplx(0.0, 1.0) * uv;
  return iuv + iuv.adjoint();
}

namespace {

double trace_gamma(const RankTwoObservable& g) {
  const cplx vu = g.v.dot(g.u);
  return g.part == GammaPart::real ? 2.0 * vu.real() : -2.0 * vu.imag();
}

}  // namespace

double trace_gamma_sq(const RankTwoObservable& g) {
  const cplx vu = g.v.dot(g.u);
  const double cross = 2.0 * (vu * vu).real();
  const double norms = 2.0 * g.u.squaredNorm() * g.v.squaredNorm();
  return g.part == GammaPart::real ? norms + cross : norms - cross;
}

double gamma_quadratic_form(const RankTwoObservable& g, const Eigen::VectorXcd& w) {
  const cplx z = w.dot(g.u) * g.v.dot(w);
  return g.part == GammaPart::real ? 2.0 * z.real() : -2.0 * z.imag();
}

double exact_trace(const CompositeState& state, const RankTwoObservable& g) {
  if (state.amplitudes.size() != g.u.size())
    throw std::invalid_argument("state and gamma dimensions differ");
  return gamma_quadratic_form(g, state.amplitudes);
}

double variance_bound(const RankTwoObservable& g) { return 3.0 * trace_gamma_sq(g); }

RandomUnitary::RandomUnitary(std::size_t dim, std::uint64_t seed, UnitaryEnsemble ensemble)
    : dim_(dim), ensemble_(ensemble) {
  if (dim == 0) throw std::invalid_argument("unitary dimension must be positive");
  if (ensemble_ == UnitaryEnsemble::identity) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  reflectors_.reserve(dim - 1);
  for (std::size_t j = 0; j + 1 < dim; ++j) {
    const std::size_t m = dim - j;
    Eigen::VectorXcd g(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double re = normal(rng);
      g(i) = cplx(re, normal(rng));
    }
    const double gn = g.norm();
    const double a0 = std::abs(g(0));
    const cplx phase = a0 > 0.0 ? g(0) / a0 : cplx(1.0);
    // H g = -phase*|g| e_1; the sign choice avoids cancellation.
    g(0) += phase * gn;
    g /= g.norm();
    reflectors_.push_back(std::move(g));
  }
  phases_.resize(dim);
  for (std::size_t i = 0; i < dim; ++i)
    phases_(i) = std::polar(1.0, 2.0 * std::numbers::pi * uniform01(rng));
}

Eigen::VectorXcd RandomUnitary::apply(const Eigen::VectorXcd& x) const {
  if (static_cast<std::size_t>(x.size()) != dim_) throw std::invalid_argument("dimension mismatch");
  if (ensemble_ == UnitaryEnsemble::identity) return x;
  Eigen::VectorXcd y = phases_.cwiseProduct(x);
  for (std::size_t jj = reflectors_.size(); jj-- > 0;) {
    const auto& r = reflectors_[jj];
    auto seg = y.tail(r.size());
    const cplx proj = r.dot(seg);
    seg -= 2.0 * proj * r;
  }
  return y;
}

Eigen::VectorXcd RandomUnitary::apply_adjoint(const Eigen::VectorXcd& x) const {
  if (static_cast<std::size_t>(x.size()) != dim_) throw std::invalid_argument("dimension mismatch");
  if (ensemble_ == UnitaryEnsemble::identity) return x;
  Eigen::VectorXcd y = x;
  for (const auto& r : reflectors_) {
    auto seg = y.tail(r.size());
    const cplx proj = r.dot(seg);
    seg -= 2.0 * proj * r;
  }
  return phases_.conjugate().cwiseProduct(y);
}

Eigen::MatrixXcd RandomUnitary::materialize() const {
  Eigen::MatrixXcd U(dim_, dim_);
  for (std::size_t j = 0; j < dim_; ++j)
    U.col(j) = apply(Eigen::VectorXcd::Unit(dim_, j));
  return U;
}

std::vector<ShadowSample> sample_shadows(const CompositeState& state, int Q, std::uint64_t seed,
                                         UnitaryEnsemble ensemble) {
  if (Q < 1) throw std::invalid_argument("shadow count Q must be >= 1");
  const int n_bits = state.n_system + 1;
  if (n_bits > kStateVectorQubitCap) throw ResourceError("shadow register exceeds state-vector cap");
  const std::size_t D = std::size_t{1} << n_bits;
  if (static_cast<std::size_t>(state.amplitudes.size()) != D)
    throw std::invalid_argument("composite state has wrong length");

  std::vector<ShadowSample> out;
  out.reserve(Q);
  for (int q = 0; q < Q; ++q) {
    const std::uint64_t useed = derive_seed(seed, {static_cast<std::uint64_t>(q), 0});
    const RandomUnitary U(D, useed, ensemble);
    const Eigen::VectorXcd rotated = U.apply(state.amplitudes);
    std::mt19937_64 rng(derive_seed(seed, {static_cast<std::uint64_t>(q), 1}));
    const double target = uniform01(rng) * rotated.squaredNorm();
    double acc = 0.0;
    std::uint32_t b = static_cast<std::uint32_t>(D - 1);
    for (std::size_t i = 0; i < D; ++i) {
      acc += std::norm(rotated(i));
      if (target < acc) {
        b = static_cast<std::uint32_t>(i);
        break;
      }
    }
    out.push_back({useed, b, n_bits});
  }
  return out;
}

std::vector<double> shot_values(const std::vector<ShadowSample>& shadows,
                                const RankTwoObservable& gamma, UnitaryEnsemble ensemble) {
  const std::size_t D = static_cast<std::size_t>(gamma.u.size());
  const double trace = trace_gamma(gamma);
  std::vector<double> vals;
  vals.reserve(shadows.size());
  for (const auto& s : shadows) {
    if ((std::size_t{1} << s.n_bits) != D)
      throw std::invalid_argument("shadow register does not match gamma");
    const RandomUnitary U(D, s.unitary_seed, ensemble);
    const Eigen::VectorXcd w = U.apply_adjoint(Eigen::VectorXcd::Unit(D, s.outcome));
    vals.push_back((D + 1.0) * gamma_quadratic_form(gamma, w) - trace);
  }
  return vals;
}

std::vector<double> estimate_traces(const std::vector<ShadowSample>& shadows,
                                    const std::vector<RankTwoObservable>& gammas,
                                    UnitaryEnsemble ensemble) {
  if (shadows.empty()) throw std::invalid_argument("empty shadow list");
  if (gammas.empty()) return {};
  const std::size_t D = static_cast<std::size_t>(gammas.front().u.size());
  std::vector<double> traces;
  for (const auto& g : gammas) {
    if (static_cast<std::size_t>(g.u.size()) != D)
      throw std::invalid_argument("gammas act on different registers");
    traces.push_back(trace_gamma(g));
  }
  std::vector<double> acc(gammas.size(), 0.0);
  for (const auto& s : shadows) {
    if ((std::size_t{1} << s.n_bits) != D)
      throw std::invalid_argument("shadow register does not match gamma");
    const RandomUnitary U(D, s.unitary_seed, ensemble);
    const Eigen::VectorXcd w = U.apply_adjoint(Eigen::VectorXcd::Unit(D, s.outcome));
    for (std::size_t j = 0; j < gammas.size(); ++j)
      acc[j] += (D + 1.0) * gamma_quadratic_form(gammas[j], w) - traces[j];
  }
  for (auto& a : acc) a /= static_cast<double>(shadows.size());
  return acc;
}

double estimate_trace(const std::vector<ShadowSample>& shadows, const RankTwoObservable& gamma,
                      UnitaryEnsemble ensemble) {
  return estimate_traces(shadows, {gamma}, ensemble).front();
}

MultiObservableSignal shadow_signal(const SpectralDecomposition& spec, const StateVector& phi0,
                                    const StateVector& phi_perp,
                                    const std::vector<PauliSum>& observables, double dt, int k_max,
                                    int Q, std::uint64_t seed, SignalMode mode,
                                    ShadowRunInfo* info) {
  if (!(dt > 0.0) || k_max < 0) throw std::invalid_argument("invalid dt or k_max");
  if (observables.empty()) throw std::invalid_argument("observable list is empty");
  if (Q < 1) throw std::invalid_argument("shadow count Q must be >= 1");
  const int I = static_cast<int>(observables.size());

  std::vector<RankTwoObservable> gammas;
  for (const auto& O : observables) gammas.push_back(build_gamma(O, phi0, phi_perp, GammaPart::real));
  if (mode == SignalMode::complex)
    for (const auto& O : observables) gammas.push_back(build_gamma(O, phi0, phi_perp, GammaPart::imag));

  MultiObservableSignal s;
  s.dt = dt;
  s.mode = mode;
  s.values = Eigen::MatrixXcd::Zero(I, k_max + 1);
  for (int k = 0; k <= k_max; ++k) {
    const CompositeState state = composite_state(phi_perp, phi0, spec, k * dt);
    const auto batch = sample_shadows(state, Q, derive_seed(seed, {static_cast<std::uint64_t>(k)}));
    const std::vector<double> est = estimate_traces(batch, gammas);
    for (int i = 0; i < I; ++i)
      s.values(i, k) = mode == SignalMode::complex ? cplx(est[i], est[I + i]) : cplx(est[i], 0.0);
    if (info) {
      ++info->batches;
      info->shots += Q;
    }
  }
  return s;
}

MultiObservableSignal gaussian_noise_channel(const MultiObservableSignal& signal,
                                             const NoiseSpec& noise) {
  if (!(noise.epsilon >= 0.0)) throw std::invalid_argument("noise epsilon must be >= 0");
  MultiObservableSignal out = signal;
  if (noise.epsilon == 0.0) return out;
  const bool do_re = noise.target != NoiseTarget::imag;
  const bool do_im = noise.target != NoiseTarget::real && signal.mode == SignalMode::complex;
  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> normal(0.0, noise.epsilon);
  for (Eigen::Index k = 0; k < out.values.cols(); ++k) {
    for (Eigen::Index i = 0; i < out.values.rows(); ++i) {
      double re = out.values(i, k).real(), im = out.values(i, k).imag();
      if (do_re) re += normal(rng);
      if (do_im) im += normal(rng);
      out.values(i, k) = cplx(re, im);
    }
  }
  return out;
}

int shot_budget(int I, double max_kappa_l1, double eps1, double c0) {
  if (I < 1 || !(max_kappa_l1 > 0.0) || !(eps1 > 0.0) || !(c0 > 0.0))
    throw std::invalid_argument("shot_budget needs positive arguments");
  const double q = std::ceil(c0 * std::log(std::max(I, 2)) * max_kappa_l1 * max_kappa_l1 /
                             (eps1 * eps1));
  if (q > 2.0e9) throw ResourceError("shot budget exceeds integer range");
  return static_cast<int>(q);
}

}  // namespace modmd
