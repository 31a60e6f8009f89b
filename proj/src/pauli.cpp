#include "modmd/pauli.hpp"

#include "modmd/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace modmd {

namespace {

std::uint32_t qubit_bit(int n, int q) { return std::uint32_t{1} << (n - 1 - q); }

void check_qubits(int n) {
  if (n < 1 || n > kMaxPauliQubits)
    throw std::invalid_argument("qubit count must be in [1, " + std::to_string(kMaxPauliQubits) +
                                "], got " + std::to_string(n));
}

void check_dense_cap(int n) {
  if (n > kDenseMatrixQubitCap)
    throw ResourceError("dense matrix on " + std::to_string(n) + " qubits exceeds cap of " +
                        std::to_string(kDenseMatrixQubitCap));
}

}  // namespace

PauliString::PauliString(int n_qubits, std::uint32_t x_mask, std::uint32_t z_mask)
    : n_(n_qubits), x_(x_mask), z_(z_mask) {
  check_qubits(n_qubits);
  if (n_qubits < 32 && ((x_mask | z_mask) >> n_qubits) != 0)
    throw std::invalid_argument("Pauli mask has bits beyond qubit count");
  n_y_ = std::popcount(x_ & z_);
}

PauliString PauliString::from_label(const std::string& label) {
  const int n = static_cast<int>(label.size());
  check_qubits(n);
  std::uint32_t x = 0, z = 0;
  for (int q = 0; q < n; ++q) {
    const std::uint32_t bit = qubit_bit(n, q);
    switch (label[q]) {
      case 'I': break;
      case 'X': x |= bit; break;
      case 'Y': x |= bit; z |= bit; break;
      case 'Z': z |= bit; break;
      default:
        throw std::invalid_argument(std::string("illegal Pauli axis '") + label[q] + "'");
    }
  }
  return PauliString(n, x, z);
}

PauliString PauliString::single(int n_qubits, int q, char axis) {
  if (q < 0 || q >= n_qubits) throw std::invalid_argument("qubit index out of range");
  std::string label(n_qubits, 'I');
  label[q] = axis;
  return from_label(label);
}

char PauliString::axis(int q) const {
  const std::uint32_t bit = qubit_bit(n_, q);
  const bool x = x_ & bit, z = z_ & bit;
  if (x && z) return 'Y';
  if (x) return 'X';
  if (z) return 'Z';
  return 'I';
}

std::string PauliString::label() const {
  std::string s(n_, 'I');
  for (int q = 0; q < n_; ++q) s[q] = axis(q);
  return s;
}

int PauliString::weight() const { return std::popcount(x_ | z_); }

cplx PauliString::phase_on(std::uint32_t b) const {
  static const cplx ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  int k = n_y_ + 2 * (std::popcount(b & z_) & 1);
  return ipow[k & 3];
}

PauliSum::PauliSum(int n_qubits, const std::vector<PauliTerm>& terms) : n_(n_qubits) {
  check_qubits(n_qubits);
  for (const auto& t : terms) add(t.coeff, t.string);
}

PauliSum PauliSum::identity(int n_qubits, double coeff) {
  PauliSum s(n_qubits);
  s.add(coeff, PauliString::identity(n_qubits));
  return s;
}

void PauliSum::add(double coeff, const PauliString& s) {
  if (s.n_qubits() != n_)
    throw std::invalid_argument("Pauli string has " + std::to_string(s.n_qubits()) +
                                " qubits, sum has " + std::to_string(n_));
  for (auto& t : terms_) {
    if (t.string == s) {
      t.coeff += coeff;
      return;
    }
  }
  terms_.push_back({coeff, s});
}

double PauliSum::l1_norm() const {
  double acc = 0.0;
  for (const auto& t : terms_) acc += std::abs(t.coeff);
  return acc;
}

double PauliSum::max_abs_coeff() const {
  double m = 0.0;
  for (const auto& t : terms_) m = std::max(m, std::abs(t.coeff));
  return m;
}

bool PauliSum::same_terms(const PauliSum& other, double tol) const {
  if (n_ != other.n_ || terms_.size() != other.terms_.size()) return false;
  for (const auto& t : terms_) {
    auto it = std::find_if(other.terms_.begin(), other.terms_.end(),
                           [&](const PauliTerm& o) { return o.string == t.string; });
    if (it == other.terms_.end() || std::abs(it->coeff - t.coeff) > tol) return false;
  }
  return true;
}

PauliSum parse_pauli_sum(std::istream& in) {
  std::string line;
  int lineno = 0;
  int n = -1;
  std::vector<PauliTerm> terms;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string coeff_tok, label;
    if (!(ls >> coeff_tok)) continue;
    if (!(ls >> label)) throw ParseError(lineno, "missing Pauli label");
    std::string extra;
    if (ls >> extra) throw ParseError(lineno, "unexpected token '" + extra + "'");

    double coeff = 0.0;
    std::size_t used = 0;
    try {
      coeff = std::stod(coeff_tok, &used);
    } catch (const std::exception&) {
      throw ParseError(lineno, "malformed coefficient '" + coeff_tok + "'");
    }
    if (used != coeff_tok.size() || !std::isfinite(coeff))
      throw ParseError(lineno, "malformed coefficient '" + coeff_tok + "'");

    if (n < 0) n = static_cast<int>(label.size());
    if (static_cast<int>(label.size()) != n)
      throw ParseError(lineno, "label length " + std::to_string(label.size()) + " differs from " +
                                   std::to_string(n));
    try {
      terms.push_back({coeff, PauliString::from_label(label)});
    } catch (const std::invalid_argument& e) {
      throw ParseError(lineno, e.what());
    }
  }
  if (n < 0) throw ParseError(lineno, "no terms");
  return PauliSum(n, terms);
}

PauliSum parse_pauli_sum(const std::string& text) {
  std::istringstream in(text);
  return parse_pauli_sum(in);
}

PauliSum read_pauli_sum_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open Pauli-sum file '" + path + "'");
  return parse_pauli_sum(in);
}

void write_pauli_sum(std::ostream& out, const PauliSum& sum) {
  const auto old = out.precision(17);
  for (const auto& t : sum.terms()) out << t.coeff << ' ' << t.string.label() << '\n';
  out.precision(old);
}

PauliSum build_tfim(int L, double J, double h) {
  if (L < 2) throw std::invalid_argument("TFIM needs L >= 2, got " + std::to_string(L));
  PauliSum H(L);
  // Zero couplings are omitted, so h = 0 gives the bare Ising chain.
  for (int i = 0; J != 0.0 && i + 1 < L; ++i) {
    std::string s(L, 'I');
    s[i] = s[i + 1] = 'Z';
    H.add(-J, PauliString::from_label(s));
  }
  for (int i = 0; h != 0.0 && i < L; ++i) H.add(-h, PauliString::single(L, i, 'X'));
  return H;
}

Eigen::MatrixXcd to_dense(const PauliString& p) {
  check_dense_cap(p.n_qubits());
  const std::uint32_t dim = std::uint32_t{1} << p.n_qubits();
  Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(dim, dim);
  for (std::uint32_t b = 0; b < dim; ++b) D(b ^ p.x_mask(), b) = p.phase_on(b);
  return D;
}

Eigen::MatrixXcd to_dense(const PauliSum& sum) {
  check_dense_cap(sum.n_qubits());
  const std::uint32_t dim = std::uint32_t{1} << sum.n_qubits();
  Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(dim, dim);
  for (const auto& t : sum.terms())
    for (std::uint32_t b = 0; b < dim; ++b)
      D(b ^ t.string.x_mask(), b) += t.coeff * t.string.phase_on(b);
  return D;
}

Eigen::VectorXcd apply(const PauliString& p, const Eigen::VectorXcd& x) {
  const std::uint32_t dim = std::uint32_t{1} << p.n_qubits();
  if (static_cast<std::uint32_t>(x.size()) != dim)
    throw std::invalid_argument("vector length does not match Pauli register");
  Eigen::VectorXcd y(dim);
  for (std::uint32_t b = 0; b < dim; ++b) y(b ^ p.x_mask()) = p.phase_on(b) * x(b);
  return y;
}

Eigen::VectorXcd apply(const PauliSum& sum, const Eigen::VectorXcd& x) {
  if (sum.n_qubits() > kStateVectorQubitCap)
    throw ResourceError("state vector on " + std::to_string(sum.n_qubits()) + " qubits exceeds cap");
  const std::uint32_t dim = std::uint32_t{1} << sum.n_qubits();
  if (static_cast<std::uint32_t>(x.size()) != dim)
    throw std::invalid_argument("vector length does not match Pauli register");
  Eigen::VectorXcd y = Eigen::VectorXcd::Zero(dim);
  for (const auto& t : sum.terms())
    for (std::uint32_t b = 0; b < dim; ++b)
      y(b ^ t.string.x_mask()) += t.coeff * t.string.phase_on(b) * x(b);
  return y;
}

PauliSum sort_by_weight(const PauliSum& sum) {
  std::vector<PauliTerm> terms = sum.terms();
  std::stable_sort(terms.begin(), terms.end(), [](const PauliTerm& a, const PauliTerm& b) {
    const double ma = std::abs(a.coeff), mb = std::abs(b.coeff);
    if (ma != mb) return ma > mb;
    return a.string < b.string;
  });
  return PauliSum(sum.n_qubits(), terms);
}

std::vector<PauliSum> partial_sum_observables(const PauliSum& sum, int count, int first) {
  const PauliSum sorted = sort_by_weight(sum);
  const int M = static_cast<int>(sorted.size());
  if (first < 0 || count < 1 || first + count > M + 1)
    throw std::invalid_argument("partial-sum pool needs 1 <= I and first + I <= M + 1 (M = " +
                                std::to_string(M) + ")");
  std::vector<PauliSum> out;
  out.reserve(count);
  for (int j = first; j < first + count; ++j) {
    const int keep = M - j;
    PauliSum O(sum.n_qubits());
    for (int t = 0; t < keep; ++t) O.add(sorted.terms()[t].coeff, sorted.terms()[t].string);
    out.push_back(std::move(O));
  }
  return out;
}

std::vector<PauliSum> partial_sum_observables(const PauliSum& sum, int count) {
  return partial_sum_observables(sum, count, 0);
}

std::vector<PauliSum> weight_window_observables(const PauliSum& sum, int first, int count) {
  const PauliSum sorted = sort_by_weight(sum);
  if (first < 0 || count < 1 || first + count > static_cast<int>(sorted.size()))
    throw std::invalid_argument("weight window out of range");
  std::vector<PauliSum> out;
  for (int j = first; j < first + count; ++j) {
    PauliSum O(sum.n_qubits());
    O.add(1.0, sorted.terms()[j].string);
    out.push_back(std::move(O));
  }
  return out;
}

std::vector<PauliSum> random_one_local(int L, int count, std::uint64_t seed) {
  check_qubits(L);
  if (count < 1 || count > 3 * L)
    throw std::invalid_argument("random 1-local pool needs 1 <= count <= 3L, got " +
                                std::to_string(count));
  std::vector<int> choices(3 * L);
  std::iota(choices.begin(), choices.end(), 0);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates; only the first `count` slots are used.
  for (int i = 0; i < count; ++i) {
    const auto span = static_cast<std::uint64_t>(choices.size() - i);
    const auto j = i + static_cast<int>(rng() % span);
    std::swap(choices[i], choices[j]);
  }
  static const char axes[3] = {'X', 'Y', 'Z'};
  std::vector<PauliSum> out;
  for (int i = 0; i < count; ++i) {
    PauliSum O(L);
    O.add(1.0, PauliString::single(L, choices[i] / 3, axes[choices[i] % 3]));
    out.push_back(std::move(O));
  }
  return out;
}

namespace {

PauliSum affine_image(const PauliSum& sum, const AffineShift& s) {
  PauliSum out(sum.n_qubits());
  for (const auto& t : sum.terms()) out.add(s.scale * t.coeff, t.string);
  if (s.offset != 0.0) out.add(-s.scale * s.offset, PauliString::identity(sum.n_qubits()));
  return out;
}

void check_C(double C) {
  if (!(C > 0.0 && C < 1.0)) throw std::invalid_argument("C must lie in (0, 1)");
}

}  // namespace

std::pair<PauliSum, AffineShift> shift_and_scale(const PauliSum& sum, double bound, double C) {
  if (!(bound > 0.0)) throw std::invalid_argument("spectral bound must be positive");
  check_C(C);
  AffineShift s{C * std::numbers::pi / bound, 0.0};
  return {affine_image(sum, s), s};
}

std::pair<PauliSum, AffineShift> shift_and_scale(const PauliSum& sum, double lo, double hi,
                                                 double C) {
  if (!(hi > lo)) throw std::invalid_argument("spectral bounds need hi > lo");
  check_C(C);
  AffineShift s{C * std::numbers::pi / (0.5 * (hi - lo)), 0.5 * (lo + hi)};
  return {affine_image(sum, s), s};
}

std::pair<PauliSum, AffineShift> shift_and_scale(const PauliSum& sum) {
  return shift_and_scale(sum, sum.l1_norm(), 0.9);
}

}  // namespace modmd
