#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace modmd {

using cplx = std::complex<double>;

// Largest register handled as a dense 2^L x 2^L matrix.
inline constexpr int kDenseMatrixQubitCap = 12;
// Largest register handled as a dense state vector (system + ancilla).
inline constexpr int kStateVectorQubitCap = 15;
inline constexpr int kMaxPauliQubits = 31;

// Qubit j is label character j and bit (L-1-j) of a basis index, so the
// leftmost label character is the most significant bit.
class PauliString {
 public:
  PauliString() = default;
  PauliString(int n_qubits, std::uint32_t x_mask, std::uint32_t z_mask);

  static PauliString from_label(const std::string& label);
  static PauliString identity(int n_qubits) { return PauliString(n_qubits, 0, 0); }
  // Single-qubit operator axis in {'X','Y','Z','I'} on qubit q.
  static PauliString single(int n_qubits, int q, char axis);

  int n_qubits() const { return n_; }
  std::uint32_t x_mask() const { return x_; }
  std::uint32_t z_mask() const { return z_; }
  char axis(int q) const;
  std::string label() const;
  int weight() const;
  bool is_identity() const { return x_ == 0 && z_ == 0; }

  // P|b> = phase * |b ^ x_mask>.
  cplx phase_on(std::uint32_t b) const;

  friend bool operator==(const PauliString& a, const PauliString& b) {
    return a.n_ == b.n_ && a.x_ == b.x_ && a.z_ == b.z_;
  }
  // Canonical order: per qubit I < Z < X < Y, qubit 0 most significant.
  friend bool operator<(const PauliString& a, const PauliString& b) {
    if (a.x_ != b.x_) return a.x_ < b.x_;
    return a.z_ < b.z_;
  }

 private:
  int n_ = 0;
  std::uint32_t x_ = 0;
  std::uint32_t z_ = 0;
  int n_y_ = 0;
};

struct PauliTerm {
  double coeff = 0.0;
  PauliString string;
};

// Terms keep first-appearance order; duplicate strings are merged into the
// first occurrence. Merged coefficients that cancel to zero are kept.
class PauliSum {
 public:
  PauliSum() = default;
  explicit PauliSum(int n_qubits) : n_(n_qubits) {}
  PauliSum(int n_qubits, const std::vector<PauliTerm>& terms);

  static PauliSum identity(int n_qubits, double coeff = 1.0);

  int n_qubits() const { return n_; }
  const std::vector<PauliTerm>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }

  void add(double coeff, const PauliString& s);
  double l1_norm() const;
  double max_abs_coeff() const;

  // Same term multiset (order-insensitive).
  bool same_terms(const PauliSum& other, double tol = 0.0) const;

 private:
  int n_ = 0;
  std::vector<PauliTerm> terms_;
};

PauliSum parse_pauli_sum(std::istream& in);
PauliSum parse_pauli_sum(const std::string& text);
PauliSum read_pauli_sum_file(const std::string& path);
void write_pauli_sum(std::ostream& out, const PauliSum& sum);

PauliSum build_tfim(int L, double J, double h);

Eigen::MatrixXcd to_dense(const PauliSum& sum);
Eigen::MatrixXcd to_dense(const PauliString& p);

// Matrix-free y = sum * x on a register of sum.n_qubits() qubits.
Eigen::VectorXcd apply(const PauliSum& sum, const Eigen::VectorXcd& x);
Eigen::VectorXcd apply(const PauliString& p, const Eigen::VectorXcd& x);

PauliSum sort_by_weight(const PauliSum& sum);

// [H, H minus its smallest term, ...] from the weight-sorted sum.
std::vector<PauliSum> partial_sum_observables(const PauliSum& sum, int count);
// Partial sums starting from the one that has dropped `first` terms.
std::vector<PauliSum> partial_sum_observables(const PauliSum& sum, int count, int first);

// Single terms P_nu taken from positions [first, first+count) of the
// weight-sorted sum, coefficient 1 each.
std::vector<PauliSum> weight_window_observables(const PauliSum& sum, int first, int count);

std::vector<PauliSum> random_one_local(int L, int count, std::uint64_t seed);

// E' = scale * (E - offset).
struct AffineShift {
  double scale = 1.0;
  double offset = 0.0;

  double forward(double E) const { return scale * (E - offset); }
  double inverse(double E_shifted) const { return E_shifted / scale + offset; }
};

// H' = (C*pi/bound) H, offset 0.
std::pair<PauliSum, AffineShift> shift_and_scale(const PauliSum& sum, double bound, double C = 0.9);
// Recenters [lo, hi] onto [-C*pi, C*pi].
std::pair<PauliSum, AffineShift> shift_and_scale(const PauliSum& sum, double lo, double hi,
                                                 double C);
// bound = sum of |kappa|.
std::pair<PauliSum, AffineShift> shift_and_scale(const PauliSum& sum);

}  // namespace modmd
