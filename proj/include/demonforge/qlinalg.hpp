#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <vector>

namespace demonforge {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Numerical tolerances shared across the library.
namespace tol {
inline constexpr double hermiticity = 1e-10;
inline constexpr double trace_one = 1e-10;
// Eigenvalues in [eigenvalue_floor, 0) are round-off and get clipped to 0;
// anything below the floor is an invalid state.
inline constexpr double eigenvalue_floor = -1e-9;
// Support membership for logarithms (relative entropy, cross terms).
inline constexpr double support_cutoff = 1e-12;
inline constexpr double unitarity = 1e-9;
// Kraus operators / outcome probabilities below this are pruned.
inline constexpr double prune = 1e-12;
}  // namespace tol

bool is_finite(const ComplexMatrix& m);
double hermiticity_deviation(const ComplexMatrix& m);
double unitarity_residual(const ComplexMatrix& u);

/// Hermitian matrix (Hamiltonian or observable). Validated at construction:
/// square, finite entries, max |M - M†| <= 1e-10; stored symmetrized.
class HermitianOperator {
 public:
  explicit HermitianOperator(ComplexMatrix m);
  static HermitianOperator zero(Index dim);

  const ComplexMatrix& matrix() const { return mat_; }
  Index dim() const { return mat_.rows(); }

 private:
  ComplexMatrix mat_;
};

/// Density operator with an explicit subsystem factorization. Validated at
/// construction: unit trace, Hermitian within 1e-10, eigenvalues above the
/// clipping floor (full spectral check for dim <= 256, diagonal check above).
class DensityOperator {
 public:
  DensityOperator(ComplexMatrix m, std::vector<Index> dims);
  /// One-dimensional unit state; placeholder for fields filled later.
  static DensityOperator trivial();

  const ComplexMatrix& matrix() const { return mat_; }
  const std::vector<Index>& dims() const { return dims_; }
  Index dim() const { return mat_.rows(); }

  /// Same matrix, different factorization (product must match).
  DensityOperator regrouped(std::vector<Index> new_dims) const;
  /// U rho U†; the caller guarantees unitarity.
  DensityOperator evolved(const ComplexMatrix& unitary) const;

 private:
  ComplexMatrix mat_;
  std::vector<Index> dims_;
};

/// Indices (into dims) of the subsystems to keep under a partial trace.
struct SubsystemSelector {
  std::vector<std::size_t> keep;
};

struct EigenSystem {
  RealVector values;      // ascending
  ComplexMatrix vectors;  // columns, unitary
};

struct CanonicalEnsemble {
  DensityOperator state;
  double free_energy;
};

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);
HermitianOperator tensor(const HermitianOperator& a, const HermitianOperator& b);
DensityOperator tensor(const DensityOperator& a, const DensityOperator& b);

DensityOperator pure_state(const ComplexVector& amplitudes, std::vector<Index> dims);

DensityOperator partial_trace(const DensityOperator& rho, const SubsystemSelector& s);

EigenSystem hermitian_eig(const HermitianOperator& h);
/// Overload for matrices that are Hermitian by construction elsewhere
/// (density operators, differences of states); symmetrizes before solving.
EigenSystem hermitian_eig(const ComplexMatrix& m);

/// -sum lambda ln lambda with the clipping rules from tol::eigenvalue_floor.
double entropy_of_spectrum(const RealVector& eigenvalues);
double von_neumann_entropy(const DensityOperator& rho);

/// -Tr[rho ln ref] in nats; +infinity when rho has weight outside the
/// support of ref (support judged at tol::support_cutoff).
double cross_entropy_term(const DensityOperator& rho, const DensityOperator& ref);
double relative_entropy(const DensityOperator& rho, const DensityOperator& sigma);

double trace_distance(const DensityOperator& a, const DensityOperator& b);

/// e^{-beta H}/Z computed in the eigenbasis with the max-exponent shift;
/// free_energy = -ln(Z)/beta.
CanonicalEnsemble canonical_state(const HermitianOperator& h, double beta);

/// exp(-i G) via the eigendecomposition of the Hermitian generator G.
ComplexMatrix unitary_from_generator(const HermitianOperator& g);

/// Reproducible random states: rho = GG†/Tr[GG†] with G a dim x rank
/// complex Gaussian matrix.
DensityOperator random_density(Index dim, Index rank, std::uint64_t seed);
/// Haar-ish random unitary: QR of a complex Gaussian matrix with the
/// diagonal phases of R absorbed.
ComplexMatrix random_unitary(Index dim, std::uint64_t seed);
HermitianOperator random_hermitian(Index dim, double scale, std::uint64_t seed);

/// Lift an operator acting on the given (ascending) factors of a tensor
/// product to the full space, identity on the rest.
ComplexMatrix embed_factor_operator(const ComplexMatrix& op,
                                    const std::vector<Index>& dims,
                                    const std::vector<int>& factors);

/// Split a seed stream deterministically (splitmix64 step).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace demonforge
