#include "demonforge/qlinalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace demonforge {

namespace {

constexpr Index kFullSpectralCheckLimit = 256;

Index dims_product(const std::vector<Index>& dims) {
  Index p = 1;
  for (Index d : dims) {
    if (d <= 0) throw std::invalid_argument("subsystem dimensions must be positive");
    p *= d;
  }
  return p;
}

// Row-major strides for a multi-index over dims.
std::vector<Index> strides_of(const std::vector<Index>& dims) {
  std::vector<Index> s(dims.size(), 1);
  for (std::size_t i = dims.size(); i-- > 1;) s[i - 1] = s[i] * dims[i];
  return s;
}

}  // namespace

bool is_finite(const ComplexMatrix& m) {
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (!std::isfinite(m(i, j).real()) || !std::isfinite(m(i, j).imag())) return false;
  return true;
}

double hermiticity_deviation(const ComplexMatrix& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

double unitarity_residual(const ComplexMatrix& u) {
  ComplexMatrix g = u.adjoint() * u;
  g.diagonal().array() -= 1.0;
  return g.cwiseAbs().maxCoeff();
}

HermitianOperator::HermitianOperator(ComplexMatrix m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("Hermitian operator must be square");
  if (m.rows() == 0) throw std::invalid_argument("Hermitian operator must be non-empty");
  if (!is_finite(m)) throw std::invalid_argument("Hermitian operator has non-finite entries");
  if (hermiticity_deviation(m) > tol::hermiticity)
    throw std::invalid_argument("matrix is not Hermitian within tolerance");
  mat_ = 0.5 * (m + m.adjoint().eval());
}

HermitianOperator HermitianOperator::zero(Index dim) {
  return HermitianOperator(ComplexMatrix::Zero(dim, dim));
}

DensityOperator::DensityOperator(ComplexMatrix m, std::vector<Index> dims) {
  if (m.rows() != m.cols()) throw std::invalid_argument("density operator must be square");
  if (!is_finite(m)) throw std::invalid_argument("density operator has non-finite entries");
  if (dims_product(dims) != m.rows())
    throw std::invalid_argument("subsystem dimensions do not factor the matrix dimension");
  const double tr_err = std::abs(m.trace() - Complex(1.0, 0.0));
  if (tr_err > tol::trace_one)
    throw std::invalid_argument("density operator trace deviates from 1 by " + std::to_string(tr_err));
  if (hermiticity_deviation(m) > tol::hermiticity)
    throw std::invalid_argument("density operator is not Hermitian within tolerance");
  mat_ = 0.5 * (m + m.adjoint().eval());
  dims_ = std::move(dims);
  if (mat_.rows() <= kFullSpectralCheckLimit) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(mat_, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver failed on density operator");
    const double lo = es.eigenvalues().minCoeff();
    if (lo < tol::eigenvalue_floor)
      throw std::invalid_argument("density operator has eigenvalue " + std::to_string(lo) +
                                  " below the clipping floor");
  } else {
    // Full spectral check deferred to the entropy evaluations; the diagonal
    // of a positive matrix is a necessary condition checked cheaply here.
    if (mat_.diagonal().real().minCoeff() < tol::eigenvalue_floor)
      throw std::invalid_argument("density operator has a negative diagonal entry");
  }
}

DensityOperator DensityOperator::trivial() {
  return DensityOperator(ComplexMatrix::Identity(1, 1), {1});
}

DensityOperator DensityOperator::regrouped(std::vector<Index> new_dims) const {
  if (dims_product(new_dims) != dim())
    throw std::invalid_argument("regrouped dimensions do not factor the matrix dimension");
  DensityOperator out = *this;
  out.dims_ = std::move(new_dims);
  return out;
}

DensityOperator DensityOperator::evolved(const ComplexMatrix& unitary) const {
  if (unitary.rows() != dim() || unitary.cols() != dim())
    throw std::invalid_argument("unitary dimension mismatch in evolution");
  return DensityOperator(unitary * mat_ * unitary.adjoint(), dims_);
}

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

HermitianOperator tensor(const HermitianOperator& a, const HermitianOperator& b) {
  return HermitianOperator(kron(a.matrix(), b.matrix()));
}

DensityOperator tensor(const DensityOperator& a, const DensityOperator& b) {
  std::vector<Index> dims = a.dims();
  dims.insert(dims.end(), b.dims().begin(), b.dims().end());
  return DensityOperator(kron(a.matrix(), b.matrix()), std::move(dims));
}

DensityOperator pure_state(const ComplexVector& amplitudes, std::vector<Index> dims) {
  const double n2 = amplitudes.squaredNorm();
  if (std::abs(n2 - 1.0) > 1e-8)
    throw std::invalid_argument("pure-state amplitudes are not normalized");
  ComplexVector psi = amplitudes / std::sqrt(n2);
  return DensityOperator(psi * psi.adjoint(), std::move(dims));
}

DensityOperator partial_trace(const DensityOperator& rho, const SubsystemSelector& s) {
  const auto& dims = rho.dims();
  std::vector<std::size_t> keep = s.keep;
  std::sort(keep.begin(), keep.end());
  if (std::adjacent_find(keep.begin(), keep.end()) != keep.end())
    throw std::invalid_argument("subsystem selector has duplicate indices");
  if (keep.empty()) throw std::invalid_argument("subsystem selector keeps nothing");
  for (std::size_t k : keep)
    if (k >= dims.size()) throw std::invalid_argument("subsystem selector index out of range");

  std::vector<std::size_t> traced;
  for (std::size_t i = 0; i < dims.size(); ++i)
    if (!std::binary_search(keep.begin(), keep.end(), i)) traced.push_back(i);

  const auto strides = strides_of(dims);
  Index dk = 1, dt = 1;
  std::vector<Index> kept_dims;
  for (std::size_t k : keep) {
    dk *= dims[k];
    kept_dims.push_back(dims[k]);
  }
  for (std::size_t t : traced) dt *= dims[t];

  // Flat offsets of every kept / traced multi-index into the full space.
  auto offsets = [&](const std::vector<std::size_t>& subs, Index count) {
    std::vector<Index> off(static_cast<std::size_t>(count), 0);
    for (Index flat = 0; flat < count; ++flat) {
      Index rem = flat, o = 0;
      for (std::size_t i = subs.size(); i-- > 0;) {
        const Index d = dims[subs[i]];
        o += (rem % d) * strides[subs[i]];
        rem /= d;
      }
      off[static_cast<std::size_t>(flat)] = o;
    }
    return off;
  };
  const auto koff = offsets(keep, dk);
  const auto toff = offsets(traced, dt);

  const ComplexMatrix& m = rho.matrix();
  ComplexMatrix out = ComplexMatrix::Zero(dk, dk);
  for (Index i = 0; i < dk; ++i)
    for (Index j = 0; j < dk; ++j) {
      Complex acc(0.0, 0.0);
      for (Index t = 0; t < dt; ++t)
        acc += m(koff[static_cast<std::size_t>(i)] + toff[static_cast<std::size_t>(t)],
                 koff[static_cast<std::size_t>(j)] + toff[static_cast<std::size_t>(t)]);
      out(i, j) = acc;
    }
  return DensityOperator(std::move(out), std::move(kept_dims));
}

EigenSystem hermitian_eig(const ComplexMatrix& m) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (m + m.adjoint().eval()));
  if (es.info() != Eigen::Success) throw std::runtime_error("Hermitian eigensolver did not converge");
  return EigenSystem{es.eigenvalues(), es.eigenvectors()};
}

EigenSystem hermitian_eig(const HermitianOperator& h) { return hermitian_eig(h.matrix()); }

double entropy_of_spectrum(const RealVector& eigenvalues) {
  double s = 0.0;
  for (Index i = 0; i < eigenvalues.size(); ++i) {
    const double l = eigenvalues[i];
    if (l < tol::eigenvalue_floor)
      throw std::invalid_argument("entropy of a spectrum with eigenvalue " + std::to_string(l) +
                                  " below the clipping floor");
    if (l <= 0.0) continue;  // 0 ln 0 := 0
    s -= l * std::log(l);
  }
  return s;
}

double von_neumann_entropy(const DensityOperator& rho) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(rho.matrix(), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("Hermitian eigensolver did not converge");
  return entropy_of_spectrum(es.eigenvalues());
}

double cross_entropy_term(const DensityOperator& rho, const DensityOperator& ref) {
  if (rho.dim() != ref.dim()) throw std::invalid_argument("cross-entropy dimension mismatch");
  const EigenSystem es = hermitian_eig(ref.matrix());
  double acc = 0.0;
  for (Index i = 0; i < es.values.size(); ++i) {
    const double s = es.values[i];
    const ComplexVector v = es.vectors.col(i);
    double w = (v.adjoint() * rho.matrix() * v).value().real();
    if (w < 0.0) w = 0.0;  // round-off
    if (s < tol::support_cutoff) {
      if (w > 1e-10) return std::numeric_limits<double>::infinity();
      continue;
    }
    acc -= w * std::log(s);
  }
  return acc;
}

double relative_entropy(const DensityOperator& rho, const DensityOperator& sigma) {
  if (rho.dim() != sigma.dim()) throw std::invalid_argument("relative-entropy dimension mismatch");
  const double cross = cross_entropy_term(rho, sigma);
  if (std::isinf(cross)) return cross;
  return cross - von_neumann_entropy(rho);
}

double trace_distance(const DensityOperator& a, const DensityOperator& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("trace-distance dimension mismatch");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(a.matrix() - b.matrix(), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("Hermitian eigensolver did not converge");
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

CanonicalEnsemble canonical_state(const HermitianOperator& h, double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw std::invalid_argument("inverse temperature must be finite and positive");
  const EigenSystem es = hermitian_eig(h);
  const double lmin = es.values.minCoeff();
  RealVector w(es.values.size());
  for (Index i = 0; i < es.values.size(); ++i) w[i] = std::exp(-beta * (es.values[i] - lmin));
  const double z_shifted = w.sum();
  // log Z = beta*(-lmin) + log(z_shifted); log1p keeps precision when the
  // shifted sum is 1 + tiny (large gaps).
  const double free_energy = lmin - std::log1p(z_shifted - 1.0) / beta;
  w /= z_shifted;
  ComplexMatrix m = es.vectors * w.asDiagonal() * es.vectors.adjoint();
  return CanonicalEnsemble{DensityOperator(std::move(m), {h.dim()}), free_energy};
}

ComplexMatrix unitary_from_generator(const HermitianOperator& g) {
  const EigenSystem es = hermitian_eig(g);
  ComplexVector phases(es.values.size());
  for (Index i = 0; i < es.values.size(); ++i)
    phases[i] = std::exp(Complex(0.0, -es.values[i]));
  return es.vectors * phases.asDiagonal() * es.vectors.adjoint();
}

namespace {

ComplexMatrix gaussian_matrix(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexMatrix g(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) {
      const double re = n(gen);
      const double im = n(gen);
      g(i, j) = Complex(re, im) / std::sqrt(2.0);
    }
  return g;
}

}  // namespace

DensityOperator random_density(Index dim, Index rank, std::uint64_t seed) {
  if (rank < 1 || rank > dim) throw std::invalid_argument("random_density rank must be in [1, dim]");
  const ComplexMatrix g = gaussian_matrix(dim, rank, seed);
  ComplexMatrix m = g * g.adjoint();
  m /= m.trace().real();
  return DensityOperator(std::move(m), {dim});
}

ComplexMatrix random_unitary(Index dim, std::uint64_t seed) {
  const ComplexMatrix g = gaussian_matrix(dim, dim, seed);
  Eigen::HouseholderQR<ComplexMatrix> qr(g);
  ComplexMatrix q = qr.householderQ();
  const ComplexMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index i = 0; i < dim; ++i) {
    const Complex d = r(i, i);
    const double a = std::abs(d);
    q.col(i) *= (a > 0.0) ? d / a : Complex(1.0, 0.0);
  }
  return q;
}

HermitianOperator random_hermitian(Index dim, double scale, std::uint64_t seed) {
  const ComplexMatrix g = gaussian_matrix(dim, dim, seed);
  return HermitianOperator(scale * 0.5 * (g + g.adjoint().eval()));
}

ComplexMatrix embed_factor_operator(const ComplexMatrix& op, const std::vector<Index>& dims,
                                    const std::vector<int>& factors) {
  if (op.rows() != op.cols()) throw std::invalid_argument("embedded operator must be square");
  std::vector<int> f = factors;
  if (!std::is_sorted(f.begin(), f.end()) ||
      std::adjacent_find(f.begin(), f.end()) != f.end())
    throw std::invalid_argument("embedding factors must be strictly ascending");
  Index dsub = 1;
  for (int i : f) {
    if (i < 0 || static_cast<std::size_t>(i) >= dims.size())
      throw std::invalid_argument("embedding factor index out of range");
    dsub *= dims[static_cast<std::size_t>(i)];
  }
  if (dsub != op.rows()) throw std::invalid_argument("embedded operator dimension mismatch");

  const auto strides = strides_of(dims);
  const Index dfull = dims_product(dims);
  Index drest = dfull / dsub;

  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < dims.size(); ++i)
    if (std::find(f.begin(), f.end(), static_cast<int>(i)) == f.end()) rest.push_back(i);

  auto offsets = [&](const std::vector<std::size_t>& subs, Index count) {
    std::vector<Index> off(static_cast<std::size_t>(count), 0);
    for (Index flat = 0; flat < count; ++flat) {
      Index rem = flat, o = 0;
      for (std::size_t i = subs.size(); i-- > 0;) {
        const Index d = dims[subs[i]];
        o += (rem % d) * strides[subs[i]];
        rem /= d;
      }
      off[static_cast<std::size_t>(flat)] = o;
    }
    return off;
  };
  std::vector<std::size_t> fs(f.begin(), f.end());
  const auto foff = offsets(fs, dsub);
  const auto roff = offsets(rest, drest);

  ComplexMatrix out = ComplexMatrix::Zero(dfull, dfull);
  for (Index a = 0; a < dsub; ++a)
    for (Index b = 0; b < dsub; ++b) {
      const Complex v = op(a, b);
      if (v == Complex(0.0, 0.0)) continue;
      for (Index r = 0; r < drest; ++r)
        out(foff[static_cast<std::size_t>(a)] + roff[static_cast<std::size_t>(r)],
            foff[static_cast<std::size_t>(b)] + roff[static_cast<std::size_t>(r)]) = v;
    }
  return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace demonforge
