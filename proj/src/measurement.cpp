#include "demonforge/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace demonforge {

namespace {

constexpr double kCompletenessTol = 1e-9;
constexpr double kRouteTol = 1e-10;

ComplexMatrix direct_sum(const std::vector<HermitianOperator>& blocks) {
  Index total = 0;
  for (const auto& b : blocks) total += b.dim();
  ComplexMatrix out = ComplexMatrix::Zero(total, total);
  Index off = 0;
  for (const auto& b : blocks) {
    out.block(off, off, b.dim(), b.dim()) = b.matrix();
    off += b.dim();
  }
  return out;
}

}  // namespace

MemoryModel::MemoryModel(std::vector<Index> block_dims,
                         std::vector<HermitianOperator> block_hamiltonians, int standard_block,
                         DensityOperator initial_state)
    : block_dims_(std::move(block_dims)),
      block_hams_(std::move(block_hamiltonians)),
      standard_block_(standard_block),
      initial_(std::move(initial_state)) {
  if (block_dims_.empty()) throw std::invalid_argument("memory needs at least one block");
  if (block_hams_.size() != block_dims_.size())
    throw std::invalid_argument("memory needs one Hamiltonian per block");
  total_dim_ = 0;
  for (std::size_t k = 0; k < block_dims_.size(); ++k) {
    if (block_dims_[k] <= 0) throw std::invalid_argument("memory block dimension must be positive");
    if (block_hams_[k].dim() != block_dims_[k])
      throw std::invalid_argument("memory block Hamiltonian dimension mismatch at block " +
                                  std::to_string(k));
    total_dim_ += block_dims_[k];
  }
  if (standard_block_ < 0 || standard_block_ >= block_count())
    throw std::invalid_argument("standard block index out of range");
  if (initial_.dim() != total_dim_)
    throw std::invalid_argument("memory initial state dimension mismatch");
  if (weight_outside_block(initial_, standard_block_) > 1e-10)
    throw std::invalid_argument("memory initial state has weight outside the standard block");
}

MemoryModel MemoryModel::with_canonical_start(std::vector<Index> block_dims,
                                              std::vector<HermitianOperator> block_hamiltonians,
                                              int standard_block, double beta) {
  if (standard_block < 0 || static_cast<std::size_t>(standard_block) >= block_dims.size())
    throw std::invalid_argument("standard block index out of range");
  const auto can = canonical_state(block_hamiltonians[static_cast<std::size_t>(standard_block)], beta);
  Index total = 0;
  for (Index d : block_dims) total += d;
  Index off = 0;
  for (int k = 0; k < standard_block; ++k) off += block_dims[static_cast<std::size_t>(k)];
  ComplexMatrix full = ComplexMatrix::Zero(total, total);
  full.block(off, off, can.state.dim(), can.state.dim()) = can.state.matrix();
  return MemoryModel(std::move(block_dims), std::move(block_hamiltonians), standard_block,
                     DensityOperator(std::move(full), {total}));
}

Index MemoryModel::block_offset(int k) const {
  if (k < 0 || k >= block_count()) throw std::invalid_argument("memory block index out of range");
  Index off = 0;
  for (int i = 0; i < k; ++i) off += block_dims_[static_cast<std::size_t>(i)];
  return off;
}

HermitianOperator MemoryModel::full_hamiltonian() const {
  return HermitianOperator(direct_sum(block_hams_));
}

ComplexMatrix MemoryModel::block_projector(int k) const {
  ComplexMatrix p = ComplexMatrix::Zero(total_dim_, total_dim_);
  const Index off = block_offset(k);
  const Index d = block_dims_[static_cast<std::size_t>(k)];
  p.block(off, off, d, d) = ComplexMatrix::Identity(d, d);
  return p;
}

ComplexMatrix MemoryModel::block_restriction(const ComplexMatrix& state, int k) const {
  const Index off = block_offset(k);
  const Index d = block_dims_[static_cast<std::size_t>(k)];
  return state.block(off, off, d, d);
}

double MemoryModel::weight_outside_block(const DensityOperator& state, int k) const {
  const Index off = block_offset(k);
  const Index d = block_dims_[static_cast<std::size_t>(k)];
  double inside = 0.0;
  for (Index i = 0; i < d; ++i) inside += state.matrix()(off + i, off + i).real();
  return std::max(0.0, 1.0 - inside);
}

ComplexMatrix MemoryModel::embed_block(const ComplexMatrix& block_matrix, int k) const {
  const Index off = block_offset(k);
  const Index d = block_dims_[static_cast<std::size_t>(k)];
  if (block_matrix.rows() != d || block_matrix.cols() != d)
    throw std::invalid_argument("block matrix dimension mismatch");
  ComplexMatrix full = ComplexMatrix::Zero(total_dim_, total_dim_);
  full.block(off, off, d, d) = block_matrix;
  return full;
}

IndirectMeasurement::IndirectMeasurement(ComplexMatrix joint_unitary_, MemoryModel memory_,
                                         Index dim_a_)
    : joint_unitary(std::move(joint_unitary_)), memory(std::move(memory_)), dim_a(dim_a_) {
  if (dim_a <= 0) throw std::invalid_argument("system dimension must be positive");
  if (joint_unitary.rows() != dim_a * memory.total_dim() ||
      joint_unitary.cols() != joint_unitary.rows())
    throw std::invalid_argument("dilation unitary must act on A (x) M");
  if (unitarity_residual(joint_unitary) > tol::unitarity)
    throw std::invalid_argument("dilation unitary fails the unitarity check");
}

KrausFamily::KrausFamily(std::vector<OutcomeOps> raw) {
  if (raw.empty()) throw std::invalid_argument("Kraus family must have outcomes");
  Index d = -1;
  for (auto& group : raw) {
    std::vector<ComplexMatrix> kept;
    for (auto& op : group.operators) {
      if (op.rows() != op.cols()) throw std::invalid_argument("Kraus operators must be square");
      if (d < 0) d = op.rows();
      if (op.rows() != d) throw std::invalid_argument("Kraus operators must share one dimension");
      if (!is_finite(op)) throw std::invalid_argument("Kraus operator has non-finite entries");
      if (op.norm() <= tol::prune) continue;
      kept.push_back(std::move(op));
    }
    if (kept.empty()) continue;
    outcomes_.push_back({group.label, std::move(kept)});
  }
  if (outcomes_.empty()) throw std::invalid_argument("all Kraus operators were pruned");

  ComplexMatrix acc = ComplexMatrix::Zero(d, d);
  for (const auto& group : outcomes_)
    for (const auto& op : group.operators) acc += op.adjoint() * op;
  acc -= ComplexMatrix::Identity(d, d);
  completeness_residual_ = acc.cwiseAbs().maxCoeff();
  if (completeness_residual_ > kCompletenessTol)
    throw std::invalid_argument("Kraus family completeness residual " +
                                std::to_string(completeness_residual_) + " exceeds 1e-9");
  efficient_ = std::all_of(outcomes_.begin(), outcomes_.end(),
                           [](const OutcomeOps& g) { return g.operators.size() == 1; });
}

Index KrausFamily::dim() const { return outcomes_.front().operators.front().rows(); }

bool is_efficient(const KrausFamily& family) { return family.efficient(); }

std::vector<double> MeasurementRecord::probabilities() const {
  std::vector<double> p;
  p.reserve(ensemble.size());
  for (const auto& o : ensemble.outcomes()) p.push_back(o.probability);
  return p;
}

KrausFamily kraus_from_dilation(const IndirectMeasurement& m) {
  const Index da = m.dim_a;
  const Index dm = m.memory.total_dim();
  const ComplexMatrix& u = m.joint_unitary;

  // Spectral decomposition of the memory start: p0(a), |psi0(a)>.
  const EigenSystem start = hermitian_eig(m.memory.initial_state().matrix());

  std::vector<KrausFamily::OutcomeOps> groups;
  for (int k = 0; k < m.memory.block_count(); ++k) {
    const Index off = m.memory.block_offset(k);
    const Index dk = m.memory.block_dims()[static_cast<std::size_t>(k)];
    KrausFamily::OutcomeOps group{k, {}};
    for (Index a = 0; a < start.values.size(); ++a) {
      const double pa = start.values[a];
      if (pa < tol::prune) continue;
      const ComplexVector psi0 = start.vectors.col(a);
      for (Index b = 0; b < dk; ++b) {
        // Computational basis vector b inside block k.
        ComplexMatrix op(da, da);
        for (Index i = 0; i < da; ++i)
          for (Index j = 0; j < da; ++j) {
            Complex acc(0.0, 0.0);
            for (Index s = 0; s < dm; ++s)
              acc += u(i * dm + (off + b), j * dm + s) * psi0[s];
            op(i, j) = std::sqrt(pa) * acc;
          }
        group.operators.push_back(std::move(op));
      }
    }
    groups.push_back(std::move(group));
  }

  return KrausFamily(std::move(groups));
}

namespace {

struct KrausApplication {
  std::vector<int> labels;
  std::vector<double> probabilities;
  std::vector<DensityOperator> ab_states;
};

KrausApplication apply_kraus_route(const KrausFamily& family, const DensityOperator& rho_ab) {
  if (rho_ab.dims().empty() || rho_ab.dims()[0] != family.dim())
    throw std::invalid_argument("Kraus operators do not match the first factor of the state");
  KrausApplication out;
  for (const auto& group : family.outcomes()) {
    ComplexMatrix acc = ComplexMatrix::Zero(rho_ab.dim(), rho_ab.dim());
    for (const auto& op : group.operators) {
      const ComplexMatrix lifted = embed_factor_operator(op, rho_ab.dims(), {0});
      acc += lifted * rho_ab.matrix() * lifted.adjoint();
    }
    const double p = acc.trace().real();
    if (p < -1e-10) throw std::runtime_error("negative outcome probability " + std::to_string(p));
    if (p < tol::prune) continue;
    out.labels.push_back(group.label);
    out.probabilities.push_back(p);
    out.ab_states.emplace_back(acc / p, rho_ab.dims());
  }
  double total = std::accumulate(out.probabilities.begin(), out.probabilities.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9)
    throw std::runtime_error("outcome probabilities sum to " + std::to_string(total));
  return out;
}

}  // namespace

MeasurementRecord apply_measurement(const IndirectMeasurement& m, const DensityOperator& rho_ab) {
  if (rho_ab.dims().size() != 2)
    throw std::invalid_argument("measurement expects a two-factor AB state");
  if (rho_ab.dims()[0] != m.dim_a)
    throw std::invalid_argument("dilation does not match the A dimension");

  const Index da = rho_ab.dims()[0];
  const Index db = rho_ab.dims()[1];
  const Index dm = m.memory.total_dim();
  const std::vector<Index> dims_abm{da, db, dm};

  // rho_ABM = rho_AB (x) rho_M0, evolved by U^{AM} lifted over the B factor
  // sitting between A and M in the (A, B, M) ordering.
  const DensityOperator joint0 = tensor(rho_ab, m.memory.initial_state());
  ComplexMatrix u_abm = ComplexMatrix::Zero(da * db * dm, da * db * dm);
  for (Index i = 0; i < da; ++i)
    for (Index ip = 0; ip < da; ++ip)
      for (Index s = 0; s < dm; ++s)
        for (Index sp = 0; sp < dm; ++sp) {
          const Complex v = m.joint_unitary(i * dm + s, ip * dm + sp);
          if (v == Complex(0.0, 0.0)) continue;
          for (Index j = 0; j < db; ++j)
            u_abm((i * db + j) * dm + s, (ip * db + j) * dm + sp) = v;
        }

  const ComplexMatrix evolved =
      u_abm * joint0.matrix() * u_abm.adjoint();

  const KrausFamily family = kraus_from_dilation(m);
  const KrausApplication kraus = apply_kraus_route(family, rho_ab);

  std::vector<Outcome> raw;
  std::vector<DensityOperator> joint_states;
  std::vector<DensityOperator> memory_states;
  double route_residual = 0.0;

  std::size_t kraus_i = 0;
  for (int k = 0; k < m.memory.block_count(); ++k) {
    const ComplexMatrix proj =
        embed_factor_operator(m.memory.block_projector(k), dims_abm, {2});
    const ComplexMatrix projected = proj * evolved * proj;
    const double p = projected.trace().real();
    if (p < -1e-10) throw std::runtime_error("negative outcome probability " + std::to_string(p));
    if (p < tol::prune) {
      // Must be absent from the Kraus route as well.
      if (kraus_i < kraus.labels.size() && kraus.labels[kraus_i] == k)
        throw std::runtime_error("dilation and Kraus routes disagree on outcome support");
      continue;
    }
    const DensityOperator rho_abm(projected / p, dims_abm);
    const DensityOperator rho_ab_k = partial_trace(rho_abm, {{0, 1}});

    if (kraus_i >= kraus.labels.size() || kraus.labels[kraus_i] != k)
      throw std::runtime_error("dilation and Kraus routes disagree on outcome support");
    route_residual = std::max(route_residual, std::abs(p - kraus.probabilities[kraus_i]));
    route_residual = std::max(
        route_residual,
        (rho_ab_k.matrix() - kraus.ab_states[kraus_i].matrix()).cwiseAbs().maxCoeff());
    ++kraus_i;

    raw.push_back({k, p, rho_ab_k});
    joint_states.push_back(rho_abm);
    memory_states.push_back(partial_trace(rho_abm, {{2}}));
  }
  if (kraus_i != kraus.labels.size())
    throw std::runtime_error("dilation and Kraus routes disagree on outcome support");
  if (route_residual > kRouteTol)
    throw std::runtime_error("dilation and Kraus routes disagree by " +
                             std::to_string(route_residual));
  return MeasurementRecord{OutcomeEnsemble(std::move(raw)), std::move(joint_states),
                           std::move(memory_states), family.efficient(), route_residual};
}

MeasurementRecord apply_measurement(const KrausFamily& family, const MemoryModel& memory,
                                    const DensityOperator& rho_ab) {
  if (rho_ab.dims().size() != 2)
    throw std::invalid_argument("measurement expects a two-factor AB state");
  if (static_cast<int>(family.outcomes().size()) > memory.block_count())
    throw std::invalid_argument("more outcomes than memory blocks");

  // The synthesized dilation needs a pure memory start; otherwise the
  // memory-side entropy bookkeeping would not match the family.
  if (von_neumann_entropy(memory.initial_state()) > 1e-9)
    throw std::invalid_argument("raw Kraus measurements require a pure memory initial state");

  const Index da = rho_ab.dims()[0];
  const Index db = rho_ab.dims()[1];
  const Index dm = memory.total_dim();
  const std::vector<Index> dims_abm{da, db, dm};

  const KrausApplication kraus = apply_kraus_route(family, rho_ab);

  std::vector<Outcome> raw;
  std::vector<DensityOperator> joint_states;
  std::vector<DensityOperator> memory_states;

  std::size_t idx = 0;
  for (const auto& group : family.outcomes()) {
    const int k = group.label;
    if (k < 0 || k >= memory.block_count())
      throw std::invalid_argument("Kraus outcome label has no memory block");
    const Index dk = memory.block_dims()[static_cast<std::size_t>(k)];
    if (static_cast<Index>(group.operators.size()) > dk)
      throw std::invalid_argument("memory block " + std::to_string(k) +
                                  " is too small for the outcome's operators");
    if (idx >= kraus.labels.size() || kraus.labels[idx] != k) continue;  // pruned outcome

    const double p = kraus.probabilities[idx];
    // rho_ABM(k) = (1/p) sum_{b,c} (M_b rho M_c†) (x) |psi_k(b)><psi_k(c)|.
    ComplexMatrix joint = ComplexMatrix::Zero(da * db * dm, da * db * dm);
    const Index off = memory.block_offset(k);
    for (std::size_t b = 0; b < group.operators.size(); ++b) {
      const ComplexMatrix mb = embed_factor_operator(group.operators[b], rho_ab.dims(), {0});
      for (std::size_t c = 0; c < group.operators.size(); ++c) {
        const ComplexMatrix mc = embed_factor_operator(group.operators[c], rho_ab.dims(), {0});
        const ComplexMatrix ab_part = mb * rho_ab.matrix() * mc.adjoint();
        const Index mrow = off + static_cast<Index>(b);
        const Index mcol = off + static_cast<Index>(c);
        for (Index r = 0; r < da * db; ++r)
          for (Index cc = 0; cc < da * db; ++cc)
            joint(r * dm + mrow, cc * dm + mcol) += ab_part(r, cc) / p;
      }
    }
    const DensityOperator rho_abm(std::move(joint), dims_abm);
    raw.push_back({k, p, kraus.ab_states[idx]});
    joint_states.push_back(rho_abm);
    memory_states.push_back(partial_trace(rho_abm, {{2}}));
    ++idx;
  }

  return MeasurementRecord{OutcomeEnsemble(std::move(raw)), std::move(joint_states),
                           std::move(memory_states), family.efficient(), 0.0};
}

MeasurementRecord apply_measurement(const KrausFamily& family, const DensityOperator& rho_ab) {
  std::vector<Index> block_dims;
  std::vector<HermitianOperator> block_hams;
  for (const auto& group : family.outcomes()) {
    const Index dk = static_cast<Index>(group.operators.size());
    block_dims.push_back(dk);
    block_hams.push_back(HermitianOperator::zero(dk));
  }
  // Pure start in the first basis vector of the first block.
  Index total = 0;
  for (Index d : block_dims) total += d;
  ComplexVector psi = ComplexVector::Zero(total);
  psi[0] = 1.0;
  MemoryModel memory(std::move(block_dims), std::move(block_hams), 0, pure_state(psi, {total}));
  // Relabel blocks to match outcome labels: block index == position in the
  // family's outcome list here, so build a label-aligned family first.
  std::vector<KrausFamily::OutcomeOps> relabeled;
  int pos = 0;
  for (const auto& group : family.outcomes()) relabeled.push_back({pos++, group.operators});
  return apply_measurement(KrausFamily(std::move(relabeled)), memory, rho_ab);
}

TwoRoundEnsemble second_round(const std::map<int, KrausFamily>& families_b,
                              const OutcomeEnsemble& post_feedback) {
  std::vector<TwoRoundOutcome> raw;
  for (const auto& o : post_feedback.outcomes()) {
    const auto it = families_b.find(o.label);
    if (it == families_b.end())
      throw std::invalid_argument("no second-round family for outcome " +
                                  std::to_string(o.label));
    const KrausFamily& fam = it->second;
    if (o.state.dims().size() != 2 || fam.dim() != o.state.dims()[1])
      throw std::invalid_argument("second-round family does not match the B dimension");
    double norm = 0.0;
    std::vector<TwoRoundOutcome> branch;
    for (const auto& group : fam.outcomes()) {
      ComplexMatrix acc = ComplexMatrix::Zero(o.state.dim(), o.state.dim());
      for (const auto& op : group.operators) {
        const ComplexMatrix lifted = embed_factor_operator(op, o.state.dims(), {1});
        acc += lifted * o.state.matrix() * lifted.adjoint();
      }
      const double p_given = acc.trace().real();
      if (p_given < tol::prune) continue;
      norm += p_given;
      branch.push_back({o.label, group.label, o.probability * p_given, p_given,
                        DensityOperator(acc / p_given, o.state.dims())});
    }
    if (std::abs(norm - 1.0) > 1e-9)
      throw std::runtime_error("second-round conditionals sum to " + std::to_string(norm));
    raw.insert(raw.end(), branch.begin(), branch.end());
  }
  return TwoRoundEnsemble(std::move(raw));
}

}  // namespace demonforge
