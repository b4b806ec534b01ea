#pragma once

#include "demonforge/infotheory.hpp"
#include "demonforge/qlinalg.hpp"

#include <map>
#include <optional>
#include <vector>

namespace demonforge {

/// Memory with a direct-sum block structure: block k registers outcome k.
/// The initial state lives in the standard block (the reset target).
class MemoryModel {
 public:
  MemoryModel(std::vector<Index> block_dims, std::vector<HermitianOperator> block_hamiltonians,
              int standard_block, DensityOperator initial_state);

  /// Convenience: initial state defaults to the canonical state of the
  /// standard block at the given inverse temperature.
  static MemoryModel with_canonical_start(std::vector<Index> block_dims,
                                          std::vector<HermitianOperator> block_hamiltonians,
                                          int standard_block, double beta);

  const std::vector<Index>& block_dims() const { return block_dims_; }
  const std::vector<HermitianOperator>& block_hamiltonians() const { return block_hams_; }
  int standard_block() const { return standard_block_; }
  const DensityOperator& initial_state() const { return initial_; }

  Index total_dim() const { return total_dim_; }
  int block_count() const { return static_cast<int>(block_dims_.size()); }
  Index block_offset(int k) const;
  /// H^M = direct sum of the block Hamiltonians.
  HermitianOperator full_hamiltonian() const;
  /// Projector onto block k, as a total_dim x total_dim matrix.
  ComplexMatrix block_projector(int k) const;
  /// Restriction of a memory state to block k (dims = {block dim}); the
  /// caller supplies the normalization convention via `renormalize`.
  ComplexMatrix block_restriction(const ComplexMatrix& state, int k) const;
  /// Weight of a memory state outside the given block.
  double weight_outside_block(const DensityOperator& state, int k) const;
  /// Embed a block-sized matrix at block k of the full memory space.
  ComplexMatrix embed_block(const ComplexMatrix& block_matrix, int k) const;

 private:
  std::vector<Index> block_dims_;
  std::vector<HermitianOperator> block_hams_;
  int standard_block_;
  DensityOperator initial_;
  Index total_dim_;
};

/// Indirect measurement: unitary on A (x) M followed by the projective
/// readout of the memory block index.
struct IndirectMeasurement {
  IndirectMeasurement(ComplexMatrix joint_unitary, MemoryModel memory, Index dim_a);

  ComplexMatrix joint_unitary;
  MemoryModel memory;
  Index dim_a;
};

/// Measurement operators grouped by outcome; complete within 1e-9.
/// Efficient means one operator per outcome after pruning.
class KrausFamily {
 public:
  struct OutcomeOps {
    int label;
    std::vector<ComplexMatrix> operators;
  };

  /// Validates completeness, prunes operators with Frobenius norm below
  /// tol::prune, sets the efficiency flag.
  explicit KrausFamily(std::vector<OutcomeOps> outcomes);

  const std::vector<OutcomeOps>& outcomes() const { return outcomes_; }
  Index dim() const;
  bool efficient() const { return efficient_; }
  double completeness_residual() const { return completeness_residual_; }

 private:
  std::vector<OutcomeOps> outcomes_;
  bool efficient_ = false;
  double completeness_residual_ = 0.0;
};

bool is_efficient(const KrausFamily& family);

/// One measurement application: the joint AB ensemble, the ABM states,
/// and the conditional memory states (full memory space, block supported).
struct MeasurementRecord {
  OutcomeEnsemble ensemble;                   // rho_AB(k), labeled by k
  std::vector<DensityOperator> joint_states;  // rho_ABM(k), dims {dA, dB, dM}
  std::vector<DensityOperator> memory_states; // rho_M(k), dims {dM}
  bool efficient = false;
  /// Largest disagreement between the dilation and Kraus routes (diagnostic).
  double route_residual = 0.0;

  std::vector<double> probabilities() const;
};

/// Extract the measurement operators M_{k,a,b} = sqrt(p0(a)) <psi_k(b)| U |psi_0(a)>
/// from a dilation. Throws if the result is not complete within 1e-9.
KrausFamily kraus_from_dilation(const IndirectMeasurement& m);

/// Measurement through the dilation: projects U (rho_AB x rho_M0) U† onto the
/// memory blocks and cross-validates against the extracted Kraus family.
MeasurementRecord apply_measurement(const IndirectMeasurement& m, const DensityOperator& rho_ab);

/// Measurement from a raw family plus an explicit memory model. Requires a
/// pure memory initial state; the synthesized dilation writes operator b of
/// outcome k onto basis vector b of block k.
MeasurementRecord apply_measurement(const KrausFamily& family, const MemoryModel& memory,
                                    const DensityOperator& rho_ab);

/// Raw-family convenience: canonical memory with block k sized by the number
/// of operators of outcome k, zero block Hamiltonians, pure standard start.
MeasurementRecord apply_measurement(const KrausFamily& family, const DensityOperator& rho_ab);

/// Second measurement round on B, with a family chosen by the first outcome.
/// `post_feedback` carries the joint AB states after round-1 feedback.
TwoRoundEnsemble second_round(const std::map<int, KrausFamily>& families_b,
                              const OutcomeEnsemble& post_feedback);

}  // namespace demonforge
