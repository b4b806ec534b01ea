#pragma once

#include "demonforge/infotheory.hpp"
#include "demonforge/measurement.hpp"
#include "demonforge/qlinalg.hpp"

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace demonforge {

enum class FeedbackMode { local, nonlocal };

/// Outcome-conditioned feedback: local unitaries U^A_k, U^B_k with final
/// Hamiltonians per subsystem, or a joint U^AB_k with a joint final
/// Hamiltonian. Reference states default to the canonical states of the
/// final Hamiltonians; overrides support equality-condition studies.
struct FeedbackEntry {
  int outcome = 0;
  std::optional<ComplexMatrix> unitary_a, unitary_b, unitary_ab;
  std::optional<HermitianOperator> h_final_a, h_final_b, h_final_ab;
  std::optional<DensityOperator> reference_a, reference_b, reference_ab;
};

struct FeedbackPlan {
  FeedbackMode mode = FeedbackMode::local;
  std::vector<FeedbackEntry> entries;

  const FeedbackEntry& entry_for(int outcome) const;
  void validate(Index dim_a, Index dim_b) const;
};

/// Idealized erasure saturates the erasure bound by construction; explicit
/// erasure evolves M (x) R under a concrete unitary against a canonical bath.
struct ErasureModel {
  enum class Variant { idealized, explicit_unitary };
  Variant variant = Variant::idealized;
  std::optional<HermitianOperator> bath_hamiltonian;
  std::optional<ComplexMatrix> unitary;
  /// Replace each conditional memory state by the canonical state of its
  /// block before erasing (per-block thermalization at no work cost).
  bool thermalize_blocks = false;
  /// Bath inverse temperature; filled from the scenario (one global beta).
  double beta = 0.0;
};

enum class InitialRecipe { canonical_product, thermal_entangled, explicit_state, classical_correlated };

struct InitialStateSpec {
  InitialRecipe recipe = InitialRecipe::canonical_product;
  std::optional<DensityOperator> state;  // explicit recipe
};

/// Correlation preamble: rho_AB = U (rho_A (x) rho_B) U†, with the entropy
/// cost of creating the correlation charged against reference states that
/// default to the post-preamble marginals (the equality choice).
struct PreambleSpec {
  DensityOperator state_a;
  DensityOperator state_b;
  ComplexMatrix unitary;
  std::optional<DensityOperator> reference_a, reference_b;
};

struct MeasurementSpec {
  enum class Kind { dilation, kraus };
  Kind kind = Kind::dilation;
  std::optional<ComplexMatrix> unitary;   // dilation
  std::optional<KrausFamily> family;      // kraus
};

/// Optimization request carried inside a scenario file; interpreted by the
/// optimizer/CLI layers.
struct OptimizeDirective {
  std::string objective = "net_work";
  long budget = 5000;
  int restarts = 8;
  std::uint64_t seed = 1;
  /// "a:<outcome>", "b:<outcome>", "ab:<outcome>", or "dilation".
  std::vector<std::string> free_slots;
};

struct Scenario {
  std::string name;
  double beta = 1.0;
  Index dim_a = 2, dim_b = 1;
  HermitianOperator h_a_initial = HermitianOperator::zero(1);
  HermitianOperator h_b_initial = HermitianOperator::zero(1);
  InitialStateSpec initial;
  MemoryModel memory{{1}, {HermitianOperator::zero(1)}, 0, DensityOperator::trivial()};
  MeasurementSpec measurement;
  FeedbackPlan feedback;
  ErasureModel erasure;
  std::optional<std::map<int, KrausFamily>> second_round;
  std::optional<PreambleSpec> preamble;
  std::optional<OptimizeDirective> optimize;

  void validate() const;
};

struct TwoRoundLedger {
  TwoRoundEnsemble ensemble;
  double i_axy = 0.0, i_bxy = 0.0, i_abxy = 0.0;
  /// sum_{k,l} p I(rho_A(k,l) : rho_B(k,l)), the correlation left after both
  /// rounds.
  double residual_cmi = 0.0;
  double chain_residual_a = 0.0, chain_residual_b = 0.0;
};

struct OutcomeRow {
  int label = 0;
  double probability = 0.0;
  DensityOperator rho_ab_post;        // rho_AB(k)
  DensityOperator rho_abm_post;       // rho_ABM(k)
  DensityOperator rho_ab_fb;          // rho_AB_f(k)
  DensityOperator rho_abm_fb;         // rho_ABM_f(k)
  DensityOperator rho_m;              // rho_M(k), full memory space
  std::optional<DensityOperator> ref_a, ref_b, ref_ab;  // resolved references
  /// Memory reference for outcome k: canonical state of block k, embedded.
  std::optional<DensityOperator> ref_m;
  double f_final_a = 0.0, f_final_b = 0.0, f_final_ab = 0.0;
};

/// Everything one protocol execution produces: states at every stage, works,
/// heats, free-energy differences, entropy productions, information terms,
/// and the cross-check residuals between their work and entropy forms.
struct RunLedger {
  std::string scenario_name;
  double beta = 0.0;
  Index dim_a = 0, dim_b = 0;
  FeedbackMode feedback_mode = FeedbackMode::local;

  bool initial_canonical = false;   // A and B marginals canonical for H_i
  bool memory_canonical = false;    // rho_M0 canonical for the standard block
  bool references_canonical = true; // resolved refs match the canonical defaults
  bool measurement_efficient = false;
  bool has_preamble = false;

  DensityOperator rho_ab_initial = DensityOperator::trivial();
  DensityOperator rho_m_initial = DensityOperator::trivial();
  std::vector<OutcomeRow> outcomes;
  DensityOperator rho_m_final = DensityOperator::trivial();  // sum_k p_k rho_M(k)

  // Erasure stage.
  ErasureModel::Variant erasure_variant = ErasureModel::Variant::idealized;
  bool erasure_thermalized = false;
  std::optional<DensityOperator> rho_m_erased;
  double erasure_residual_weight = 0.0;
  bool erasure_ok = true;
  /// Distance sum_k p_k T(rho_M(k), canonical of block k): gates the
  /// erasure-cost bound, whose derivation assumes per-block canonical states.
  double memory_blocks_canonical_distance = 0.0;
  bool memory_blocks_canonical = false;

  // Works (energy units) and heat.
  double w_a_ext = 0.0, w_b_ext = 0.0, w_m_mes = 0.0, w_m_ers = 0.0, w_net = 0.0;
  std::optional<double> w_ab_ext;   // nonlocal mode
  double q_ers = 0.0;
  double apparatus_energy_delta = 0.0;

  // Free energies.
  double f_a_initial = 0.0, f_b_initial = 0.0, f_m_initial = 0.0;
  double df_a = 0.0, df_b = 0.0, df_m = 0.0, df_ab = 0.0;

  // Entropies (nats).
  double s_a_initial = 0.0, s_b_initial = 0.0, s_ab_initial = 0.0, s_m_initial = 0.0;
  /// S(averaged ABM after measurement + feedback) - S(initial ABM).
  double delta_s_abm = 0.0;
  double sigma_a_ext = 0.0, sigma_b_ext = 0.0;
  double sigma_m_mes = 0.0, sigma_m_ers = 0.0, sigma_net = 0.0;
  double sigma_feedback_stage = 0.0;
  std::optional<double> sigma_ab_ext_prime, sigma_cycle_prime;
  std::optional<double> sigma_a_ent, sigma_b_ent, sigma_cycle;
  /// Distance of the preamble references from the equality choice
  /// (the post-preamble marginals); zero for the defaults.
  std::optional<double> preamble_reference_distance;

  // Information quantities (nats).
  double h_x = 0.0, i_ax = 0.0, i_bx = 0.0, i_abx = 0.0, i_ab = 0.0, i_ab_given_x = 0.0;

  // Work-form vs entropy-form residuals (populated when the canonicality
  // preconditions hold).
  std::optional<double> sigma_a_work_residual, sigma_b_work_residual;
  std::optional<double> sigma_m_mes_work_residual;
  std::optional<double> sigma_m_ers_relent_residual;
  std::optional<double> erasure_energy_residual;

  std::optional<TwoRoundLedger> two_round;
};

/// Pure bipartite state with canonical marginals:
/// |psi> = Z^{-1/2} sum_k e^{-beta eps_k / 2} |k>|k> in the eigenbasis of h.
DensityOperator thermal_entangled_state(const HermitianOperator& h, double beta);

/// Dephased twin of the thermal entangled state: the classical mixture
/// sum_k (e^{-beta eps_k}/Z) |kk><kk| with the same canonical marginals.
DensityOperator classical_correlated_state(const HermitianOperator& h, double beta);

struct PreambleResult {
  DensityOperator rho_ab;
  double sigma_a_ent = 0.0;
  double sigma_b_ent = 0.0;
  double i_ab = 0.0;
};

PreambleResult entanglement_preamble(const DensityOperator& rho_a, const DensityOperator& rho_b,
                                     const ComplexMatrix& u_ab,
                                     const std::optional<DensityOperator>& reference_a = {},
                                     const std::optional<DensityOperator>& reference_b = {});

/// Execute the four protocol steps and fill the ledger. Dispatches on the
/// feedback mode and runs the second round when the scenario has one.
RunLedger run_protocol(const Scenario& s);
/// Same pipeline, but requires a nonlocal feedback plan.
RunLedger run_nonlocal(const Scenario& s);
/// Same pipeline, but requires a second measurement round (local feedback).
RunLedger run_locc(const Scenario& s);

}  // namespace demonforge
