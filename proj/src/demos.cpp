#include "demonforge/demos.hpp"

#include <cmath>
#include <stdexcept>

namespace demonforge::demos {

namespace {

ComplexMatrix pauli_x() {
  ComplexMatrix x(2, 2);
  x << 0, 1, 1, 0;
  return x;
}

HermitianOperator gapped(double gap) {
  ComplexMatrix h = ComplexMatrix::Zero(2, 2);
  h(1, 1) = gap;
  return HermitianOperator(h);
}

ComplexMatrix cnot_a_to_m() {
  ComplexMatrix u = ComplexMatrix::Zero(4, 4);
  u(0, 0) = u(1, 1) = 1.0;
  u(2, 3) = u(3, 2) = 1.0;
  return u;
}

MemoryModel one_bit_memory() {
  ComplexVector psi = ComplexVector::Zero(2);
  psi[0] = 1.0;
  return MemoryModel({1, 1}, {HermitianOperator::zero(1), HermitianOperator::zero(1)}, 0,
                     pure_state(psi, {2}));
}

FeedbackEntry local_entry(int outcome, ComplexMatrix ua, ComplexMatrix ub, HermitianOperator ha,
                          HermitianOperator hb) {
  FeedbackEntry e;
  e.outcome = outcome;
  e.unitary_a = std::move(ua);
  e.unitary_b = std::move(ub);
  e.h_final_a = std::move(ha);
  e.h_final_b = std::move(hb);
  return e;
}

}  // namespace

const std::vector<std::string>& names() {
  static const std::vector<std::string> all{"szilard-qubit",        "bell-local",
                                            "bell-nonlocal",        "classical-correlated",
                                            "thermal-entangled",    "locc-two-round"};
  return all;
}

ComplexMatrix partial_readout_dilation(double angle) {
  ComplexMatrix ry(2, 2);
  const double c = std::cos(angle / 2.0), s = std::sin(angle / 2.0);
  ry << c, -s, s, c;
  return kron(ComplexMatrix::Identity(2, 2), ry) * cnot_a_to_m();
}

Scenario szilard_qubit(double beta, double gap) {
  Scenario s;
  s.name = "szilard-qubit";
  s.beta = beta;
  s.dim_a = 2;
  s.dim_b = 1;
  s.h_a_initial = HermitianOperator::zero(2);
  s.h_b_initial = HermitianOperator::zero(1);
  s.initial.recipe = InitialRecipe::canonical_product;
  s.memory = one_bit_memory();
  s.measurement.kind = MeasurementSpec::Kind::dilation;
  s.measurement.unitary = cnot_a_to_m();
  s.feedback.mode = FeedbackMode::local;
  s.feedback.entries.push_back(local_entry(0, ComplexMatrix::Identity(2, 2),
                                           ComplexMatrix::Identity(1, 1), gapped(gap / beta),
                                           HermitianOperator::zero(1)));
  s.feedback.entries.push_back(local_entry(1, pauli_x(), ComplexMatrix::Identity(1, 1),
                                           gapped(gap / beta), HermitianOperator::zero(1)));
  s.erasure.variant = ErasureModel::Variant::idealized;
  s.erasure.beta = beta;
  return s;
}

Scenario bell_local(double beta, double gap) {
  Scenario s;
  s.name = "bell-local";
  s.beta = beta;
  s.dim_a = 2;
  s.dim_b = 2;
  s.h_a_initial = HermitianOperator::zero(2);
  s.h_b_initial = HermitianOperator::zero(2);
  s.initial.recipe = InitialRecipe::thermal_entangled;
  s.memory = one_bit_memory();
  s.measurement.kind = MeasurementSpec::Kind::dilation;
  s.measurement.unitary = cnot_a_to_m();
  s.feedback.mode = FeedbackMode::local;
  s.feedback.entries.push_back(local_entry(0, ComplexMatrix::Identity(2, 2),
                                           ComplexMatrix::Identity(2, 2), gapped(gap / beta),
                                           gapped(gap / beta)));
  s.feedback.entries.push_back(
      local_entry(1, pauli_x(), pauli_x(), gapped(gap / beta), gapped(gap / beta)));
  s.erasure.variant = ErasureModel::Variant::idealized;
  s.erasure.beta = beta;
  return s;
}

Scenario bell_nonlocal(double beta, double gap) {
  Scenario s = bell_local(beta, gap);
  s.name = "bell-nonlocal";
  s.feedback = FeedbackPlan{};
  s.feedback.mode = FeedbackMode::nonlocal;
  const HermitianOperator h_ab(
      kron(gapped(gap / beta).matrix(), ComplexMatrix::Identity(2, 2)) +
      kron(ComplexMatrix::Identity(2, 2), gapped(gap / beta).matrix()));
  FeedbackEntry e0;
  e0.outcome = 0;
  e0.unitary_ab = ComplexMatrix::Identity(4, 4);
  e0.h_final_ab = h_ab;
  FeedbackEntry e1;
  e1.outcome = 1;
  e1.unitary_ab = kron(pauli_x(), pauli_x());
  e1.h_final_ab = h_ab;
  s.feedback.entries = {std::move(e0), std::move(e1)};
  return s;
}

Scenario classical_correlated(double beta, double gap) {
  Scenario s = bell_local(beta, gap);
  s.name = "classical-correlated";
  s.initial.recipe = InitialRecipe::classical_correlated;
  return s;
}

Scenario thermal_entangled(double beta, double gap) {
  Scenario s = bell_local(beta, 1.0);
  s.name = "thermal-entangled";
  s.h_a_initial = gapped(gap);
  s.h_b_initial = gapped(gap);
  for (auto& e : s.feedback.entries) {
    e.h_final_a = gapped(gap);
    e.h_final_b = gapped(gap);
  }
  return s;
}

Scenario locc_two_round(double beta, double angle) {
  Scenario s;
  s.name = "locc-two-round";
  s.beta = beta;
  s.dim_a = 2;
  s.dim_b = 2;
  s.h_a_initial = HermitianOperator::zero(2);
  s.h_b_initial = HermitianOperator::zero(2);
  s.initial.recipe = InitialRecipe::thermal_entangled;
  s.memory = one_bit_memory();
  s.measurement.kind = MeasurementSpec::Kind::dilation;
  s.measurement.unitary = partial_readout_dilation(angle);
  s.feedback.mode = FeedbackMode::local;
  for (int k = 0; k < 2; ++k)
    s.feedback.entries.push_back(local_entry(k, ComplexMatrix::Identity(2, 2),
                                             ComplexMatrix::Identity(2, 2),
                                             HermitianOperator::zero(2),
                                             HermitianOperator::zero(2)));
  auto projector = [](Index l) {
    ComplexMatrix p = ComplexMatrix::Zero(2, 2);
    p(l, l) = 1.0;
    return p;
  };
  const KrausFamily projective_b({{0, {projector(0)}}, {1, {projector(1)}}});
  s.second_round = std::map<int, KrausFamily>{{0, projective_b}, {1, projective_b}};
  s.erasure.variant = ErasureModel::Variant::idealized;
  s.erasure.beta = beta;
  return s;
}

Scenario finite_bath_erasure(double beta, double bath_gap) {
  Scenario s = szilard_qubit(beta, 0.0);
  s.name = "finite-bath-erasure";
  // Feedback into flat final Hamiltonians; the point is the erasure stage.
  for (auto& e : s.feedback.entries) e.h_final_a = HermitianOperator::zero(2);

  // Four-level bath: two qubits, the first cold enough to absorb the bit.
  // The second gap stays moderate so every bath population clears the
  // support cutoff used by the entropy cross terms.
  ComplexMatrix h_r = ComplexMatrix::Zero(4, 4);
  const double e1 = bath_gap / beta, e2 = 0.3 * bath_gap / beta;
  h_r(1, 1) = e2;
  h_r(2, 2) = e1;
  h_r(3, 3) = e1 + e2;
  // SWAP the memory qubit with the first bath qubit: |m, r1 r2> -> |r1, m r2>.
  ComplexMatrix u = ComplexMatrix::Zero(8, 8);
  for (Index m = 0; m < 2; ++m)
    for (Index r1 = 0; r1 < 2; ++r1)
      for (Index r2 = 0; r2 < 2; ++r2) u(r1 * 4 + m * 2 + r2, m * 4 + r1 * 2 + r2) = 1.0;

  s.erasure.variant = ErasureModel::Variant::explicit_unitary;
  s.erasure.bath_hamiltonian = HermitianOperator(h_r);
  s.erasure.unitary = u;
  s.erasure.beta = beta;
  return s;
}

Scenario by_name(const std::string& name, double beta, double gap, double angle) {
  if (name == "szilard-qubit") return szilard_qubit(beta, gap);
  if (name == "bell-local") return bell_local(beta, gap);
  if (name == "bell-nonlocal") return bell_nonlocal(beta, gap);
  if (name == "classical-correlated") return classical_correlated(beta, gap);
  if (name == "thermal-entangled") return thermal_entangled(beta, gap);
  if (name == "locc-two-round") return locc_two_round(beta, angle);
  throw std::invalid_argument("unknown demo '" + name + "'");
}

}  // namespace demonforge::demos
