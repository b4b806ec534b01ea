#include "demonforge/protocol.hpp"

#include "demonforge/demos.hpp"
#include "doctest.h"
#include "test_util.hpp"

#include <cmath>

using namespace demonforge;
using namespace testutil;

namespace {

Scenario null_protocol() {
  Scenario s;
  s.name = "null";
  s.beta = 1.3;
  s.dim_a = 2;
  s.dim_b = 2;
  s.h_a_initial = two_level(0.8);
  s.h_b_initial = two_level(0.4);
  s.initial.recipe = InitialRecipe::canonical_product;
  ComplexVector psi = ComplexVector::Zero(1);
  psi[0] = 1.0;
  s.memory = MemoryModel({1}, {HermitianOperator::zero(1)}, 0, pure_state(psi, {1}));
  s.measurement.kind = MeasurementSpec::Kind::kraus;
  s.measurement.family = KrausFamily({{0, {identity(2)}}});
  s.feedback.mode = FeedbackMode::local;
  FeedbackEntry e;
  e.outcome = 0;
  e.unitary_a = identity(2);
  e.unitary_b = identity(2);
  e.h_final_a = s.h_a_initial;
  e.h_final_b = s.h_b_initial;
  s.feedback.entries.push_back(std::move(e));
  s.erasure.variant = ErasureModel::Variant::idealized;
  s.erasure.beta = s.beta;
  return s;
}

}  // namespace

TEST_CASE("thermal entangled state") {
  SUBCASE("degenerate spectrum gives the Bell state") {
    const auto psi = thermal_entangled_state(HermitianOperator::zero(2), 1.0);
    CHECK(trace_distance(psi, bell_phi_plus()) < 1e-12);
  }
  SUBCASE("two-level Schmidt coefficients at beta*E = 1") {
    const auto psi = thermal_entangled_state(two_level(1.0), 1.0);
    const double z = 1.0 + std::exp(-1.0);
    CHECK(psi.matrix()(0, 0).real() == doctest::Approx(1.0 / z).epsilon(1e-12));
    CHECK(psi.matrix()(3, 3).real() == doctest::Approx(std::exp(-1.0) / z).epsilon(1e-12));
    CHECK(std::abs(psi.matrix()(0, 3)) ==
          doctest::Approx(std::exp(-0.5) / z).epsilon(1e-12));
  }
  SUBCASE("both marginals are canonical for random Hamiltonians up to dim 8") {
    for (Index d = 2; d <= 8; d += 2) {
      for (std::uint64_t s = 0; s < 5; ++s) {
        const auto h = random_hermitian(d, 1.0, 40 * static_cast<std::uint64_t>(d) + s);
        const double beta = 0.5 + 0.3 * static_cast<double>(s);
        const auto psi = thermal_entangled_state(h, beta);
        const auto can = canonical_state(h, beta).state;
        CHECK(trace_distance(partial_trace(psi, {{0}}), can) <= 1e-9);
        CHECK(trace_distance(partial_trace(psi, {{1}}), can) <= 1e-9);
        CHECK(von_neumann_entropy(psi) <= 1e-9);  // pure
      }
    }
  }
}

TEST_CASE("szilard qubit run") {
  const auto ledger = run_protocol(demos::szilard_qubit(1.0, 20.0));
  CHECK(ledger.w_a_ext == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(ledger.w_b_ext == doctest::Approx(0.0));
  CHECK(ledger.i_ax == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(ledger.i_bx == doctest::Approx(0.0));
  CHECK(ledger.h_x == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(ledger.initial_canonical);
  CHECK(ledger.memory_canonical);
  CHECK(ledger.measurement_efficient);
  // The work bound's slack in nats: I(A:X) - beta (W_A + dF_A).
  const double slack = ledger.i_ax - ledger.beta * (ledger.w_a_ext + ledger.df_a);
  CHECK(slack == doctest::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-6));
  CHECK(std::abs(slack - std::log1p(std::exp(-20.0))) < 1e-12);
  // Idealized erasure saturates Landauer at dF_M = 0.
  CHECK(ledger.df_m == doctest::Approx(0.0));
  CHECK(ledger.w_m_ers == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(ledger.sigma_m_ers == doctest::Approx(0.0));
}

TEST_CASE("bell local run") {
  const double beta = 1.0, gap = 20.0;
  const auto ledger = run_protocol(demos::bell_local(beta, gap));
  CHECK(ledger.i_ax == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(ledger.i_bx == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(ledger.i_abx == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(ledger.i_ab == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(ledger.i_ab_given_x == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(ledger.w_a_ext + ledger.w_b_ext == doctest::Approx(0.0).epsilon(1e-12));
  const double df_expected = 2.0 * std::log(2.0) - 2.0 * std::log1p(std::exp(-gap));
  CHECK(beta * (ledger.df_a + ledger.df_b) == doctest::Approx(df_expected).epsilon(1e-12));
  CHECK(ledger.initial_canonical);
  // Work-form and entropy-form sigmas agree.
  REQUIRE(ledger.sigma_a_work_residual.has_value());
  CHECK(*ledger.sigma_a_work_residual <= 1e-8);
  CHECK(*ledger.sigma_b_work_residual <= 1e-8);
  REQUIRE(ledger.sigma_m_mes_work_residual.has_value());
  CHECK(*ledger.sigma_m_mes_work_residual <= 1e-8);
}

TEST_CASE("null protocol run") {
  const auto ledger = run_protocol(null_protocol());
  CHECK(ledger.w_a_ext == doctest::Approx(0.0));
  CHECK(ledger.w_b_ext == doctest::Approx(0.0));
  CHECK(ledger.w_m_mes == doctest::Approx(0.0));
  CHECK(ledger.w_net == doctest::Approx(ledger.w_a_ext + ledger.w_b_ext - ledger.w_m_mes -
                                        ledger.w_m_ers));
  CHECK(ledger.h_x == doctest::Approx(0.0));
  CHECK(ledger.i_ax == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(ledger.i_bx == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(ledger.i_abx == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(ledger.i_ab == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(ledger.sigma_a_ext >= -1e-9);
  CHECK(ledger.sigma_b_ext >= -1e-9);
  CHECK(ledger.sigma_m_mes >= -1e-9);
  CHECK(ledger.sigma_net >= -1e-9);
  CHECK(ledger.sigma_feedback_stage == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("probability conservation and feedback entropy invariance") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    Scenario sc = demos::bell_local(1.0, 5.0);
    // Random feedback unitaries keep the plan valid.
    for (auto& e : sc.feedback.entries) {
      e.unitary_a = random_unitary(2, 3000 + 2 * s);
      e.unitary_b = random_unitary(2, 3001 + 2 * s);
    }
    sc.measurement.unitary = random_unitary(4, 3100 + s);
    const auto ledger = run_protocol(sc);
    double total = 0.0;
    for (const auto& row : ledger.outcomes) total += row.probability;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    for (const auto& row : ledger.outcomes) {
      const double s_pre = von_neumann_entropy(partial_trace(row.rho_ab_post, {{0}}));
      const double s_post = von_neumann_entropy(partial_trace(row.rho_ab_fb, {{0}}));
      CHECK(s_post == doctest::Approx(s_pre).epsilon(1e-9));
    }
  }
}

TEST_CASE("memory accounting matches the direct global evaluation") {
  // -Tr[rho_M_f ln rho_M_r] computed on the full memory space must equal the
  // block-split form used internally (the paper's splitting identity).
  Scenario sc = demos::bell_local(1.0, 3.0);
  ComplexMatrix h0(1, 1), h1(1, 1);
  h0 << 0.3;
  h1 << 1.1;
  ComplexVector start = ComplexVector::Zero(2);
  start[0] = 1.0;
  sc.memory = MemoryModel({1, 1}, {HermitianOperator(h0), HermitianOperator(h1)}, 0,
                          pure_state(start, {2}));
  const auto ledger = run_protocol(sc);

  ComplexMatrix ref = ComplexMatrix::Zero(2, 2);
  for (const auto& row : ledger.outcomes) {
    const auto can = canonical_state(row.label == 0 ? HermitianOperator(h0) : HermitianOperator(h1),
                                     ledger.beta);
    ref(row.label, row.label) = row.probability * can.state.matrix()(0, 0);
  }
  const DensityOperator rho_ref(ref, {2});
  const double direct =
      cross_entropy_term(ledger.rho_m_final, rho_ref) - ledger.s_m_initial;
  CHECK(ledger.sigma_m_mes == doctest::Approx(direct).epsilon(1e-9));
}

TEST_CASE("measurement-cost identity against the relative-entropy form") {
  // sigma_M_mes - I(AB:X) = dS + sum_k p_k S(rho_ABM_f(k) || rho_AB_f(k) x rho_M_r(k)).
  for (std::uint64_t s = 0; s < 6; ++s) {
    Scenario sc = demos::bell_local(1.0, 2.0);
    sc.measurement.unitary = random_unitary(4, 7100 + s);
    const auto ledger = run_protocol(sc);
    double relent = 0.0;
    for (const auto& row : ledger.outcomes) {
      const auto can_k = canonical_state(HermitianOperator::zero(1), 1.0);
      ComplexMatrix ref_m = ComplexMatrix::Zero(2, 2);
      ref_m(row.label, row.label) = 1.0;
      const DensityOperator mem_ref(ref_m, {2});
      relent += row.probability *
                relative_entropy(row.rho_abm_fb, tensor(row.rho_ab_fb, mem_ref));
    }
    CHECK(ledger.sigma_m_mes - ledger.i_abx ==
          doctest::Approx(ledger.delta_s_abm + relent).epsilon(1e-8));
  }
}

TEST_CASE("nonlocal feedback runs") {
  SUBCASE("engineered equality with reference overrides") {
    Scenario sc = demos::bell_nonlocal(1.0, 20.0);
    for (auto& e : sc.feedback.entries) {
      ComplexVector ground = ComplexVector::Zero(4);
      ground[0] = 1.0;
      e.reference_ab = pure_state(ground, {2, 2});
    }
    const auto ledger = run_nonlocal(sc);
    REQUIRE(ledger.sigma_ab_ext_prime.has_value());
    CHECK(*ledger.sigma_ab_ext_prime + ledger.i_abx == doctest::Approx(0.0).epsilon(1e-10));
    CHECK_FALSE(ledger.references_canonical);
  }
  SUBCASE("a local plan lifted to a nonlocal one gives the same physics") {
    const auto local = run_protocol(demos::bell_local(1.0, 7.0));
    Scenario lifted = demos::bell_local(1.0, 7.0);
    FeedbackPlan plan;
    plan.mode = FeedbackMode::nonlocal;
    for (const auto& e : lifted.feedback.entries) {
      FeedbackEntry ne;
      ne.outcome = e.outcome;
      ne.unitary_ab = kron(*e.unitary_a, *e.unitary_b);
      ne.h_final_ab = HermitianOperator(
          kron(e.h_final_a->matrix(), ComplexMatrix::Identity(2, 2)) +
          kron(ComplexMatrix::Identity(2, 2), e.h_final_b->matrix()));
      plan.entries.push_back(std::move(ne));
    }
    lifted.feedback = std::move(plan);
    const auto nonlocal = run_nonlocal(lifted);
    CHECK(*nonlocal.w_ab_ext ==
          doctest::Approx(local.w_a_ext + local.w_b_ext).epsilon(1e-10));
    CHECK(nonlocal.df_ab == doctest::Approx(local.df_ab).epsilon(1e-10));
    CHECK(nonlocal.w_net == doctest::Approx(local.w_net).epsilon(1e-10));
    CHECK(nonlocal.sigma_m_mes == doctest::Approx(local.sigma_m_mes).epsilon(1e-10));
    CHECK(nonlocal.h_x == doctest::Approx(local.h_x).epsilon(1e-12));
  }
  SUBCASE("random nonlocal plans satisfy the composite gain bound") {
    for (std::uint64_t s = 0; s < 10; ++s) {
      Scenario sc = demos::bell_nonlocal(1.0, 4.0);
      for (auto& e : sc.feedback.entries)
        e.unitary_ab = random_unitary(4, 8000 + 10 * s + static_cast<std::uint64_t>(e.outcome));
      sc.measurement.unitary = random_unitary(4, 8100 + s);
      const auto ledger = run_nonlocal(sc);
      CHECK(*ledger.sigma_ab_ext_prime + ledger.i_abx >= -1e-9);
      CHECK(*ledger.sigma_cycle_prime >= -1e-9);
    }
  }
  SUBCASE("run_nonlocal rejects local plans") {
    CHECK_THROWS_AS((void)run_nonlocal(demos::bell_local(1.0, 1.0)), std::invalid_argument);
  }
}

TEST_CASE("entanglement preamble") {
  SUBCASE("identity unitary creates nothing") {
    const auto res = entanglement_preamble(maximally_mixed(2), maximally_mixed(2), identity(4));
    CHECK(res.sigma_a_ent == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(res.sigma_b_ent == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(res.i_ab == doctest::Approx(0.0).epsilon(1e-10));
  }
  SUBCASE("CNOT on |+>|0> builds a Bell pair at cost 2 ln 2") {
    ComplexVector plus(2);
    plus << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    ComplexMatrix cnot = ComplexMatrix::Zero(4, 4);
    cnot(0, 0) = cnot(1, 1) = cnot(2, 3) = cnot(3, 2) = 1.0;
    const auto res =
        entanglement_preamble(pure_state(plus, {2}), basis_state(2, 0), cnot);
    CHECK(res.i_ab == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
    CHECK(res.sigma_a_ent + res.sigma_b_ent ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("equality references make the cost exactly the mutual information") {
    for (std::uint64_t s = 0; s < 15; ++s) {
      const auto res = entanglement_preamble(random_density(2, 2, 9000 + s),
                                             random_density(2, 2, 9100 + s),
                                             random_unitary(4, 9200 + s));
      CHECK(std::abs(res.sigma_a_ent + res.sigma_b_ent - res.i_ab) <= 1e-9);
    }
  }
}

TEST_CASE("explicit erasure against a finite bath") {
  const auto ledger = run_protocol(demos::finite_bath_erasure(1.0, 20.0));
  CHECK(ledger.erasure_ok);
  CHECK(ledger.erasure_residual_weight <= 1e-6);
  CHECK(ledger.w_m_ers >= std::log(2.0) - 1e-9);
  CHECK(ledger.sigma_m_ers > 1e-3);  // strictly irreversible
  REQUIRE(ledger.sigma_m_ers_relent_residual.has_value());
  CHECK(*ledger.sigma_m_ers_relent_residual <= 1e-8);
  REQUIRE(ledger.erasure_energy_residual.has_value());
  CHECK(*ledger.erasure_energy_residual <= 1e-8);
  CHECK(ledger.memory_blocks_canonical);  // one-dimensional blocks
}

TEST_CASE("block thermalization before erasure") {
  // Multi-dimensional outcome block whose post-measurement state is far from
  // canonical: thermalizing first restores the erasure bound's assumptions.
  Scenario sc = demos::bell_local(1.2, 3.0);
  ComplexVector start = ComplexVector::Zero(3);
  start[0] = 1.0;
  sc.memory = MemoryModel({1, 2}, {HermitianOperator::zero(1), two_level(1.5)}, 0,
                          pure_state(start, {3}));
  sc.measurement.unitary = random_unitary(6, 321);

  Scenario with_thermalize = sc;
  const Index dm = 3;
  ComplexMatrix h_r = ComplexMatrix::Zero(dm, dm);
  h_r(1, 1) = h_r(2, 2) = 35.0 / sc.beta;
  ComplexMatrix swap = ComplexMatrix::Zero(dm * dm, dm * dm);
  for (Index m = 0; m < dm; ++m)
    for (Index r = 0; r < dm; ++r) swap(r * dm + m, m * dm + r) = 1.0;
  with_thermalize.erasure.variant = ErasureModel::Variant::explicit_unitary;
  with_thermalize.erasure.bath_hamiltonian = HermitianOperator(h_r);
  with_thermalize.erasure.unitary = swap;
  with_thermalize.erasure.thermalize_blocks = true;
  with_thermalize.erasure.beta = sc.beta;

  const auto ledger = run_protocol(with_thermalize);
  CHECK(ledger.erasure_thermalized);
  CHECK(ledger.erasure_ok);
  // The post-measurement block states are not canonical, but the bound's
  // work form holds for the thermalized memory.
  CHECK_FALSE(ledger.memory_blocks_canonical);
  const double slack_h =
      ledger.beta * ledger.w_m_ers - ledger.h_x + ledger.beta * ledger.df_m;
  CHECK(slack_h >= -1e-9);
}

TEST_CASE("two-round (LOCC) runs") {
  SUBCASE("trivial second round reduces to the one-round ledger") {
    Scenario sc = demos::bell_local(1.0, 6.0);
    const KrausFamily ident_b({{0, {identity(2)}}});
    sc.second_round = std::map<int, KrausFamily>{{0, ident_b}, {1, ident_b}};
    const auto baseline = run_protocol(demos::bell_local(1.0, 6.0));
    const auto ledger = run_locc(sc);
    REQUIRE(ledger.two_round.has_value());
    CHECK(ledger.two_round->i_axy == doctest::Approx(baseline.i_ax).epsilon(1e-10));
    CHECK(ledger.two_round->i_bxy == doctest::Approx(baseline.i_bx).epsilon(1e-10));
    CHECK(ledger.two_round->residual_cmi ==
          doctest::Approx(baseline.i_ab_given_x).epsilon(1e-10));
    CHECK(ledger.w_net == doctest::Approx(baseline.w_net).epsilon(1e-10));
  }
  SUBCASE("projective rounds on the Bell pair leave no residual correlation") {
    const auto ledger = run_locc(demos::locc_two_round(1.0, 0.0));
    REQUIRE(ledger.two_round.has_value());
    CHECK(ledger.two_round->residual_cmi == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(ledger.two_round->i_bxy == doctest::Approx(std::log(2.0)).epsilon(1e-10));
  }
  SUBCASE("weak first round leaves correlation that round two picks up") {
    const auto ledger = run_locc(demos::locc_two_round(1.0, M_PI / 3.0));
    REQUIRE(ledger.two_round.has_value());
    // Residual correlation after round one only.
    const double c2 = std::cos(M_PI / 6.0) * std::cos(M_PI / 6.0);
    const double h2 = -(c2 * std::log(c2) + (1 - c2) * std::log(1 - c2));
    CHECK(ledger.i_ab_given_x == doctest::Approx(2.0 * h2).epsilon(1e-9));
    CHECK(ledger.two_round->residual_cmi == doctest::Approx(0.0).epsilon(1e-10));
  }
  SUBCASE("chain decomposition holds for random two-round scenarios") {
    for (std::uint64_t s = 0; s < 10; ++s) {
      Scenario sc = demos::locc_two_round(1.0, 0.9);
      sc.measurement.unitary = random_unitary(4, 9500 + s);
      std::map<int, KrausFamily> families;
      for (int k = 0; k < 2; ++k) {
        const auto groups = random_kraus_groups(2, 2, 1, 9600 + 10 * s + static_cast<std::uint64_t>(k));
        families.emplace(k, KrausFamily({{0, {groups[0][0]}}, {1, {groups[1][0]}}}));
      }
      sc.second_round = std::move(families);
      const auto ledger = run_locc(sc);
      REQUIRE(ledger.two_round.has_value());
      CHECK(ledger.two_round->chain_residual_a <= 1e-9);
      CHECK(ledger.two_round->chain_residual_b <= 1e-9);
    }
  }
  SUBCASE("run_locc rejects scenarios without a second round") {
    CHECK_THROWS_AS((void)run_locc(demos::bell_local(1.0, 1.0)), std::invalid_argument);
  }
}

TEST_CASE("scenario validation catches inconsistencies") {
  SUBCASE("wrong feedback dimensions") {
    Scenario sc = demos::bell_local(1.0, 1.0);
    sc.feedback.entries[0].unitary_a = identity(3);
    CHECK_THROWS_AS((void)run_protocol(sc), std::invalid_argument);
  }
  SUBCASE("missing feedback outcome") {
    Scenario sc = demos::bell_local(1.0, 1.0);
    sc.feedback.entries.pop_back();
    CHECK_THROWS_AS((void)run_protocol(sc), std::invalid_argument);
  }
  SUBCASE("correlated recipes need matching Hamiltonians") {
    Scenario sc = demos::bell_local(1.0, 1.0);
    sc.h_b_initial = two_level(0.5);
    CHECK_THROWS_AS((void)run_protocol(sc), std::invalid_argument);
  }
  SUBCASE("explicit erasure needs a bath") {
    Scenario sc = demos::szilard_qubit(1.0, 1.0);
    sc.erasure.variant = ErasureModel::Variant::explicit_unitary;
    CHECK_THROWS_AS((void)run_protocol(sc), std::invalid_argument);
  }
}
