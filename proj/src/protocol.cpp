#include "demonforge/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace demonforge {

namespace {

constexpr double kCanonicalTol = 1e-9;
constexpr double kBlockCanonicalTol = 1e-8;
constexpr double kErasureResidualTol = 1e-6;

double energy(const DensityOperator& rho, const HermitianOperator& h) {
  return (rho.matrix() * h.matrix()).trace().real();
}

HermitianOperator noninteracting_sum(const HermitianOperator& ha, const HermitianOperator& hb) {
  return HermitianOperator(kron(ha.matrix(), ComplexMatrix::Identity(hb.dim(), hb.dim())) +
                           kron(ComplexMatrix::Identity(ha.dim(), ha.dim()), hb.matrix()));
}

}  // namespace

const FeedbackEntry& FeedbackPlan::entry_for(int outcome) const {
  for (const auto& e : entries)
    if (e.outcome == outcome) return e;
  throw std::invalid_argument("feedback plan has no entry for outcome " + std::to_string(outcome));
}

void FeedbackPlan::validate(Index dim_a, Index dim_b) const {
  if (entries.empty()) throw std::invalid_argument("feedback plan has no entries");
  for (const auto& e : entries) {
    if (mode == FeedbackMode::local) {
      if (!e.unitary_a || !e.unitary_b || !e.h_final_a || !e.h_final_b)
        throw std::invalid_argument("local feedback entry " + std::to_string(e.outcome) +
                                    " needs unitaries and final Hamiltonians for A and B");
      if (e.unitary_a->rows() != dim_a || e.unitary_b->rows() != dim_b ||
          e.h_final_a->dim() != dim_a || e.h_final_b->dim() != dim_b)
        throw std::invalid_argument("feedback entry " + std::to_string(e.outcome) +
                                    ": dimension mismatch");
      if (unitarity_residual(*e.unitary_a) > tol::unitarity ||
          unitarity_residual(*e.unitary_b) > tol::unitarity)
        throw std::invalid_argument("feedback entry " + std::to_string(e.outcome) +
                                    ": unitarity check failed");
      if (e.reference_a && e.reference_a->dim() != dim_a)
        throw std::invalid_argument("feedback reference A dimension mismatch");
      if (e.reference_b && e.reference_b->dim() != dim_b)
        throw std::invalid_argument("feedback reference B dimension mismatch");
    } else {
      if (!e.unitary_ab || !e.h_final_ab)
        throw std::invalid_argument("nonlocal feedback entry " + std::to_string(e.outcome) +
                                    " needs a joint unitary and final Hamiltonian");
      if (e.unitary_ab->rows() != dim_a * dim_b || e.h_final_ab->dim() != dim_a * dim_b)
        throw std::invalid_argument("nonlocal feedback entry " + std::to_string(e.outcome) +
                                    ": dimension mismatch");
      if (unitarity_residual(*e.unitary_ab) > tol::unitarity)
        throw std::invalid_argument("nonlocal feedback entry " + std::to_string(e.outcome) +
                                    ": unitarity check failed");
      if (e.reference_ab && e.reference_ab->dim() != dim_a * dim_b)
        throw std::invalid_argument("feedback reference AB dimension mismatch");
    }
  }
}

void Scenario::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw std::invalid_argument("scenario beta must be finite and positive");
  if (dim_a <= 0 || dim_b <= 0) throw std::invalid_argument("scenario dimensions must be positive");
  if (h_a_initial.dim() != dim_a) throw std::invalid_argument("h_a_initial dimension mismatch");
  if (h_b_initial.dim() != dim_b) throw std::invalid_argument("h_b_initial dimension mismatch");

  switch (initial.recipe) {
    case InitialRecipe::explicit_state:
      if (!initial.state) throw std::invalid_argument("explicit initial recipe needs a state");
      if (initial.state->dims() != std::vector<Index>{dim_a, dim_b})
        throw std::invalid_argument("explicit initial state has the wrong factorization");
      break;
    case InitialRecipe::thermal_entangled:
    case InitialRecipe::classical_correlated:
      if (dim_a != dim_b)
        throw std::invalid_argument("correlated recipes require matching A and B dimensions");
      if ((h_a_initial.matrix() - h_b_initial.matrix()).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("correlated recipes require identical A and B Hamiltonians");
      break;
    case InitialRecipe::canonical_product:
      break;
  }

  if (measurement.kind == MeasurementSpec::Kind::dilation) {
    if (!measurement.unitary) throw std::invalid_argument("dilation measurement needs a unitary");
    if (measurement.unitary->rows() != dim_a * memory.total_dim())
      throw std::invalid_argument("dilation unitary must act on A (x) M");
  } else {
    if (!measurement.family) throw std::invalid_argument("kraus measurement needs a family");
    if (measurement.family->dim() != dim_a)
      throw std::invalid_argument("kraus family dimension mismatch");
    for (const auto& group : measurement.family->outcomes()) {
      if (group.label < 0 || group.label >= memory.block_count())
        throw std::invalid_argument("kraus outcome label has no memory block");
      if (static_cast<Index>(group.operators.size()) >
          memory.block_dims()[static_cast<std::size_t>(group.label)])
        throw std::invalid_argument("memory block too small for kraus outcome " +
                                    std::to_string(group.label));
    }
  }

  feedback.validate(dim_a, dim_b);

  if (erasure.variant == ErasureModel::Variant::explicit_unitary) {
    if (!erasure.bath_hamiltonian || !erasure.unitary)
      throw std::invalid_argument("explicit erasure needs a bath Hamiltonian and a unitary");
    if (erasure.unitary->rows() != memory.total_dim() * erasure.bath_hamiltonian->dim())
      throw std::invalid_argument("erasure unitary must act on M (x) R");
    if (unitarity_residual(*erasure.unitary) > tol::unitarity)
      throw std::invalid_argument("erasure unitary fails the unitarity check");
  }

  if (second_round) {
    if (feedback.mode != FeedbackMode::local)
      throw std::invalid_argument("the second round requires local round-one feedback");
    for (const auto& [k, fam] : *second_round)
      if (fam.dim() != dim_b)
        throw std::invalid_argument("second-round family for outcome " + std::to_string(k) +
                                    " does not act on B");
  }

  if (preamble) {
    if (preamble->state_a.dim() != dim_a || preamble->state_b.dim() != dim_b)
      throw std::invalid_argument("preamble state dimensions mismatch");
    if (preamble->unitary.rows() != dim_a * dim_b)
      throw std::invalid_argument("preamble unitary must act on A (x) B");
    if (unitarity_residual(preamble->unitary) > tol::unitarity)
      throw std::invalid_argument("preamble unitary fails the unitarity check");
  }
}

DensityOperator thermal_entangled_state(const HermitianOperator& h, double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw std::invalid_argument("inverse temperature must be finite and positive");
  const EigenSystem es = hermitian_eig(h);
  const Index d = h.dim();
  const double emin = es.values.minCoeff();
  RealVector c(d);
  for (Index k = 0; k < d; ++k) c[k] = std::exp(-0.5 * beta * (es.values[k] - emin));
  c /= std::sqrt(c.squaredNorm());
  ComplexVector psi = ComplexVector::Zero(d * d);
  for (Index k = 0; k < d; ++k) {
    const ComplexVector v = es.vectors.col(k);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) psi[i * d + j] += c[k] * v[i] * v[j];
  }
  return pure_state(psi, {d, d});
}

DensityOperator classical_correlated_state(const HermitianOperator& h, double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw std::invalid_argument("inverse temperature must be finite and positive");
  const EigenSystem es = hermitian_eig(h);
  const Index d = h.dim();
  const double emin = es.values.minCoeff();
  RealVector q(d);
  for (Index k = 0; k < d; ++k) q[k] = std::exp(-beta * (es.values[k] - emin));
  q /= q.sum();
  ComplexMatrix rho = ComplexMatrix::Zero(d * d, d * d);
  for (Index k = 0; k < d; ++k) {
    const ComplexVector v = es.vectors.col(k);
    const ComplexMatrix proj = v * v.adjoint();
    rho += q[k] * kron(proj, proj);
  }
  return DensityOperator(std::move(rho), {d, d});
}

PreambleResult entanglement_preamble(const DensityOperator& rho_a, const DensityOperator& rho_b,
                                     const ComplexMatrix& u_ab,
                                     const std::optional<DensityOperator>& reference_a,
                                     const std::optional<DensityOperator>& reference_b) {
  if (u_ab.rows() != rho_a.dim() * rho_b.dim() || u_ab.rows() != u_ab.cols())
    throw std::invalid_argument("preamble unitary must act on A (x) B");
  if (unitarity_residual(u_ab) > tol::unitarity)
    throw std::invalid_argument("preamble unitary fails the unitarity check");
  const DensityOperator rho_ab = tensor(rho_a, rho_b).evolved(u_ab);
  const DensityOperator marg_a = partial_trace(rho_ab, {{0}});
  const DensityOperator marg_b = partial_trace(rho_ab, {{1}});
  const DensityOperator& ref_a = reference_a ? *reference_a : marg_a;
  const DensityOperator& ref_b = reference_b ? *reference_b : marg_b;
  PreambleResult out{rho_ab, 0.0, 0.0, mutual_information(rho_ab)};
  out.sigma_a_ent = cross_entropy_term(marg_a, ref_a) - von_neumann_entropy(rho_a);
  out.sigma_b_ent = cross_entropy_term(marg_b, ref_b) - von_neumann_entropy(rho_b);
  return out;
}

namespace {

DensityOperator build_initial_state(const Scenario& s, const CanonicalEnsemble& can_a,
                                    const CanonicalEnsemble& can_b) {
  switch (s.initial.recipe) {
    case InitialRecipe::canonical_product:
      return tensor(can_a.state, can_b.state);
    case InitialRecipe::thermal_entangled:
      return thermal_entangled_state(s.h_a_initial, s.beta);
    case InitialRecipe::classical_correlated:
      return classical_correlated_state(s.h_a_initial, s.beta);
    case InitialRecipe::explicit_state:
      return *s.initial.state;
  }
  throw std::logic_error("unreachable");
}

struct ErasureOutcome {
  DensityOperator rho_m_erased;
  double q_ers = 0.0;
  double w_m_ers = 0.0;
  double sigma_m_ers = 0.0;
  double residual_weight = 0.0;
  bool thermalized = false;
  std::optional<double> relent_residual;
  std::optional<double> energy_residual;
};

ErasureOutcome run_erasure(const Scenario& s, const RunLedger& ledger,
                           const std::vector<CanonicalEnsemble>& block_canonicals,
                           const CanonicalEnsemble& std_block_canonical) {
  const MemoryModel& mem = s.memory;
  const double beta = s.beta;
  const double h_x = ledger.h_x;

  // Ensemble-averaged canonical references per block, weighted by p_k.
  auto thermalized_memory = [&]() {
    ComplexMatrix acc = ComplexMatrix::Zero(mem.total_dim(), mem.total_dim());
    for (const auto& row : ledger.outcomes)
      acc += row.probability *
             mem.embed_block(block_canonicals[static_cast<std::size_t>(row.label)].state.matrix(),
                             row.label);
    return DensityOperator(std::move(acc), {mem.total_dim()});
  };

  ErasureOutcome out{
      DensityOperator(mem.embed_block(std_block_canonical.state.matrix(), mem.standard_block()),
                      {mem.total_dim()}),
      0.0, 0.0, 0.0, 0.0, false, {}, {}};

  if (s.erasure.variant == ErasureModel::Variant::idealized) {
    // Saturates the erasure bound: W = H(X)/beta - dF_M, sigma = 0. The heat
    // follows from the entropy balance of the idealized (per-block canonical)
    // memory.
    out.thermalized = true;
    out.w_m_ers = h_x / beta - ledger.df_m;
    double avg_block_entropy = 0.0;
    for (const auto& row : ledger.outcomes)
      avg_block_entropy +=
          row.probability *
          von_neumann_entropy(block_canonicals[static_cast<std::size_t>(row.label)].state);
    out.q_ers =
        (von_neumann_entropy(std_block_canonical.state) - avg_block_entropy - h_x) / beta;
    out.sigma_m_ers = 0.0;
    return out;
  }

  const HermitianOperator& h_r = *s.erasure.bath_hamiltonian;
  const HermitianOperator h_m = mem.full_hamiltonian();
  const auto bath = canonical_state(h_r, beta);

  const DensityOperator rho_m_pre =
      s.erasure.thermalize_blocks ? thermalized_memory() : ledger.rho_m_final;
  out.thermalized = s.erasure.thermalize_blocks;

  const DensityOperator joint_before = tensor(rho_m_pre, bath.state);
  const DensityOperator joint_after = joint_before.evolved(*s.erasure.unitary);
  const DensityOperator rho_m_ers = partial_trace(joint_after, {{0}});
  const DensityOperator rho_r_ers = partial_trace(joint_after, {{1}});

  out.q_ers = energy(bath.state, h_r) - energy(rho_r_ers, h_r);
  out.sigma_m_ers =
      von_neumann_entropy(rho_m_ers) - von_neumann_entropy(rho_m_pre) - beta * out.q_ers;
  out.w_m_ers = energy(rho_m_ers, h_m) - energy(rho_m_pre, h_m) - out.q_ers;
  out.residual_weight = mem.weight_outside_block(rho_m_ers, mem.standard_block());
  out.rho_m_erased = rho_m_ers;

  // Chain of equalities: sigma equals
  // -Tr[rho_MR_ers ln(rho_M_ers (x) rho_R_can)] - S(rho_MR_ers), evaluated
  // factor by factor. Skipped when the coldest bath population sits below
  // the support cutoff: the cross term is no longer well posed there.
  const double bath_min_pop =
      hermitian_eig(bath.state.matrix()).values.minCoeff();
  if (bath_min_pop >= tol::support_cutoff) {
    const double chain = von_neumann_entropy(rho_m_ers) +
                         cross_entropy_term(rho_r_ers, bath.state) -
                         von_neumann_entropy(joint_after);
    out.relent_residual = std::abs(out.sigma_m_ers - chain);
  }

  // First-law closure on M + R: the injected work is the total energy change.
  const HermitianOperator h_total = noninteracting_sum(h_m, h_r);
  const double de_total = energy(joint_after, h_total) - energy(joint_before, h_total);
  out.energy_residual = std::abs(out.w_m_ers - de_total);
  return out;
}

RunLedger run_impl(const Scenario& s) {
  s.validate();
  const double beta = s.beta;
  const bool local = s.feedback.mode == FeedbackMode::local;

  RunLedger ledger;
  ledger.scenario_name = s.name;
  ledger.beta = beta;
  ledger.dim_a = s.dim_a;
  ledger.dim_b = s.dim_b;
  ledger.feedback_mode = s.feedback.mode;
  ledger.erasure_variant = s.erasure.variant;

  const auto can_a = canonical_state(s.h_a_initial, beta);
  const auto can_b = canonical_state(s.h_b_initial, beta);
  ledger.f_a_initial = can_a.free_energy;
  ledger.f_b_initial = can_b.free_energy;

  // Step 1: initial state (with the optional correlation preamble).
  DensityOperator rho_ab = build_initial_state(s, can_a, can_b);
  if (s.preamble) {
    const auto pre = entanglement_preamble(s.preamble->state_a, s.preamble->state_b,
                                           s.preamble->unitary, s.preamble->reference_a,
                                           s.preamble->reference_b);
    rho_ab = pre.rho_ab.regrouped({s.dim_a, s.dim_b});
    ledger.has_preamble = true;
    ledger.sigma_a_ent = pre.sigma_a_ent;
    ledger.sigma_b_ent = pre.sigma_b_ent;
    const DensityOperator marg_a = partial_trace(pre.rho_ab, {{0}});
    const DensityOperator marg_b = partial_trace(pre.rho_ab, {{1}});
    ledger.preamble_reference_distance =
        (s.preamble->reference_a ? trace_distance(*s.preamble->reference_a, marg_a) : 0.0) +
        (s.preamble->reference_b ? trace_distance(*s.preamble->reference_b, marg_b) : 0.0);
  }
  ledger.rho_ab_initial = rho_ab;
  ledger.rho_m_initial = s.memory.initial_state();

  const DensityOperator rho_a_i = partial_trace(rho_ab, {{0}});
  const DensityOperator rho_b_i = partial_trace(rho_ab, {{1}});
  ledger.s_a_initial = von_neumann_entropy(rho_a_i);
  ledger.s_b_initial = von_neumann_entropy(rho_b_i);
  ledger.s_ab_initial = von_neumann_entropy(rho_ab);
  ledger.s_m_initial = von_neumann_entropy(s.memory.initial_state());
  ledger.initial_canonical = trace_distance(rho_a_i, can_a.state) <= kCanonicalTol &&
                             trace_distance(rho_b_i, can_b.state) <= kCanonicalTol;

  // Per-block canonical data for the memory.
  std::vector<CanonicalEnsemble> block_canonicals;
  for (int k = 0; k < s.memory.block_count(); ++k)
    block_canonicals.push_back(
        canonical_state(s.memory.block_hamiltonians()[static_cast<std::size_t>(k)], beta));
  const CanonicalEnsemble& std_can =
      block_canonicals[static_cast<std::size_t>(s.memory.standard_block())];
  ledger.f_m_initial = std_can.free_energy;
  {
    const DensityOperator std_embedded(
        s.memory.embed_block(std_can.state.matrix(), s.memory.standard_block()),
        {s.memory.total_dim()});
    ledger.memory_canonical =
        trace_distance(s.memory.initial_state(), std_embedded) <= kCanonicalTol;
  }

  // Step 2: measurement.
  const MeasurementRecord rec =
      (s.measurement.kind == MeasurementSpec::Kind::dilation)
          ? apply_measurement(IndirectMeasurement(*s.measurement.unitary, s.memory, s.dim_a),
                              rho_ab)
          : apply_measurement(*s.measurement.family, s.memory, rho_ab);
  ledger.measurement_efficient = rec.efficient;

  const OutcomeEnsemble& ensemble = rec.ensemble;
  ledger.h_x = shannon_entropy(ensemble);
  ledger.i_ax = information_gain(rho_a_i, ensemble.marginal({{0}}));
  ledger.i_bx = holevo_chi(rho_b_i, ensemble.marginal({{1}}));
  ledger.i_abx = information_gain(rho_ab, ensemble);
  ledger.i_ab = mutual_information(rho_ab);
  ledger.i_ab_given_x = conditional_mutual_information(ensemble);

  {
    double after = 0.0;
    for (const auto& o : ensemble.outcomes())
      after += o.probability * energy(partial_trace(o.state, {{0}}), s.h_a_initial);
    ledger.apparatus_energy_delta = after - energy(rho_a_i, s.h_a_initial);
  }

  // Step 3: outcome-conditioned feedback.
  const Index dm = s.memory.total_dim();
  double w_final_energy_a = 0.0, w_final_energy_b = 0.0, w_final_energy_ab = 0.0;
  double df_final_a = 0.0, df_final_b = 0.0, df_final_ab = 0.0;
  double sigma_a_cross = 0.0, sigma_b_cross = 0.0, sigma_ab_cross = 0.0;
  double sigma_fb = 0.0;
  bool references_canonical = true;

  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    const auto& o = ensemble.outcomes()[i];
    const FeedbackEntry& entry = s.feedback.entry_for(o.label);

    OutcomeRow row{o.label,
                   o.probability,
                   o.state,
                   rec.joint_states[i],
                   o.state,
                   rec.joint_states[i],
                   rec.memory_states[i],
                   {},
                   {},
                   {},
                   {},
                   0.0,
                   0.0,
                   0.0};

    ComplexMatrix u_ab = local ? kron(*entry.unitary_a, *entry.unitary_b) : *entry.unitary_ab;
    row.rho_ab_fb = o.state.evolved(u_ab);
    row.rho_abm_fb = rec.joint_states[i].evolved(
        kron(u_ab, ComplexMatrix::Identity(dm, dm)));

    if (local) {
      const auto can_fa = canonical_state(*entry.h_final_a, beta);
      const auto can_fb = canonical_state(*entry.h_final_b, beta);
      row.f_final_a = can_fa.free_energy;
      row.f_final_b = can_fb.free_energy;
      row.ref_a = entry.reference_a ? *entry.reference_a : can_fa.state;
      row.ref_b = entry.reference_b ? *entry.reference_b : can_fb.state;
      if (trace_distance(*row.ref_a, can_fa.state) > kCanonicalTol ||
          trace_distance(*row.ref_b, can_fb.state) > kCanonicalTol)
        references_canonical = false;

      const DensityOperator rho_a_fb = partial_trace(row.rho_ab_fb, {{0}});
      const DensityOperator rho_b_fb = partial_trace(row.rho_ab_fb, {{1}});
      w_final_energy_a += o.probability * energy(rho_a_fb, *entry.h_final_a);
      w_final_energy_b += o.probability * energy(rho_b_fb, *entry.h_final_b);
      df_final_a += o.probability * can_fa.free_energy;
      df_final_b += o.probability * can_fb.free_energy;
      sigma_a_cross += o.probability * cross_entropy_term(rho_a_fb, *row.ref_a);
      sigma_b_cross += o.probability * cross_entropy_term(rho_b_fb, *row.ref_b);
      sigma_fb += o.probability *
                  (cross_entropy_term(row.rho_ab_fb, tensor(*row.ref_a, *row.ref_b)) -
                   von_neumann_entropy(o.state));
    } else {
      const auto can_fab = canonical_state(*entry.h_final_ab, beta);
      row.f_final_ab = can_fab.free_energy;
      row.ref_ab = entry.reference_ab
                       ? *entry.reference_ab
                       : can_fab.state.regrouped({s.dim_a, s.dim_b});
      if (trace_distance(*row.ref_ab, can_fab.state) > kCanonicalTol)
        references_canonical = false;
      w_final_energy_ab += o.probability * energy(row.rho_ab_fb, *entry.h_final_ab);
      df_final_ab += o.probability * can_fab.free_energy;
      sigma_ab_cross += o.probability * cross_entropy_term(row.rho_ab_fb, *row.ref_ab);
      sigma_fb += o.probability * (cross_entropy_term(row.rho_ab_fb, *row.ref_ab) -
                                   von_neumann_entropy(o.state));
    }
    ledger.outcomes.push_back(std::move(row));
  }
  ledger.references_canonical = references_canonical;
  ledger.sigma_feedback_stage = sigma_fb;

  if (local) {
    ledger.w_a_ext = energy(rho_a_i, s.h_a_initial) - w_final_energy_a;
    ledger.w_b_ext = energy(rho_b_i, s.h_b_initial) - w_final_energy_b;
    ledger.df_a = df_final_a - can_a.free_energy;
    ledger.df_b = df_final_b - can_b.free_energy;
    ledger.df_ab = ledger.df_a + ledger.df_b;
    ledger.sigma_a_ext = sigma_a_cross - ledger.s_a_initial;
    ledger.sigma_b_ext = sigma_b_cross - ledger.s_b_initial;
    if (ledger.initial_canonical && references_canonical) {
      ledger.sigma_a_work_residual =
          std::abs(ledger.sigma_a_ext - (-beta * (ledger.w_a_ext + ledger.df_a)));
      ledger.sigma_b_work_residual =
          std::abs(ledger.sigma_b_ext - (-beta * (ledger.w_b_ext + ledger.df_b)));
    }
  } else {
    const HermitianOperator h_ab_i = noninteracting_sum(s.h_a_initial, s.h_b_initial);
    const double w_ab = energy(rho_ab, h_ab_i) - w_final_energy_ab;
    ledger.w_ab_ext = w_ab;
    ledger.w_a_ext = w_ab;  // joint extraction carried on the A slot
    ledger.w_b_ext = 0.0;
    ledger.df_ab = df_final_ab - (can_a.free_energy + can_b.free_energy);
    ledger.sigma_ab_ext_prime = sigma_ab_cross - ledger.s_ab_initial;
  }

  // Memory bookkeeping (paper's measurement-cost accounting).
  const HermitianOperator h_m = s.memory.full_hamiltonian();
  {
    ComplexMatrix acc = ComplexMatrix::Zero(dm, dm);
    double e_after = 0.0, df_blocks = 0.0, sigma_cross = 0.0, block_dist = 0.0;
    for (auto& row : ledger.outcomes) {
      acc += row.probability * row.rho_m.matrix();
      e_after += row.probability * energy(row.rho_m, h_m);
      const auto& can_k = block_canonicals[static_cast<std::size_t>(row.label)];
      df_blocks += row.probability * can_k.free_energy;
      const DensityOperator block_state(
          s.memory.block_restriction(row.rho_m.matrix(), row.label),
          {s.memory.block_dims()[static_cast<std::size_t>(row.label)]});
      sigma_cross += row.probability * cross_entropy_term(block_state, can_k.state);
      block_dist += row.probability * trace_distance(block_state, can_k.state);
      row.ref_m = DensityOperator(s.memory.embed_block(can_k.state.matrix(), row.label), {dm});
    }
    ledger.rho_m_final = DensityOperator(std::move(acc), {dm});
    ledger.w_m_mes = e_after - energy(s.memory.initial_state(), h_m);
    ledger.df_m = df_blocks - std_can.free_energy;
    // Block supports are orthogonal, so -Tr[rho_M_f ln rho_M_r] splits into
    // H(X) plus the per-block cross terms.
    ledger.sigma_m_mes = ledger.h_x + sigma_cross - ledger.s_m_initial;
    ledger.memory_blocks_canonical_distance = block_dist;
    ledger.memory_blocks_canonical = block_dist <= kBlockCanonicalTol;
    if (ledger.memory_canonical)
      ledger.sigma_m_mes_work_residual =
          std::abs(ledger.sigma_m_mes -
                   (ledger.h_x + beta * ledger.w_m_mes - beta * ledger.df_m));
  }

  // Entropy change of the averaged ABM state across measurement + feedback;
  // branches stay orthogonal in the memory blocks, so the averaged entropy
  // is H(X) plus the branch average.
  {
    double branch_avg = 0.0;
    for (const auto& row : ledger.outcomes)
      branch_avg += row.probability * von_neumann_entropy(row.rho_abm_fb);
    ledger.delta_s_abm =
        ledger.h_x + branch_avg - (ledger.s_ab_initial + ledger.s_m_initial);
  }

  // Step 4: erasure.
  const ErasureOutcome ers = run_erasure(s, ledger, block_canonicals, std_can);
  ledger.rho_m_erased = ers.rho_m_erased;
  ledger.q_ers = ers.q_ers;
  ledger.w_m_ers = ers.w_m_ers;
  ledger.sigma_m_ers = ers.sigma_m_ers;
  ledger.erasure_residual_weight = ers.residual_weight;
  ledger.erasure_ok = ers.residual_weight <= kErasureResidualTol;
  ledger.erasure_thermalized = ers.thermalized;
  ledger.sigma_m_ers_relent_residual = ers.relent_residual;
  ledger.erasure_energy_residual = ers.energy_residual;

  ledger.w_net = ledger.w_a_ext + ledger.w_b_ext - ledger.w_m_mes - ledger.w_m_ers;
  if (local) {
    ledger.sigma_net = ledger.sigma_a_ext + ledger.sigma_b_ext + ledger.sigma_m_mes;
    if (ledger.has_preamble)
      ledger.sigma_cycle = *ledger.sigma_a_ent + *ledger.sigma_b_ent + ledger.sigma_net;
  } else {
    ledger.sigma_cycle_prime = *ledger.sigma_ab_ext_prime + ledger.sigma_m_mes;
  }

  // Optional second round on B.
  if (s.second_round) {
    std::vector<Outcome> post_fb;
    for (const auto& row : ledger.outcomes)
      post_fb.push_back({row.label, row.probability, row.rho_ab_fb});
    const OutcomeEnsemble post_ensemble(std::move(post_fb));
    TwoRoundLedger tr{second_round(*s.second_round, post_ensemble), 0, 0, 0, 0, 0, 0};
    tr.i_axy = two_round_information(rho_a_i, tr.ensemble, Subsystem::a);
    tr.i_bxy = two_round_information(rho_b_i, tr.ensemble, Subsystem::b);
    tr.i_abxy = two_round_information(rho_ab, tr.ensemble, Subsystem::ab);
    for (const auto& o : tr.ensemble.outcomes())
      tr.residual_cmi += o.p_joint * mutual_information(o.state);

    // Chain decomposition I(.:XY) = I(.:X) + sum_k p_k I(rho_f(k):Y).
    double round2_a = 0.0, round2_b = 0.0;
    for (const auto& row : ledger.outcomes) {
      std::vector<Outcome> branch;
      for (const auto& o : tr.ensemble.outcomes())
        if (o.first == row.label) branch.push_back({o.second, o.p_given, o.state});
      const OutcomeEnsemble branch_ens(std::move(branch));
      round2_a += row.probability * information_gain(partial_trace(row.rho_ab_fb, {{0}}),
                                                     branch_ens.marginal({{0}}));
      round2_b += row.probability * information_gain(partial_trace(row.rho_ab_fb, {{1}}),
                                                     branch_ens.marginal({{1}}));
    }
    tr.chain_residual_a = std::abs(tr.i_axy - (ledger.i_ax + round2_a));
    tr.chain_residual_b = std::abs(tr.i_bxy - (ledger.i_bx + round2_b));
    ledger.two_round = std::move(tr);
  }

  return ledger;
}

}  // namespace

RunLedger run_protocol(const Scenario& s) { return run_impl(s); }

RunLedger run_nonlocal(const Scenario& s) {
  if (s.feedback.mode != FeedbackMode::nonlocal)
    throw std::invalid_argument("run_nonlocal requires a nonlocal feedback plan");
  return run_impl(s);
}

RunLedger run_locc(const Scenario& s) {
  if (!s.second_round) throw std::invalid_argument("run_locc requires a second measurement round");
  return run_impl(s);
}

}  // namespace demonforge
