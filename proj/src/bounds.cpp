#include "demonforge/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>

namespace demonforge {

namespace {

InequalityRecord make_record(std::string id, std::string name, double lhs, double rhs,
                             bool applicable, double tolerance) {
  InequalityRecord r;
  r.id = std::move(id);
  r.name = std::move(name);
  r.lhs = lhs;
  r.rhs = rhs;
  r.slack = rhs - lhs;
  r.applicable = applicable;
  r.satisfied = r.slack >= -tolerance;
  return r;
}

}  // namespace

std::vector<InequalityRecord> evaluate(const RunLedger& l, double tolerance) {
  std::vector<InequalityRecord> out;
  const double beta = l.beta;
  const bool local = l.feedback_mode == FeedbackMode::local;
  const bool erasure_bounds_ok =
      l.erasure_variant == ErasureModel::Variant::idealized ||
      (l.erasure_ok && (l.memory_blocks_canonical || l.erasure_thermalized));

  // (a) Conventional second law for the outcome-conditioned feedback stage:
  // the averaged entropy production of a unitary process is nonnegative.
  out.push_back(make_record("a", "second-law-feedback", 0.0, l.sigma_feedback_stage, true,
                            tolerance));

  // (b) Information ranges: 0 <= I(A:X) <= H(X) for efficient measurements,
  // 0 <= I(B:X) <= H(X) unconditionally.
  {
    double margin = std::min(l.i_bx, l.h_x - l.i_bx);
    std::string note = "chi range";
    if (l.measurement_efficient) {
      margin = std::min({margin, l.i_ax, l.h_x - l.i_ax});
      note = "gain and chi ranges";
    }
    auto r = make_record("b", "information-gain-range", 0.0, margin, true, tolerance);
    r.note = std::move(note);
    out.push_back(std::move(r));
  }

  // (c)/(d) Entropy decrease of each subsystem is bounded by its
  // information content.
  {
    auto r = make_record("c", "ext-entropy-A", -l.i_ax, l.sigma_a_ext, local, tolerance);
    if (local) {
      double hint = 0.0;
      for (const auto& row : l.outcomes)
        hint += row.probability *
                trace_distance(partial_trace(row.rho_ab_fb, {{0}}), *row.ref_a);
      r.equality_hint = hint;
    }
    out.push_back(std::move(r));
  }
  {
    auto r = make_record("d", "ext-entropy-B", -l.i_bx, l.sigma_b_ext, local, tolerance);
    if (local) {
      double hint = 0.0;
      for (const auto& row : l.outcomes)
        hint += row.probability *
                trace_distance(partial_trace(row.rho_ab_fb, {{1}}), *row.ref_b);
      r.equality_hint = hint;
    }
    out.push_back(std::move(r));
  }

  // (e) Extractable work from the correlated state.
  {
    const double lhs = beta * (l.w_a_ext + l.w_b_ext);
    const double rhs = -beta * (l.df_a + l.df_b) + l.i_ax + l.i_bx;
    auto r = make_record("e", "work-extraction", lhs, rhs,
                         local && l.initial_canonical && l.references_canonical, tolerance);
    r.lhs_energy = lhs / beta;
    r.rhs_energy = rhs / beta;
    out.push_back(std::move(r));
  }

  // (f) Entropy produced by the measurement.
  {
    auto r = make_record("f", "measurement-entropy", l.i_abx, l.sigma_m_mes, true, tolerance);
    double hint = 0.0;
    for (const auto& row : l.outcomes)
      hint += row.probability *
              trace_distance(row.rho_abm_fb, tensor(row.rho_ab_fb, *row.ref_m));
    r.equality_hint = hint;
    r.equality_hint_aux = std::abs(l.delta_s_abm);
    out.push_back(std::move(r));
  }

  // (g) Measurement work cost.
  {
    const double lhs = l.i_abx - l.h_x + beta * l.df_m;
    const double rhs = beta * l.w_m_mes;
    auto r = make_record("g", "measurement-cost", lhs, rhs, l.memory_canonical, tolerance);
    r.lhs_energy = lhs / beta;
    r.rhs_energy = rhs / beta;
    out.push_back(std::move(r));
  }

  // (h) Erasure work cost (Landauer at dF_M = 0). Its work form presumes
  // per-block canonical memory states and completed erasure.
  {
    const double lhs = l.h_x - beta * l.df_m;
    const double rhs = beta * l.w_m_ers;
    auto r = make_record("h", "erasure-cost", lhs, rhs, erasure_bounds_ok, tolerance);
    r.lhs_energy = lhs / beta;
    r.rhs_energy = rhs / beta;
    r.equality_hint = l.sigma_m_ers;
    out.push_back(std::move(r));
  }

  // (i) Net entropy decrease of system plus memory.
  out.push_back(make_record("i", "net-entropy", -(l.i_ab - l.i_ab_given_x), l.sigma_net, local,
                            tolerance));

  // (j) Net work gain.
  {
    const double lhs = beta * l.w_net;
    const double rhs = l.i_ab - l.i_ab_given_x - beta * l.df_ab;
    auto r = make_record("j", "net-work", lhs, rhs,
                         local && l.initial_canonical && l.references_canonical &&
                             l.memory_canonical && erasure_bounds_ok,
                         tolerance);
    r.lhs_energy = lhs / beta;
    r.rhs_energy = rhs / beta;
    out.push_back(std::move(r));
  }

  // (k) Cost of creating the initial correlation.
  {
    auto r = make_record("k", "creation-cost", l.i_ab,
                         l.has_preamble ? *l.sigma_a_ent + *l.sigma_b_ent : 0.0, l.has_preamble,
                         tolerance);
    if (l.preamble_reference_distance) r.equality_hint = *l.preamble_reference_distance;
    out.push_back(std::move(r));
  }

  // (l) Entropy production over the whole cycle with local feedback.
  out.push_back(make_record("l", "cycle-entropy", l.i_ab_given_x,
                            l.sigma_cycle ? *l.sigma_cycle : 0.0,
                            l.has_preamble && local, tolerance));

  // (m)/(n) Composite (nonlocal) feedback bounds.
  {
    auto r = make_record("m", "composite-gain", -l.i_abx,
                         l.sigma_ab_ext_prime ? *l.sigma_ab_ext_prime : 0.0, !local, tolerance);
    if (!local) {
      double hint = 0.0;
      for (const auto& row : l.outcomes)
        hint += row.probability * trace_distance(row.rho_ab_fb, *row.ref_ab);
      r.equality_hint = hint;
    }
    out.push_back(std::move(r));
  }
  out.push_back(make_record("n", "composite-cycle", 0.0,
                            l.sigma_cycle_prime ? *l.sigma_cycle_prime : 0.0, !local, tolerance));

  // (o) Two-round (LOCC) refinement of the net work bound.
  {
    const bool have = l.two_round.has_value();
    const double lhs = beta * l.w_net;
    const double rhs = have ? l.i_ab - l.two_round->residual_cmi - beta * l.df_ab : 0.0;
    auto r = make_record("o", "locc-net-work", lhs, rhs,
                         have && local && l.initial_canonical && l.references_canonical &&
                             l.memory_canonical && erasure_bounds_ok,
                         tolerance);
    if (have) {
      r.lhs_energy = lhs / beta;
      r.rhs_energy = rhs / beta;
    }
    out.push_back(std::move(r));
  }

  return out;
}

int count_violations(const std::vector<InequalityRecord>& records) {
  int n = 0;
  for (const auto& r : records)
    if (r.applicable && !r.satisfied) ++n;
  return n;
}

namespace {

// Complete one-operator-per-outcome family on dimension d, carved out of a
// random unitary dilation.
KrausFamily random_efficient_family(Index d, int n_outcomes, std::uint64_t seed) {
  const ComplexMatrix w = random_unitary(static_cast<Index>(n_outcomes) * d, seed);
  std::vector<KrausFamily::OutcomeOps> groups;
  for (int i = 0; i < n_outcomes; ++i) {
    ComplexMatrix op(d, d);
    for (Index r = 0; r < d; ++r)
      for (Index c = 0; c < d; ++c) op(r, c) = w(static_cast<Index>(i) * d + r, c);
    groups.push_back({i, {std::move(op)}});
  }
  return KrausFamily(std::move(groups));
}

MemoryModel random_memory(int variant, double beta, std::uint64_t seed) {
  switch (variant) {
    case 0: {
      ComplexVector psi = ComplexVector::Zero(2);
      psi[0] = 1.0;
      return MemoryModel({1, 1}, {HermitianOperator::zero(1), HermitianOperator::zero(1)}, 0,
                         pure_state(psi, {2}));
    }
    case 1: {
      ComplexVector psi = ComplexVector::Zero(3);
      psi[0] = 1.0;
      return MemoryModel({1, 2},
                         {HermitianOperator::zero(1), random_hermitian(2, 0.5, seed)}, 0,
                         pure_state(psi, {3}));
    }
    default: {
      // Mixed-but-canonical start: inefficient measurements with the
      // measurement-cost bound still applicable.
      return MemoryModel::with_canonical_start(
          {2, 2}, {random_hermitian(2, 0.7, seed), random_hermitian(2, 0.7, seed + 1)}, 0,
          beta);
    }
  }
}

// Erasure by swapping the memory against a deep-cold bath whose ground
// manifold mirrors the standard block. The gap is large enough that the
// leakage correction to the erasure bound stays far below audit tolerance.
ErasureModel swap_erasure(const MemoryModel& memory, double beta, bool thermalize) {
  const Index dm = memory.total_dim();
  const Index d0 = memory.block_dims()[static_cast<std::size_t>(memory.standard_block())];
  ComplexMatrix h_r = ComplexMatrix::Zero(dm, dm);
  const double gap = 35.0 / beta;
  for (Index i = d0; i < dm; ++i) h_r(i, i) = gap;

  ComplexMatrix swap = ComplexMatrix::Zero(dm * dm, dm * dm);
  for (Index m = 0; m < dm; ++m)
    for (Index r = 0; r < dm; ++r) swap(r * dm + m, m * dm + r) = 1.0;

  ErasureModel e;
  e.variant = ErasureModel::Variant::explicit_unitary;
  e.bath_hamiltonian = HermitianOperator(std::move(h_r));
  e.unitary = std::move(swap);
  e.thermalize_blocks = thermalize;
  e.beta = beta;
  return e;
}

}  // namespace

Scenario random_scenario(Index dim_a, Index dim_b, std::uint64_t seed, int trial) {
  const std::uint64_t base = mix_seed(seed, static_cast<std::uint64_t>(trial));
  auto sub = [&](std::uint64_t i) { return mix_seed(base, i); };
  std::mt19937_64 gen(sub(0));
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Scenario s;
  s.name = "random-" + std::to_string(trial);
  s.beta = 0.6 + 1.2 * unif(gen);
  s.dim_a = dim_a;
  s.dim_b = dim_b;
  s.h_a_initial = random_hermitian(dim_a, 1.0, sub(1));
  s.h_b_initial = random_hermitian(dim_b, 1.0, sub(2));

  int recipe = trial % 4;
  if (dim_a != dim_b && (recipe == 1 || recipe == 3)) recipe = 0;
  switch (recipe) {
    case 0:
      s.initial.recipe = InitialRecipe::canonical_product;
      break;
    case 1:
      s.initial.recipe = InitialRecipe::thermal_entangled;
      s.h_b_initial = s.h_a_initial;
      break;
    case 2: {
      s.initial.recipe = InitialRecipe::explicit_state;
      s.initial.state =
          random_density(dim_a * dim_b, dim_a * dim_b, sub(3)).regrouped({dim_a, dim_b});
      break;
    }
    default:
      s.initial.recipe = InitialRecipe::classical_correlated;
      s.h_b_initial = s.h_a_initial;
      break;
  }

  const int memory_variant = (trial / 4) % 3;
  s.memory = random_memory(memory_variant, s.beta, sub(4));
  s.measurement.kind = MeasurementSpec::Kind::dilation;
  s.measurement.unitary = random_unitary(dim_a * s.memory.total_dim(), sub(5));

  const bool nonlocal = (trial % 5 == 4);
  s.feedback.mode = nonlocal ? FeedbackMode::nonlocal : FeedbackMode::local;
  for (int k = 0; k < s.memory.block_count(); ++k) {
    FeedbackEntry e;
    e.outcome = k;
    const std::uint64_t fk = sub(10 + static_cast<std::uint64_t>(k));
    if (nonlocal) {
      e.unitary_ab = random_unitary(dim_a * dim_b, fk);
      e.h_final_ab = random_hermitian(dim_a * dim_b, 1.0, fk + 1);
    } else {
      e.unitary_a = random_unitary(dim_a, fk);
      e.unitary_b = random_unitary(dim_b, fk + 1);
      e.h_final_a = random_hermitian(dim_a, 1.0, fk + 2);
      e.h_final_b = random_hermitian(dim_b, 1.0, fk + 3);
    }
    s.feedback.entries.push_back(std::move(e));
  }

  switch (trial % 3) {
    case 0:
      s.erasure.variant = ErasureModel::Variant::idealized;
      s.erasure.beta = s.beta;
      break;
    case 1:
      s.erasure = swap_erasure(s.memory, s.beta, true);
      break;
    default:
      s.erasure = swap_erasure(s.memory, s.beta, false);
      break;
  }

  if (trial % 6 == 5) {
    PreambleSpec pre{random_density(dim_a, dim_a, sub(20)), random_density(dim_b, dim_b, sub(21)),
                     random_unitary(dim_a * dim_b, sub(22)),
                     {},
                     {}};
    if (trial % 12 == 11) {
      // Non-equality references now and then.
      pre.reference_a = random_density(dim_a, dim_a, sub(23));
      pre.reference_b = random_density(dim_b, dim_b, sub(24));
    }
    s.preamble = std::move(pre);
  }

  if (!nonlocal && trial % 4 == 3) {
    std::map<int, KrausFamily> families;
    for (int k = 0; k < s.memory.block_count(); ++k)
      families.emplace(k, random_efficient_family(dim_b, 2, sub(30 + static_cast<std::uint64_t>(k))));
    s.second_round = std::move(families);
  }

  return s;
}

AuditSummary random_audit(const AuditConfig& config) {
  if (config.trials < 1) throw std::invalid_argument("audit needs at least one trial");
  const int workers = std::max(1, config.workers);

  std::vector<TrialResult> results(static_cast<std::size_t>(config.trials));
  std::vector<AuditCoverage> coverages(static_cast<std::size_t>(config.trials));
  auto run_range = [&](int begin, int end) {
    for (int t = begin; t < end; ++t) {
      TrialResult& slot = results[static_cast<std::size_t>(t)];
      slot.trial = t;
      try {
        const Scenario s = random_scenario(config.dim_a, config.dim_b, config.seed, t);
        const RunLedger ledger = run_protocol(s);
        slot.records = evaluate(ledger, config.tolerance);
        AuditCoverage& cov = coverages[static_cast<std::size_t>(t)];
        (ledger.measurement_efficient ? cov.efficient : cov.inefficient) = 1;
        (ledger.feedback_mode == FeedbackMode::local ? cov.local : cov.nonlocal) = 1;
        (ledger.erasure_variant == ErasureModel::Variant::idealized ? cov.idealized_erasure
                                                                    : cov.explicit_erasure) = 1;
        if (ledger.two_round) cov.two_round = 1;
        if (ledger.has_preamble) cov.preamble = 1;
      } catch (const std::exception& e) {
        slot.error = e.what();
      }
    }
  };

  if (workers == 1) {
    run_range(0, config.trials);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (config.trials + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int begin = w * chunk;
      const int end = std::min(config.trials, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(run_range, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  AuditSummary summary;
  summary.trials = config.trials;
  for (const auto& cov : coverages) {
    summary.coverage.efficient += cov.efficient;
    summary.coverage.inefficient += cov.inefficient;
    summary.coverage.local += cov.local;
    summary.coverage.nonlocal += cov.nonlocal;
    summary.coverage.idealized_erasure += cov.idealized_erasure;
    summary.coverage.explicit_erasure += cov.explicit_erasure;
    summary.coverage.two_round += cov.two_round;
    summary.coverage.preamble += cov.preamble;
  }
  for (auto& r : results) {
    if (!r.error.empty()) {
      ++summary.failed_runs;
      continue;
    }
    for (const auto& rec : r.records) {
      RecordStats& st = summary.per_record[rec.id];
      ++st.evaluated;
      if (!rec.applicable) continue;
      ++st.applicable;
      st.min_slack = std::min(st.min_slack, rec.slack);
      st.max_slack = std::max(st.max_slack, rec.slack);
      if (!rec.satisfied) {
        ++st.violations;
        ++summary.violations;
      }
    }
  }
  if (config.keep_records) summary.details = std::move(results);
  return summary;
}

}  // namespace demonforge
