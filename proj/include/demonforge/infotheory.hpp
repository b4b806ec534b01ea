#pragma once

#include "demonforge/qlinalg.hpp"

#include <vector>

namespace demonforge {

struct Outcome {
  int label;
  double probability;
  DensityOperator state;
};

/// Labeled ensemble {p_k, rho(k)} with all states on the same factorization.
/// Outcomes below tol::prune are dropped and the rest renormalized; the
/// conditional state of a zero-probability branch is not defined.
class OutcomeEnsemble {
 public:
  explicit OutcomeEnsemble(std::vector<Outcome> raw);

  const std::vector<Outcome>& outcomes() const { return outcomes_; }
  std::size_t size() const { return outcomes_.size(); }
  const std::vector<Index>& dims() const;

  /// Ensemble of per-outcome reduced states.
  OutcomeEnsemble marginal(const SubsystemSelector& s) const;
  /// sum_k p_k rho(k).
  DensityOperator average() const;

 private:
  std::vector<Outcome> outcomes_;
};

struct TwoRoundOutcome {
  int first;        // k
  int second;       // l
  double p_joint;   // p_k * p_{l|k}
  double p_given;   // p_{l|k}
  DensityOperator state;
};

/// Joint ensemble over two sequential measurement outcomes (k, l).
class TwoRoundEnsemble {
 public:
  explicit TwoRoundEnsemble(std::vector<TwoRoundOutcome> raw);

  const std::vector<TwoRoundOutcome>& outcomes() const { return outcomes_; }
  const std::vector<Index>& dims() const;

 private:
  std::vector<TwoRoundOutcome> outcomes_;
};

enum class Subsystem { a, b, ab };

/// H(X) = -sum p_k ln p_k in nats.
double shannon_entropy(const OutcomeEnsemble& ensemble);

/// I(A:B) = S(rho_A) + S(rho_B) - S(rho_AB); requires a two-factor state.
double mutual_information(const DensityOperator& rho_ab);

/// S(rho_pre) - sum_k p_k S(rho(k)). May be negative for inefficient
/// measurements; the caller gates range checks on the efficiency flag.
double information_gain(const DensityOperator& rho_pre, const OutcomeEnsemble& ensemble);

/// Same functional applied to the unmeasured side's conditional marginals;
/// nonnegative for any measurement.
double holevo_chi(const DensityOperator& rho_pre, const OutcomeEnsemble& ensemble);

/// sum_k p_k [S(rho_A(k)) + S(rho_B(k)) - S(rho_AB(k))] from joint states.
double conditional_mutual_information(const OutcomeEnsemble& joint_ab);

/// |[I(A:X) + I(B:X) - I(AB:X)] - [I(A:B) - I(A:B|X)]|. This is an exact
/// identity; the residual only measures numerical noise.
double balance_identity_residual(const DensityOperator& rho_ab_initial,
                                 const OutcomeEnsemble& joint_ab);

/// Refined information after two measurement rounds:
/// S(rho_pre) - sum_{k,l} p_joint S(marginal of rho(k,l)).
double two_round_information(const DensityOperator& rho_pre, const TwoRoundEnsemble& ensemble,
                             Subsystem subsystem);

}  // namespace demonforge
