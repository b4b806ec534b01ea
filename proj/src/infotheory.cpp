#include "demonforge/infotheory.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace demonforge {

namespace {

void check_shared_dims(const std::vector<Index>& a, const std::vector<Index>& b,
                       const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": mismatched factorization");
}

SubsystemSelector selector_for(Subsystem s) {
  switch (s) {
    case Subsystem::a:
      return {{0}};
    case Subsystem::b:
      return {{1}};
    case Subsystem::ab:
      return {{0, 1}};
  }
  throw std::logic_error("unreachable");
}

}  // namespace

OutcomeEnsemble::OutcomeEnsemble(std::vector<Outcome> raw) {
  if (raw.empty()) throw std::invalid_argument("ensemble must have at least one outcome");
  double total = 0.0;
  for (const auto& o : raw) {
    if (o.probability < -1e-10)
      throw std::invalid_argument("ensemble probability is negative: " +
                                  std::to_string(o.probability));
    check_shared_dims(raw.front().state.dims(), o.state.dims(), "ensemble");
    total += o.probability;
  }
  if (std::abs(total - 1.0) > tol::trace_one)
    throw std::invalid_argument("ensemble probabilities sum to " + std::to_string(total));

  double kept = 0.0;
  for (auto& o : raw) {
    if (o.probability < tol::prune) continue;
    kept += o.probability;
    outcomes_.push_back(std::move(o));
  }
  if (outcomes_.empty()) throw std::invalid_argument("all ensemble outcomes were pruned");
  for (auto& o : outcomes_) o.probability /= kept;
}

const std::vector<Index>& OutcomeEnsemble::dims() const { return outcomes_.front().state.dims(); }

OutcomeEnsemble OutcomeEnsemble::marginal(const SubsystemSelector& s) const {
  std::vector<Outcome> out;
  out.reserve(outcomes_.size());
  for (const auto& o : outcomes_)
    out.push_back({o.label, o.probability, partial_trace(o.state, s)});
  return OutcomeEnsemble(std::move(out));
}

DensityOperator OutcomeEnsemble::average() const {
  ComplexMatrix acc = ComplexMatrix::Zero(outcomes_.front().state.dim(),
                                          outcomes_.front().state.dim());
  for (const auto& o : outcomes_) acc += o.probability * o.state.matrix();
  return DensityOperator(std::move(acc), dims());
}

TwoRoundEnsemble::TwoRoundEnsemble(std::vector<TwoRoundOutcome> raw) {
  if (raw.empty()) throw std::invalid_argument("two-round ensemble must have outcomes");
  double total = 0.0;
  for (const auto& o : raw) {
    if (o.p_joint < -1e-10 || o.p_given < -1e-10)
      throw std::invalid_argument("two-round ensemble has a negative probability");
    check_shared_dims(raw.front().state.dims(), o.state.dims(), "two-round ensemble");
    total += o.p_joint;
  }
  if (std::abs(total - 1.0) > tol::trace_one)
    throw std::invalid_argument("two-round joint probabilities sum to " + std::to_string(total));
  double kept = 0.0;
  for (auto& o : raw) {
    if (o.p_joint < tol::prune) continue;
    kept += o.p_joint;
    outcomes_.push_back(std::move(o));
  }
  if (outcomes_.empty()) throw std::invalid_argument("all two-round outcomes were pruned");
  for (auto& o : outcomes_) o.p_joint /= kept;
}

const std::vector<Index>& TwoRoundEnsemble::dims() const {
  return outcomes_.front().state.dims();
}

double shannon_entropy(const OutcomeEnsemble& ensemble) {
  double h = 0.0;
  for (const auto& o : ensemble.outcomes())
    if (o.probability > 0.0) h -= o.probability * std::log(o.probability);
  return h;
}

double mutual_information(const DensityOperator& rho_ab) {
  if (rho_ab.dims().size() != 2)
    throw std::invalid_argument("mutual information needs exactly two factors");
  const double sa = von_neumann_entropy(partial_trace(rho_ab, {{0}}));
  const double sb = von_neumann_entropy(partial_trace(rho_ab, {{1}}));
  return sa + sb - von_neumann_entropy(rho_ab);
}

double information_gain(const DensityOperator& rho_pre, const OutcomeEnsemble& ensemble) {
  check_shared_dims(rho_pre.dims(), ensemble.dims(), "information gain");
  double avg = 0.0;
  for (const auto& o : ensemble.outcomes()) avg += o.probability * von_neumann_entropy(o.state);
  return von_neumann_entropy(rho_pre) - avg;
}

double holevo_chi(const DensityOperator& rho_pre, const OutcomeEnsemble& ensemble) {
  return information_gain(rho_pre, ensemble);
}

double conditional_mutual_information(const OutcomeEnsemble& joint_ab) {
  if (joint_ab.dims().size() != 2)
    throw std::invalid_argument("conditional mutual information needs two-factor states");
  double acc = 0.0;
  for (const auto& o : joint_ab.outcomes()) acc += o.probability * mutual_information(o.state);
  return acc;
}

double balance_identity_residual(const DensityOperator& rho_ab_initial,
                                 const OutcomeEnsemble& joint_ab) {
  check_shared_dims(rho_ab_initial.dims(), joint_ab.dims(), "balance identity");
  const auto marg_a = joint_ab.marginal({{0}});
  const auto marg_b = joint_ab.marginal({{1}});
  const auto rho_a = partial_trace(rho_ab_initial, {{0}});
  const auto rho_b = partial_trace(rho_ab_initial, {{1}});

  const double lhs = information_gain(rho_a, marg_a) + holevo_chi(rho_b, marg_b) -
                     information_gain(rho_ab_initial, joint_ab);
  const double rhs =
      mutual_information(rho_ab_initial) - conditional_mutual_information(joint_ab);
  return std::abs(lhs - rhs);
}

double two_round_information(const DensityOperator& rho_pre, const TwoRoundEnsemble& ensemble,
                             Subsystem subsystem) {
  if (ensemble.dims().size() != 2)
    throw std::invalid_argument("two-round information needs two-factor states");
  const SubsystemSelector sel = selector_for(subsystem);
  double avg = 0.0;
  for (const auto& o : ensemble.outcomes()) {
    const DensityOperator reduced =
        (subsystem == Subsystem::ab) ? o.state : partial_trace(o.state, sel);
    if (reduced.dim() != rho_pre.dim())
      throw std::invalid_argument("two-round information: marginal dimension mismatch");
    avg += o.p_joint * von_neumann_entropy(reduced);
  }
  return von_neumann_entropy(rho_pre) - avg;
}

}  // namespace demonforge
