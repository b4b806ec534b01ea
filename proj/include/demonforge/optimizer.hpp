#pragma once

#include "demonforge/bounds.hpp"
#include "demonforge/protocol.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace demonforge {

/// Generalized Gell-Mann matrices: a traceless Hermitian basis of su(dim).
std::vector<HermitianOperator> gellmann_basis(Index dim);

/// A scenario slot whose unitary the optimizer may replace.
struct FreeSlot {
  enum class Kind { feedback_a, feedback_b, feedback_ab, dilation };
  Kind kind = Kind::feedback_a;
  int outcome = 0;  // ignored for dilation
};

/// Template scenario plus the slots opened for optimization. Each slot's
/// unitary is exp(-i sum_j theta_j G_j) over the Gell-Mann basis of its
/// dimension, so every parameter vector yields an exactly unitary plan.
class ParameterizedPlan {
 public:
  ParameterizedPlan(Scenario scenario_template, std::vector<FreeSlot> slots);

  Index parameter_count() const { return total_parameters_; }
  const Scenario& scenario_template() const { return template_; }
  const std::vector<FreeSlot>& slots() const { return slots_; }

  Scenario materialize(const RealVector& parameters) const;

 private:
  Scenario template_;
  std::vector<FreeSlot> slots_;
  std::vector<std::vector<HermitianOperator>> bases_;  // per slot
  Index total_parameters_ = 0;
};

struct ObjectiveSpec {
  enum class Kind { net_work, extracted_work_a, bound_slack };
  Kind kind = Kind::net_work;
  std::string record_id;  // for bound_slack

  /// "net_work", "extracted_work_a", or "slack:<record id>".
  static ObjectiveSpec parse(const std::string& text);
  std::string to_string() const;
};

struct OptimizationResult {
  RealVector best_parameters;
  /// The objective in its natural orientation (work maximized, slack
  /// minimized).
  double best_value = 0.0;
  /// Incumbent objective after each accepted improvement; non-strictly
  /// improving by construction.
  std::vector<double> trace;
  bool converged = false;
  int restarts_used = 0;
  long evaluations = 0;
};

struct OptimizeOptions {
  long budget = 5000;  // objective evaluations per restart
  int restarts = 8;
  std::uint64_t seed = 1;
  double tolerance = 1e-9;  // forwarded to the bound evaluation
  /// Replace the simplex search with finite-difference gradient descent
  /// (central differences at step 1e-6, backtracking line search).
  bool use_gradient = false;
};

/// Derivative-free direct search (Nelder-Mead with shrink/expand and
/// deterministic multi-restart) over the plan's parameter vector.
OptimizationResult optimize(const ParameterizedPlan& plan, const ObjectiveSpec& objective,
                            const OptimizeOptions& options);

struct SweepPoint {
  double axis_value = 0.0;
  std::optional<RunLedger> ledger;
  std::vector<InequalityRecord> records;
  std::string error;  // per-point failures recorded, sweep continues
};

/// One protocol run plus bound report per grid point. Points are independent
/// and may be sharded across workers; the output order follows the grid.
std::vector<SweepPoint> sweep(const std::function<Scenario(double)>& scenario_at,
                              const std::vector<double>& grid, double tolerance = 1e-9,
                              int workers = 1);

}  // namespace demonforge
