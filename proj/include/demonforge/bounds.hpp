#pragma once

#include "demonforge/protocol.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace demonforge {

/// One audited inequality. Slack is oriented so that slack >= 0 means the
/// inequality holds, regardless of its direction in the source material.
/// Work-based records are evaluated in entropy units (beta-scaled); their
/// energy-unit sides are carried alongside for reporting.
struct InequalityRecord {
  std::string id;    // "a" .. "o"
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  bool satisfied = false;
  bool applicable = false;
  /// Distance to the known equality condition, when one exists.
  double equality_hint = std::numeric_limits<double>::quiet_NaN();
  /// Secondary equality contribution (the |dS| part of the measurement
  /// record), reported separately.
  double equality_hint_aux = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> lhs_energy, rhs_energy;
  std::string note;
};

/// Evaluate every record (a)-(o) against a ledger. Inapplicable records are
/// still returned (marked skipped) with whatever sides are computable.
std::vector<InequalityRecord> evaluate(const RunLedger& ledger, double tolerance = 1e-9);

int count_violations(const std::vector<InequalityRecord>& records);

/// Deterministic scenario generator for the randomized audit: the trial
/// index drives the variant wheel (recipe, memory shape, feedback mode,
/// erasure variant, preamble, second round), the seed drives the numbers.
Scenario random_scenario(Index dim_a, Index dim_b, std::uint64_t seed, int trial);

struct AuditConfig {
  Index dim_a = 2;
  Index dim_b = 2;
  int trials = 100;
  std::uint64_t seed = 0;
  double tolerance = 1e-9;
  int workers = 1;
  bool keep_records = false;
};

struct RecordStats {
  int evaluated = 0;
  int applicable = 0;
  int violations = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  double max_slack = -std::numeric_limits<double>::infinity();
};

struct TrialResult {
  int trial = 0;
  std::vector<InequalityRecord> records;
  std::string error;
};

/// How many trials exercised each protocol variant.
struct AuditCoverage {
  int efficient = 0;
  int inefficient = 0;
  int local = 0;
  int nonlocal = 0;
  int idealized_erasure = 0;
  int explicit_erasure = 0;
  int two_round = 0;
  int preamble = 0;
};

struct AuditSummary {
  int trials = 0;
  int violations = 0;
  int failed_runs = 0;
  std::map<std::string, RecordStats> per_record;
  AuditCoverage coverage;
  std::vector<TrialResult> details;  // populated when keep_records
};

/// Run `trials` random scenarios and evaluate every record. Violations are
/// counted and reported, never thrown; the audit contract is zero.
AuditSummary random_audit(const AuditConfig& config);

}  // namespace demonforge
