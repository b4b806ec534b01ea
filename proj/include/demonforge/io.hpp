#pragma once

#include "demonforge/bounds.hpp"
#include "demonforge/optimizer.hpp"
#include "demonforge/protocol.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>
#include <vector>

namespace demonforge::io {

/// Parse/validation failure with the offending field path.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(const std::string& path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Matrix literal: nested arrays of [re, im] pairs, row major.
ComplexMatrix matrix_from_json(const nlohmann::json& j, const std::string& path);
nlohmann::json matrix_to_json(const ComplexMatrix& m);

Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& s);

/// Side-effect free; every invariant failure names the field path.
Scenario load_scenario(const std::string& path);
void save_scenario(const Scenario& s, const std::string& path);

/// Shortest-exact decimal for doubles ("%.17g" trimmed); used everywhere a
/// report prints a number, so identical inputs give byte-identical files.
std::string format_double(double v);

enum class OutputFormat { report, csv, jsonl };
OutputFormat parse_format(const std::string& text);

struct ReportOptions {
  bool color = false;
  double tolerance = 1e-9;
};

std::string run_report(const RunLedger& ledger, const std::vector<InequalityRecord>& records,
                       const ReportOptions& options);
std::string run_csv(const RunLedger& ledger, const std::vector<InequalityRecord>& records);
std::string run_jsonl(const RunLedger& ledger, const std::vector<InequalityRecord>& records);

std::string audit_report(const AuditConfig& config, const AuditSummary& summary,
                         const ReportOptions& options);
std::string audit_csv(const AuditSummary& summary);
std::string audit_jsonl(const AuditConfig& config, const AuditSummary& summary);

std::string sweep_report(const std::string& axis, const std::vector<SweepPoint>& points,
                         const ReportOptions& options);
std::string sweep_csv(const std::string& axis, const std::vector<SweepPoint>& points);
std::string sweep_jsonl(const std::string& axis, const std::vector<SweepPoint>& points);

std::string optimization_report(const ObjectiveSpec& objective, const OptimizationResult& result);

/// Write-to-temp then rename; the destination never holds a partial file.
void write_atomic(const std::string& path, const std::string& content);

}  // namespace demonforge::io
