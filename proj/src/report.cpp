#include "demonforge/io.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace demonforge::io {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

OutputFormat parse_format(const std::string& text) {
  if (text == "report") return OutputFormat::report;
  if (text == "csv") return OutputFormat::csv;
  if (text == "jsonl") return OutputFormat::jsonl;
  throw std::invalid_argument("unknown output format '" + text + "'");
}

namespace {

json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return nullptr;
  return v > 0 ? "inf" : "-inf";
}

struct Palette {
  bool on = false;
  std::string ok() const { return on ? "\x1b[32m" : ""; }
  std::string bad() const { return on ? "\x1b[31m" : ""; }
  std::string dim() const { return on ? "\x1b[2m" : ""; }
  std::string off() const { return on ? "\x1b[0m" : ""; }
};

void append_kv(std::ostringstream& os, const std::string& key, double value) {
  os << "  " << key << " = " << format_double(value) << "\n";
}

void append_record_line(std::ostringstream& os, const InequalityRecord& r, const Palette& pal) {
  const char* mark = !r.applicable ? "skip" : (r.satisfied ? " ok " : "FAIL");
  const std::string color =
      !r.applicable ? pal.dim() : (r.satisfied ? pal.ok() : pal.bad());
  os << "  " << color << "[" << mark << "]" << pal.off() << " (" << r.id << ") ";
  os << r.name;
  for (std::size_t i = r.name.size(); i < 22; ++i) os << ' ';
  if (!r.applicable) {
    os << " not applicable\n";
    return;
  }
  os << " lhs=" << format_double(r.lhs) << "  rhs=" << format_double(r.rhs)
     << "  slack=" << format_double(r.slack);
  if (!std::isnan(r.equality_hint)) os << "  eq_hint=" << format_double(r.equality_hint);
  if (!std::isnan(r.equality_hint_aux)) os << "  dS=" << format_double(r.equality_hint_aux);
  os << "\n";
}

json record_to_json(const InequalityRecord& r) {
  json j;
  j["record"] = r.id;
  j["name"] = r.name;
  j["applicable"] = r.applicable;
  j["satisfied"] = r.satisfied;
  j["lhs"] = finite_or_null(r.lhs);
  j["rhs"] = finite_or_null(r.rhs);
  j["slack"] = finite_or_null(r.slack);
  j["equality_hint"] = finite_or_null(r.equality_hint);
  j["equality_hint_aux"] = finite_or_null(r.equality_hint_aux);
  if (r.lhs_energy) j["lhs_energy"] = finite_or_null(*r.lhs_energy);
  if (r.rhs_energy) j["rhs_energy"] = finite_or_null(*r.rhs_energy);
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

const char* kRecordCsvHeader =
    "scenario,trial,record,name,applicable,satisfied,lhs,rhs,slack,equality_hint,"
    "equality_hint_aux,lhs_energy,rhs_energy";

void append_record_csv(std::ostringstream& os, const std::string& scenario, int trial,
                       const InequalityRecord& r) {
  os << scenario << ',' << trial << ',' << r.id << ',' << r.name << ','
     << (r.applicable ? 1 : 0) << ',' << (r.satisfied ? 1 : 0) << ',' << format_double(r.lhs)
     << ',' << format_double(r.rhs) << ',' << format_double(r.slack) << ','
     << format_double(r.equality_hint) << ',' << format_double(r.equality_hint_aux) << ','
     << (r.lhs_energy ? format_double(*r.lhs_energy) : "") << ','
     << (r.rhs_energy ? format_double(*r.rhs_energy) : "") << '\n';
}

json ledger_to_json(const RunLedger& l) {
  json j;
  j["scenario"] = l.scenario_name;
  j["beta"] = l.beta;
  j["dim_a"] = l.dim_a;
  j["dim_b"] = l.dim_b;
  j["feedback_mode"] = l.feedback_mode == FeedbackMode::local ? "local" : "nonlocal";
  j["initial_canonical"] = l.initial_canonical;
  j["memory_canonical"] = l.memory_canonical;
  j["references_canonical"] = l.references_canonical;
  j["measurement_efficient"] = l.measurement_efficient;
  j["erasure_variant"] =
      l.erasure_variant == ErasureModel::Variant::idealized ? "idealized" : "explicit";
  j["erasure_ok"] = l.erasure_ok;
  j["erasure_residual_weight"] = l.erasure_residual_weight;
  json probs = json::array();
  for (const auto& row : l.outcomes) {
    json o;
    o["label"] = row.label;
    o["p"] = row.probability;
    probs.push_back(std::move(o));
  }
  j["outcomes"] = std::move(probs);
  j["works"] = {{"w_a_ext", l.w_a_ext},   {"w_b_ext", l.w_b_ext}, {"w_m_mes", l.w_m_mes},
                {"w_m_ers", l.w_m_ers},   {"w_net", l.w_net},     {"q_ers", l.q_ers},
                {"apparatus_energy_delta", l.apparatus_energy_delta}};
  if (l.w_ab_ext) j["works"]["w_ab_ext"] = *l.w_ab_ext;
  j["free_energies"] = {{"f_a_initial", l.f_a_initial},
                        {"f_b_initial", l.f_b_initial},
                        {"f_m_initial", l.f_m_initial},
                        {"df_a", l.df_a},
                        {"df_b", l.df_b},
                        {"df_m", l.df_m},
                        {"df_ab", l.df_ab}};
  j["information"] = {{"h_x", l.h_x},   {"i_ax", l.i_ax},
                      {"i_bx", l.i_bx}, {"i_abx", l.i_abx},
                      {"i_ab", l.i_ab}, {"i_ab_given_x", l.i_ab_given_x}};
  json sig = {{"sigma_a_ext", l.sigma_a_ext},
              {"sigma_b_ext", l.sigma_b_ext},
              {"sigma_m_mes", l.sigma_m_mes},
              {"sigma_m_ers", l.sigma_m_ers},
              {"sigma_net", l.sigma_net},
              {"sigma_feedback_stage", l.sigma_feedback_stage},
              {"delta_s_abm", l.delta_s_abm}};
  if (l.sigma_ab_ext_prime) sig["sigma_ab_ext_prime"] = *l.sigma_ab_ext_prime;
  if (l.sigma_cycle_prime) sig["sigma_cycle_prime"] = *l.sigma_cycle_prime;
  if (l.sigma_a_ent) sig["sigma_a_ent"] = *l.sigma_a_ent;
  if (l.sigma_b_ent) sig["sigma_b_ent"] = *l.sigma_b_ent;
  if (l.sigma_cycle) sig["sigma_cycle"] = *l.sigma_cycle;
  j["entropies"] = std::move(sig);
  if (l.two_round) {
    j["two_round"] = {{"i_axy", l.two_round->i_axy},
                      {"i_bxy", l.two_round->i_bxy},
                      {"i_abxy", l.two_round->i_abxy},
                      {"residual_cmi", l.two_round->residual_cmi}};
  }
  return j;
}

}  // namespace

std::string run_report(const RunLedger& l, const std::vector<InequalityRecord>& records,
                       const ReportOptions& options) {
  Palette pal{options.color};
  std::ostringstream os;
  os << "== demonforge run: " << l.scenario_name << " ==\n";
  os << "beta = " << format_double(l.beta) << "   dims: A=" << l.dim_a << " B=" << l.dim_b
     << "   feedback: " << (l.feedback_mode == FeedbackMode::local ? "local" : "nonlocal")
     << "\n";
  os << "flags: initial_canonical=" << (l.initial_canonical ? "yes" : "no")
     << " memory_canonical=" << (l.memory_canonical ? "yes" : "no")
     << " efficient=" << (l.measurement_efficient ? "yes" : "no") << " erasure="
     << (l.erasure_variant == ErasureModel::Variant::idealized ? "idealized" : "explicit")
     << " erasure_ok=" << (l.erasure_ok ? "yes" : "no") << "\n";

  os << "outcomes:\n";
  for (const auto& row : l.outcomes)
    os << "  k=" << row.label << "  p=" << format_double(row.probability) << "\n";

  os << "information [nats / bits]:\n";
  auto append_info = [&](const std::string& key, double nats) {
    os << "  " << key << " = " << format_double(nats) << " / "
       << format_double(nats / std::log(2.0)) << "\n";
  };
  append_info("H(X)        ", l.h_x);
  append_info("I(A:X)      ", l.i_ax);
  append_info("I(B:X)      ", l.i_bx);
  append_info("I(AB:X)     ", l.i_abx);
  append_info("I(A:B)      ", l.i_ab);
  append_info("I(A:B|X)    ", l.i_ab_given_x);
  if (l.two_round) {
    os << "two-round information [nats]:\n";
    append_kv(os, "I(A:XY)     ", l.two_round->i_axy);
    append_kv(os, "I(B:XY)     ", l.two_round->i_bxy);
    append_kv(os, "I(AB:XY)    ", l.two_round->i_abxy);
    append_kv(os, "residual CMI", l.two_round->residual_cmi);
  }

  os << "works [energy / k_B T]:\n";
  auto append_work = [&](const std::string& key, double energy) {
    os << "  " << key << " = " << format_double(energy) << " / "
       << format_double(l.beta * energy) << "\n";
  };
  if (l.w_ab_ext) append_work("W_AB_ext    ", *l.w_ab_ext);
  append_work("W_A_ext     ", l.w_a_ext);
  append_work("W_B_ext     ", l.w_b_ext);
  append_work("W_M_mes     ", l.w_m_mes);
  append_work("W_M_ers     ", l.w_m_ers);
  append_work("W_net       ", l.w_net);
  append_work("Q_ers       ", l.q_ers);
  append_work("apparatus dE", l.apparatus_energy_delta);
  os << "free-energy differences [energy]:\n";
  append_kv(os, "dF_A        ", l.df_a);
  append_kv(os, "dF_B        ", l.df_b);
  append_kv(os, "dF_M        ", l.df_m);
  append_kv(os, "dF_AB       ", l.df_ab);
  os << "entropies [nats]:\n";
  append_kv(os, "sigma_A_ext ", l.sigma_a_ext);
  append_kv(os, "sigma_B_ext ", l.sigma_b_ext);
  append_kv(os, "sigma_M_mes ", l.sigma_m_mes);
  append_kv(os, "sigma_M_ers ", l.sigma_m_ers);
  append_kv(os, "sigma_net   ", l.sigma_net);
  if (l.sigma_ab_ext_prime) append_kv(os, "sigma'_AB   ", *l.sigma_ab_ext_prime);
  if (l.sigma_cycle_prime) append_kv(os, "sigma'_cycle", *l.sigma_cycle_prime);
  if (l.sigma_a_ent) append_kv(os, "sigma_A_ent ", *l.sigma_a_ent);
  if (l.sigma_b_ent) append_kv(os, "sigma_B_ent ", *l.sigma_b_ent);
  if (l.sigma_cycle) append_kv(os, "sigma_cycle ", *l.sigma_cycle);

  os << "erasure residual weight = " << format_double(l.erasure_residual_weight)
     << "  blocks_canonical=" << (l.memory_blocks_canonical ? "yes" : "no") << " (dist "
     << format_double(l.memory_blocks_canonical_distance) << ")\n";
  if (l.sigma_a_work_residual || l.sigma_m_mes_work_residual ||
      l.sigma_m_ers_relent_residual || l.erasure_energy_residual) {
    os << "cross-check residuals:\n";
    if (l.sigma_a_work_residual) append_kv(os, "sigma_A work", *l.sigma_a_work_residual);
    if (l.sigma_b_work_residual) append_kv(os, "sigma_B work", *l.sigma_b_work_residual);
    if (l.sigma_m_mes_work_residual)
      append_kv(os, "sigma_M work", *l.sigma_m_mes_work_residual);
    if (l.sigma_m_ers_relent_residual)
      append_kv(os, "sigma_ers rel-ent", *l.sigma_m_ers_relent_residual);
    if (l.erasure_energy_residual) append_kv(os, "erasure energy", *l.erasure_energy_residual);
  }
  os << "bounds (tolerance " << format_double(options.tolerance) << "):\n";
  int checked = 0, skipped = 0, violated = 0;
  for (const auto& r : records) {
    append_record_line(os, r, pal);
    if (!r.applicable) {
      ++skipped;
    } else {
      ++checked;
      if (!r.satisfied) ++violated;
    }
  }
  os << "verdict: ";
  if (violated == 0)
    os << pal.ok() << "PASS" << pal.off();
  else
    os << pal.bad() << "FAIL" << pal.off();
  os << " (" << checked << " checked, " << skipped << " skipped, " << violated
     << " violated)\n";
  return os.str();
}

std::string run_csv(const RunLedger& l, const std::vector<InequalityRecord>& records) {
  std::ostringstream os;
  os << kRecordCsvHeader << '\n';
  for (const auto& r : records) append_record_csv(os, l.scenario_name, 0, r);
  return os.str();
}

std::string run_jsonl(const RunLedger& l, const std::vector<InequalityRecord>& records) {
  std::ostringstream os;
  json header = ledger_to_json(l);
  header["type"] = "ledger";
  os << header.dump() << '\n';
  for (const auto& r : records) {
    json j = record_to_json(r);
    j["type"] = "record";
    j["trial"] = 0;
    os << j.dump() << '\n';
  }
  return os.str();
}

std::string audit_report(const AuditConfig& config, const AuditSummary& summary,
                         const ReportOptions& options) {
  Palette pal{options.color};
  std::ostringstream os;
  os << "== demonforge verify ==\n";
  os << "dims: A=" << config.dim_a << " B=" << config.dim_b << "   trials=" << config.trials
     << "   seed=" << config.seed << "   tolerance=" << format_double(config.tolerance)
     << "\n";
  os << "record  applicable  violations  min_slack             max_slack\n";
  for (const auto& [id, st] : summary.per_record) {
    os << "   (" << id << ")  " << st.applicable;
    for (int n = snprintf(nullptr, 0, "%d", st.applicable); n < 10; ++n) os << ' ';
    os << "  " << st.violations;
    for (int n = snprintf(nullptr, 0, "%d", st.violations); n < 10; ++n) os << ' ';
    if (st.applicable > 0)
      os << "  " << format_double(st.min_slack) << "  " << format_double(st.max_slack);
    os << "\n";
  }
  const auto& cov = summary.coverage;
  os << "coverage: efficient=" << cov.efficient << " inefficient=" << cov.inefficient
     << " local=" << cov.local << " nonlocal=" << cov.nonlocal
     << " idealized-erasure=" << cov.idealized_erasure
     << " explicit-erasure=" << cov.explicit_erasure << " two-round=" << cov.two_round
     << " preamble=" << cov.preamble << "\n";
  os << "failed runs: " << summary.failed_runs << "\n";
  os << "verdict: ";
  if (summary.violations == 0 && summary.failed_runs == 0)
    os << pal.ok() << "PASS" << pal.off() << " (0 violations in " << summary.trials
       << " trials)\n";
  else
    os << pal.bad() << "FAIL" << pal.off() << " (" << summary.violations << " violations, "
       << summary.failed_runs << " failed runs)\n";
  return os.str();
}

std::string audit_csv(const AuditSummary& summary) {
  std::ostringstream os;
  os << kRecordCsvHeader << '\n';
  for (const auto& trial : summary.details)
    for (const auto& r : trial.records) append_record_csv(os, "random", trial.trial, r);
  return os.str();
}

std::string audit_jsonl(const AuditConfig& config, const AuditSummary& summary) {
  std::ostringstream os;
  json header;
  header["type"] = "audit";
  header["dim_a"] = config.dim_a;
  header["dim_b"] = config.dim_b;
  header["trials"] = summary.trials;
  header["seed"] = config.seed;
  header["tolerance"] = config.tolerance;
  header["violations"] = summary.violations;
  header["failed_runs"] = summary.failed_runs;
  os << header.dump() << '\n';
  for (const auto& trial : summary.details) {
    for (const auto& r : trial.records) {
      json j = record_to_json(r);
      j["type"] = "record";
      j["trial"] = trial.trial;
      os << j.dump() << '\n';
    }
    if (!trial.error.empty()) {
      json j;
      j["type"] = "error";
      j["trial"] = trial.trial;
      j["message"] = trial.error;
      os << j.dump() << '\n';
    }
  }
  return os.str();
}

namespace {

const char* kSweepCsvHeader =
    "axis,axis_value,record,name,applicable,satisfied,lhs,rhs,slack,w_net,h_x,i_ab,"
    "i_ab_given_x,error";

}  // namespace

std::string sweep_report(const std::string& axis, const std::vector<SweepPoint>& points,
                         const ReportOptions& options) {
  Palette pal{options.color};
  std::ostringstream os;
  os << "== demonforge sweep over " << axis << " ==\n";
  for (const auto& p : points) {
    os << axis << " = " << format_double(p.axis_value) << ": ";
    if (!p.error.empty()) {
      os << pal.bad() << "error" << pal.off() << " " << p.error << "\n";
      continue;
    }
    int violated = 0, checked = 0;
    for (const auto& r : p.records)
      if (r.applicable) {
        ++checked;
        if (!r.satisfied) ++violated;
      }
    os << "W_net=" << format_double(p.ledger->w_net)
       << "  I(A:B)=" << format_double(p.ledger->i_ab)
       << "  I(A:B|X)=" << format_double(p.ledger->i_ab_given_x) << "  bounds: " << checked
       << " checked, " << violated << " violated\n";
  }
  return os.str();
}

std::string sweep_csv(const std::string& axis, const std::vector<SweepPoint>& points) {
  std::ostringstream os;
  os << kSweepCsvHeader << '\n';
  for (const auto& p : points) {
    if (!p.error.empty()) {
      os << axis << ',' << format_double(p.axis_value) << ",,,,,,,,,,,," << p.error << '\n';
      continue;
    }
    for (const auto& r : p.records) {
      os << axis << ',' << format_double(p.axis_value) << ',' << r.id << ',' << r.name << ','
         << (r.applicable ? 1 : 0) << ',' << (r.satisfied ? 1 : 0) << ','
         << format_double(r.lhs) << ',' << format_double(r.rhs) << ','
         << format_double(r.slack) << ',' << format_double(p.ledger->w_net) << ','
         << format_double(p.ledger->h_x) << ',' << format_double(p.ledger->i_ab) << ','
         << format_double(p.ledger->i_ab_given_x) << ",\n";
    }
  }
  return os.str();
}

std::string sweep_jsonl(const std::string& axis, const std::vector<SweepPoint>& points) {
  std::ostringstream os;
  for (const auto& p : points) {
    json j;
    j["type"] = "sweep-point";
    j["axis"] = axis;
    j["axis_value"] = p.axis_value;
    if (!p.error.empty()) {
      j["error"] = p.error;
      os << j.dump() << '\n';
      continue;
    }
    j["ledger"] = ledger_to_json(*p.ledger);
    json recs = json::array();
    for (const auto& r : p.records) recs.push_back(record_to_json(r));
    j["records"] = std::move(recs);
    os << j.dump() << '\n';
  }
  return os.str();
}

std::string optimization_report(const ObjectiveSpec& objective, const OptimizationResult& result) {
  std::ostringstream os;
  os << "== demonforge optimize ==\n";
  os << "objective: " << objective.to_string() << "\n";
  os << "best value: " << format_double(result.best_value) << "\n";
  os << "evaluations: " << result.evaluations << "   restarts: " << result.restarts_used
     << "   converged: " << (result.converged ? "yes" : "no") << "\n";
  os << "parameters:";
  for (Index i = 0; i < result.best_parameters.size(); ++i)
    os << ' ' << format_double(result.best_parameters[i]);
  os << "\n";
  return os.str();
}

void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write to '" + tmp + "'");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace demonforge::io
