#include "CLI11.hpp"

#include "demonforge/bounds.hpp"
#include "demonforge/demos.hpp"
#include "demonforge/io.hpp"
#include "demonforge/optimizer.hpp"
#include "demonforge/protocol.hpp"

#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace demonforge;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitViolation = 2;

bool color_allowed() {
  return isatty(fileno(stdout)) != 0 && std::getenv("DEMONFORGE_NO_COLOR") == nullptr;
}

// Reports go to stdout unless an output path is given; files are written
// atomically and never carry ANSI codes.
void emit(const std::string& text, const std::string& output_path) {
  if (output_path.empty())
    std::cout << text;
  else
    io::write_atomic(output_path, text);
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    grid.push_back(std::stod(item));
  }
  if (grid.empty()) throw std::invalid_argument("empty grid '" + text + "'");
  return grid;
}

std::pair<Index, Index> parse_dims(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos)
    throw std::invalid_argument("dims must look like '2,2', got '" + text + "'");
  return {static_cast<Index>(std::stol(text.substr(0, comma))),
          static_cast<Index>(std::stol(text.substr(comma + 1)))};
}

std::vector<FreeSlot> parse_free_slots(const std::vector<std::string>& names) {
  std::vector<FreeSlot> slots;
  for (const auto& name : names) {
    if (name == "dilation") {
      slots.push_back({FreeSlot::Kind::dilation, 0});
      continue;
    }
    const auto colon = name.find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("free slot must be 'a:<k>', 'b:<k>', 'ab:<k>' or 'dilation'");
    const std::string side = name.substr(0, colon);
    const int outcome = std::stoi(name.substr(colon + 1));
    if (side == "a")
      slots.push_back({FreeSlot::Kind::feedback_a, outcome});
    else if (side == "b")
      slots.push_back({FreeSlot::Kind::feedback_b, outcome});
    else if (side == "ab")
      slots.push_back({FreeSlot::Kind::feedback_ab, outcome});
    else
      throw std::invalid_argument("unknown free slot '" + name + "'");
  }
  return slots;
}

std::vector<FreeSlot> default_free_slots(const Scenario& s) {
  std::vector<FreeSlot> slots;
  for (const auto& e : s.feedback.entries) {
    if (s.feedback.mode == FeedbackMode::local) {
      slots.push_back({FreeSlot::Kind::feedback_a, e.outcome});
      slots.push_back({FreeSlot::Kind::feedback_b, e.outcome});
    } else {
      slots.push_back({FreeSlot::Kind::feedback_ab, e.outcome});
    }
  }
  return slots;
}

struct CommonOptions {
  std::string scenario_path;
  std::string demo_name;
  std::string output_path;
  std::string format = "report";
  double tolerance = 1e-9;
  double beta = 1.0;
  double gap = 20.0;
  double angle = M_PI / 3.0;
};

Scenario resolve_scenario(const CommonOptions& opt) {
  if (!opt.scenario_path.empty() && !opt.demo_name.empty())
    throw std::invalid_argument("give either --scenario or --demo, not both");
  if (!opt.scenario_path.empty()) return io::load_scenario(opt.scenario_path);
  if (!opt.demo_name.empty()) return demos::by_name(opt.demo_name, opt.beta, opt.gap, opt.angle);
  throw std::invalid_argument("a scenario file or demo name is required");
}

void add_source_options(CLI::App* cmd, CommonOptions& opt, bool demo_positional) {
  if (demo_positional)
    cmd->add_option("name", opt.demo_name, "demo name")->required();
  else {
    cmd->add_option("--scenario", opt.scenario_path, "scenario JSON file");
    cmd->add_option("--demo", opt.demo_name, "bundled demo name");
  }
  cmd->add_option("--beta", opt.beta, "inverse temperature for demos");
  cmd->add_option("--gap", opt.gap, "final-Hamiltonian gap (beta*E) for demos");
  cmd->add_option("--angle", opt.angle, "measurement sharpness angle for locc-two-round");
  cmd->add_option("--tolerance", opt.tolerance, "bound tolerance in nats");
  cmd->add_option("--output", opt.output_path, "write the report to this file (atomic)");
  cmd->add_option("--format", opt.format, "report | csv | jsonl");
}

int run_and_report(const Scenario& scenario, const CommonOptions& opt) {
  const RunLedger ledger = run_protocol(scenario);
  const auto records = evaluate(ledger, opt.tolerance);
  const io::OutputFormat format = io::parse_format(opt.format);
  io::ReportOptions ropt;
  ropt.tolerance = opt.tolerance;
  ropt.color = opt.output_path.empty() && format == io::OutputFormat::report && color_allowed();
  switch (format) {
    case io::OutputFormat::report:
      emit(io::run_report(ledger, records, ropt), opt.output_path);
      break;
    case io::OutputFormat::csv:
      emit(io::run_csv(ledger, records), opt.output_path);
      break;
    case io::OutputFormat::jsonl:
      emit(io::run_jsonl(ledger, records), opt.output_path);
      break;
  }
  return count_violations(records) > 0 ? kExitViolation : kExitOk;
}

int cmd_run(const CommonOptions& opt) { return run_and_report(resolve_scenario(opt), opt); }

int cmd_demo(const CommonOptions& opt, const std::string& export_path) {
  const Scenario s = resolve_scenario(opt);
  if (!export_path.empty()) io::save_scenario(s, export_path);
  return run_and_report(s, opt);
}

int cmd_verify(const CommonOptions& opt, const std::string& dims_text, int trials,
               std::uint64_t seed, int workers) {
  AuditConfig cfg;
  std::tie(cfg.dim_a, cfg.dim_b) = parse_dims(dims_text);
  cfg.trials = trials;
  cfg.seed = seed;
  cfg.tolerance = opt.tolerance;
  cfg.workers = workers;
  const io::OutputFormat format = io::parse_format(opt.format);
  cfg.keep_records = format != io::OutputFormat::report;

  const AuditSummary summary = random_audit(cfg);
  io::ReportOptions ropt;
  ropt.tolerance = opt.tolerance;
  ropt.color = opt.output_path.empty() && format == io::OutputFormat::report && color_allowed();
  switch (format) {
    case io::OutputFormat::report:
      emit(io::audit_report(cfg, summary, ropt), opt.output_path);
      break;
    case io::OutputFormat::csv:
      emit(io::audit_csv(summary), opt.output_path);
      break;
    case io::OutputFormat::jsonl:
      emit(io::audit_jsonl(cfg, summary), opt.output_path);
      break;
  }
  if (summary.failed_runs > 0) return kExitError;
  return summary.violations > 0 ? kExitViolation : kExitOk;
}

int cmd_optimize(const CommonOptions& opt, const std::string& objective_text, long budget,
                 int restarts, std::uint64_t seed, bool use_gradient) {
  Scenario scenario = resolve_scenario(opt);

  OptimizeDirective directive;
  if (scenario.optimize) directive = *scenario.optimize;
  if (!objective_text.empty()) directive.objective = objective_text;
  if (budget > 0) directive.budget = budget;
  if (restarts > 0) directive.restarts = restarts;
  if (seed != 0) directive.seed = seed;

  const std::vector<FreeSlot> slots = directive.free_slots.empty()
                                          ? default_free_slots(scenario)
                                          : parse_free_slots(directive.free_slots);
  const ObjectiveSpec objective = ObjectiveSpec::parse(directive.objective);
  const ParameterizedPlan plan(scenario, slots);
  OptimizeOptions oo;
  oo.budget = directive.budget;
  oo.restarts = directive.restarts;
  oo.seed = directive.seed;
  oo.tolerance = opt.tolerance;
  oo.use_gradient = use_gradient;
  const OptimizationResult result = optimize(plan, objective, oo);

  std::cout << io::optimization_report(objective, result);
  CommonOptions run_opt = opt;
  return run_and_report(plan.materialize(result.best_parameters), run_opt);
}

int cmd_sweep(const CommonOptions& opt, const std::string& axis, const std::string& grid_text,
              int workers) {
  const std::vector<double> grid = parse_grid(grid_text);
  std::function<Scenario(double)> at;
  if (!opt.demo_name.empty()) {
    const CommonOptions base = opt;
    if (axis == "beta")
      at = [base](double v) { return demos::by_name(base.demo_name, v, base.gap, base.angle); };
    else if (axis == "gap")
      at = [base](double v) { return demos::by_name(base.demo_name, base.beta, v, base.angle); };
    else if (axis == "angle")
      at = [base](double v) {
        Scenario s = demos::by_name(base.demo_name, base.beta, base.gap, base.angle);
        if (s.dim_a != 2 || s.memory.total_dim() != 2)
          throw std::invalid_argument("the angle axis needs a qubit demo");
        s.measurement.unitary = demos::partial_readout_dilation(v);
        s.measurement.kind = MeasurementSpec::Kind::dilation;
        return s;
      };
    else
      throw std::invalid_argument("unknown sweep axis '" + axis + "'");
  } else if (!opt.scenario_path.empty()) {
    if (axis != "beta")
      throw std::invalid_argument("scenario-file sweeps support only the beta axis");
    const Scenario base = io::load_scenario(opt.scenario_path);
    at = [base](double v) {
      Scenario s = base;
      s.beta = v;
      s.erasure.beta = v;
      return s;
    };
  } else {
    throw std::invalid_argument("a scenario file or demo name is required");
  }

  const auto points = sweep(at, grid, opt.tolerance, workers);
  const io::OutputFormat format = io::parse_format(opt.format);
  io::ReportOptions ropt;
  ropt.tolerance = opt.tolerance;
  ropt.color = opt.output_path.empty() && format == io::OutputFormat::report && color_allowed();
  switch (format) {
    case io::OutputFormat::report:
      emit(io::sweep_report(axis, points, ropt), opt.output_path);
      break;
    case io::OutputFormat::csv:
      emit(io::sweep_csv(axis, points), opt.output_path);
      break;
    case io::OutputFormat::jsonl:
      emit(io::sweep_jsonl(axis, points), opt.output_path);
      break;
  }
  bool any_error = false;
  int violations = 0;
  for (const auto& p : points) {
    if (!p.error.empty()) any_error = true;
    violations += count_violations(p.records);
  }
  if (violations > 0) return kExitViolation;
  return any_error ? kExitError : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"demonforge: measurement-feedback-erasure thermodynamics on small quantum systems"};
  app.require_subcommand(1);

  CommonOptions run_opt;
  auto* run = app.add_subcommand("run", "run a scenario file and audit every bound");
  add_source_options(run, run_opt, false);

  CommonOptions demo_opt;
  std::string demo_export;
  auto* demo = app.add_subcommand("demo", "run a bundled demo scenario");
  add_source_options(demo, demo_opt, true);
  demo->add_option("--export", demo_export, "also write the demo's scenario JSON here");

  CommonOptions verify_opt;
  std::string dims_text = "2,2";
  int trials = 1000;
  std::uint64_t verify_seed = 7;
  int workers = 1;
  auto* verify = app.add_subcommand("verify", "randomized audit of all bound records");
  verify->add_option("--dims", dims_text, "subsystem dimensions, e.g. 2,2");
  verify->add_option("--trials", trials, "number of random scenarios");
  verify->add_option("--seed", verify_seed, "audit seed");
  verify->add_option("--workers", workers, "worker threads (seed-partitioned, deterministic)");
  verify->add_option("--tolerance", verify_opt.tolerance, "bound tolerance in nats");
  verify->add_option("--output", verify_opt.output_path, "write the report to this file");
  verify->add_option("--format", verify_opt.format, "report | csv | jsonl");

  CommonOptions optimize_opt;
  std::string objective_text;
  long budget = 0;
  int restarts = 0;
  std::uint64_t optimize_seed = 0;
  auto* opt = app.add_subcommand("optimize", "search feedback plans against an objective");
  add_source_options(opt, optimize_opt, false);
  opt->add_option("--objective", objective_text, "net_work | extracted_work_a | slack:<record>");
  opt->add_option("--budget", budget, "objective evaluations per restart");
  opt->add_option("--restarts", restarts, "number of random restarts");
  opt->add_option("--seed", optimize_seed, "restart seed");
  bool use_gradient = false;
  opt->add_flag("--gradient", use_gradient, "finite-difference gradient descent instead of the simplex");

  CommonOptions sweep_opt;
  std::string axis = "gap";
  std::string grid_text = "1,5,10,20";
  auto* swp = app.add_subcommand("sweep", "run a scenario across a parameter grid");
  add_source_options(swp, sweep_opt, false);
  swp->add_option("--axis", axis, "beta | gap | angle");
  swp->add_option("--grid", grid_text, "comma-separated grid values");
  int sweep_workers = 1;
  swp->add_option("--workers", sweep_workers, "worker threads over grid points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }

  try {
    if (run->parsed()) return cmd_run(run_opt);
    if (demo->parsed()) return cmd_demo(demo_opt, demo_export);
    if (verify->parsed()) return cmd_verify(verify_opt, dims_text, trials, verify_seed, workers);
    if (opt->parsed())
      return cmd_optimize(optimize_opt, objective_text, budget, restarts, optimize_seed,
                          use_gradient);
    if (swp->parsed()) return cmd_sweep(sweep_opt, axis, grid_text, sweep_workers);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
