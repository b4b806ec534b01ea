#include "demonforge/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace demonforge {

std::vector<HermitianOperator> gellmann_basis(Index dim) {
  if (dim < 1) throw std::invalid_argument("basis dimension must be positive");
  std::vector<HermitianOperator> basis;
  for (Index i = 0; i < dim; ++i)
    for (Index j = i + 1; j < dim; ++j) {
      ComplexMatrix sym = ComplexMatrix::Zero(dim, dim);
      sym(i, j) = sym(j, i) = 1.0;
      basis.emplace_back(std::move(sym));
      ComplexMatrix asym = ComplexMatrix::Zero(dim, dim);
      asym(i, j) = Complex(0.0, -1.0);
      asym(j, i) = Complex(0.0, 1.0);
      basis.emplace_back(std::move(asym));
    }
  for (Index l = 1; l < dim; ++l) {
    ComplexMatrix diag = ComplexMatrix::Zero(dim, dim);
    const double norm = std::sqrt(2.0 / static_cast<double>(l * (l + 1)));
    for (Index j = 0; j < l; ++j) diag(j, j) = norm;
    diag(l, l) = -norm * static_cast<double>(l);
    basis.emplace_back(std::move(diag));
  }
  return basis;
}

ParameterizedPlan::ParameterizedPlan(Scenario scenario_template, std::vector<FreeSlot> slots)
    : template_(std::move(scenario_template)), slots_(std::move(slots)) {
  if (slots_.empty()) throw std::invalid_argument("parameterized plan needs at least one slot");
  template_.validate();
  for (const auto& slot : slots_) {
    Index dim = 0;
    switch (slot.kind) {
      case FreeSlot::Kind::feedback_a:
        dim = template_.dim_a;
        break;
      case FreeSlot::Kind::feedback_b:
        dim = template_.dim_b;
        break;
      case FreeSlot::Kind::feedback_ab:
        dim = template_.dim_a * template_.dim_b;
        break;
      case FreeSlot::Kind::dilation:
        dim = template_.dim_a * template_.memory.total_dim();
        break;
    }
    if (slot.kind != FreeSlot::Kind::dilation)
      template_.feedback.entry_for(slot.outcome);  // throws when absent
    bases_.push_back(gellmann_basis(dim));
    total_parameters_ += static_cast<Index>(bases_.back().size());
  }
}

Scenario ParameterizedPlan::materialize(const RealVector& parameters) const {
  if (parameters.size() != total_parameters_)
    throw std::invalid_argument("parameter vector has the wrong length");
  Scenario s = template_;
  Index offset = 0;
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    const auto& basis = bases_[i];
    const Index n = static_cast<Index>(basis.size());
    ComplexMatrix gen = ComplexMatrix::Zero(basis.front().dim(), basis.front().dim());
    for (Index j = 0; j < n; ++j) gen += parameters[offset + j] * basis[static_cast<std::size_t>(j)].matrix();
    const ComplexMatrix u = unitary_from_generator(HermitianOperator(std::move(gen)));
    offset += n;

    const FreeSlot& slot = slots_[i];
    if (slot.kind == FreeSlot::Kind::dilation) {
      s.measurement.kind = MeasurementSpec::Kind::dilation;
      s.measurement.unitary = u;
      continue;
    }
    for (auto& e : s.feedback.entries) {
      if (e.outcome != slot.outcome) continue;
      if (slot.kind == FreeSlot::Kind::feedback_a) e.unitary_a = u;
      if (slot.kind == FreeSlot::Kind::feedback_b) e.unitary_b = u;
      if (slot.kind == FreeSlot::Kind::feedback_ab) e.unitary_ab = u;
    }
  }
  return s;
}

ObjectiveSpec ObjectiveSpec::parse(const std::string& text) {
  ObjectiveSpec spec;
  if (text == "net_work") {
    spec.kind = Kind::net_work;
  } else if (text == "extracted_work_a") {
    spec.kind = Kind::extracted_work_a;
  } else if (text.rfind("slack:", 0) == 0) {
    spec.kind = Kind::bound_slack;
    spec.record_id = text.substr(6);
    if (spec.record_id.size() != 1 || spec.record_id[0] < 'a' || spec.record_id[0] > 'o')
      throw std::invalid_argument("unknown bound record '" + spec.record_id + "'");
  } else {
    throw std::invalid_argument("unknown objective '" + text + "'");
  }
  return spec;
}

std::string ObjectiveSpec::to_string() const {
  switch (kind) {
    case Kind::net_work:
      return "net_work";
    case Kind::extracted_work_a:
      return "extracted_work_a";
    case Kind::bound_slack:
      return "slack:" + record_id;
  }
  return "?";
}

namespace {

// Internal orientation: always minimize.
double minimized_objective(const ParameterizedPlan& plan, const ObjectiveSpec& objective,
                           double tolerance, const RealVector& params) {
  try {
    const RunLedger ledger = run_protocol(plan.materialize(params));
    switch (objective.kind) {
      case ObjectiveSpec::Kind::net_work:
        return -ledger.w_net;
      case ObjectiveSpec::Kind::extracted_work_a:
        return -ledger.w_a_ext;
      case ObjectiveSpec::Kind::bound_slack: {
        for (const auto& r : evaluate(ledger, tolerance))
          if (r.id == objective.record_id) return r.slack;
        throw std::runtime_error("record " + objective.record_id + " not produced");
      }
    }
    throw std::logic_error("unreachable");
  } catch (const std::exception& e) {
    std::ostringstream oss;
    oss << "objective evaluation failed: " << e.what() << " at parameters [";
    for (Index i = 0; i < params.size(); ++i) oss << (i ? ", " : "") << params[i];
    oss << "]";
    throw std::runtime_error(oss.str());
  }
}

bool lex_less(const RealVector& a, const RealVector& b) {
  for (Index i = 0; i < std::min(a.size(), b.size()); ++i) {
    if (a[i] < b[i]) return true;
    if (a[i] > b[i]) return false;
  }
  return a.size() < b.size();
}

struct NmOutcome {
  RealVector x;
  double f = 0.0;
  long evaluations = 0;
  bool converged = false;
};

// Classic Nelder-Mead with reflection/expansion/contraction/shrink.
NmOutcome nelder_mead(const std::function<double(const RealVector&)>& f, const RealVector& x0,
                      double step, long max_evals, std::vector<double>* trace, double* incumbent) {
  const Index n = x0.size();
  NmOutcome out;
  std::vector<RealVector> xs;
  std::vector<double> fs;
  xs.reserve(static_cast<std::size_t>(n) + 1);
  xs.push_back(x0);
  for (Index i = 0; i < n; ++i) {
    RealVector xi = x0;
    xi[i] += step;
    xs.push_back(std::move(xi));
  }
  auto eval = [&](const RealVector& x) {
    ++out.evaluations;
    const double v = f(x);
    if (v < *incumbent) {
      *incumbent = v;
      trace->push_back(v);
    }
    return v;
  };
  for (const auto& x : xs) {
    if (out.evaluations >= max_evals) break;
    fs.push_back(eval(x));
  }
  while (fs.size() < xs.size()) {  // budget ran out mid-init
    xs.pop_back();
  }
  if (xs.size() < 2) {
    out.x = xs.front();
    out.f = fs.front();
    return out;
  }

  auto order = [&]() {
    std::vector<std::size_t> idx(xs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (fs[a] != fs[b]) return fs[a] < fs[b];
      return lex_less(xs[a], xs[b]);
    });
    std::vector<RealVector> x2;
    std::vector<double> f2;
    for (std::size_t i : idx) {
      x2.push_back(xs[i]);
      f2.push_back(fs[i]);
    }
    xs = std::move(x2);
    fs = std::move(f2);
  };

  const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
  while (out.evaluations < max_evals) {
    order();
    double diameter = 0.0;
    for (std::size_t i = 1; i < xs.size(); ++i)
      diameter = std::max(diameter, (xs[i] - xs[0]).norm());
    if (diameter < 1e-8) {
      out.converged = true;
      break;
    }

    RealVector centroid = RealVector::Zero(n);
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) centroid += xs[i];
    centroid /= static_cast<double>(xs.size() - 1);
    const RealVector& worst = xs.back();

    const RealVector reflected = centroid + alpha * (centroid - worst);
    const double fr = eval(reflected);
    if (fr < fs.front()) {
      if (out.evaluations < max_evals) {
        const RealVector expanded = centroid + gamma * (reflected - centroid);
        const double fe = eval(expanded);
        if (fe < fr) {
          xs.back() = expanded;
          fs.back() = fe;
          continue;
        }
      }
      xs.back() = reflected;
      fs.back() = fr;
      continue;
    }
    if (fr < fs[fs.size() - 2]) {
      xs.back() = reflected;
      fs.back() = fr;
      continue;
    }
    if (out.evaluations >= max_evals) break;
    const RealVector contracted = centroid + rho * (worst - centroid);
    const double fc = eval(contracted);
    if (fc < fs.back()) {
      xs.back() = contracted;
      fs.back() = fc;
      continue;
    }
    for (std::size_t i = 1; i < xs.size() && out.evaluations < max_evals; ++i) {
      xs[i] = xs[0] + sigma * (xs[i] - xs[0]);
      fs[i] = eval(xs[i]);
    }
  }

  order();
  out.x = xs.front();
  out.f = fs.front();
  return out;
}

// Finite-difference gradient descent: central differences at a fixed step,
// backtracking line search, stop on stalled progress or budget.
NmOutcome gradient_descent(const std::function<double(const RealVector&)>& f, const RealVector& x0,
                           long max_evals, std::vector<double>* trace, double* incumbent) {
  constexpr double kFdStep = 1e-6;
  const Index n = x0.size();
  NmOutcome out;
  auto eval = [&](const RealVector& x) {
    ++out.evaluations;
    const double v = f(x);
    if (v < *incumbent) {
      *incumbent = v;
      trace->push_back(v);
    }
    return v;
  };

  RealVector x = x0;
  double fx = eval(x);
  while (out.evaluations + 2 * n + 1 <= max_evals) {
    RealVector grad(n);
    for (Index i = 0; i < n; ++i) {
      RealVector xp = x, xm = x;
      xp[i] += kFdStep;
      xm[i] -= kFdStep;
      grad[i] = (eval(xp) - eval(xm)) / (2.0 * kFdStep);
    }
    const double gnorm = grad.norm();
    if (gnorm < 1e-10) {
      out.converged = true;
      break;
    }
    double t = 1.0 / std::max(1.0, gnorm);
    bool improved = false;
    while (out.evaluations < max_evals && t > 1e-14) {
      const RealVector candidate = x - t * grad;
      const double fc = eval(candidate);
      if (fc < fx) {
        x = candidate;
        fx = fc;
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) {
      out.converged = true;
      break;
    }
  }
  out.x = x;
  out.f = fx;
  return out;
}

}  // namespace

OptimizationResult optimize(const ParameterizedPlan& plan, const ObjectiveSpec& objective,
                            const OptimizeOptions& options) {
  if (options.budget < 1) throw std::invalid_argument("optimizer budget must be at least 1");
  if (options.restarts < 1) throw std::invalid_argument("optimizer needs at least one restart");

  const Index n = plan.parameter_count();
  auto f = [&](const RealVector& x) {
    return minimized_objective(plan, objective, options.tolerance, x);
  };

  OptimizationResult result;
  double incumbent = std::numeric_limits<double>::infinity();
  double best_f = std::numeric_limits<double>::infinity();
  RealVector best_x;
  bool have_best = false;
  bool best_converged = false;

  for (int r = 0; r < options.restarts; ++r) {
    std::mt19937_64 gen(mix_seed(options.seed, static_cast<std::uint64_t>(r)));
    std::uniform_real_distribution<double> unif(-M_PI, M_PI);
    RealVector x0(n);
    for (Index i = 0; i < n; ++i) x0[i] = unif(gen);

    long left = options.budget;
    double step = 0.7;
    RealVector x = x0;
    double fx = std::numeric_limits<double>::infinity();
    bool converged = false;
    if (options.use_gradient) {
      const NmOutcome gd = gradient_descent(f, x0, left, &result.trace, &incumbent);
      result.evaluations += gd.evaluations;
      x = gd.x;
      fx = gd.f;
      converged = gd.converged;
    } else {
      while (left > n + 1) {
        const NmOutcome nm = nelder_mead(f, x, step, left, &result.trace, &incumbent);
        result.evaluations += nm.evaluations;
        left -= nm.evaluations;
        x = nm.x;
        fx = nm.f;
        converged = nm.converged;
        if (!nm.converged) break;  // budget exhausted mid-search
        step *= 1e-3;              // refine around the converged point
        if (step < 1e-9) break;
      }
    }
    // Deterministic accept: strictly better, or equal with lexicographically
    // smaller parameters.
    if (!have_best || fx < best_f || (fx == best_f && lex_less(x, best_x))) {
      best_f = fx;
      best_x = x;
      best_converged = converged;
      have_best = true;
    }
  }

  result.best_parameters = best_x;
  result.converged = best_converged;
  result.restarts_used = options.restarts;
  result.best_value =
      (objective.kind == ObjectiveSpec::Kind::bound_slack) ? best_f : -best_f;
  return result;
}

std::vector<SweepPoint> sweep(const std::function<Scenario(double)>& scenario_at,
                              const std::vector<double>& grid, double tolerance, int workers) {
  if (grid.empty()) throw std::invalid_argument("sweep grid must not be empty");
  std::vector<SweepPoint> out(grid.size());
  auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      SweepPoint& point = out[i];
      point.axis_value = grid[i];
      try {
        const RunLedger ledger = run_protocol(scenario_at(grid[i]));
        point.records = evaluate(ledger, tolerance);
        point.ledger = ledger;
      } catch (const std::exception& e) {
        point.error = e.what();
      }
    }
  };
  const int pool_size = std::max(1, workers);
  if (pool_size == 1) {
    run_range(0, grid.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (grid.size() + static_cast<std::size_t>(pool_size) - 1) /
                              static_cast<std::size_t>(pool_size);
    for (std::size_t begin = 0; begin < grid.size(); begin += chunk)
      pool.emplace_back(run_range, begin, std::min(grid.size(), begin + chunk));
    for (auto& th : pool) th.join();
  }
  return out;
}

}  // namespace demonforge
