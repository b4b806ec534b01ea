#include "demonforge/io.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace demonforge::io {

using nlohmann::json;

namespace {

const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ScenarioError(path + "." + key, "missing field");
  return j.at(key);
}

double require_number(const json& j, const std::string& key, const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_number()) throw ScenarioError(path + "." + key, "expected a number");
  return v.get<double>();
}

std::string require_string(const json& j, const std::string& key, const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_string()) throw ScenarioError(path + "." + key, "expected a string");
  return v.get<std::string>();
}

HermitianOperator hermitian_from_json(const json& j, const std::string& path) {
  try {
    return HermitianOperator(matrix_from_json(j, path));
  } catch (const ScenarioError&) {
    throw;
  } catch (const std::exception& e) {
    throw ScenarioError(path, e.what());
  }
}

DensityOperator density_from_json(const json& j, const std::string& path,
                                  std::vector<Index> dims) {
  try {
    return DensityOperator(matrix_from_json(j, path), std::move(dims));
  } catch (const ScenarioError&) {
    throw;
  } catch (const std::exception& e) {
    throw ScenarioError(path, e.what());
  }
}

// A unitary given directly or as exp(-i G) of a Hermitian generator literal.
ComplexMatrix unitary_from_json(const json& j, const std::string& key_unitary,
                                const std::string& key_generator, const std::string& path) {
  const bool has_u = j.is_object() && j.contains(key_unitary);
  const bool has_g = j.is_object() && j.contains(key_generator);
  if (has_u == has_g)
    throw ScenarioError(path, "provide exactly one of '" + key_unitary + "' and '" +
                                  key_generator + "'");
  if (has_u) {
    const ComplexMatrix u = matrix_from_json(j.at(key_unitary), path + "." + key_unitary);
    if (unitarity_residual(u) > tol::unitarity)
      throw ScenarioError(path + "." + key_unitary, "matrix is not unitary within tolerance");
    return u;
  }
  return unitary_from_generator(
      hermitian_from_json(j.at(key_generator), path + "." + key_generator));
}

json complex_to_json(const Complex& c) { return json::array({c.real(), c.imag()}); }

}  // namespace

ComplexMatrix matrix_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ScenarioError(path, "expected a non-empty array of rows");
  const std::size_t rows = j.size();
  std::size_t cols = 0;
  ComplexMatrix m;
  for (std::size_t r = 0; r < rows; ++r) {
    const json& row = j.at(r);
    if (!row.is_array() || row.empty())
      throw ScenarioError(path, "row " + std::to_string(r) + " is not a non-empty array");
    if (r == 0) {
      cols = row.size();
      m.resize(static_cast<Index>(rows), static_cast<Index>(cols));
    } else if (row.size() != cols) {
      throw ScenarioError(path, "row " + std::to_string(r) + " has inconsistent length");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      const json& entry = row.at(c);
      if (entry.is_number()) {
        m(static_cast<Index>(r), static_cast<Index>(c)) = Complex(entry.get<double>(), 0.0);
      } else if (entry.is_array() && entry.size() == 2 && entry.at(0).is_number() &&
                 entry.at(1).is_number()) {
        m(static_cast<Index>(r), static_cast<Index>(c)) =
            Complex(entry.at(0).get<double>(), entry.at(1).get<double>());
      } else {
        throw ScenarioError(path, "entry (" + std::to_string(r) + "," + std::to_string(c) +
                                      ") is not a number or [re, im] pair");
      }
    }
  }
  if (!is_finite(m)) throw ScenarioError(path, "matrix has non-finite entries");
  return m;
}

json matrix_to_json(const ComplexMatrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(complex_to_json(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Scenario scenario_from_json(const json& j) {
  Scenario s;
  s.name = j.is_object() && j.contains("name") ? j.at("name").get<std::string>() : "scenario";
  s.beta = require_number(j, "beta", "$");
  const json& dims = require(j, "dims", "$");
  s.dim_a = static_cast<Index>(require_number(dims, "a", "$.dims"));
  s.dim_b = static_cast<Index>(require_number(dims, "b", "$.dims"));

  const json& hams = require(j, "hamiltonians", "$");
  s.h_a_initial = hermitian_from_json(require(hams, "a_initial", "$.hamiltonians"),
                                      "$.hamiltonians.a_initial");
  s.h_b_initial = hermitian_from_json(require(hams, "b_initial", "$.hamiltonians"),
                                      "$.hamiltonians.b_initial");

  const json& init = require(j, "initial_state", "$");
  const std::string recipe = require_string(init, "recipe", "$.initial_state");
  if (recipe == "canonical-product") {
    s.initial.recipe = InitialRecipe::canonical_product;
  } else if (recipe == "thermal-entangled") {
    s.initial.recipe = InitialRecipe::thermal_entangled;
  } else if (recipe == "classical-correlated") {
    s.initial.recipe = InitialRecipe::classical_correlated;
  } else if (recipe == "explicit") {
    s.initial.recipe = InitialRecipe::explicit_state;
    s.initial.state = density_from_json(require(init, "matrix", "$.initial_state"),
                                        "$.initial_state.matrix", {s.dim_a, s.dim_b});
  } else {
    throw ScenarioError("$.initial_state.recipe", "unknown recipe '" + recipe + "'");
  }

  {
    const json& mem = require(j, "memory", "$");
    const json& bd = require(mem, "block_dims", "$.memory");
    if (!bd.is_array() || bd.empty())
      throw ScenarioError("$.memory.block_dims", "expected a non-empty array");
    std::vector<Index> block_dims;
    for (const auto& v : bd) block_dims.push_back(v.get<Index>());
    const json& bh = require(mem, "block_hamiltonians", "$.memory");
    if (!bh.is_array() || bh.size() != block_dims.size())
      throw ScenarioError("$.memory.block_hamiltonians", "expected one Hamiltonian per block");
    std::vector<HermitianOperator> block_hams;
    for (std::size_t k = 0; k < bh.size(); ++k)
      block_hams.push_back(hermitian_from_json(
          bh.at(k), "$.memory.block_hamiltonians[" + std::to_string(k) + "]"));
    const int standard = static_cast<int>(require_number(mem, "standard_block", "$.memory"));

    try {
      if (mem.contains("initial_state")) {
        if (standard < 0 || static_cast<std::size_t>(standard) >= block_dims.size())
          throw ScenarioError("$.memory.standard_block", "index out of range");
        const Index d0 = block_dims[static_cast<std::size_t>(standard)];
        const ComplexMatrix block =
            matrix_from_json(mem.at("initial_state"), "$.memory.initial_state");
        if (block.rows() != d0)
          throw ScenarioError("$.memory.initial_state",
                              "expected the standard block dimension " + std::to_string(d0));
        Index total = 0, off = 0;
        for (Index d : block_dims) total += d;
        for (int k = 0; k < standard; ++k) off += block_dims[static_cast<std::size_t>(k)];
        ComplexMatrix full = ComplexMatrix::Zero(total, total);
        full.block(off, off, d0, d0) = block;
        s.memory = MemoryModel(block_dims, block_hams, standard,
                               DensityOperator(std::move(full), {total}));
      } else {
        s.memory = MemoryModel::with_canonical_start(block_dims, block_hams, standard, s.beta);
      }
    } catch (const ScenarioError&) {
      throw;
    } catch (const std::exception& e) {
      throw ScenarioError("$.memory", e.what());
    }
  }

  {
    const json& mes = require(j, "measurement", "$");
    const std::string type = require_string(mes, "type", "$.measurement");
    if (type == "dilation") {
      s.measurement.kind = MeasurementSpec::Kind::dilation;
      s.measurement.unitary = unitary_from_json(mes, "unitary", "generator", "$.measurement");
    } else if (type == "kraus") {
      s.measurement.kind = MeasurementSpec::Kind::kraus;
      const json& outs = require(mes, "outcomes", "$.measurement");
      if (!outs.is_array() || outs.empty())
        throw ScenarioError("$.measurement.outcomes", "expected a non-empty array");
      std::vector<KrausFamily::OutcomeOps> groups;
      for (std::size_t i = 0; i < outs.size(); ++i) {
        const std::string p = "$.measurement.outcomes[" + std::to_string(i) + "]";
        const json& g = outs.at(i);
        KrausFamily::OutcomeOps group;
        group.label = static_cast<int>(require_number(g, "label", p));
        const json& ops = require(g, "operators", p);
        if (!ops.is_array() || ops.empty())
          throw ScenarioError(p + ".operators", "expected a non-empty array");
        for (std::size_t a = 0; a < ops.size(); ++a)
          group.operators.push_back(
              matrix_from_json(ops.at(a), p + ".operators[" + std::to_string(a) + "]"));
        groups.push_back(std::move(group));
      }
      try {
        s.measurement.family = KrausFamily(std::move(groups));
      } catch (const std::exception& e) {
        throw ScenarioError("$.measurement", e.what());
      }
    } else {
      throw ScenarioError("$.measurement.type", "unknown type '" + type + "'");
    }
  }

  {
    const json& fb = require(j, "feedback", "$");
    const std::string mode = require_string(fb, "mode", "$.feedback");
    if (mode == "local") {
      s.feedback.mode = FeedbackMode::local;
    } else if (mode == "nonlocal") {
      s.feedback.mode = FeedbackMode::nonlocal;
    } else {
      throw ScenarioError("$.feedback.mode", "unknown mode '" + mode + "'");
    }
    const json& entries = require(fb, "entries", "$.feedback");
    if (!entries.is_array() || entries.empty())
      throw ScenarioError("$.feedback.entries", "expected a non-empty array");
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const std::string p = "$.feedback.entries[" + std::to_string(i) + "]";
      const json& je = entries.at(i);
      FeedbackEntry e;
      e.outcome = static_cast<int>(require_number(je, "outcome", p));
      if (s.feedback.mode == FeedbackMode::local) {
        e.unitary_a = unitary_from_json(je, "unitary_a", "generator_a", p);
        e.unitary_b = unitary_from_json(je, "unitary_b", "generator_b", p);
        e.h_final_a = hermitian_from_json(require(je, "h_final_a", p), p + ".h_final_a");
        e.h_final_b = hermitian_from_json(require(je, "h_final_b", p), p + ".h_final_b");
        if (je.contains("reference_a"))
          e.reference_a = density_from_json(je.at("reference_a"), p + ".reference_a", {s.dim_a});
        if (je.contains("reference_b"))
          e.reference_b = density_from_json(je.at("reference_b"), p + ".reference_b", {s.dim_b});
      } else {
        e.unitary_ab = unitary_from_json(je, "unitary_ab", "generator_ab", p);
        e.h_final_ab = hermitian_from_json(require(je, "h_final_ab", p), p + ".h_final_ab");
        if (je.contains("reference_ab"))
          e.reference_ab = density_from_json(je.at("reference_ab"), p + ".reference_ab",
                                             {s.dim_a, s.dim_b});
      }
      s.feedback.entries.push_back(std::move(e));
    }
  }

  {
    const json& ers = require(j, "erasure", "$");
    const std::string variant = require_string(ers, "variant", "$.erasure");
    s.erasure.beta = s.beta;
    if (variant == "idealized") {
      s.erasure.variant = ErasureModel::Variant::idealized;
    } else if (variant == "explicit") {
      s.erasure.variant = ErasureModel::Variant::explicit_unitary;
      s.erasure.bath_hamiltonian =
          hermitian_from_json(require(ers, "bath_hamiltonian", "$.erasure"),
                              "$.erasure.bath_hamiltonian");
      s.erasure.unitary = unitary_from_json(ers, "unitary", "generator", "$.erasure");
      if (ers.contains("thermalize_blocks"))
        s.erasure.thermalize_blocks = ers.at("thermalize_blocks").get<bool>();
    } else {
      throw ScenarioError("$.erasure.variant", "unknown variant '" + variant + "'");
    }
  }

  if (j.contains("second_round")) {
    const json& sr = j.at("second_round");
    if (!sr.is_array() || sr.empty())
      throw ScenarioError("$.second_round", "expected a non-empty array");
    std::map<int, KrausFamily> families;
    for (std::size_t i = 0; i < sr.size(); ++i) {
      const std::string p = "$.second_round[" + std::to_string(i) + "]";
      const json& jf = sr.at(i);
      const int outcome = static_cast<int>(require_number(jf, "outcome", p));
      const json& fam = require(jf, "family", p);
      if (!fam.is_array() || fam.empty())
        throw ScenarioError(p + ".family", "expected a non-empty array");
      std::vector<KrausFamily::OutcomeOps> groups;
      for (std::size_t g = 0; g < fam.size(); ++g) {
        const std::string pg = p + ".family[" + std::to_string(g) + "]";
        KrausFamily::OutcomeOps group;
        group.label = static_cast<int>(require_number(fam.at(g), "label", pg));
        const json& ops = require(fam.at(g), "operators", pg);
        for (std::size_t a = 0; a < ops.size(); ++a)
          group.operators.push_back(
              matrix_from_json(ops.at(a), pg + ".operators[" + std::to_string(a) + "]"));
        groups.push_back(std::move(group));
      }
      try {
        families.emplace(outcome, KrausFamily(std::move(groups)));
      } catch (const std::exception& e) {
        throw ScenarioError(p, e.what());
      }
    }
    s.second_round = std::move(families);
  }

  if (j.contains("preamble")) {
    const json& pre = j.at("preamble");
    PreambleSpec spec{
        density_from_json(require(pre, "state_a", "$.preamble"), "$.preamble.state_a", {s.dim_a}),
        density_from_json(require(pre, "state_b", "$.preamble"), "$.preamble.state_b", {s.dim_b}),
        unitary_from_json(pre, "unitary", "generator", "$.preamble"),
        {},
        {}};
    if (pre.contains("reference_a"))
      spec.reference_a =
          density_from_json(pre.at("reference_a"), "$.preamble.reference_a", {s.dim_a});
    if (pre.contains("reference_b"))
      spec.reference_b =
          density_from_json(pre.at("reference_b"), "$.preamble.reference_b", {s.dim_b});
    s.preamble = std::move(spec);
  }

  if (j.contains("optimize")) {
    const json& opt = j.at("optimize");
    OptimizeDirective d;
    d.objective = require_string(opt, "objective", "$.optimize");
    if (opt.contains("budget")) d.budget = opt.at("budget").get<long>();
    if (opt.contains("restarts")) d.restarts = opt.at("restarts").get<int>();
    if (opt.contains("seed")) d.seed = opt.at("seed").get<std::uint64_t>();
    const json& slots = require(opt, "free_slots", "$.optimize");
    if (!slots.is_array() || slots.empty())
      throw ScenarioError("$.optimize.free_slots", "expected a non-empty array");
    for (const auto& v : slots) d.free_slots.push_back(v.get<std::string>());
    s.optimize = std::move(d);
  }

  try {
    s.validate();
  } catch (const std::exception& e) {
    throw ScenarioError("$", e.what());
  }
  return s;
}

json scenario_to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["beta"] = s.beta;
  j["dims"] = {{"a", s.dim_a}, {"b", s.dim_b}};
  j["hamiltonians"] = {{"a_initial", matrix_to_json(s.h_a_initial.matrix())},
                       {"b_initial", matrix_to_json(s.h_b_initial.matrix())}};

  json init;
  switch (s.initial.recipe) {
    case InitialRecipe::canonical_product:
      init["recipe"] = "canonical-product";
      break;
    case InitialRecipe::thermal_entangled:
      init["recipe"] = "thermal-entangled";
      break;
    case InitialRecipe::classical_correlated:
      init["recipe"] = "classical-correlated";
      break;
    case InitialRecipe::explicit_state:
      init["recipe"] = "explicit";
      init["matrix"] = matrix_to_json(s.initial.state->matrix());
      break;
  }
  j["initial_state"] = std::move(init);

  json mem;
  mem["block_dims"] = s.memory.block_dims();
  json bh = json::array();
  for (const auto& h : s.memory.block_hamiltonians()) bh.push_back(matrix_to_json(h.matrix()));
  mem["block_hamiltonians"] = std::move(bh);
  mem["standard_block"] = s.memory.standard_block();
  mem["initial_state"] = matrix_to_json(s.memory.block_restriction(
      s.memory.initial_state().matrix(), s.memory.standard_block()));
  j["memory"] = std::move(mem);

  json mes;
  if (s.measurement.kind == MeasurementSpec::Kind::dilation) {
    mes["type"] = "dilation";
    mes["unitary"] = matrix_to_json(*s.measurement.unitary);
  } else {
    mes["type"] = "kraus";
    json outs = json::array();
    for (const auto& group : s.measurement.family->outcomes()) {
      json g;
      g["label"] = group.label;
      json ops = json::array();
      for (const auto& op : group.operators) ops.push_back(matrix_to_json(op));
      g["operators"] = std::move(ops);
      outs.push_back(std::move(g));
    }
    mes["outcomes"] = std::move(outs);
  }
  j["measurement"] = std::move(mes);

  json fb;
  fb["mode"] = s.feedback.mode == FeedbackMode::local ? "local" : "nonlocal";
  json entries = json::array();
  for (const auto& e : s.feedback.entries) {
    json je;
    je["outcome"] = e.outcome;
    if (s.feedback.mode == FeedbackMode::local) {
      je["unitary_a"] = matrix_to_json(*e.unitary_a);
      je["unitary_b"] = matrix_to_json(*e.unitary_b);
      je["h_final_a"] = matrix_to_json(e.h_final_a->matrix());
      je["h_final_b"] = matrix_to_json(e.h_final_b->matrix());
      if (e.reference_a) je["reference_a"] = matrix_to_json(e.reference_a->matrix());
      if (e.reference_b) je["reference_b"] = matrix_to_json(e.reference_b->matrix());
    } else {
      je["unitary_ab"] = matrix_to_json(*e.unitary_ab);
      je["h_final_ab"] = matrix_to_json(e.h_final_ab->matrix());
      if (e.reference_ab) je["reference_ab"] = matrix_to_json(e.reference_ab->matrix());
    }
    entries.push_back(std::move(je));
  }
  fb["entries"] = std::move(entries);
  j["feedback"] = std::move(fb);

  json ers;
  if (s.erasure.variant == ErasureModel::Variant::idealized) {
    ers["variant"] = "idealized";
  } else {
    ers["variant"] = "explicit";
    ers["bath_hamiltonian"] = matrix_to_json(s.erasure.bath_hamiltonian->matrix());
    ers["unitary"] = matrix_to_json(*s.erasure.unitary);
    ers["thermalize_blocks"] = s.erasure.thermalize_blocks;
  }
  j["erasure"] = std::move(ers);

  if (s.second_round) {
    json sr = json::array();
    for (const auto& [outcome, fam] : *s.second_round) {
      json jf;
      jf["outcome"] = outcome;
      json groups = json::array();
      for (const auto& group : fam.outcomes()) {
        json g;
        g["label"] = group.label;
        json ops = json::array();
        for (const auto& op : group.operators) ops.push_back(matrix_to_json(op));
        g["operators"] = std::move(ops);
        groups.push_back(std::move(g));
      }
      jf["family"] = std::move(groups);
      sr.push_back(std::move(jf));
    }
    j["second_round"] = std::move(sr);
  }

  if (s.preamble) {
    json pre;
    pre["state_a"] = matrix_to_json(s.preamble->state_a.matrix());
    pre["state_b"] = matrix_to_json(s.preamble->state_b.matrix());
    pre["unitary"] = matrix_to_json(s.preamble->unitary);
    if (s.preamble->reference_a)
      pre["reference_a"] = matrix_to_json(s.preamble->reference_a->matrix());
    if (s.preamble->reference_b)
      pre["reference_b"] = matrix_to_json(s.preamble->reference_b->matrix());
    j["preamble"] = std::move(pre);
  }

  if (s.optimize) {
    json opt;
    opt["objective"] = s.optimize->objective;
    opt["budget"] = s.optimize->budget;
    opt["restarts"] = s.optimize->restarts;
    opt["seed"] = s.optimize->seed;
    opt["free_slots"] = s.optimize->free_slots;
    j["optimize"] = std::move(opt);
  }

  return j;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("malformed JSON in '" + path + "': " + e.what());
  }
  return scenario_from_json(j);
}

void save_scenario(const Scenario& s, const std::string& path) {
  write_atomic(path, scenario_to_json(s).dump(2) + "\n");
}

}  // namespace demonforge::io
