#include "ergo/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ergo/kv.hpp"

namespace ergo {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot read file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) fail("i/o failure while reading '" + path + "'");
  return buf.str();
}

json parse_json(const std::string& text, const std::string& origin) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) fail(origin + ": not valid JSON");
  return j;
}

const json& expect_object(const json& j, const std::string& ctx) {
  if (!j.is_object()) fail(ctx + ": expected an object");
  return j;
}

/// Unknown keys are configuration errors: a typo must never silently
/// deactivate the option it was meant to set.
void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& ctx) {
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key()))
      fail(ctx + ": unknown key '" + item.key() + "'");
  }
}

double as_double(const json& j, const std::string& ctx) {
  if (!j.is_number()) fail(ctx + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(ctx + ": must be finite");
  return v;
}

std::int64_t as_int(const json& j, const std::string& ctx) {
  if (!j.is_number_integer() && !j.is_number_unsigned())
    fail(ctx + ": expected an integer");
  return j.get<std::int64_t>();
}

std::uint64_t as_uint(const json& j, const std::string& ctx) {
  if (!j.is_number_unsigned() &&
      !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
    fail(ctx + ": expected a nonnegative integer");
  return j.get<std::uint64_t>();
}

bool as_bool(const json& j, const std::string& ctx) {
  if (!j.is_boolean()) fail(ctx + ": expected true or false");
  return j.get<bool>();
}

std::string as_string(const json& j, const std::string& ctx) {
  if (!j.is_string()) fail(ctx + ": expected a string");
  return j.get<std::string>();
}

double get_double(const json& obj, const std::string& key, const std::string& ctx) {
  if (!obj.contains(key)) fail(ctx + ": missing required key '" + key + "'");
  return as_double(obj.at(key), ctx + "." + key);
}

double get_double_or(const json& obj, const std::string& key, double dflt,
                     const std::string& ctx) {
  if (!obj.contains(key)) return dflt;
  return as_double(obj.at(key), ctx + "." + key);
}

std::int64_t get_int(const json& obj, const std::string& key, const std::string& ctx) {
  if (!obj.contains(key)) fail(ctx + ": missing required key '" + key + "'");
  return as_int(obj.at(key), ctx + "." + key);
}

std::int64_t get_int_or(const json& obj, const std::string& key, std::int64_t dflt,
                        const std::string& ctx) {
  if (!obj.contains(key)) return dflt;
  return as_int(obj.at(key), ctx + "." + key);
}

bool get_bool_or(const json& obj, const std::string& key, bool dflt,
                 const std::string& ctx) {
  if (!obj.contains(key)) return dflt;
  return as_bool(obj.at(key), ctx + "." + key);
}

TimeWindow get_window(const json& obj, const std::string& key, const std::string& ctx) {
  if (!obj.contains(key)) fail(ctx + ": missing required key '" + key + "'");
  const std::string wctx = ctx + "." + key;
  const json& w = expect_object(obj.at(key), wctx);
  check_keys(w, {"lo", "hi"}, wctx);
  const std::int64_t lo = get_int(w, "lo", wctx);
  const std::int64_t hi = get_int(w, "hi", wctx);
  if (lo > hi) fail(wctx + ": lo must not exceed hi");
  return TimeWindow{lo, hi};
}

// ---------------------------------------------------------------------------
// Schedule files
// ---------------------------------------------------------------------------

StochasticMatrix parse_matrix(const json& m, const std::string& ctx) {
  if (!m.is_array() || m.empty()) fail(ctx + ": expected a nonempty array of rows");
  const std::size_t dim = m.size();
  std::vector<double> a;
  a.reserve(dim * dim);
  for (std::size_t r = 0; r < dim; ++r) {
    const json& row = m.at(r);
    if (!row.is_array() || row.size() != dim)
      fail(ctx + ": row " + std::to_string(r) + " must have " +
           std::to_string(dim) + " entries (square matrix)");
    for (std::size_t c = 0; c < dim; ++c)
      a.push_back(as_double(row.at(c), ctx + "[" + std::to_string(r) + "][" +
                                           std::to_string(c) + "]"));
  }
  try {
    return StochasticMatrix(dim, std::move(a));
  } catch (const std::exception& e) {
    fail(ctx + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Model section
// ---------------------------------------------------------------------------

GridConfig parse_grid(const json& obj, const std::string& ctx) {
  const json& g = expect_object(obj, ctx);
  check_keys(g, {"lo", "hi", "cells"}, ctx);
  GridConfig grid;
  grid.lo = get_double(g, "lo", ctx);
  grid.hi = get_double(g, "hi", ctx);
  const std::int64_t cells = get_int(g, "cells", ctx);
  if (!(grid.lo < grid.hi)) fail(ctx + ": lo must be strictly below hi");
  if (cells < 1 || cells > 100000) fail(ctx + ": cells must be in [1, 100000]");
  grid.cells = static_cast<int>(cells);
  return grid;
}

SimulationConfig parse_simulation(const json& model, const std::string& ctx) {
  SimulationConfig sim;
  if (!model.contains("grid")) fail(ctx + ": missing required key 'grid'");
  sim.grid = parse_grid(model.at("grid"), ctx + ".grid");
  sim.s = get_double(model, "s", ctx);
  sim.t = get_double(model, "t", ctx);
  sim.dt = get_double(model, "dt", ctx);
  sim.samples_per_cell = get_int(model, "samples_per_cell", ctx);
  sim.max_overflow = get_double_or(model, "max_overflow", 0.01, ctx);
  if (!(sim.t > sim.s)) fail(ctx + ": t must be strictly after s");
  if (!(sim.dt > 0.0)) fail(ctx + ": dt must be positive");
  if (sim.samples_per_cell < 100)
    fail(ctx + ": samples_per_cell must be at least 100");
  if (!(sim.max_overflow >= 0.0 && sim.max_overflow <= 1.0))
    fail(ctx + ": max_overflow must lie in [0, 1]");
  return sim;
}

ModelConfig parse_model(const json& top, const std::string& base_dir) {
  if (!top.contains("model")) fail("config: missing required section 'model'");
  const std::string ctx = "model";
  const json& m = expect_object(top.at("model"), ctx);

  const int sources = int(m.contains("schedule_file")) + int(m.contains("preset")) +
                      int(m.contains("diffusion"));
  if (sources != 1)
    fail(ctx +
         ": exactly one of 'schedule_file', 'preset', 'diffusion' must be given");

  ModelConfig model;
  if (m.contains("schedule_file")) {
    check_keys(m, {"schedule_file"}, ctx);
    model.source = ModelSource::schedule_file;
    const std::string given = as_string(m.at("schedule_file"), ctx + ".schedule_file");
    std::filesystem::path p(given);
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    model.schedule_path = p.string();
    model.schedule = load_schedule_file(model.schedule_path);
    model.state_count = model.schedule->dim();
    return model;
  }

  const std::set<std::string> sim_keys = {"grid", "s", "t", "dt",
                                          "samples_per_cell", "max_overflow"};
  if (m.contains("preset")) {
    std::set<std::string> allowed = sim_keys;
    allowed.insert("preset");
    check_keys(m, allowed, ctx);
    model.source = ModelSource::preset;
    model.preset_name = as_string(m.at("preset"), ctx + ".preset");
    if (model.preset_name != "storage" && model.preset_name != "ou")
      fail(ctx + ".preset: unknown preset '" + model.preset_name +
           "' (available: storage, ou)");
  } else {
    std::set<std::string> allowed = sim_keys;
    allowed.insert("diffusion");
    check_keys(m, allowed, ctx);
    model.source = ModelSource::inline_diffusion;
    const std::string dctx = ctx + ".diffusion";
    const json& d = expect_object(m.at("diffusion"), dctx);
    check_keys(d, {"drift_slope", "drift_intercept", "noise", "reflect"}, dctx);
    LinearSdeConfig lin;
    lin.drift_slope = get_double(d, "drift_slope", dctx);
    lin.drift_intercept = get_double_or(d, "drift_intercept", 0.0, dctx);
    lin.noise = get_double(d, "noise", dctx);
    lin.reflect = get_bool_or(d, "reflect", false, dctx);
    if (lin.noise < 0.0) fail(dctx + ".noise: must be nonnegative");
    model.linear = lin;
  }
  model.simulation = parse_simulation(m, ctx);
  model.state_count = static_cast<std::size_t>(model.simulation->grid.cells);
  return model;
}

// ---------------------------------------------------------------------------
// Weight function section
// ---------------------------------------------------------------------------

double cell_center(const GridConfig& g, std::size_t i) {
  const double w = (g.hi - g.lo) / g.cells;
  return g.lo + (double(i) + 0.5) * w;
}

LyapunovConfig parse_lyapunov(const json& top, const ModelConfig& model) {
  if (!top.contains("lyapunov"))
    fail("config: missing required section 'lyapunov'");
  const std::string ctx = "lyapunov";
  const json& l = expect_object(top.at("lyapunov"), ctx);
  check_keys(l, {"table", "named"}, ctx);
  if (l.contains("table") == l.contains("named"))
    fail(ctx + ": exactly one of 'table', 'named' must be given");

  LyapunovConfig out;
  if (l.contains("table")) {
    const json& t = l.at("table");
    if (!t.is_array()) fail(ctx + ".table: expected an array");
    if (t.size() != model.state_count)
      fail(ctx + ".table: has " + std::to_string(t.size()) +
           " entries but the model has " + std::to_string(model.state_count) +
           " states");
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::string ectx = ctx + ".table[" + std::to_string(i) + "]";
      const json& e = t.at(i);
      if (e.is_string()) {
        if (e.get<std::string>() != "inf")
          fail(ectx + ": the only string value allowed is \"inf\"");
        out.values.push_back(ExtReal::infinity());
      } else {
        const double v = as_double(e, ectx);
        if (v < 0.0) fail(ectx + ": weights must be nonnegative");
        out.values.push_back(ExtReal::finite(v));
      }
    }
    return out;
  }

  out.named = as_string(l.at("named"), ctx + ".named");
  const bool needs_grid =
      out.named == "one_plus_x" || out.named == "one_plus_x_squared";
  if (needs_grid && !model.simulation)
    fail(ctx + ".named: '" + out.named +
         "' is defined on grid cell centers and needs a diffusion model");
  for (std::size_t i = 0; i < model.state_count; ++i) {
    double v = 0.0;
    if (out.named == "one_plus_x") {
      v = 1.0 + cell_center(model.simulation->grid, i);
    } else if (out.named == "one_plus_x_squared") {
      const double c = cell_center(model.simulation->grid, i);
      v = 1.0 + c * c;
    } else if (out.named == "one_plus_index") {
      v = 1.0 + double(i);
    } else {
      fail(ctx + ".named: unknown function '" + out.named +
           "' (available: one_plus_x, one_plus_x_squared, one_plus_index)");
    }
    if (v < 0.0)
      fail(ctx + ".named: '" + out.named + "' is negative at state " +
           std::to_string(i) + " for this grid");
    out.values.push_back(ExtReal::finite(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stage sections
// ---------------------------------------------------------------------------

DriftStageConfig parse_drift(const json& obj) {
  const std::string ctx = "drift";
  const json& d = expect_object(obj, ctx);
  check_keys(d, {"gamma", "C", "window"}, ctx);
  DriftStageConfig out;
  out.gamma = get_double(d, "gamma", ctx);
  out.C = get_double(d, "C", ctx);
  out.window = get_window(d, "window", ctx);
  if (!(out.gamma > 0.0 && out.gamma < 1.0))
    fail(ctx + ".gamma: must lie strictly inside (0, 1), got " +
         format_double(out.gamma));
  if (out.C < 0.0) fail(ctx + ".C: must be nonnegative");
  return out;
}

MinorizationStageConfig parse_minorization(const json& obj) {
  const std::string ctx = "minorization";
  const json& m = expect_object(obj, ctx);
  check_keys(m, {"R", "target_delta", "n0_max", "window"}, ctx);
  MinorizationStageConfig out;
  out.R = get_double(m, "R", ctx);
  out.target_delta = get_double_or(m, "target_delta", 0.1, ctx);
  out.n0_max = static_cast<int>(get_int_or(m, "n0_max", 8, ctx));
  out.window = get_window(m, "window", ctx);
  if (!(out.R > 0.0)) fail(ctx + ".R: must be positive");
  if (!(out.target_delta > 0.0 && out.target_delta < 1.0))
    fail(ctx + ".target_delta: must lie strictly inside (0, 1)");
  if (out.n0_max < 1 || out.n0_max > 4096)
    fail(ctx + ".n0_max: must lie in [1, 4096]");
  return out;
}

ConstantsStageConfig parse_constants(const json& obj) {
  const std::string ctx = "constants";
  const json& c = expect_object(obj, ctx);
  check_keys(c, {"target_delta", "n0_max", "gamma_star"}, ctx);
  ConstantsStageConfig out;
  out.target_delta = get_double_or(c, "target_delta", 0.05, ctx);
  out.n0_max = static_cast<int>(get_int_or(c, "n0_max", 64, ctx));
  if (c.contains("gamma_star")) out.gamma_star = as_double(c.at("gamma_star"), ctx + ".gamma_star");
  if (!(out.target_delta > 0.0 && out.target_delta < 1.0))
    fail(ctx + ".target_delta: must lie strictly inside (0, 1)");
  if (out.n0_max < 1 || out.n0_max > 4096)
    fail(ctx + ".n0_max: must lie in [1, 4096]");
  return out;
}

ConstructionStageConfig parse_construction(const json& obj) {
  const std::string ctx = "construction";
  const json& c = expect_object(obj, ctx);
  check_keys(c, {"times", "iteration_budget", "start_state", "agreement_tol"}, ctx);
  ConstructionStageConfig out;
  out.times = get_window(c, "times", ctx);
  out.iteration_budget = get_int_or(c, "iteration_budget", 0, ctx);
  const std::int64_t start = get_int_or(c, "start_state", 0, ctx);
  out.agreement_tol = get_double_or(c, "agreement_tol", 0.0, ctx);
  if (out.iteration_budget < 0)
    fail(ctx + ".iteration_budget: must be nonnegative (0 = automatic)");
  if (start < 0) fail(ctx + ".start_state: must be nonnegative");
  out.start_state = static_cast<std::size_t>(start);
  if (out.agreement_tol < 0.0)
    fail(ctx + ".agreement_tol: must be nonnegative (0 = automatic)");
  return out;
}

RatesStageConfig parse_rates(const json& obj) {
  const std::string ctx = "rates";
  const json& r = expect_object(obj, ctx);
  check_keys(r, {"m_max", "state", "arrival_time", "check_fit"}, ctx);
  RatesStageConfig out;
  out.m_max = get_int_or(r, "m_max", 200, ctx);
  const std::int64_t state = get_int_or(r, "state", 0, ctx);
  if (r.contains("arrival_time"))
    out.arrival_time = as_int(r.at("arrival_time"), ctx + ".arrival_time");
  out.check_fit = get_bool_or(r, "check_fit", true, ctx);
  if (out.m_max < 0) fail(ctx + ".m_max: must be nonnegative");
  if (out.m_max > 1000000) fail(ctx + ".m_max: must be at most 1000000");
  if (state < 0) fail(ctx + ".state: must be nonnegative");
  out.state = static_cast<std::size_t>(state);
  return out;
}

ScanStageConfig parse_scans(const json& obj) {
  const std::string ctx = "scans";
  const json& s = expect_object(obj, ctx);
  check_keys(s, {"p_max", "tol", "expect_period", "expect_no_period"}, ctx);
  ScanStageConfig out;
  out.p_max = get_int_or(s, "p_max", 4, ctx);
  out.tol = get_double_or(s, "tol", 0.0, ctx);
  if (s.contains("expect_period"))
    out.expect_period = as_int(s.at("expect_period"), ctx + ".expect_period");
  out.expect_no_period = get_bool_or(s, "expect_no_period", false, ctx);
  if (out.p_max < 1 || out.p_max > 100000)
    fail(ctx + ".p_max: must lie in [1, 100000]");
  if (out.tol < 0.0) fail(ctx + ".tol: must be nonnegative (0 = top-level tol)");
  if (out.expect_period && (*out.expect_period < 1 || *out.expect_period > out.p_max))
    fail(ctx + ".expect_period: must lie in [1, p_max]");
  if (out.expect_period && out.expect_no_period)
    fail(ctx + ": expect_period and expect_no_period are mutually exclusive");
  return out;
}

bool planned(const std::vector<Stage>& plan, Stage s) {
  return std::find(plan.begin(), plan.end(), s) != plan.end();
}

/// Cross-section consistency checks that need the whole resolved config.
void validate_cross(const ExperimentConfig& cfg) {
  const std::size_t d = cfg.model.state_count;

  if (cfg.minorization) {
    double min_v = std::numeric_limits<double>::infinity();
    for (const ExtReal& v : cfg.lyapunov.values)
      if (v.is_finite()) min_v = std::min(min_v, v.value());
    if (!(2.0 * min_v <= cfg.minorization->R))
      fail("minorization.R: no pair of states satisfies V(x) + V(y) <= R "
           "(the smallest possible pair sum is " + format_double(2.0 * min_v) + ")");
  }

  if (cfg.construction) {
    if (cfg.construction->start_state >= d)
      fail("construction.start_state: must be below the state count " +
           std::to_string(d));
  }

  if (planned(cfg.plan, Stage::rates)) {
    if (cfg.rates.state >= d)
      fail("rates.state: must be below the state count " + std::to_string(d));
    if (!cfg.lyapunov.values[cfg.rates.state].is_finite())
      fail("rates.state: V is infinite there, so the decay bound is vacuous");
    if (cfg.rates.arrival_time && cfg.construction &&
        !cfg.construction->times.contains(*cfg.rates.arrival_time))
      fail("rates.arrival_time: must lie inside construction.times");
  }

  if (planned(cfg.plan, Stage::scans) && cfg.construction) {
    if (cfg.construction->times.length() < 2 * cfg.scans.p_max)
      fail("scans.p_max: the construction window stores " +
           std::to_string(cfg.construction->times.length()) +
           " measures but scanning up to period " + std::to_string(cfg.scans.p_max) +
           " needs at least " + std::to_string(2 * cfg.scans.p_max));
  }

  if (planned(cfg.plan, Stage::drift) && !cfg.drift)
    fail("config: the drift stage is requested but the 'drift' section is missing");
  if (planned(cfg.plan, Stage::minorization) && !cfg.minorization)
    fail("config: the minorization stage is requested but the 'minorization' "
         "section is missing");
  if (planned(cfg.plan, Stage::construction) && !cfg.construction)
    fail("config: the construction stage is requested but the 'construction' "
         "section is missing");
}

}  // namespace

const char* to_string(Stage s) {
  switch (s) {
    case Stage::drift: return "drift";
    case Stage::minorization: return "minorization";
    case Stage::constants: return "constants";
    case Stage::construction: return "construction";
    case Stage::rates: return "rates";
    case Stage::scans: return "scans";
  }
  return "?";
}

Stage stage_from_string(const std::string& name) {
  if (name == "drift") return Stage::drift;
  if (name == "minorization") return Stage::minorization;
  if (name == "constants") return Stage::constants;
  if (name == "construction") return Stage::construction;
  if (name == "rates") return Stage::rates;
  if (name == "scans") return Stage::scans;
  fail("unknown stage '" + name +
       "' (available: drift, minorization, constants, construction, rates, scans)");
}

std::vector<Stage> execution_plan(const std::vector<Stage>& requested) {
  std::set<Stage> want(requested.begin(), requested.end());
  // Dependency closure; one sweep suffices because the graph has depth 2
  // and rates already pulls in every ancestor it needs.
  if (want.count(Stage::constants)) want.insert(Stage::drift);
  if (want.count(Stage::rates)) {
    want.insert(Stage::drift);
    want.insert(Stage::constants);
    want.insert(Stage::construction);
  }
  if (want.count(Stage::scans)) want.insert(Stage::construction);
  return {want.begin(), want.end()};  // std::set orders by enum value
}

KernelFamily load_schedule_file(const std::string& path) {
  const std::string ctx = "schedule file '" + path + "'";
  const json j = parse_json(read_file(path), ctx);
  expect_object(j, ctx);
  check_keys(j, {"kind", "matrices", "first_time"}, ctx);
  if (!j.contains("kind")) fail(ctx + ": missing required key 'kind'");
  if (!j.contains("matrices")) fail(ctx + ": missing required key 'matrices'");
  const std::string kind = as_string(j.at("kind"), ctx + ".kind");
  if (kind != "constant" && kind != "periodic" && kind != "window")
    fail(ctx + ".kind: must be one of constant, periodic, window");
  if (j.contains("first_time") && kind != "window")
    fail(ctx + ".first_time: only meaningful for kind 'window'");

  const json& ms = j.at("matrices");
  if (!ms.is_array() || ms.empty())
    fail(ctx + ".matrices: expected a nonempty array of matrices");
  std::vector<StochasticMatrix> mats;
  mats.reserve(ms.size());
  for (std::size_t k = 0; k < ms.size(); ++k)
    mats.push_back(parse_matrix(ms.at(k), ctx + ".matrices[" + std::to_string(k) + "]"));
  for (const StochasticMatrix& m : mats)
    if (m.dim() != mats.front().dim())
      fail(ctx + ".matrices: all matrices must share one dimension");

  try {
    if (kind == "constant") {
      if (mats.size() != 1)
        fail(ctx + ".matrices: kind 'constant' takes exactly one matrix");
      return KernelFamily::constant(std::move(mats.front()));
    }
    if (kind == "periodic") return KernelFamily::periodic(std::move(mats));
    const std::int64_t first = get_int_or(j, "first_time", 0, ctx);
    return KernelFamily::window(std::move(mats), first);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail(ctx + ": " + e.what());
  }
}

ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::string& base_dir,
                                         const std::string& origin,
                                         const ConfigOverrides& overrides) {
  const json top = parse_json(text, origin);
  expect_object(top, origin);
  check_keys(top,
             {"model", "lyapunov", "stages", "seed", "tol", "out", "threads",
              "drift", "minorization", "constants", "construction", "rates",
              "scans"},
             "config");

  ExperimentConfig cfg;
  cfg.config_path = origin;

  // Scalars, with command-line overrides taking precedence; the merged
  // values are what gets validated.
  cfg.seed = overrides.seed ? *overrides.seed
                            : (top.contains("seed") ? as_uint(top.at("seed"), "config.seed")
                                                    : std::uint64_t{1});
  cfg.tol = overrides.tol ? *overrides.tol
                          : (top.contains("tol") ? as_double(top.at("tol"), "config.tol")
                                                 : 1e-9);
  cfg.out_dir = overrides.out_dir
                    ? *overrides.out_dir
                    : (top.contains("out") ? as_string(top.at("out"), "config.out")
                                           : std::string("out"));
  const std::int64_t threads =
      overrides.threads ? *overrides.threads
                        : (top.contains("threads") ? as_int(top.at("threads"), "config.threads")
                                                   : std::int64_t{1});
  if (!(cfg.tol > 0.0) || cfg.tol > 1.0)
    fail("config.tol: must lie in (0, 1]");
  if (cfg.out_dir.empty()) fail("config.out: must not be empty");
  if (threads < 1 || threads > 4096) fail("config.threads: must lie in [1, 4096]");
  cfg.threads = static_cast<int>(threads);

  // Stage selection: the subcommand wins, then the config, then all six.
  if (overrides.stages) {
    cfg.requested = *overrides.stages;
  } else if (top.contains("stages")) {
    const json& st = top.at("stages");
    if (!st.is_array()) fail("config.stages: expected an array of stage names");
    for (const json& e : st)
      cfg.requested.push_back(stage_from_string(as_string(e, "config.stages[]")));
  } else {
    cfg.requested = {Stage::drift,        Stage::minorization, Stage::constants,
                     Stage::construction, Stage::rates,        Stage::scans};
  }
  cfg.plan = execution_plan(cfg.requested);

  cfg.model = parse_model(top, base_dir);
  cfg.lyapunov = parse_lyapunov(top, cfg.model);

  // Stage sections are validated whenever present, requested or not:
  // a config with gamma = 1.5 is defective no matter which stages run.
  if (top.contains("drift")) cfg.drift = parse_drift(top.at("drift"));
  if (top.contains("minorization"))
    cfg.minorization = parse_minorization(top.at("minorization"));
  if (top.contains("constants")) cfg.constants = parse_constants(top.at("constants"));
  if (top.contains("construction"))
    cfg.construction = parse_construction(top.at("construction"));
  if (top.contains("rates")) cfg.rates = parse_rates(top.at("rates"));
  if (top.contains("scans")) cfg.scans = parse_scans(top.at("scans"));

  // Fill schedule-dependent defaults.
  if (cfg.construction) {
    if (cfg.construction->iteration_budget == 0) {
      const bool has_period =
          cfg.model.source != ModelSource::schedule_file ||
          cfg.model.schedule->declared_period().has_value();
      // Periodic and constant schedules advance by block-sum doubling, so a
      // generous budget is nearly free; window/callback schedules stream.
      cfg.construction->iteration_budget =
          has_period ? (std::int64_t{1} << 32) : (std::int64_t{1} << 20);
    }
    if (cfg.construction->agreement_tol == 0.0)
      cfg.construction->agreement_tol = 10.0 * cfg.tol;
  }
  if (cfg.scans.tol == 0.0) cfg.scans.tol = cfg.tol;

  validate_cross(cfg);
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path,
                                        const ConfigOverrides& overrides) {
  const std::string text = read_file(path);
  const std::string base = std::filesystem::path(path).parent_path().string();
  ExperimentConfig cfg =
      parse_experiment_config(text, base.empty() ? "." : base, path, overrides);
  cfg.config_path = path;
  return cfg;
}

std::string render_resolved_config(const ExperimentConfig& cfg) {
  json j;
  j["config_path"] = cfg.config_path;
  j["seed"] = cfg.seed;
  j["tol"] = cfg.tol;
  j["out"] = cfg.out_dir;
  j["threads"] = cfg.threads;

  json req = json::array();
  for (Stage s : cfg.requested) req.push_back(to_string(s));
  j["stages"] = req;
  json plan = json::array();
  for (Stage s : cfg.plan) plan.push_back(to_string(s));
  j["plan"] = plan;

  json m;
  switch (cfg.model.source) {
    case ModelSource::schedule_file:
      m["source"] = "schedule_file";
      m["schedule_file"] = cfg.model.schedule_path;
      break;
    case ModelSource::preset:
      m["source"] = "preset";
      m["preset"] = cfg.model.preset_name;
      break;
    case ModelSource::inline_diffusion:
      m["source"] = "diffusion";
      m["diffusion"] = {{"drift_slope", cfg.model.linear->drift_slope},
                        {"drift_intercept", cfg.model.linear->drift_intercept},
                        {"noise", cfg.model.linear->noise},
                        {"reflect", cfg.model.linear->reflect}};
      break;
  }
  m["states"] = cfg.model.state_count;
  if (cfg.model.simulation) {
    const SimulationConfig& sim = *cfg.model.simulation;
    m["grid"] = {{"lo", sim.grid.lo}, {"hi", sim.grid.hi}, {"cells", sim.grid.cells}};
    m["s"] = sim.s;
    m["t"] = sim.t;
    m["dt"] = sim.dt;
    m["samples_per_cell"] = sim.samples_per_cell;
    m["max_overflow"] = sim.max_overflow;
  }
  j["model"] = m;

  json l;
  if (!cfg.lyapunov.named.empty()) l["named"] = cfg.lyapunov.named;
  json vals = json::array();
  for (const ExtReal& v : cfg.lyapunov.values) {
    if (v.is_finite())
      vals.push_back(v.value());
    else
      vals.push_back("inf");
  }
  l["values"] = vals;
  j["lyapunov"] = l;

  if (cfg.drift)
    j["drift"] = {{"gamma", cfg.drift->gamma},
                  {"C", cfg.drift->C},
                  {"window", {{"lo", cfg.drift->window.lo}, {"hi", cfg.drift->window.hi}}}};
  if (cfg.minorization)
    j["minorization"] = {{"R", cfg.minorization->R},
                         {"target_delta", cfg.minorization->target_delta},
                         {"n0_max", cfg.minorization->n0_max},
                         {"window",
                          {{"lo", cfg.minorization->window.lo},
                           {"hi", cfg.minorization->window.hi}}}};
  {
    json c = {{"target_delta", cfg.constants.target_delta},
              {"n0_max", cfg.constants.n0_max}};
    if (cfg.constants.gamma_star) c["gamma_star"] = *cfg.constants.gamma_star;
    j["constants"] = c;
  }
  if (cfg.construction)
    j["construction"] = {{"times",
                          {{"lo", cfg.construction->times.lo},
                           {"hi", cfg.construction->times.hi}}},
                         {"iteration_budget", cfg.construction->iteration_budget},
                         {"start_state", cfg.construction->start_state},
                         {"agreement_tol", cfg.construction->agreement_tol}};
  {
    json r = {{"m_max", cfg.rates.m_max},
              {"state", cfg.rates.state},
              {"check_fit", cfg.rates.check_fit}};
    if (cfg.rates.arrival_time) r["arrival_time"] = *cfg.rates.arrival_time;
    j["rates"] = r;
  }
  {
    json s = {{"p_max", cfg.scans.p_max},
              {"tol", cfg.scans.tol},
              {"expect_no_period", cfg.scans.expect_no_period}};
    if (cfg.scans.expect_period) s["expect_period"] = *cfg.scans.expect_period;
    j["scans"] = s;
  }

  return j.dump(2);
}

}  // namespace ergo
