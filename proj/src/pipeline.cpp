#include "ergo/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "ergo/certificates.hpp"
#include "ergo/contraction.hpp"
#include "ergo/diffusion.hpp"
#include "ergo/ergodic.hpp"
#include "ergo/kernels.hpp"
#include "ergo/kv.hpp"
#include "ergo/measures.hpp"
#include "ergo/rng.hpp"

namespace ergo {
namespace {

using nlohmann::json;

/// A write that could not be carried out.  Distinct from stage failures:
/// the pipeline maps it to kExitIo instead of kExitAssertion.
class IoFailure : public std::runtime_error {
 public:
  explicit IoFailure(const std::string& what) : std::runtime_error(what) {}
};

/// Seed salt for the kernel-estimation stream.  Every random stream in a run
/// is derived from the single top-level seed with a documented salt, so two
/// runs with one differing stage still share the others' draws.
constexpr std::uint64_t kModelSeedSalt = 1;

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot open '" + p.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoFailure("write to '" + p.string() + "' failed");
}

struct StageReport {
  std::string name;
  std::string status;  ///< "passed" or "failed"
  std::string detail;  ///< failure reason, empty when passed
  json summary = json::object();
};

/// Everything accumulated while the planned stages run.
struct Workspace {
  explicit Workspace(const ExperimentConfig& c)
      : cfg(c), out(c.out_dir), V(std::vector<ExtReal>(c.lyapunov.values)) {}

  const ExperimentConfig& cfg;
  std::filesystem::path out;
  WeightFunction V;

  std::optional<KernelFamily> kernel;
  json model_info = json::object();

  std::optional<DriftCertificate> drift_cert;
  std::optional<MinorizationCertificate> minor_cert;
  std::optional<ContractionConstants> constants;
  std::optional<InvariantFamily> family;

  std::vector<StageReport> stages;
  KvDocument kv;
};

void merge_with_prefix(KvDocument& into, const KvDocument& from,
                       const std::string& prefix) {
  for (const auto& [key, value] : from.entries()) into.set(prefix + key, value);
}

void write_constants_kv(Workspace& ws) {
  write_text(ws.out / "constants.kv", ws.kv.render());
}

json window_json(TimeWindow w) { return json{{"lo", w.lo}, {"hi", w.hi}}; }

// ---------------------------------------------------------------------------
// Model resolution
// ---------------------------------------------------------------------------

SdeModel inline_linear_model(const LinearSdeConfig& lin) {
  SdeModel model;
  model.dimension = 1;
  const double a = lin.drift_slope;
  const double b = lin.drift_intercept;
  const double sigma = lin.noise;
  model.drift = [a, b](double, const std::vector<double>& x) {
    return std::vector<double>{a * x[0] + b};
  };
  model.diffusion = [sigma](double, const std::vector<double>&) {
    return std::vector<double>{sigma};
  };
  model.reflect_at_zero = lin.reflect;
  return model;
}

/// Builds the finite chain the stages certify: either the schedule parsed at
/// load time or a Monte Carlo estimate of the diffusion's one-step kernel.
void resolve_model(Workspace& ws) {
  const ModelConfig& mc = ws.cfg.model;
  if (mc.source == ModelSource::schedule_file) {
    ws.kernel = *mc.schedule;
    ws.model_info["source"] = "schedule_file";
    ws.model_info["states"] = ws.kernel->dim();
    switch (ws.kernel->kind()) {
      case KernelFamily::Kind::constant: ws.model_info["kind"] = "constant"; break;
      case KernelFamily::Kind::periodic: ws.model_info["kind"] = "periodic"; break;
      case KernelFamily::Kind::window: ws.model_info["kind"] = "window"; break;
      case KernelFamily::Kind::callback: ws.model_info["kind"] = "callback"; break;
    }
    if (auto p = ws.kernel->declared_period()) ws.model_info["period"] = *p;
    return;
  }

  const SimulationConfig& sim = *mc.simulation;
  SdeModel model;
  if (mc.source == ModelSource::preset)
    model = (mc.preset_name == "storage") ? storage_preset() : ou_preset();
  else
    model = inline_linear_model(*mc.linear);

  const SpatialGrid grid{sim.grid.lo, sim.grid.hi,
                         static_cast<std::size_t>(sim.grid.cells)};
  const std::uint64_t seed = derive_stream(ws.cfg.seed, kModelSeedSalt);
  const EmpiricalKernel emp =
      estimate_kernel(model, grid, sim.s, sim.t, sim.dt, sim.samples_per_cell,
                      seed, sim.max_overflow);
  ws.kernel = KernelFamily::constant(emp.to_matrix());

  double max_hw = 0.0;
  for (double h : emp.half_widths) max_hw = std::max(max_hw, h);
  ws.model_info["source"] =
      mc.source == ModelSource::preset ? "preset" : "diffusion";
  if (mc.source == ModelSource::preset) ws.model_info["preset"] = mc.preset_name;
  ws.model_info["states"] = ws.kernel->dim();
  ws.model_info["kind"] = "constant";
  ws.model_info["samples_per_row"] = emp.samples_per_row;
  ws.model_info["max_overflow_observed"] = emp.max_overflow();
  ws.model_info["max_half_width"] = max_hw;
  ws.model_info["estimation_seed"] = seed;
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

StageReport run_drift(Workspace& ws) {
  const DriftStageConfig& d = *ws.cfg.drift;
  const DriftCheck chk = verify_drift(*ws.kernel, ws.V, d.gamma, d.C, d.window);
  StageReport rep{"drift", "passed", "", json::object()};
  rep.summary["gamma"] = d.gamma;
  rep.summary["C"] = d.C;
  rep.summary["window"] = window_json(d.window);
  if (!chk.passed()) {
    const DriftViolation& v = chk.violations.front();
    rep.summary["violations"] = chk.violations.size();
    std::ostringstream msg;
    msg << "the one-step drift inequality fails at " << chk.violations.size()
        << " (time, state) pair(s); first at n=" << v.arrival_time
        << ", x=" << v.state << " with value " << format_double(v.drift_value)
        << " > bound " << format_double(v.bound);
    throw std::runtime_error(msg.str());
  }
  ws.drift_cert = *chk.certificate;
  rep.summary["worst_slack"] = ws.drift_cert->worst_slack;
  rep.summary["coverage"] = to_string(ws.drift_cert->coverage);
  merge_with_prefix(ws.kv, ws.drift_cert->to_kv(), "drift.");
  write_constants_kv(ws);
  return rep;
}

StageReport run_minorization(Workspace& ws) {
  const MinorizationStageConfig& m = *ws.cfg.minorization;
  const MinorizationSearch search = find_minorization(
      *ws.kernel, ws.V, m.R, m.target_delta, m.n0_max, m.window);
  StageReport rep{"minorization", "passed", "", json::object()};
  rep.summary["R"] = m.R;
  rep.summary["target_delta"] = m.target_delta;
  json profile = json::array();
  for (const DeltaProfileEntry& e : search.profile)
    profile.push_back(
        {{"n0", e.n0}, {"delta", e.delta}, {"doeblin", e.doeblin}});
  rep.summary["profile"] = profile;
  if (!search.found()) {
    double best = -2.0;
    int best_n0 = 0;
    for (const DeltaProfileEntry& e : search.profile)
      if (e.delta > best) best = e.delta, best_n0 = e.n0;
    std::ostringstream msg;
    msg << "no step count up to n0_max=" << m.n0_max << " reaches delta >= "
        << format_double(m.target_delta) << " at level R=" << format_double(m.R)
        << " (best: delta=" << format_double(best) << " at n0=" << best_n0 << ")";
    throw std::runtime_error(msg.str());
  }
  ws.minor_cert = *search.certificate;
  rep.summary["n0"] = ws.minor_cert->n0;
  rep.summary["delta"] = ws.minor_cert->delta;
  rep.summary["doeblin_overlap"] = ws.minor_cert->doeblin_overlap;
  rep.summary["coverage"] = to_string(ws.minor_cert->coverage);
  merge_with_prefix(ws.kv, ws.minor_cert->to_kv(), "minorization.");
  write_constants_kv(ws);
  return rep;
}

StageReport run_constants(Workspace& ws) {
  if (!ws.drift_cert)
    throw std::logic_error("internal: constants stage scheduled without drift");
  const ConstantsStageConfig& c = ws.cfg.constants;
  const ConstantsResult result =
      derive_constants(*ws.drift_cert, *ws.kernel, c.target_delta, c.n0_max,
                       c.gamma_star);
  StageReport rep{"constants", "passed", "", json::object()};
  rep.summary["target_delta"] = c.target_delta;
  rep.summary["n0_max"] = c.n0_max;
  if (!result.ok()) {
    double best = -2.0;
    int best_n0 = 0;
    for (const DeltaProfileEntry& e : result.minorization.profile)
      if (e.delta > best) best = e.delta, best_n0 = e.n0;
    std::ostringstream msg;
    msg << "the minorization search at the level implied by the drift "
           "certificate found no delta >= "
        << format_double(c.target_delta) << " up to n0_max=" << c.n0_max
        << " (best: delta=" << format_double(best) << " at n0=" << best_n0
        << "); consider overriding gamma_star";
    throw std::runtime_error(msg.str());
  }
  ws.constants = *result.constants;
  rep.summary["gamma_star"] = ws.constants->gamma_star;
  rep.summary["R"] = ws.constants->R;
  rep.summary["n0"] = ws.constants->n0;
  rep.summary["delta"] = ws.constants->delta;
  rep.summary["beta"] = ws.constants->beta;
  rep.summary["alpha1"] = ws.constants->alpha1;
  rep.summary["eta"] = ws.constants->eta;
  rep.summary["alpha"] = ws.constants->alpha;
  rep.summary["M_tilde"] = ws.constants->M_tilde;
  merge_with_prefix(ws.kv, ws.constants->to_kv(), "constants.");
  write_constants_kv(ws);
  return rep;
}

void write_family_csv(const Workspace& ws) {
  const InvariantFamily& f = *ws.family;
  std::ostringstream csv;
  csv << "n,state,weight\n";
  for (std::int64_t n : f.times()) {
    const ProbabilityVector& mu = f.at(n);
    for (std::size_t x = 0; x < mu.size(); ++x)
      csv << n << "," << x << "," << format_double(mu[x]) << "\n";
  }
  write_text(ws.out / "family.csv", csv.str());
}

StageReport run_construction(Workspace& ws) {
  const ConstructionStageConfig& c = *ws.cfg.construction;
  const std::size_t dim = ws.kernel->dim();
  StageReport rep{"construction", "passed", "", json::object()};
  rep.summary["times"] = window_json(c.times);

  const ConstructionResult cesaro = krylov_bogolyubov_family(
      *ws.kernel, ProbabilityVector::uniform(dim), c.times, c.iteration_budget,
      ws.cfg.tol);
  rep.summary["cesaro"] = {{"status", cesaro.diagnostics.status},
                           {"iterations", cesaro.diagnostics.iterations},
                           {"final_gap", cesaro.diagnostics.final_gap},
                           {"residual", cesaro.family.residual()}};
  if (!cesaro.diagnostics.converged()) {
    std::ostringstream msg;
    msg << "cesaro averaging did not converge (status " << cesaro.diagnostics.status
        << ", gap " << format_double(cesaro.diagnostics.final_gap)
        << " after " << cesaro.diagnostics.iterations << " iterations)";
    throw std::runtime_error(msg.str());
  }

  const ConstructionResult backward = backward_limit_family(
      *ws.kernel, c.start_state, c.times, c.iteration_budget, ws.cfg.tol, ws.V);
  rep.summary["backward"] = {
      {"status", backward.diagnostics.status},
      {"iterations", backward.diagnostics.iterations},
      {"final_gap", backward.diagnostics.final_gap},
      {"start_sensitivity", backward.diagnostics.start_sensitivity}};
  if (backward.diagnostics.status == "nonunique") {
    std::ostringstream msg;
    msg << "the backward limit is start-dependent (two start states disagree "
           "by TV "
        << format_double(backward.diagnostics.start_sensitivity)
        << "), so no unique invariant family exists at tolerance "
        << format_double(ws.cfg.tol);
    throw std::runtime_error(msg.str());
  }
  if (!backward.diagnostics.converged()) {
    std::ostringstream msg;
    msg << "the backward limit did not converge (status "
        << backward.diagnostics.status << ", gap "
        << format_double(backward.diagnostics.final_gap) << ")";
    throw std::runtime_error(msg.str());
  }

  double agreement = 0.0;
  for (std::int64_t n : cesaro.family.times())
    agreement =
        std::max(agreement, tv_distance(cesaro.family.at(n), backward.family.at(n)));
  rep.summary["route_agreement"] = agreement;
  rep.summary["agreement_tol"] = c.agreement_tol;
  if (agreement > c.agreement_tol) {
    std::ostringstream msg;
    msg << "the cesaro and backward-limit constructions disagree by TV "
        << format_double(agreement) << " > " << format_double(c.agreement_tol);
    throw std::runtime_error(msg.str());
  }

  ws.family = cesaro.family;
  write_family_csv(ws);
  return rep;
}

StageReport run_rates(Workspace& ws) {
  if (!ws.family || !ws.constants)
    throw std::logic_error("internal: rates stage scheduled without inputs");
  const RatesStageConfig& r = ws.cfg.rates;
  const std::int64_t arrival = r.arrival_time.value_or(ws.family->last());
  const TvRateReport rr = tv_rate_check(*ws.kernel, *ws.family, *ws.constants,
                                        ws.V, r.state, arrival, r.m_max);

  // The decay table is written before any assertion so a violated bound
  // leaves the evidence on disk.
  std::ostringstream csv;
  csv << "m,observed_tv,theoretical_bound,V_x\n";
  for (const DecayRow& row : rr.table)
    csv << row.m << "," << format_double(row.observed_tv) << ","
        << format_double(row.theoretical_bound) << "," << format_double(rr.V_x)
        << "\n";
  write_text(ws.out / "decay.csv", csv.str());

  StageReport rep{"rates", "passed", "", json::object()};
  rep.summary["state"] = rr.state;
  rep.summary["arrival_time"] = rr.arrival_time;
  rep.summary["m_max"] = r.m_max;
  rep.summary["V_x"] = rr.V_x;
  rep.summary["bound_satisfied"] = rr.bound_satisfied;
  rep.summary["fitted_rate"] = rr.fitted_rate;
  rep.summary["log_alpha"] = rr.log_alpha;
  rep.summary["rate_within_contract"] = rr.rate_within_contract;
  rep.summary["empirical_prefactor"] = rr.empirical_prefactor;
  rep.summary["fit_points"] = rr.fit_points;

  if (!rr.bound_satisfied) {
    std::int64_t first_bad = -1;
    for (const DecayRow& row : rr.table)
      if (row.observed_tv > row.theoretical_bound) {
        first_bad = row.m;
        break;
      }
    std::ostringstream msg;
    msg << "observed TV exceeds the certified bound, first at m=" << first_bad
        << " (see decay.csv)";
    throw std::runtime_error(msg.str());
  }
  if (r.check_fit && !rr.rate_within_contract) {
    std::ostringstream msg;
    msg << "fitted decay slope " << format_double(rr.fitted_rate)
        << " exceeds certified log(alpha) + 0.01 = "
        << format_double(rr.log_alpha + 0.01);
    throw std::runtime_error(msg.str());
  }
  return rep;
}

StageReport run_scans(Workspace& ws) {
  if (!ws.family)
    throw std::logic_error("internal: scans stage scheduled without a family");
  const ScanStageConfig& s = ws.cfg.scans;
  const PeriodScan scan = periodicity_scan(*ws.family, s.p_max, s.tol);

  StageReport rep{"scans", "passed", "", json::object()};
  rep.summary["p_max"] = s.p_max;
  rep.summary["tol"] = s.tol;
  rep.summary["period"] = scan.period ? json(*scan.period) : json(nullptr);
  rep.summary["defects"] = scan.defects;

  if (s.expect_period) {
    if (!scan.period) {
      std::ostringstream msg;
      msg << "expected period " << *s.expect_period
          << " but no period up to " << s.p_max << " has defect <= "
          << format_double(s.tol);
      throw std::runtime_error(msg.str());
    }
    if (*scan.period != *s.expect_period) {
      std::ostringstream msg;
      msg << "expected period " << *s.expect_period << " but the scan found "
          << *scan.period;
      throw std::runtime_error(msg.str());
    }
  }
  if (s.expect_no_period && scan.period) {
    std::ostringstream msg;
    msg << "expected no exact period but the scan found " << *scan.period
        << " (defect <= " << format_double(s.tol) << ")";
    throw std::runtime_error(msg.str());
  }
  return rep;
}

StageReport run_stage(Workspace& ws, Stage s) {
  switch (s) {
    case Stage::drift: return run_drift(ws);
    case Stage::minorization: return run_minorization(ws);
    case Stage::constants: return run_constants(ws);
    case Stage::construction: return run_construction(ws);
    case Stage::rates: return run_rates(ws);
    case Stage::scans: return run_scans(ws);
  }
  throw std::logic_error("internal: unknown stage");
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

void write_report(Workspace& ws, int exit_code) {
  json rep;
  rep["version"] = kVersion;
  rep["exit_code"] = exit_code;
  rep["config"] = json::parse(render_resolved_config(ws.cfg));
  if (!ws.model_info.empty()) rep["model"] = ws.model_info;
  json stages = json::array();
  for (const StageReport& sr : ws.stages) {
    json e;
    e["name"] = sr.name;
    e["status"] = sr.status;
    if (!sr.detail.empty()) e["detail"] = sr.detail;
    e["summary"] = sr.summary;
    stages.push_back(e);
  }
  rep["stages"] = stages;
  write_text(ws.out / "report.json", rep.dump(2) + "\n");
}

}  // namespace

PipelineOutcome run_pipeline(const ExperimentConfig& cfg) {
  Workspace ws(cfg);

  std::error_code ec;
  std::filesystem::create_directories(ws.out, ec);
  if (ec || !std::filesystem::is_directory(ws.out)) {
    PipelineOutcome out;
    out.exit_code = kExitIo;
    out.diagnostic = "ergo: io error: cannot create output directory '" +
                     ws.out.string() + "'" + (ec ? ": " + ec.message() : "");
    return out;
  }

  try {
    if (!cfg.plan.empty()) {
      // Model resolution runs once, before the first stage that needs it.
      try {
        resolve_model(ws);
      } catch (const IoFailure&) {
        throw;
      } catch (const std::exception& e) {
        StageReport rep{"model", "failed", e.what(), ws.model_info};
        ws.stages.push_back(rep);
        write_report(ws, kExitAssertion);
        PipelineOutcome out;
        out.exit_code = kExitAssertion;
        out.failed_stage = "model";
        out.diagnostic = std::string("ergo: stage model failed: ") + e.what();
        return out;
      }
    }

    for (Stage s : cfg.plan) {
      try {
        StageReport rep = run_stage(ws, s);
        ws.stages.push_back(std::move(rep));
      } catch (const IoFailure&) {
        throw;
      } catch (const std::exception& e) {
        StageReport rep{to_string(s), "failed", e.what(), json::object()};
        ws.stages.push_back(std::move(rep));
        write_report(ws, kExitAssertion);
        PipelineOutcome out;
        out.exit_code = kExitAssertion;
        out.failed_stage = to_string(s);
        out.diagnostic = std::string("ergo: stage ") + to_string(s) +
                         " failed: " + e.what();
        return out;
      }
    }

    write_report(ws, kExitOk);
    return PipelineOutcome{};
  } catch (const IoFailure& e) {
    PipelineOutcome out;
    out.exit_code = kExitIo;
    out.diagnostic = std::string("ergo: io error: ") + e.what();
    return out;
  }
}

}  // namespace ergo
