#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ergo/kernels.hpp"
#include "ergo/measures.hpp"

/// Experiment configuration for the batch front-end.
///
/// Configs are JSON documents (structured key-value text with nesting;
/// numbers are decimal).  Loading is fail-fast: the document is parsed,
/// every key is checked against the schema (unknown keys are rejected),
/// every referenced file is read and parsed, and every parameter range is
/// enforced before any computation starts.  All problems are reported as
/// ConfigError; the command-line driver maps that to exit code 2.
///
/// No environment-variable indirection: the file plus the explicit flag
/// overrides fully determine a run.
namespace ergo {

/// Any defect in a configuration: syntax, schema, range, or a referenced
/// file that is missing or malformed.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Pipeline stages in canonical execution order.
enum class Stage { drift, minorization, constants, construction, rates, scans };

const char* to_string(Stage s);
/// Parses a stage name; throws ConfigError for unknown names.
Stage stage_from_string(const std::string& name);

/// Expands a requested stage set to its dependency closure and returns the
/// stages in canonical execution order (duplicates removed):
///   constants needs drift; rates needs drift, constants and construction;
///   scans needs construction.
std::vector<Stage> execution_plan(const std::vector<Stage>& requested);

/// Where the transition kernels come from.
enum class ModelSource {
  schedule_file,     ///< explicit matrices loaded from a JSON file
  preset,            ///< named built-in diffusion, discretized by simulation
  inline_diffusion,  ///< scalar linear SDE described directly in the config
};

/// Histogram grid used to discretize a diffusion into a finite chain.
struct GridConfig {
  double lo = 0.0;
  double hi = 0.0;
  int cells = 0;
};

/// Simulation parameters for turning a diffusion into a one-step kernel
/// estimate on the grid.
struct SimulationConfig {
  GridConfig grid;
  double s = 0.0;                  ///< start time of the estimated step
  double t = 0.0;                  ///< end time of the estimated step
  double dt = 0.0;                 ///< integrator step
  std::int64_t samples_per_cell = 0;
  double max_overflow = 0.01;      ///< largest tolerated escaped row mass
};

/// Coefficients of an inline scalar model dX = (a X + b) dt + sigma dW.
struct LinearSdeConfig {
  double drift_slope = 0.0;      ///< a
  double drift_intercept = 0.0;  ///< b
  double noise = 0.0;            ///< sigma >= 0
  bool reflect = false;          ///< reflect the state at zero each step
};

struct ModelConfig {
  ModelSource source = ModelSource::schedule_file;

  /// schedule_file: path as written in the config and the kernels it parsed
  /// to (loaded eagerly so a bad file fails validation, not a stage).
  std::string schedule_path;
  std::optional<KernelFamily> schedule;

  /// preset: which built-in diffusion ("storage" or "ou").
  std::string preset_name;

  /// inline_diffusion: the coefficients.
  std::optional<LinearSdeConfig> linear;

  /// Discretization, present for preset and inline_diffusion sources.
  std::optional<SimulationConfig> simulation;

  /// Number of chain states (matrix dimension or grid cell count).
  std::size_t state_count = 0;
};

/// Weight function choice: an explicit table or a named function of the
/// grid cell centers.  Either way the values are materialized at load
/// time, so downstream code sees only the table.
struct LyapunovConfig {
  std::string named;             ///< empty when a table was given
  std::vector<ExtReal> values;   ///< resolved values, one per state
};

struct DriftStageConfig {
  double gamma = 0.0;
  double C = 0.0;
  TimeWindow window{0, 0};
};

struct MinorizationStageConfig {
  double R = 0.0;
  double target_delta = 0.1;
  int n0_max = 8;
  TimeWindow window{0, 0};
};

struct ConstantsStageConfig {
  double target_delta = 0.05;
  int n0_max = 64;
  std::optional<double> gamma_star;  ///< override for the midpoint default
};

struct ConstructionStageConfig {
  TimeWindow times{0, 0};
  std::int64_t iteration_budget = 0;  ///< 0: pick by schedule kind at load
  std::size_t start_state = 0;        ///< backward-limit start
  double agreement_tol = 0.0;         ///< 0: defaults to 10 * top-level tol
};

struct RatesStageConfig {
  std::int64_t m_max = 200;
  std::size_t state = 0;
  std::optional<std::int64_t> arrival_time;  ///< default: last constructed time
  bool check_fit = true;  ///< also assert the fitted log-slope vs log(alpha)
};

struct ScanStageConfig {
  std::int64_t p_max = 4;
  double tol = 0.0;  ///< 0: defaults to top-level tol
  std::optional<std::int64_t> expect_period;
  bool expect_no_period = false;
};

/// Fully resolved experiment: every default filled in, every referenced
/// file already parsed, every range checked.
struct ExperimentConfig {
  ModelConfig model;
  LyapunovConfig lyapunov;

  std::vector<Stage> requested;  ///< as requested (subcommand or config)
  std::vector<Stage> plan;       ///< dependency closure, canonical order

  std::uint64_t seed = 1;
  double tol = 1e-9;
  std::string out_dir = "out";
  int threads = 1;

  std::optional<DriftStageConfig> drift;
  std::optional<MinorizationStageConfig> minorization;
  ConstantsStageConfig constants;
  std::optional<ConstructionStageConfig> construction;
  RatesStageConfig rates;
  ScanStageConfig scans;

  /// Path the config was loaded from, as given on the command line.
  std::string config_path;
};

/// Command-line overrides merged into the config before validation.
struct ConfigOverrides {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::optional<int> threads;
  /// Stage selection forced by the subcommand; nullopt means use the
  /// config's "stages" list (default: all six).
  std::optional<std::vector<Stage>> stages;
};

/// Loads, merges and validates a configuration file.  Referenced files
/// (kernel schedules) are resolved relative to the config file's directory
/// and parsed here.  Throws ConfigError on any problem.
ExperimentConfig load_experiment_config(const std::string& path,
                                        const ConfigOverrides& overrides = {});

/// Same, from in-memory text. `base_dir` anchors relative schedule paths;
/// `origin` names the source in error messages.
ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::string& base_dir,
                                         const std::string& origin,
                                         const ConfigOverrides& overrides = {});

/// Loads a kernel schedule file: {"kind": "constant"|"periodic"|"window",
/// "matrices": [[[row], ...], ...], "first_time": n (window only)}.
/// Throws ConfigError on any problem.
KernelFamily load_schedule_file(const std::string& path);

/// Canonical JSON rendering of the resolved config (keys sorted, numbers in
/// round-trip precision).  Embedded verbatim in reports for provenance;
/// byte-identical for identical resolved configs.
std::string render_resolved_config(const ExperimentConfig& cfg);

}  // namespace ergo
