#pragma once

#include <string>

#include "ergo/config.hpp"

/// Batch pipeline: executes the planned stages in dependency order
/// (drift -> minorization -> constants -> construction -> rates -> scans)
/// and writes machine-readable outputs into the configured directory:
///
///   constants.kv  - every certificate and constant, one sorted key=value line
///                   per entry (written whenever a certifying stage passes)
///   family.csv    - the constructed invariant family, header n,state,weight
///   decay.csv     - observed vs certified TV decay, header
///                   m,observed_tv,theoretical_bound,V_x
///   report.json   - run summary: version string, fully resolved config,
///                   per-stage status, exit code
///
/// Output is deterministic: stable key ordering, round-trip float formatting,
/// no timestamps.  Re-running an identical config produces byte-identical
/// files.  Outputs are written incrementally, so a failing stage retains
/// everything earlier stages produced.
namespace ergo {

/// Exit-code contract, stable across releases.
inline constexpr int kExitOk = 0;         ///< every requested assertion passed
inline constexpr int kExitAssertion = 1;  ///< a stage ran and its claim failed
inline constexpr int kExitConfig = 2;     ///< defective configuration
inline constexpr int kExitIo = 3;         ///< unwritable output, failed write

/// Version string embedded in every report.
inline constexpr const char* kVersion = "ergo-1.0.0";

struct PipelineOutcome {
  int exit_code = kExitOk;
  std::string failed_stage;  ///< empty unless exit_code == kExitAssertion
  std::string diagnostic;    ///< one stderr line; empty on success
};

/// Runs the configured plan.  Never throws: every failure mode is folded
/// into the outcome (and into report.json when the directory is writable).
PipelineOutcome run_pipeline(const ExperimentConfig& cfg);

}  // namespace ergo
