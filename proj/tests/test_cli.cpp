// End-to-end tests of the command-line front-end: exit codes, report
// bundles, determinism, and stage orchestration, all driven through the
// real binary exactly as a user would invoke it.
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kBinary = ERGO_BINARY_PATH;
const std::string kFixtures = ERGO_FIXTURE_DIR;

fs::path scratch_root() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() / "ergo_cli_suite";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

/// Fresh empty directory under the suite scratch root.
fs::path fresh_dir(const std::string& name) {
  fs::path p = scratch_root() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  REQUIRE(out.good());
}

/// Runs the binary with the given argument string, capturing both streams.
CliResult run_cli(const std::string& args) {
  static int invocation = 0;
  const fs::path out_file =
      scratch_root() / ("stdout_" + std::to_string(invocation) + ".txt");
  const fs::path err_file =
      scratch_root() / ("stderr_" + std::to_string(invocation) + ".txt");
  ++invocation;
  const std::string cmd = quoted(kBinary) + " " + args + " >" +
                          quoted(out_file.string()) + " 2>" +
                          quoted(err_file.string());
  const int status = std::system(cmd.c_str());
  CliResult r;
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  r.exit_code = WEXITSTATUS(status);
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t eq = line.find('=');
    REQUIRE(eq != std::string::npos);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::vector<std::string> stage_names(const json& report) {
  std::vector<std::string> names;
  for (const json& s : report.at("stages")) names.push_back(s.at("name"));
  return names;
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("drift-only run writes the certificate and exits zero") {
  const fs::path out = fresh_dir("drift_only");
  const CliResult r = run_cli("run --config " +
                              quoted(kFixtures + "/periodic_drift.json") +
                              " --out " + quoted(out.string()));
  CHECK(r.exit_code == 0);
  CHECK(r.err.empty());

  auto kv = parse_kv(slurp(out / "constants.kv"));
  CHECK(kv.at("drift.certificate") == "drift");
  CHECK(kv.at("drift.coverage") == "exhaustive");
  CHECK(std::stod(kv.at("drift.gamma")) == doctest::Approx(0.55).epsilon(1e-15));
  CHECK(std::stod(kv.at("drift.C")) == 1.0);
  // Worst case: arrival time 2 (second phase), state 0, value 1.5 vs 1.55.
  CHECK(std::stod(kv.at("drift.worst_slack")) ==
        doctest::Approx(0.05).epsilon(1e-12));
  CHECK(kv.at("drift.worst_time") == "2");
  CHECK(kv.at("drift.worst_state") == "0");

  const json rep = json::parse(slurp(out / "report.json"));
  CHECK(rep.at("version") == "ergo-1.0.0");
  CHECK(rep.at("exit_code") == 0);
  CHECK(stage_names(rep) == std::vector<std::string>{"drift"});
  CHECK(rep.at("stages")[0].at("status") == "passed");
  CHECK(rep.at("config").at("model").at("source") == "schedule_file");

  CHECK_FALSE(fs::exists(out / "family.csv"));
  CHECK_FALSE(fs::exists(out / "decay.csv"));
}

TEST_CASE("gamma outside (0,1) is rejected before any computation") {
  const fs::path out = scratch_root() / "never_created";
  const CliResult r = run_cli("run --config " +
                              quoted(kFixtures + "/gamma_too_big.json") +
                              " --out " + quoted(out.string()));
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("config error") != std::string::npos);
  CHECK(r.err.find("gamma") != std::string::npos);
  // Fail-fast: validation rejected the config before anything was written.
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("malformed configurations all exit with the config code") {
  const fs::path dir = fresh_dir("bad_configs");
  const std::string sched = kFixtures + "/periodic_schedule.json";

  auto expect_config_error = [&](const std::string& name, const std::string& text,
                                 const std::string& needle) {
    const fs::path cfg = dir / name;
    spit(cfg, text);
    const CliResult r = run_cli("run --config " + quoted(cfg.string()) +
                                " --out " + quoted((dir / "out").string()));
    CAPTURE(name);
    CAPTURE(r.err);
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("config error") != std::string::npos);
    CHECK(r.err.find(needle) != std::string::npos);
  };

  expect_config_error("unknown_key.json",
                      R"({"model": {"schedule_file": ")" + sched +
                          R"("}, "lyapunov": {"table": [1.0, 2.0]}, "stages": [], "gamam": 1})",
                      "unknown key 'gamam'");
  expect_config_error("not_json.json", "drift: gamma 0.5", "not valid JSON");
  expect_config_error(
      "missing_schedule.json",
      R"({"model": {"schedule_file": "nowhere.json"}, "lyapunov": {"table": [1.0]}, "stages": []})",
      "cannot read file");
  expect_config_error(
      "wrong_table_length.json",
      R"({"model": {"schedule_file": ")" + sched +
          R"("}, "lyapunov": {"table": [1.0, 2.0, 3.0]}, "stages": []})",
      "2 states");
  expect_config_error(
      "two_model_sources.json",
      R"({"model": {"schedule_file": ")" + sched +
          R"(", "preset": "storage"}, "lyapunov": {"table": [1.0, 2.0]}, "stages": []})",
      "exactly one of");
  expect_config_error(
      "scan_window_too_short.json",
      R"({"model": {"schedule_file": ")" + sched +
          R"("}, "lyapunov": {"table": [1.0, 2.0]}, "stages": ["scans"],
          "construction": {"times": {"lo": 0, "hi": 3}}, "scans": {"p_max": 4}})",
      "at least 8");

  // Command-line misuse is a config error too.
  CHECK(run_cli("run").exit_code == 2);                    // missing --config
  CHECK(run_cli("--config x.json").exit_code == 2);        // missing subcommand
  CHECK(run_cli("frobnicate --config x.json").exit_code == 2);
  // Missing config file reported through the same path.
  CHECK(run_cli("run --config " + quoted((dir / "absent.json").string()))
            .exit_code == 2);
  // --help succeeds.
  CHECK(run_cli("--help").exit_code == 0);
}

TEST_CASE("full periodic pipeline reproduces the two-phase family") {
  const fs::path out = fresh_dir("periodic_full");
  const CliResult r = run_cli("run --config " +
                              quoted(kFixtures + "/periodic_full.json") +
                              " --out " + quoted(out.string()));
  REQUIRE(r.exit_code == 0);

  const json rep = json::parse(slurp(out / "report.json"));
  CHECK(stage_names(rep) ==
        std::vector<std::string>{"drift", "minorization", "constants",
                                 "construction", "rates", "scans"});
  for (const json& s : rep.at("stages")) CHECK(s.at("status") == "passed");

  // The family alternates between the two phase-locked stationary laws.
  // Exact values verified independently: even times (17/43, 26/43),
  // odd times (20.5/43, 22.5/43).
  const auto fam = parse_csv(slurp(out / "family.csv"));
  REQUIRE(fam.size() == 17);  // header + 8 times x 2 states
  CHECK(fam[0] == std::vector<std::string>{"n", "state", "weight"});
  for (std::size_t i = 1; i < fam.size(); ++i) {
    REQUIRE(fam[i].size() == 3);
    const long n = std::stol(fam[i][0]);
    const int x = std::stoi(fam[i][1]);
    const double w = std::stod(fam[i][2]);
    const double expect = (n % 2 == 0) ? (x == 0 ? 17.0 / 43.0 : 26.0 / 43.0)
                                       : (x == 0 ? 20.5 / 43.0 : 22.5 / 43.0);
    CHECK(std::abs(w - expect) <= 3e-9);
  }

  // Contraction constants: all rational for this fixture, derived by hand:
  // gamma* = 0.775, R = 1600/81, beta*R = 12/31, alpha = 71.3/74.
  auto kv = parse_kv(slurp(out / "constants.kv"));
  CHECK(std::stod(kv.at("constants.gamma_star")) == doctest::Approx(0.775).epsilon(1e-15));
  CHECK(std::stod(kv.at("constants.R")) ==
        doctest::Approx(1600.0 / 81.0).epsilon(1e-12));
  CHECK(kv.at("constants.n0") == "1");
  CHECK(std::stod(kv.at("constants.delta")) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(std::stod(kv.at("constants.alpha")) ==
        doctest::Approx(71.3 / 74.0).epsilon(1e-12));
  CHECK(std::stod(kv.at("constants.eta")) ==
        doctest::Approx(71.3 / 74.0).epsilon(1e-12));
  CHECK(std::stod(kv.at("constants.M3")) ==
        doctest::Approx(29.0 / 9.0).epsilon(1e-12));

  // Decay table: exact header, V_x = V(0) = 1 in every row, and the
  // observed column dominated by the certified bound.
  const std::string decay_text = slurp(out / "decay.csv");
  const auto decay = parse_csv(decay_text);
  REQUIRE(decay.size() == 62);  // header + m = 0..60
  CHECK(decay_text.rfind("m,observed_tv,theoretical_bound,V_x\n", 0) == 0);
  for (std::size_t i = 1; i < decay.size(); ++i) {
    REQUIRE(decay[i].size() == 4);
    CHECK(std::stol(decay[i][0]) == long(i) - 1);
    CHECK(std::stod(decay[i][1]) <= std::stod(decay[i][2]));
    CHECK(std::stod(decay[i][3]) == 1.0);
  }

  // Scan: exact period 2, and the defect table distinguishes it sharply.
  const json& scan = rep.at("stages")[5].at("summary");
  CHECK(scan.at("period") == 2);
  CHECK(scan.at("defects")[1].get<double>() <= 1e-9);
  CHECK(scan.at("defects")[0].get<double>() > 0.1);
}

TEST_CASE("report bundles are byte-identical across reruns") {
  const fs::path out = fresh_dir("rerun");
  const std::string cmd = "run --config " +
                          quoted(kFixtures + "/periodic_full.json") + " --out " +
                          quoted(out.string());
  REQUIRE(run_cli(cmd).exit_code == 0);
  const std::string report1 = slurp(out / "report.json");
  const std::string kv1 = slurp(out / "constants.kv");
  const std::string family1 = slurp(out / "family.csv");
  const std::string decay1 = slurp(out / "decay.csv");
  REQUIRE(run_cli(cmd).exit_code == 0);
  CHECK(slurp(out / "report.json") == report1);
  CHECK(slurp(out / "constants.kv") == kv1);
  CHECK(slurp(out / "family.csv") == family1);
  CHECK(slurp(out / "decay.csv") == decay1);

  // The same holds when the model itself is a Monte Carlo estimate: the
  // counter-based generator makes the whole bundle a pure function of the
  // config.
  const fs::path sout = fresh_dir("rerun_storage");
  const std::string scmd = "run --config " +
                           quoted(kFixtures + "/storage_full.json") + " --out " +
                           quoted(sout.string());
  REQUIRE(run_cli(scmd).exit_code == 0);
  const std::string sreport1 = slurp(sout / "report.json");
  const std::string sdecay1 = slurp(sout / "decay.csv");
  REQUIRE(run_cli(scmd).exit_code == 0);
  CHECK(slurp(sout / "report.json") == sreport1);
  CHECK(slurp(sout / "decay.csv") == sdecay1);
}

TEST_CASE("stage failure names the stage and keeps partial outputs") {
  const fs::path dir = fresh_dir("stage_failure");
  const fs::path cfg = dir / "minofail.json";
  spit(cfg, R"({
    "model": {"schedule_file": ")" +
                 kFixtures + R"(/periodic_schedule.json"},
    "lyapunov": {"table": [1.0, 2.0]},
    "stages": ["drift", "minorization"],
    "drift": {"gamma": 0.55, "C": 1.0, "window": {"lo": 1, "hi": 2}},
    "minorization": {"R": 4.0, "target_delta": 0.9, "n0_max": 1,
                     "window": {"lo": 3, "hi": 3}}
  })");
  const fs::path out = dir / "out";
  const CliResult r = run_cli("run --config " + quoted(cfg.string()) +
                              " --out " + quoted(out.string()));
  CHECK(r.exit_code == 1);
  // One diagnostic line naming the failing stage.
  CHECK(r.err.find("ergo: stage minorization failed:") != std::string::npos);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

  // The drift certificate earned before the failure is retained.
  auto kv = parse_kv(slurp(out / "constants.kv"));
  CHECK(kv.count("drift.certificate") == 1);
  for (const auto& [key, value] : kv) CHECK(key.rfind("minorization.", 0) != 0);

  const json rep = json::parse(slurp(out / "report.json"));
  CHECK(rep.at("exit_code") == 1);
  CHECK(rep.at("stages")[0].at("status") == "passed");
  CHECK(rep.at("stages")[1].at("status") == "failed");
  CHECK(rep.at("stages")[1].at("detail").get<std::string>().find("delta") !=
        std::string::npos);
}

TEST_CASE("unwritable output directory exits with the io code") {
  const fs::path dir = fresh_dir("unwritable");
  const fs::path blocker = dir / "blocker";
  spit(blocker, "occupied");
  const CliResult r = run_cli("run --config " +
                              quoted(kFixtures + "/periodic_drift.json") +
                              " --out " + quoted(blocker.string()));
  CHECK(r.exit_code == 3);
  CHECK(r.err.find("io error") != std::string::npos);
}

TEST_CASE("empty stage list produces a zero-stage summary") {
  const fs::path dir = fresh_dir("empty_stages");
  const fs::path cfg = dir / "empty.json";
  spit(cfg, R"({
    "model": {"schedule_file": ")" +
                 kFixtures + R"(/periodic_schedule.json"},
    "lyapunov": {"table": [1.0, 2.0]},
    "stages": []
  })");
  const fs::path out = dir / "out";
  const CliResult r = run_cli("run --config " + quoted(cfg.string()) +
                              " --out " + quoted(out.string()));
  CHECK(r.exit_code == 0);
  const json rep = json::parse(slurp(out / "report.json"));
  CHECK(rep.at("stages").size() == 0);
  CHECK(rep.at("exit_code") == 0);
  CHECK_FALSE(fs::exists(out / "constants.kv"));
}

TEST_CASE("storage preset full pipeline: dominated monotone decay") {
  const fs::path out = fresh_dir("storage_full");
  const CliResult r = run_cli("run --config " +
                              quoted(kFixtures + "/storage_full.json") +
                              " --out " + quoted(out.string()));
  REQUIRE(r.exit_code == 0);

  const auto decay = parse_csv(slurp(out / "decay.csv"));
  REQUIRE(decay.size() == 42);  // header + m = 0..40
  double prev = 2.0;
  for (std::size_t i = 1; i < decay.size(); ++i) {
    const double obs = std::stod(decay[i][1]);
    const double bound = std::stod(decay[i][2]);
    CHECK(obs <= bound);
    // One-step kernels contract total variation, and the schedule is
    // constant here, so the observed column must fall monotonically.
    CHECK(obs <= prev + 1e-15);
    prev = obs;
  }

  const json rep = json::parse(slurp(out / "report.json"));
  CHECK(rep.at("model").at("preset") == "storage");
  CHECK(rep.at("model").at("max_overflow_observed").get<double>() <= 0.001);
  for (const json& s : rep.at("stages")) {
    CHECK(s.at("status") == "passed");
    if (s.at("name") == "minorization")
      CHECK(s.at("summary").at("delta").get<double>() >= 0.5);
    if (s.at("name") == "scans") CHECK(s.at("summary").at("period") == 1);
    if (s.at("name") == "rates")
      CHECK(s.at("summary").at("bound_satisfied") == true);
  }
}

TEST_CASE("inline diffusion model: certify stages from the config") {
  const fs::path out = fresh_dir("inline_ou");
  const CliResult r = run_cli("run --config " +
                              quoted(kFixtures + "/inline_ou.json") + " --out " +
                              quoted(out.string()));
  REQUIRE(r.exit_code == 0);
  auto kv = parse_kv(slurp(out / "constants.kv"));
  CHECK(kv.count("drift.certificate") == 1);
  CHECK(kv.count("minorization.certificate") == 1);
  CHECK(std::stod(kv.at("minorization.delta")) >= 0.25);
  CHECK(std::stod(kv.at("drift.worst_slack")) > 0.0);
}

TEST_CASE("flag overrides land in the resolved config") {
  const fs::path out = fresh_dir("overrides");
  const CliResult r = run_cli(
      "run --config " + quoted(kFixtures + "/periodic_drift.json") + " --out " +
      quoted(out.string()) + " --seed 77 --tol 1e-7 --threads 2");
  REQUIRE(r.exit_code == 0);
  const json rep = json::parse(slurp(out / "report.json"));
  CHECK(rep.at("config").at("seed") == 77);
  CHECK(rep.at("config").at("tol").get<double>() == 1e-7);
  CHECK(rep.at("config").at("threads") == 2);
  CHECK(rep.at("config").at("out") == out.string());
}

TEST_CASE("subcommands select stages and pull their dependencies") {
  const std::string cfg = quoted(kFixtures + "/periodic_full.json");

  const fs::path certify_out = fresh_dir("sub_certify");
  REQUIRE(run_cli("certify --config " + cfg + " --out " +
                  quoted(certify_out.string()))
              .exit_code == 0);
  CHECK(stage_names(json::parse(slurp(certify_out / "report.json"))) ==
        std::vector<std::string>{"drift", "minorization"});

  const fs::path constants_out = fresh_dir("sub_constants");
  REQUIRE(run_cli("constants --config " + cfg + " --out " +
                  quoted(constants_out.string()))
              .exit_code == 0);
  CHECK(stage_names(json::parse(slurp(constants_out / "report.json"))) ==
        std::vector<std::string>{"drift", "constants"});

  const fs::path rates_out = fresh_dir("sub_rates");
  REQUIRE(run_cli("rates --config " + cfg + " --out " +
                  quoted(rates_out.string()))
              .exit_code == 0);
  CHECK(stage_names(json::parse(slurp(rates_out / "report.json"))) ==
        std::vector<std::string>{"drift", "constants", "construction", "rates"});

  const fs::path scan_out = fresh_dir("sub_scan");
  REQUIRE(run_cli("scan --config " + cfg + " --out " +
                  quoted(scan_out.string()))
              .exit_code == 0);
  CHECK(stage_names(json::parse(slurp(scan_out / "report.json"))) ==
        std::vector<std::string>{"construction", "scans"});
}

TEST_SUITE_END();
