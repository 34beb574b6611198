#pragma once

#include "cstwsf/forecast.hpp"
#include "cstwsf/metrics.hpp"
#include "cstwsf/orders.hpp"
#include "cstwsf/solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cstwsf::cli {

inline constexpr const char *kToolVersion = "0.1.0";
inline constexpr int kConfigSchemaVersion = 1;

/// Effective settings of one command invocation. Built from defaults, then the
/// JSON config file, then command-line flags.
struct RunOptions {
	std::string data;
	std::string target;
	std::optional<Index> split_hour;
	int horizon = 6;
	Index window = 720;
	int gap_limit = 3;
	std::vector<std::string> methods{"persistence", "ar(3)", "ls_mar(3)", "cst_uniform(3)", "cst_nonuniform"};
	SolverConfig solver;
	bool intercept = true;
	int n_max = 6;
	double tau = 0.4;
	bool tune_orders = false;
	std::vector<OrderCandidate> grid = default_order_grid();
	std::uint64_t seed = 0;

	// synth
	Index stations = 20;
	std::vector<int> synth_orders{3};
	Index blocks = 3;
	double sigma = 0.5;
	Index hours = 1080;
	Index burn_in = 200;
	double baseline = 8.0;

	// evaluate
	std::vector<std::string> runs;

	// execution only; excluded from the manifest snapshot
	std::string out = "out";
	int jobs = 1;
	bool record_timings = false;
	std::string config_path;
};

/// Applies a config document (schema_version 1) on top of `opts`. Unknown
/// keys and type mismatches throw Error(ConfigError).
void apply_config(RunOptions &opts, const nlohmann::json &config);
/// Config snapshot recorded in manifests.
nlohmann::json config_snapshot(const RunOptions &opts);

struct CompareResult {
	EvaluationReport report;
	std::vector<ForecastRun> runs;
	std::vector<BlockLayout> nonuniform_layouts;
};

/// Runs every requested method through the same backtest and writes
/// report.csv, report.json, runs/<method>.{csv,json},
/// coeffs/<method>/<cycle>.json (sparse methods) and manifest.json into
/// `opts.out`.
CompareResult run_compare(const RunOptions &opts);

std::string sha256_hex(const std::string &bytes);

/// Entry point shared by the executable and the tests. Returns the process
/// exit code: 0 success, 1 runtime failure, 2 usage error. Errors are written
/// to `err` as a single line `E_<CODE>: <message>`.
int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace cstwsf::cli
