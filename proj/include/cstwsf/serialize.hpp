#pragma once

#include "cstwsf/forecast.hpp"
#include "cstwsf/metrics.hpp"
#include "cstwsf/solver.hpp"
#include "cstwsf/synth.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>

namespace cstwsf {

/// {target, orders, n_max, support, values, trained_at_hour, ...diagnostics}
nlohmann::json coefficients_to_json(const SparseCoefficients &c);
SparseCoefficients coefficients_from_json(const nlohmann::json &j);

nlohmann::json layout_to_json(const BlockLayout &layout);
BlockLayout layout_from_json(const nlohmann::json &j);

/// Planted supports and coefficients for every target.
nlohmann::json ground_truth_to_json(const PlantedModel &model);

/// Columns `hour,actual,predicted,method`.
void write_run_csv(const ForecastRun &run, std::ostream &out);
ForecastRun read_run_csv(std::istream &in);
nlohmann::json run_to_json(const ForecastRun &run);
ForecastRun run_from_json(const nlohmann::json &j);

/// Columns `method,mae_ms,rmse_ms,nrmse_pct`.
void write_report_csv(const EvaluationReport &report, std::ostream &out);
nlohmann::json report_to_json(const EvaluationReport &report);

/// Writes text to a file in binary mode; throws Error(IoError) on failure.
void write_text(const std::filesystem::path &path, const std::string &text);
std::string read_text(const std::filesystem::path &path);

} // namespace cstwsf
