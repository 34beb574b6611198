#include "cstwsf/serialize.hpp"

#include "cstwsf/error.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace cstwsf {

using nlohmann::json;

namespace {

json vector_to_json(const Vector &v) {
	json out = json::array();
	for (Index i = 0; i < v.size(); ++i) {
		out.push_back(v[i]);
	}
	return out;
}

Vector vector_from_json(const json &j) {
	Vector v(static_cast<Index>(j.size()));
	for (std::size_t i = 0; i < j.size(); ++i) {
		v[static_cast<Index>(i)] = j[i].get<double>();
	}
	return v;
}

double parse_double(std::string_view s) {
	double v = 0.0;
	auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
	if (ec != std::errc() || ptr != s.data() + s.size()) {
		throw Error(ErrorCode::MalformedInput, fmt::format("cannot parse number '{}'", s));
	}
	return v;
}

} // namespace

json layout_to_json(const BlockLayout &layout) {
	return json{{"orders", layout.orders()}, {"n_max", layout.n_max()}};
}

BlockLayout layout_from_json(const json &j) {
	return BlockLayout(j.at("orders").get<std::vector<int>>(), j.at("n_max").get<int>());
}

json coefficients_to_json(const SparseCoefficients &c) {
	json j;
	j["target"] = c.target;
	j["orders"] = c.layout.orders();
	j["n_max"] = c.layout.n_max();
	j["support"] = c.support;
	j["values"] = vector_to_json(c.values);
	j["intercept"] = c.intercept;
	j["trained_at_hour"] = c.trained_at_hour;
	j["residual_norms"] = c.diagnostics.residual_norms;
	j["stop_reason"] = c.diagnostics.stop_reason;
	j["ridge_used"] = c.diagnostics.ridge_used;
	j["skipped_blocks"] = c.diagnostics.skipped_blocks;
	return j;
}

SparseCoefficients coefficients_from_json(const json &j) {
	try {
		BlockLayout layout(j.at("orders").get<std::vector<int>>(), j.at("n_max").get<int>());
		SparseCoefficients c{layout,
		                     j.at("support").get<std::vector<Index>>(),
		                     vector_from_json(j.at("values")),
		                     j.at("target").get<Index>(),
		                     Vector::Ones(layout.width()),
		                     j.at("trained_at_hour").get<Index>(),
		                     {}};
		if (c.values.size() != layout.width()) {
			throw Error(ErrorCode::MalformedInput, "coefficient values do not match layout width");
		}
		c.intercept = j.value("intercept", 0.0);
		c.diagnostics.residual_norms = j.value("residual_norms", std::vector<double>{});
		c.diagnostics.stop_reason = j.value("stop_reason", std::string{});
		c.diagnostics.ridge_used = j.value("ridge_used", false);
		c.diagnostics.skipped_blocks = j.value("skipped_blocks", std::vector<Index>{});
		return c;
	} catch (const json::exception &e) {
		throw Error(ErrorCode::MalformedInput, fmt::format("bad coefficients JSON: {}", e.what()));
	}
}

json ground_truth_to_json(const PlantedModel &model) {
	json j;
	j["layout"] = layout_to_json(model.layout);
	j["noise_sigma"] = model.noise_sigma;
	j["seed"] = model.seed;
	j["baseline_level"] = model.baseline_level;
	j["spectral_radius"] = model.spectral_radius();
	json targets = json::array();
	for (const auto &c : model.coefficients) {
		targets.push_back(coefficients_to_json(c));
	}
	j["coefficients"] = std::move(targets);
	return j;
}

void write_run_csv(const ForecastRun &run, std::ostream &out) {
	std::string buf = "hour,actual,predicted,method\n";
	for (const auto &p : run.points) {
		fmt::format_to(std::back_inserter(buf), "{},{},{},{}\n", p.hour, p.actual, p.predicted, run.method);
	}
	out << buf;
}

ForecastRun read_run_csv(std::istream &in) {
	ForecastRun run;
	std::string line;
	if (!std::getline(in, line) || line != "hour,actual,predicted,method") {
		throw Error(ErrorCode::MalformedInput, "run CSV must start with 'hour,actual,predicted,method'");
	}
	while (std::getline(in, line)) {
		if (line.empty()) {
			continue;
		}
		std::vector<std::string> fields;
		std::stringstream ss(line);
		std::string field;
		while (std::getline(ss, field, ',')) {
			fields.push_back(field);
		}
		if (fields.size() != 4) {
			throw Error(ErrorCode::MalformedInput, fmt::format("bad run CSV row '{}'", line));
		}
		if (run.method.empty()) {
			run.method = fields[3];
		} else if (run.method != fields[3]) {
			throw Error(ErrorCode::MalformedInput, "run CSV mixes methods");
		}
		ForecastPoint p;
		p.hour = static_cast<Index>(parse_double(fields[0]));
		p.actual = parse_double(fields[1]);
		p.predicted = parse_double(fields[2]);
		run.points.push_back(p);
	}
	return run;
}

json run_to_json(const ForecastRun &run) {
	json j;
	j["method"] = run.method;
	j["target"] = run.target;
	j["split"] = run.split;
	json points = json::array();
	for (const auto &p : run.points) {
		points.push_back({{"hour", p.hour}, {"step", p.step}, {"actual", p.actual}, {"predicted", p.predicted}});
	}
	j["points"] = std::move(points);
	j["retrain_points"] = run.retrain_points;
	json log = json::array();
	for (const auto &c : run.coefficients_log) {
		log.push_back(coefficients_to_json(c));
	}
	j["coefficients_log"] = std::move(log);
	j["notes"] = run.notes;
	return j;
}

ForecastRun run_from_json(const json &j) {
	try {
		ForecastRun run;
		run.method = j.at("method").get<std::string>();
		run.target = j.at("target").get<Index>();
		run.split = j.at("split").get<Index>();
		for (const auto &p : j.at("points")) {
			run.points.push_back({p.at("hour").get<Index>(), p.at("step").get<int>(), p.at("actual").get<double>(),
			                      p.at("predicted").get<double>()});
		}
		run.retrain_points = j.at("retrain_points").get<std::vector<Index>>();
		for (const auto &c : j.at("coefficients_log")) {
			run.coefficients_log.push_back(coefficients_from_json(c));
		}
		run.notes = j.value("notes", std::vector<std::string>{});
		return run;
	} catch (const json::exception &e) {
		throw Error(ErrorCode::MalformedInput, fmt::format("bad run JSON: {}", e.what()));
	}
}

void write_report_csv(const EvaluationReport &report, std::ostream &out) {
	std::string buf = "method,mae_ms,rmse_ms,nrmse_pct\n";
	for (const auto &r : report.rows) {
		fmt::format_to(std::back_inserter(buf), "{},{},{},{}\n", r.method, r.mae, r.rmse, r.nrmse);
	}
	out << buf;
}

json report_to_json(const EvaluationReport &report) {
	json j;
	j["target"] = report.target;
	j["span"] = {report.span_begin, report.span_end};
	j["nrmse_range"] = {{"min", report.observed_min},
	                    {"max", report.observed_max},
	                    {"basis", "observed target values over the validation span"}};
	json rows = json::array();
	for (const auto &r : report.rows) {
		json steps = json::array();
		for (const auto &s : r.per_step) {
			steps.push_back({{"step", s.step}, {"count", s.count}, {"mae_ms", s.mae}, {"rmse_ms", s.rmse}});
		}
		rows.push_back({{"method", r.method},
		                {"mae_ms", r.mae},
		                {"rmse_ms", r.rmse},
		                {"nrmse_pct", r.nrmse},
		                {"per_step", std::move(steps)}});
	}
	j["rows"] = std::move(rows);
	j["notes"] = report.notes;
	return j;
}

void write_text(const std::filesystem::path &path, const std::string &text) {
	std::ofstream out(path, std::ios::binary);
	if (!out) {
		throw Error(ErrorCode::IoError, fmt::format("cannot write {}", path.string()));
	}
	out << text;
	if (!out) {
		throw Error(ErrorCode::IoError, fmt::format("write failed for {}", path.string()));
	}
}

std::string read_text(const std::filesystem::path &path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) {
		throw Error(ErrorCode::IoError, fmt::format("cannot open {}", path.string()));
	}
	std::ostringstream ss;
	ss << in.rdbuf();
	return ss.str();
}

} // namespace cstwsf
