#include "cstwsf/cli.hpp"

#include "cstwsf/dataset.hpp"
#include "cstwsf/error.hpp"
#include "cstwsf/serialize.hpp"
#include "cstwsf/synth.hpp"
#include "parallel.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <openssl/evp.h>

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

namespace cstwsf::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string &message) { throw Error(ErrorCode::ConfigError, message); }

class UsageError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

template <typename T>
T get_as(const json &value, const std::string &key) {
	try {
		return value.get<T>();
	} catch (const json::exception &) {
		config_error(fmt::format("config key '{}' has the wrong type", key));
	}
}

template <typename Fn>
void for_each_key(const json &object, const std::string &scope, const std::map<std::string, Fn> &handlers) {
	if (!object.is_object()) {
		config_error(fmt::format("config section '{}' must be an object", scope));
	}
	for (const auto &[key, value] : object.items()) {
		const auto it = handlers.find(key);
		if (it == handlers.end()) {
			config_error(fmt::format("unknown config key '{}{}'", scope.empty() ? "" : scope + ".", key));
		}
		it->second(value);
	}
}

using Handler = std::function<void(const json &)>;

class Phases {
public:
	explicit Phases(bool enabled) : enabled_(enabled) {}
	template <typename Fn>
	auto time(const std::string &name, Fn &&fn) {
		const auto t0 = std::chrono::steady_clock::now();
		if constexpr (std::is_void_v<decltype(fn())>) {
			fn();
			record(name, t0);
		} else {
			auto result = fn();
			record(name, t0);
			return result;
		}
	}
	bool enabled() const { return enabled_; }
	json to_json() const { return timings_; }

private:
	void record(const std::string &name, std::chrono::steady_clock::time_point t0) {
		if (enabled_) {
			timings_[name] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
		}
	}
	bool enabled_;
	json timings_ = json::object();
};

/// Collects outputs of one command and writes manifest.json last.
class OutputTree {
public:
	OutputTree(fs::path root, std::string command) : root_(std::move(root)), command_(std::move(command)) {
		fs::create_directories(root_);
	}

	void write(const fs::path &relative, const std::string &text) {
		const auto full = root_ / relative;
		fs::create_directories(full.parent_path());
		write_text(full, text);
		outputs_[relative.generic_string()] = sha256_hex(text);
	}

	void write_json(const fs::path &relative, json doc) {
		doc["manifest"] = "manifest.json";
		write(relative, doc.dump(2) + "\n");
	}

	void add_input(const std::string &path) {
		if (path.empty() || !fs::exists(path)) {
			return;
		}
		inputs_.push_back({{"path", path}, {"sha256", sha256_hex(read_text(path))}});
	}

	void finish(const RunOptions &opts, const Phases &phases) {
		json manifest;
		manifest["schema_version"] = kConfigSchemaVersion;
		manifest["tool"] = "cstwsf";
		manifest["tool_version"] = kToolVersion;
		manifest["command"] = command_;
		manifest["config"] = config_snapshot(opts);
		manifest["inputs"] = inputs_;
		manifest["seed"] = opts.seed;
		json outputs = json::array();
		for (const auto &[path, digest] : outputs_) {
			outputs.push_back({{"path", path}, {"sha256", digest}});
		}
		manifest["outputs"] = std::move(outputs);
		if (phases.enabled()) {
			manifest["wall_clock_ms"] = phases.to_json();
		}
		write_text(root_ / "manifest.json", manifest.dump(2) + "\n");
	}

private:
	fs::path root_;
	std::string command_;
	json inputs_ = json::array();
	std::map<std::string, std::string> outputs_;
};

void add_dataset_inputs(OutputTree &tree, const RunOptions &opts) {
	tree.add_input(opts.data);
	tree.add_input(opts.data + ".meta.json");
	tree.add_input(opts.config_path);
}

Index resolve_split(const RunOptions &opts, const Dataset &ds) {
	const Index split = opts.split_hour.value_or(opts.window);
	if (split <= 0 || split >= ds.num_hours()) {
		throw Error(ErrorCode::InvalidArgument,
		            fmt::format("split hour {} outside the dataset (T={})", split, ds.num_hours()));
	}
	return split;
}

Index resolve_target(const RunOptions &opts, const Dataset &ds) {
	if (opts.target.empty()) {
		throw Error(ErrorCode::InvalidArgument, "missing target station id");
	}
	return ds.station_index(opts.target);
}

ForecastConfig base_forecast_config(const RunOptions &opts) {
	ForecastConfig cfg;
	cfg.horizon = opts.horizon;
	cfg.window = opts.window;
	cfg.solver = opts.solver;
	cfg.intercept = opts.intercept;
	cfg.jobs = 1;
	return cfg;
}

// Validation span used for order tuning, carved from the end of the
// training portion so the evaluation span is never seen.
Index tuning_span(Index split, int horizon) {
	return std::max<Index>(horizon, (split / 4) / horizon * horizon);
}

struct ResolvedNonuniform {
	std::vector<BlockLayout> layouts;
	json record;
};

ResolvedNonuniform resolve_nonuniform(const RunOptions &opts, const Dataset &ds, Index target, Index split) {
	ResolvedNonuniform out;
	OrderCandidate rule{opts.n_max, opts.tau};
	out.record["tuned"] = opts.tune_orders;
	if (opts.tune_orders) {
		const Index span = tuning_span(split, opts.horizon);
		if (split - span < 2) {
			throw Error(ErrorCode::InsufficientData, "training portion too short for order tuning");
		}
		ForecastConfig cfg = base_forecast_config(opts);
		cfg.window = std::min(opts.window, split - span);
		cfg.jobs = opts.jobs;
		const auto tuned = tune_orders(slice(ds, 0, split - span), slice(ds, split - span, split), target, opts.grid, cfg);
		rule = tuned.choice;
		json candidates = json::array();
		for (std::size_t g = 0; g < opts.grid.size(); ++g) {
			candidates.push_back({{"n_max", opts.grid[g].n_max},
			                      {"tau", opts.grid[g].tau},
			                      {"validation_rmse_ms", tuned.candidate_rmse[g]}});
		}
		out.record["tuning"] = {{"span", {split - span, split}}, {"window", cfg.window}, {"candidates", candidates}};
	}
	out.layouts = select_layouts(ds.values().leftCols(split), rule.n_max, rule.tau);
	out.record["n_max"] = rule.n_max;
	out.record["tau"] = rule.tau;
	json layouts = json::array();
	for (Index i = 0; i < ds.num_stations(); ++i) {
		auto entry = layout_to_json(out.layouts[static_cast<std::size_t>(i)]);
		entry["station"] = ds.stations()[static_cast<std::size_t>(i)].id;
		layouts.push_back(std::move(entry));
	}
	out.record["layouts"] = std::move(layouts);
	return out;
}

MethodSpec resolve_method(const std::string &name, const std::vector<BlockLayout> &layouts) {
	auto spec = parse_method(name);
	if (std::holds_alternative<method::CstNonuniform>(spec)) {
		spec = method::CstNonuniform{layouts};
	}
	return spec;
}

bool is_sparse(const MethodSpec &spec) {
	return std::holds_alternative<method::CstUniform>(spec) || std::holds_alternative<method::CstNonuniform>(spec);
}

void write_run(OutputTree &tree, const ForecastRun &run, const MethodSpec &spec) {
	const auto slug = method_slug(run.method);
	std::ostringstream csv;
	write_run_csv(run, csv);
	tree.write(fs::path("runs") / (slug + ".csv"), csv.str());
	tree.write_json(fs::path("runs") / (slug + ".json"), run_to_json(run));
	if (is_sparse(spec)) {
		for (std::size_t k = 0; k < run.coefficients_log.size(); ++k) {
			tree.write_json(fs::path("coeffs") / slug / fmt::format("{:04d}.json", k),
			                coefficients_to_json(run.coefficients_log[k]));
		}
	}
}

void write_report(OutputTree &tree, const EvaluationReport &report) {
	std::ostringstream csv;
	write_report_csv(report, csv);
	tree.write("report.csv", csv.str());
	tree.write_json("report.json", report_to_json(report));
}

bool needs_nonuniform(const std::vector<std::string> &methods) {
	return std::find(methods.begin(), methods.end(), "cst_nonuniform") != methods.end();
}

// ---- commands -------------------------------------------------------------

void cmd_ingest(const RunOptions &opts, std::ostream &out) {
	Phases phases(opts.record_timings);
	const auto ds = phases.time("ingest", [&] { return ingest_csv(opts.data, opts.gap_limit); });
	OutputTree tree(opts.out, "ingest");
	add_dataset_inputs(tree, opts);
	write_dataset(ds, fs::path(opts.out) / "dataset.csv");
	tree.write("dataset.csv", read_text(fs::path(opts.out) / "dataset.csv"));
	tree.write("dataset.csv.meta.json", read_text(fs::path(opts.out) / "dataset.csv.meta.json"));
	tree.finish(opts, phases);
	out << fmt::format("ingested {} stations x {} hours, {} filled cells\n", ds.num_stations(), ds.num_hours(),
	                   ds.filled_mask().count());
}

void cmd_synth(const RunOptions &opts, std::ostream &out) {
	Phases phases(opts.record_timings);
	std::vector<int> orders = opts.synth_orders;
	if (orders.size() == 1) {
		orders.assign(static_cast<std::size_t>(opts.stations), orders.front());
	}
	if (static_cast<Index>(orders.size()) != opts.stations) {
		throw Error(ErrorCode::InvalidArgument, "synth orders must give one order or one per station");
	}
	const int n_max = *std::max_element(orders.begin(), orders.end());
	const BlockLayout layout(orders, n_max);
	const auto model = phases.time("plant", [&] {
		return plant(opts.stations, layout, opts.blocks, opts.seed, opts.sigma, opts.baseline);
	});
	const auto sim = phases.time("simulate", [&] { return simulate(model, opts.hours, opts.burn_in); });

	OutputTree tree(opts.out, "synth");
	tree.add_input(opts.config_path);
	write_dataset(sim.data, fs::path(opts.out) / "dataset.csv");
	tree.write("dataset.csv", read_text(fs::path(opts.out) / "dataset.csv"));
	tree.write("dataset.csv.meta.json", read_text(fs::path(opts.out) / "dataset.csv.meta.json"));
	auto truth = ground_truth_to_json(model);
	truth["clipping_rate"] = sim.clipping_rate;
	truth["station_ids"] = json::array();
	for (const auto &s : sim.data.stations()) {
		truth["station_ids"].push_back(s.id);
	}
	tree.write_json("ground_truth.json", std::move(truth));
	tree.finish(opts, phases);
	out << fmt::format("simulated {} stations x {} hours (clipping {:.4f}%)\n", opts.stations, opts.hours,
	                   100.0 * sim.clipping_rate);
}

void cmd_train(const RunOptions &opts, std::ostream &out) {
	Phases phases(opts.record_timings);
	const auto ds = phases.time("load", [&] { return read_dataset(opts.data, opts.gap_limit); });
	const Index target = resolve_target(opts, ds);
	if (opts.methods.size() != 1) {
		throw UsageError("train takes exactly one --method");
	}
	const Index end = opts.split_hour.value_or(ds.num_hours());
	if (end <= 0 || end > ds.num_hours()) {
		throw Error(ErrorCode::InvalidArgument, "split hour outside the dataset");
	}
	const Index window = std::min(opts.window, end);
	std::vector<BlockLayout> layouts;
	json orders_record;
	if (opts.methods.front() == "cst_nonuniform") {
		auto resolved = resolve_nonuniform(opts, ds, target, end);
		layouts = std::move(resolved.layouts);
		orders_record = std::move(resolved.record);
	}
	const auto spec = resolve_method(opts.methods.front(), layouts);
	const auto forecaster = make_forecaster(spec, opts.solver, ds.num_stations(), opts.intercept);
	const auto model = phases.time(
	    "fit", [&] { return forecaster->fit(ds.values().middleCols(end - window, window), end, opts.jobs); });

	OutputTree tree(opts.out, "train");
	add_dataset_inputs(tree, opts);
	json doc;
	doc["method"] = forecaster->name();
	doc["target_id"] = opts.target;
	doc["target"] = coefficients_to_json(model.stations[static_cast<std::size_t>(target)]);
	json stations = json::array();
	for (const auto &c : model.stations) {
		stations.push_back(coefficients_to_json(c));
	}
	doc["stations"] = std::move(stations);
	doc["notes"] = model.notes;
	if (!orders_record.is_null()) {
		doc["orders"] = std::move(orders_record);
	}
	tree.write_json("coefficients.json", std::move(doc));
	tree.finish(opts, phases);
	const auto &c = model.stations[static_cast<std::size_t>(target)];
	std::string support;
	for (const auto p : c.support) {
		support += (support.empty() ? "" : ",") + ds.stations()[static_cast<std::size_t>(p)].id;
	}
	out << fmt::format("{} for {}: support [{}]\n", forecaster->name(), opts.target, support);
}

void cmd_forecast(const RunOptions &opts, std::ostream &out) {
	Phases phases(opts.record_timings);
	const auto ds = phases.time("load", [&] { return read_dataset(opts.data, opts.gap_limit); });
	const Index target = resolve_target(opts, ds);
	if (opts.methods.size() != 1) {
		throw UsageError("forecast takes exactly one --method");
	}
	const Index split = resolve_split(opts, ds);
	std::vector<BlockLayout> layouts;
	json orders_record;
	if (opts.methods.front() == "cst_nonuniform") {
		auto resolved = resolve_nonuniform(opts, ds, target, split);
		layouts = std::move(resolved.layouts);
		orders_record = std::move(resolved.record);
	}
	ForecastConfig cfg = base_forecast_config(opts);
	cfg.method = resolve_method(opts.methods.front(), layouts);
	cfg.jobs = opts.jobs;
	const auto run = phases.time("backtest", [&] { return backtest(ds, target, split, cfg); });

	OutputTree tree(opts.out, "forecast");
	add_dataset_inputs(tree, opts);
	write_run(tree, run, cfg.method);
	if (!orders_record.is_null()) {
		tree.write_json("orders.json", std::move(orders_record));
	}
	tree.finish(opts, phases);
	out << fmt::format("{}: {} predictions over hours [{}, {})\n", run.method, run.points.size(), split,
	                   ds.num_hours());
}

void cmd_evaluate(const RunOptions &opts, std::ostream &out) {
	Phases phases(opts.record_timings);
	if (opts.runs.empty()) {
		throw UsageError("evaluate needs --runs");
	}
	std::vector<ForecastRun> runs;
	for (const auto &path : opts.runs) {
		if (fs::path(path).extension() == ".json") {
			json doc;
			try {
				doc = json::parse(read_text(path));
			} catch (const json::exception &e) {
				throw Error(ErrorCode::MalformedInput, fmt::format("{}: {}", path, e.what()));
			}
			runs.push_back(run_from_json(doc));
		} else {
			std::istringstream in(read_text(path));
			auto run = read_run_csv(in);
			// Cycle steps follow from the split and horizon of the producing run.
			const Index split = opts.split_hour.value_or(run.points.empty() ? 0 : run.points.front().hour);
			for (auto &p : run.points) {
				p.step = static_cast<int>((p.hour - split) % opts.horizon) + 1;
			}
			runs.push_back(std::move(run));
		}
	}
	const auto report = phases.time("evaluate", [&] { return evaluate_runs(runs, opts.target); });
	OutputTree tree(opts.out, "evaluate");
	for (const auto &path : opts.runs) {
		tree.add_input(path);
	}
	tree.add_input(opts.config_path);
	write_report(tree, report);
	tree.finish(opts, phases);
	std::ostringstream table;
	write_report_csv(report, table);
	out << table.str();
}

void cmd_compare(const RunOptions &opts, std::ostream &out) {
	const auto result = run_compare(opts);
	std::ostringstream table;
	write_report_csv(result.report, table);
	out << table.str();
}

// ---- flag plumbing --------------------------------------------------------

using Override = std::function<void(RunOptions &)>;

template <typename T, typename Setter>
CLI::Option *bind_option(CLI::App *cmd, std::vector<Override> &overrides, const std::string &name,
                  const std::string &description, Setter setter) {
	auto storage = std::make_shared<T>();
	auto *option = cmd->add_option(name, *storage, description);
	overrides.push_back([option, storage, setter](RunOptions &o) {
		if (option->count() > 0) {
			setter(o, *storage);
		}
	});
	return option;
}

std::vector<std::string> split_list(const std::string &text) {
	std::vector<std::string> items;
	std::string item;
	std::istringstream in(text);
	while (std::getline(in, item, ',')) {
		if (!item.empty()) {
			items.push_back(item);
		}
	}
	return items;
}

std::string one_line(std::string text) {
	for (auto &c : text) {
		if (c == '\n' || c == '\r') {
			c = ' ';
		}
	}
	return text;
}

} // namespace

std::string sha256_hex(const std::string &bytes) {
	unsigned char digest[EVP_MAX_MD_SIZE];
	unsigned int length = 0;
	if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
		throw Error(ErrorCode::IoError, "sha256 digest failed");
	}
	std::string hex;
	for (unsigned int i = 0; i < length; ++i) {
		hex += fmt::format("{:02x}", digest[i]);
	}
	return hex;
}

void apply_config(RunOptions &opts, const json &config) {
	if (!config.is_object()) {
		config_error("config must be a JSON object");
	}
	if (!config.contains("schema_version") || !config["schema_version"].is_number_integer() ||
	    config["schema_version"].get<int>() != kConfigSchemaVersion) {
		config_error(fmt::format("config schema_version must be {}", kConfigSchemaVersion));
	}
	const std::map<std::string, Handler> solver_keys{
	    {"k_max", [&](const json &v) { opts.solver.k_max = get_as<int>(v, "solver.k_max"); }},
	    {"residual_tol", [&](const json &v) { opts.solver.residual_tol = get_as<double>(v, "solver.residual_tol"); }},
	    {"normalize_columns",
	     [&](const json &v) { opts.solver.normalize_columns = get_as<bool>(v, "solver.normalize_columns"); }},
	    {"ridge", [&](const json &v) { opts.solver.ridge = get_as<double>(v, "solver.ridge"); }},
	    {"min_gain", [&](const json &v) { opts.solver.min_gain = get_as<double>(v, "solver.min_gain"); }},
	};
	const std::map<std::string, Handler> order_keys{
	    {"n_max", [&](const json &v) { opts.n_max = get_as<int>(v, "orders.n_max"); }},
	    {"tau", [&](const json &v) { opts.tau = get_as<double>(v, "orders.tau"); }},
	    {"tune", [&](const json &v) { opts.tune_orders = get_as<bool>(v, "orders.tune"); }},
	    {"grid",
	     [&](const json &v) {
		     if (!v.is_array() || v.empty()) {
			     config_error("orders.grid must be a nonempty array");
		     }
		     opts.grid.clear();
		     for (const auto &entry : v) {
			     OrderCandidate c;
			     for_each_key<Handler>(entry, "orders.grid[]",
			                           {{"n_max", [&](const json &x) { c.n_max = get_as<int>(x, "orders.grid.n_max"); }},
			                            {"tau", [&](const json &x) { c.tau = get_as<double>(x, "orders.grid.tau"); }}});
			     opts.grid.push_back(c);
		     }
	     }},
	};
	const std::map<std::string, Handler> synth_keys{
	    {"stations", [&](const json &v) { opts.stations = get_as<Index>(v, "synth.stations"); }},
	    {"orders", [&](const json &v) { opts.synth_orders = get_as<std::vector<int>>(v, "synth.orders"); }},
	    {"blocks", [&](const json &v) { opts.blocks = get_as<Index>(v, "synth.blocks"); }},
	    {"sigma", [&](const json &v) { opts.sigma = get_as<double>(v, "synth.sigma"); }},
	    {"hours", [&](const json &v) { opts.hours = get_as<Index>(v, "synth.hours"); }},
	    {"burn_in", [&](const json &v) { opts.burn_in = get_as<Index>(v, "synth.burn_in"); }},
	    {"baseline", [&](const json &v) { opts.baseline = get_as<double>(v, "synth.baseline"); }},
	};
	const std::map<std::string, Handler> top_keys{
	    {"schema_version", [](const json &) {}},
	    {"data", [&](const json &v) { opts.data = get_as<std::string>(v, "data"); }},
	    {"target", [&](const json &v) { opts.target = get_as<std::string>(v, "target"); }},
	    {"split_hour",
	     [&](const json &v) {
		     if (v.is_null()) {
			     opts.split_hour.reset();
		     } else {
			     opts.split_hour = get_as<Index>(v, "split_hour");
		     }
	     }},
	    {"horizon", [&](const json &v) { opts.horizon = get_as<int>(v, "horizon"); }},
	    {"window", [&](const json &v) { opts.window = get_as<Index>(v, "window"); }},
	    {"gap_limit", [&](const json &v) { opts.gap_limit = get_as<int>(v, "gap_limit"); }},
	    {"intercept", [&](const json &v) { opts.intercept = get_as<bool>(v, "intercept"); }},
	    {"methods", [&](const json &v) { opts.methods = get_as<std::vector<std::string>>(v, "methods"); }},
	    {"seed", [&](const json &v) { opts.seed = get_as<std::uint64_t>(v, "seed"); }},
	    {"runs", [&](const json &v) { opts.runs = get_as<std::vector<std::string>>(v, "runs"); }},
	    {"solver", [&](const json &v) { for_each_key(v, "solver", solver_keys); }},
	    {"orders", [&](const json &v) { for_each_key(v, "orders", order_keys); }},
	    {"synth", [&](const json &v) { for_each_key(v, "synth", synth_keys); }},
	};
	for_each_key(config, "", top_keys);
}

json config_snapshot(const RunOptions &opts) {
	json grid = json::array();
	for (const auto &c : opts.grid) {
		grid.push_back({{"n_max", c.n_max}, {"tau", c.tau}});
	}
	return json{
	    {"schema_version", kConfigSchemaVersion},
	    {"data", opts.data},
	    {"target", opts.target},
	    {"split_hour", opts.split_hour ? json(*opts.split_hour) : json(nullptr)},
	    {"horizon", opts.horizon},
	    {"window", opts.window},
	    {"gap_limit", opts.gap_limit},
	    {"intercept", opts.intercept},
	    {"methods", opts.methods},
	    {"seed", opts.seed},
	    {"runs", opts.runs},
	    {"solver",
	     {{"k_max", opts.solver.k_max},
	      {"residual_tol", opts.solver.residual_tol},
	      {"normalize_columns", opts.solver.normalize_columns},
	      {"ridge", opts.solver.ridge},
	      {"min_gain", opts.solver.min_gain}}},
	    {"orders", {{"n_max", opts.n_max}, {"tau", opts.tau}, {"tune", opts.tune_orders}, {"grid", grid}}},
	    {"synth",
	     {{"stations", opts.stations},
	      {"orders", opts.synth_orders},
	      {"blocks", opts.blocks},
	      {"sigma", opts.sigma},
	      {"hours", opts.hours},
	      {"burn_in", opts.burn_in},
	      {"baseline", opts.baseline}}},
	};
}

CompareResult run_compare(const RunOptions &opts) {
	Phases phases(opts.record_timings);
	if (opts.methods.empty()) {
		throw UsageError("no methods requested");
	}
	std::vector<MethodSpec> parsed;
	for (const auto &name : opts.methods) {
		parsed.push_back(parse_method(name));
	}
	const auto ds = phases.time("load", [&] { return read_dataset(opts.data, opts.gap_limit); });
	const Index target = resolve_target(opts, ds);
	const Index split = resolve_split(opts, ds);

	CompareResult result;
	json orders_record;
	if (needs_nonuniform(opts.methods)) {
		auto resolved = phases.time("orders", [&] { return resolve_nonuniform(opts, ds, target, split); });
		result.nonuniform_layouts = std::move(resolved.layouts);
		orders_record = std::move(resolved.record);
	}

	std::vector<MethodSpec> specs;
	for (const auto &name : opts.methods) {
		specs.push_back(resolve_method(name, result.nonuniform_layouts));
	}
	result.runs.resize(specs.size());
	phases.time("backtest", [&] {
		detail::parallel_for(specs.size(), opts.jobs, [&](std::size_t m) {
			ForecastConfig cfg = base_forecast_config(opts);
			cfg.method = specs[m];
			result.runs[m] = backtest(ds, target, split, cfg);
		});
	});
	result.report = evaluate_runs(result.runs, opts.target);
	for (const auto &run : result.runs) {
		for (const auto &n : run.notes) {
			result.report.notes.push_back(fmt::format("{}: {}", run.method, n));
		}
	}

	OutputTree tree(opts.out, "compare");
	add_dataset_inputs(tree, opts);
	write_report(tree, result.report);
	for (std::size_t m = 0; m < specs.size(); ++m) {
		write_run(tree, result.runs[m], specs[m]);
	}
	if (!orders_record.is_null()) {
		tree.write_json("orders.json", std::move(orders_record));
	}
	tree.finish(opts, phases);
	return result;
}

int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
	CLI::App app{"Block-sparse spatio-temporal wind speed forecasting", "cstwsf"};
	app.require_subcommand(1);
	app.set_version_flag("--version", kToolVersion);

	std::map<std::string, std::vector<Override>> overrides;
	std::string config_path;

	auto common = [&](CLI::App *cmd) {
		auto &ov = overrides[cmd->get_name()];
		cmd->add_option("--config", config_path, "JSON config file (flags override its fields)");
		bind_option<std::string>(cmd, ov, "--out", "Output directory", [](RunOptions &o, const std::string &v) { o.out = v; });
		bind_option<std::uint64_t>(cmd, ov, "--seed", "Random seed", [](RunOptions &o, std::uint64_t v) { o.seed = v; });
		cmd->add_flag("--record-timings", "Record wall-clock per phase in manifest.json (breaks byte identity)");
		return &ov;
	};
	auto data_flags = [&](CLI::App *cmd, std::vector<Override> &ov) {
		bind_option<std::string>(cmd, ov, "--data", "Wide CSV dataset", [](RunOptions &o, const std::string &v) { o.data = v; });
		bind_option<int>(cmd, ov, "--gap-limit", "Longest interpolated gap in hours",
		          [](RunOptions &o, int v) { o.gap_limit = v; });
	};
	auto model_flags = [&](CLI::App *cmd, std::vector<Override> &ov) {
		bind_option<std::string>(cmd, ov, "--target", "Target station id",
		                  [](RunOptions &o, const std::string &v) { o.target = v; });
		bind_option<Index>(cmd, ov, "--split-hour", "First validation hour",
		            [](RunOptions &o, Index v) { o.split_hour = v; });
		bind_option<int>(cmd, ov, "--horizon", "Steps per refresh cycle", [](RunOptions &o, int v) { o.horizon = v; });
		bind_option<Index>(cmd, ov, "--window", "Training window in hours", [](RunOptions &o, Index v) { o.window = v; });
		bind_option<int>(cmd, ov, "--kmax", "BOMP block budget", [](RunOptions &o, int v) { o.solver.k_max = v; });
		bind_option<int>(cmd, ov, "--nmax", "Largest lag for order selection", [](RunOptions &o, int v) { o.n_max = v; });
		bind_option<double>(cmd, ov, "--tau", "Correlation threshold for order selection",
		             [](RunOptions &o, double v) { o.tau = v; });
		cmd->add_flag("--tune-orders", "Tune (n_max, tau) on a held-out tail of the training span");
		bind_option<int>(cmd, ov, "--jobs", "Worker threads", [](RunOptions &o, int v) { o.jobs = v; });
	};

	auto *ingest = app.add_subcommand("ingest", "Validate, gap-fill and canonicalize a wide CSV");
	data_flags(ingest, *common(ingest));

	auto *synth = app.add_subcommand("synth", "Simulate a planted block-sparse M-AR dataset");
	{
		auto &ov = *common(synth);
		bind_option<Index>(synth, ov, "--stations", "Station count P", [](RunOptions &o, Index v) { o.stations = v; });
		bind_option<std::string>(synth, ov, "--orders", "Lag order, or comma list with one per station",
		                  [](RunOptions &o, const std::string &v) {
			                  o.synth_orders.clear();
			                  for (const auto &item : split_list(v)) {
				                  o.synth_orders.push_back(std::stoi(item));
			                  }
		                  });
		bind_option<Index>(synth, ov, "--blocks", "Active blocks per target K", [](RunOptions &o, Index v) { o.blocks = v; });
		bind_option<double>(synth, ov, "--sigma", "Noise standard deviation (m/s)",
		             [](RunOptions &o, double v) { o.sigma = v; });
		bind_option<Index>(synth, ov, "--hours", "Series length T", [](RunOptions &o, Index v) { o.hours = v; });
		bind_option<Index>(synth, ov, "--burn-in", "Discarded warm-up hours", [](RunOptions &o, Index v) { o.burn_in = v; });
		bind_option<double>(synth, ov, "--baseline", "Mean speed level (m/s)",
		             [](RunOptions &o, double v) { o.baseline = v; });
	}

	auto *train = app.add_subcommand("train", "Fit one method on the window ending at --split-hour");
	auto *forecast = app.add_subcommand("forecast", "Backtest one method");
	for (auto *cmd : {train, forecast}) {
		auto &ov = *common(cmd);
		data_flags(cmd, ov);
		model_flags(cmd, ov);
		bind_option<std::string>(cmd, ov, "--method", "Method name, e.g. cst_uniform(3)",
		                  [](RunOptions &o, const std::string &v) { o.methods = {v}; });
	}

	auto *evaluate = app.add_subcommand("evaluate", "Score forecast runs");
	{
		auto &ov = *common(evaluate);
		bind_option<std::string>(evaluate, ov, "--runs", "Comma-separated run files (.json or .csv)",
		                  [](RunOptions &o, const std::string &v) { o.runs = split_list(v); });
		bind_option<std::string>(evaluate, ov, "--target", "Target station id (label)",
		                  [](RunOptions &o, const std::string &v) { o.target = v; });
		bind_option<int>(evaluate, ov, "--horizon", "Steps per refresh cycle (CSV runs)",
		          [](RunOptions &o, int v) { o.horizon = v; });
		bind_option<Index>(evaluate, ov, "--split-hour", "First validation hour (CSV runs)",
		            [](RunOptions &o, Index v) { o.split_hour = v; });
	}

	auto *compare = app.add_subcommand("compare", "Backtest several methods and tabulate MAE/RMSE/NRMSE");
	{
		auto &ov = *common(compare);
		data_flags(compare, ov);
		model_flags(compare, ov);
		bind_option<std::string>(compare, ov, "--methods", "Comma-separated method names",
		                  [](RunOptions &o, const std::string &v) { o.methods = split_list(v); });
	}

	try {
		app.parse(argc, argv);
	} catch (const CLI::CallForHelp &e) {
		return app.exit(e, out, err);
	} catch (const CLI::CallForVersion &e) {
		return app.exit(e, out, err);
	} catch (const CLI::ParseError &e) {
		err << "E_USAGE: " << one_line(e.what()) << '\n';
		return 2;
	}

	CLI::App *cmd = app.get_subcommands().front();
	try {
		RunOptions opts;
		if (!config_path.empty()) {
			json config;
			try {
				config = json::parse(read_text(config_path));
			} catch (const json::parse_error &e) {
				config_error(fmt::format("{}: {}", config_path, e.what()));
			}
			apply_config(opts, config);
			opts.config_path = config_path;
		}
		for (auto &apply : overrides[cmd->get_name()]) {
			apply(opts);
		}
		if (cmd->get_option_no_throw("--record-timings") && cmd->count("--record-timings") > 0) {
			opts.record_timings = true;
		}
		if (cmd->get_option_no_throw("--tune-orders") && cmd->count("--tune-orders") > 0) {
			opts.tune_orders = true;
		}
		if (opts.jobs < 1) {
			throw UsageError("--jobs must be >= 1");
		}
		const auto &name = cmd->get_name();
		if (name == "ingest" || name == "train" || name == "forecast" || name == "compare") {
			if (opts.data.empty()) {
				throw UsageError("missing --data");
			}
		}
		if ((name == "train" || name == "forecast" || name == "compare") && opts.target.empty()) {
			throw UsageError("missing target station id (--target)");
		}
		if (name == "ingest") {
			cmd_ingest(opts, out);
		} else if (name == "synth") {
			cmd_synth(opts, out);
		} else if (name == "train") {
			cmd_train(opts, out);
		} else if (name == "forecast") {
			cmd_forecast(opts, out);
		} else if (name == "evaluate") {
			cmd_evaluate(opts, out);
		} else {
			cmd_compare(opts, out);
		}
	} catch (const UsageError &e) {
		err << "E_USAGE: " << one_line(e.what()) << '\n';
		return 2;
	} catch (const Error &e) {
		err << to_string(e.code()) << ": " << one_line(e.what()) << '\n';
		return 1;
	} catch (const std::exception &e) {
		err << "E_INTERNAL: " << one_line(e.what()) << '\n';
		return 1;
	}
	return 0;
}

} // namespace cstwsf::cli
