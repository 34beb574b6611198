#include "cstwsf/forecast.hpp"

#include "cstwsf/error.hpp"
#include "parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>

namespace cstwsf {

namespace {

template <typename... Ts>
struct Overloaded : Ts... {
	using Ts::operator()...;
};
template <typename... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Coefficients of a single-station model embedded in an all-station layout.
SparseCoefficients embed_self_model(Index stations, Index target, int order, const Vector &self_coefficients,
                                    Index trained_at_hour) {
	std::vector<int> orders(static_cast<std::size_t>(stations), 1);
	orders[static_cast<std::size_t>(target)] = order;
	BlockLayout layout(std::move(orders), order);
	SparseCoefficients c{layout, {target}, Vector::Zero(layout.width()), target, Vector::Ones(layout.width()),
	                     trained_at_hour, {}};
	c.values.segment(layout.offset(target), order) = self_coefficients;
	return c;
}

// Dense least squares, optionally with a constant term; falls back to the
// automatic ridge when the system is rank deficient or forced to.
AffineFit fit_dense(const DesignSystem &sys, bool intercept, bool force_ridge) {
	if (intercept) {
		return least_squares_affine(sys.A, sys.b, force_ridge ? kAutoRidge : 0.0, kAutoRidge);
	}
	if (!force_ridge) {
		try {
			return {least_squares(sys, 0.0), 0.0, false};
		} catch (const Error &e) {
			if (e.code() != ErrorCode::RankDeficient) {
				throw;
			}
		}
	}
	return {least_squares(sys, kAutoRidge), 0.0, true};
}

int parse_order(std::string_view name, std::string_view prefix) {
	// prefix "(" digits ")"
	if (name.size() < prefix.size() + 3 || name.substr(0, prefix.size()) != prefix ||
	    name[prefix.size()] != '(' || name.back() != ')') {
		throw Error(ErrorCode::ConfigError, fmt::format("unknown method '{}'", name));
	}
	const auto digits = name.substr(prefix.size() + 1, name.size() - prefix.size() - 2);
	int order = 0;
	auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), order);
	if (ec != std::errc() || ptr != digits.data() + digits.size() || order < 1) {
		throw Error(ErrorCode::ConfigError, fmt::format("bad order in method '{}'", name));
	}
	return order;
}

class PersistenceForecaster final : public Forecaster {
public:
	explicit PersistenceForecaster(Index stations) : stations_(stations) {}
	std::string name() const override { return "persistence"; }
	int max_lag() const override { return 1; }
	FittedModel fit(const Matrix &, Index trained_at_hour, int) const override {
		return fit_persistence(stations_, trained_at_hour);
	}

private:
	Index stations_;
};

class ArForecaster final : public Forecaster {
public:
	ArForecaster(int order, bool intercept) : order_(order), intercept_(intercept) {}
	std::string name() const override { return method_name(method::Ar{order_}); }
	int max_lag() const override { return order_; }
	FittedModel fit(const Matrix &window, Index trained_at_hour, int jobs) const override {
		return fit_ar(window, order_, trained_at_hour, jobs, intercept_);
	}

private:
	int order_;
	bool intercept_;
};

class LsMarForecaster final : public Forecaster {
public:
	LsMarForecaster(int order, bool intercept) : order_(order), intercept_(intercept) {}
	std::string name() const override { return method_name(method::LsMar{order_}); }
	int max_lag() const override { return order_; }
	FittedModel fit(const Matrix &window, Index trained_at_hour, int jobs) const override {
		return fit_ls_mar(window, order_, trained_at_hour, jobs, intercept_);
	}

private:
	int order_;
	bool intercept_;
};

class CstForecaster final : public Forecaster {
public:
	CstForecaster(std::string name, std::vector<BlockLayout> layouts, SolverConfig cfg)
	    : name_(std::move(name)), layouts_(std::move(layouts)), cfg_(cfg) {}
	std::string name() const override { return name_; }
	int max_lag() const override {
		int lag = 1;
		for (const auto &l : layouts_) {
			lag = std::max(lag, l.n_max());
		}
		return lag;
	}
	FittedModel fit(const Matrix &window, Index trained_at_hour, int jobs) const override {
		return fit_cst(window, layouts_, cfg_, trained_at_hour, jobs);
	}

private:
	std::string name_;
	std::vector<BlockLayout> layouts_;
	SolverConfig cfg_;
};

} // namespace

std::string method_name(const MethodSpec &spec) {
	return std::visit(Overloaded{
	                      [](const method::Persistence &) { return std::string("persistence"); },
	                      [](const method::Ar &m) { return fmt::format("ar({})", m.order); },
	                      [](const method::LsMar &m) { return fmt::format("ls_mar({})", m.order); },
	                      [](const method::CstUniform &m) { return fmt::format("cst_uniform({})", m.order); },
	                      [](const method::CstNonuniform &) { return std::string("cst_nonuniform"); },
	                  },
	                  spec);
}

MethodSpec parse_method(std::string_view name) {
	if (name == "persistence") {
		return method::Persistence{};
	}
	if (name == "cst_nonuniform") {
		return method::CstNonuniform{};
	}
	if (name.starts_with("ar(")) {
		return method::Ar{parse_order(name, "ar")};
	}
	if (name.starts_with("ls_mar(")) {
		return method::LsMar{parse_order(name, "ls_mar")};
	}
	if (name.starts_with("cst_uniform(")) {
		return method::CstUniform{parse_order(name, "cst_uniform")};
	}
	throw Error(ErrorCode::ConfigError, fmt::format("unknown method '{}'", name));
}

std::string method_slug(std::string_view name) {
	std::string slug;
	for (const char c : name) {
		if (c == '(') {
			slug += '_';
		} else if (c != ')') {
			slug += c;
		}
	}
	return slug;
}

int FittedModel::max_lag() const {
	int lag = 1;
	for (const auto &s : stations) {
		lag = std::max(lag, s.layout.n_max());
	}
	return lag;
}

Vector FittedModel::predict(const Matrix &history) const {
	Vector next(static_cast<Index>(stations.size()));
	for (std::size_t i = 0; i < stations.size(); ++i) {
		const auto &model = stations[i];
		next[static_cast<Index>(i)] = predict_row(history, model.layout).dot(model.values) + model.intercept;
	}
	return next;
}

FittedModel fit_persistence(Index stations, Index trained_at_hour) {
	FittedModel model;
	for (Index i = 0; i < stations; ++i) {
		model.stations.push_back(embed_self_model(stations, i, 1, Vector::Ones(1), trained_at_hour));
	}
	return model;
}

FittedModel fit_ar(const Matrix &window, int order, Index trained_at_hour, int jobs, bool intercept) {
	const Index P = window.rows();
	std::vector<SparseCoefficients> fits(static_cast<std::size_t>(P),
	                                     embed_self_model(P, 0, order, Vector::Zero(order), trained_at_hour));
	std::vector<std::string> notes(static_cast<std::size_t>(P));
	detail::parallel_for(static_cast<std::size_t>(P), jobs, [&](std::size_t i) {
		const auto sys = build_uniform(window.row(static_cast<Index>(i)), 0, order);
		const AffineFit fit = fit_dense(sys, intercept, false);
		if (fit.ridge_used) {
			notes[i] = fmt::format("ar({}) station {}: rank-deficient fit, ridge {} applied", order, i, kAutoRidge);
		}
		auto c = embed_self_model(P, static_cast<Index>(i), order, fit.x, trained_at_hour);
		c.intercept = fit.intercept;
		c.diagnostics.ridge_used = fit.ridge_used;
		c.diagnostics.residual_norms = {(sys.b.array() - (intercept ? sys.b.mean() : 0.0)).matrix().norm(),
		                                (sys.b.array() - fit.intercept - (sys.A * fit.x).array()).matrix().norm()};
		fits[i] = std::move(c);
	});
	FittedModel model{std::move(fits), {}};
	for (auto &n : notes) {
		if (!n.empty()) {
			model.notes.push_back(std::move(n));
		}
	}
	return model;
}

FittedModel fit_ls_mar(const Matrix &window, int order, Index trained_at_hour, int jobs, bool intercept) {
	const Index P = window.rows();
	const BlockLayout layout = BlockLayout::uniform(P, order);
	std::vector<Index> all_blocks(static_cast<std::size_t>(P));
	for (Index p = 0; p < P; ++p) {
		all_blocks[static_cast<std::size_t>(p)] = p;
	}
	std::vector<SparseCoefficients> fits(static_cast<std::size_t>(P),
	                                     SparseCoefficients{layout, all_blocks, Vector::Zero(layout.width()), 0,
	                                                        Vector::Ones(layout.width()), trained_at_hour, {}});
	std::vector<std::string> notes(static_cast<std::size_t>(P));
	detail::parallel_for(static_cast<std::size_t>(P), jobs, [&](std::size_t i) {
		const auto sys = build_uniform(window, static_cast<Index>(i), order);
		const bool underdetermined = sys.A.cols() + (intercept ? 1 : 0) > sys.A.rows();
		const AffineFit fit = fit_dense(sys, intercept, underdetermined);
		auto &c = fits[i];
		c.target = static_cast<Index>(i);
		c.values = fit.x;
		c.intercept = fit.intercept;
		c.diagnostics.ridge_used = fit.ridge_used;
		if (fit.ridge_used) {
			notes[i] = fmt::format("ls_mar({}) station {}: ridge {} applied (N={}, M={})", order, i, kAutoRidge,
			                       sys.A.cols(), sys.A.rows());
		}
		c.diagnostics.residual_norms = {(sys.b.array() - (intercept ? sys.b.mean() : 0.0)).matrix().norm(),
		                                (sys.b.array() - fit.intercept - (sys.A * fit.x).array()).matrix().norm()};
	});
	FittedModel model{std::move(fits), {}};
	for (auto &n : notes) {
		if (!n.empty()) {
			model.notes.push_back(std::move(n));
		}
	}
	return model;
}

FittedModel fit_cst(const Matrix &window, const std::vector<BlockLayout> &layouts, const SolverConfig &cfg,
                    Index trained_at_hour, int jobs) {
	const Index P = window.rows();
	if (static_cast<Index>(layouts.size()) != P) {
		throw Error(ErrorCode::InvalidArgument, "fit_cst needs one layout per station");
	}
	cfg.validate();
	std::vector<SparseCoefficients> fits(
	    static_cast<std::size_t>(P),
	    SparseCoefficients{layouts.front(), {}, Vector(), 0, Vector(), trained_at_hour, {}});
	detail::parallel_for(static_cast<std::size_t>(P), jobs, [&](std::size_t i) {
		const auto sys = build_nonuniform(window, static_cast<Index>(i), layouts[i]);
		fits[i] = bomp(sys, cfg);
		fits[i].trained_at_hour = trained_at_hour;
	});
	FittedModel model{std::move(fits), {}};
	for (Index i = 0; i < P; ++i) {
		if (model.stations[static_cast<std::size_t>(i)].diagnostics.ridge_used) {
			model.notes.push_back(fmt::format("cst station {}: ridge jitter {} applied in support refit", i, cfg.ridge));
		}
	}
	return model;
}

std::unique_ptr<Forecaster> make_forecaster(const MethodSpec &spec, const SolverConfig &solver_cfg, Index stations,
                                            bool intercept) {
	SolverConfig solver = solver_cfg;
	solver.center = intercept;
	return std::visit(
	    Overloaded{
	        [&](const method::Persistence &) -> std::unique_ptr<Forecaster> {
		        return std::make_unique<PersistenceForecaster>(stations);
	        },
	        [&](const method::Ar &m) -> std::unique_ptr<Forecaster> { return std::make_unique<ArForecaster>(m.order, solver.center); },
	        [&](const method::LsMar &m) -> std::unique_ptr<Forecaster> {
		        return std::make_unique<LsMarForecaster>(m.order, solver.center);
	        },
	        [&](const method::CstUniform &m) -> std::unique_ptr<Forecaster> {
		        return std::make_unique<CstForecaster>(
		            method_name(m), std::vector<BlockLayout>(static_cast<std::size_t>(stations),
		                                                     BlockLayout::uniform(stations, m.order)),
		            solver);
	        },
	        [&](const method::CstNonuniform &m) -> std::unique_ptr<Forecaster> {
		        if (static_cast<Index>(m.layouts.size()) != stations) {
			        throw Error(ErrorCode::InvalidArgument,
			                    fmt::format("cst_nonuniform needs {} layouts, got {}", stations, m.layouts.size()));
		        }
		        for (const auto &l : m.layouts) {
			        if (l.num_blocks() != stations) {
				        throw Error(ErrorCode::InvalidArgument, "cst_nonuniform layout inconsistent with station count");
			        }
		        }
		        return std::make_unique<CstForecaster>(method_name(m), m.layouts, solver);
	        },
	    },
	    spec);
}

std::vector<double> ForecastRun::actuals() const {
	std::vector<double> out;
	out.reserve(points.size());
	for (const auto &p : points) {
		out.push_back(p.actual);
	}
	return out;
}

std::vector<double> ForecastRun::predictions() const {
	std::vector<double> out;
	out.reserve(points.size());
	for (const auto &p : points) {
		out.push_back(p.predicted);
	}
	return out;
}

std::vector<int> ForecastRun::steps() const {
	std::vector<int> out;
	out.reserve(points.size());
	for (const auto &p : points) {
		out.push_back(p.step);
	}
	return out;
}

ForecastRun backtest(const Dataset &ds, Index target, Index split, const ForecastConfig &cfg) {
	const Index P = ds.num_stations();
	const Index T = ds.num_hours();
	if (target < 0 || target >= P) {
		throw Error(ErrorCode::InvalidArgument, "target station index out of range");
	}
	if (cfg.horizon < 1) {
		throw Error(ErrorCode::InvalidArgument, "horizon must be >= 1");
	}
	if (split < 0 || T - split < cfg.horizon) {
		throw Error(ErrorCode::InsufficientData,
		            fmt::format("validation span [{}, {}) shorter than horizon {}", split, T, cfg.horizon));
	}
	const auto forecaster = make_forecaster(cfg.method, cfg.solver, P, cfg.intercept);
	const bool persistence = std::holds_alternative<method::Persistence>(cfg.method);
	const int lag = forecaster->max_lag();
	if (!persistence) {
		if (cfg.window < lag + 1) {
			throw Error(ErrorCode::InvalidArgument,
			            fmt::format("window {} must be at least n_max + 1 = {}", cfg.window, lag + 1));
		}
		if (split < cfg.window) {
			throw Error(ErrorCode::InsufficientData,
			            fmt::format("split hour {} leaves fewer than window = {} training hours", split, cfg.window));
		}
	} else if (split < 1) {
		throw Error(ErrorCode::InsufficientData, "persistence needs at least one observed hour before the split");
	}

	ForecastRun run;
	run.method = forecaster->name();
	run.target = target;
	run.split = split;
	Index cycle = 0;
	for (Index origin = split; origin < T; origin += cfg.horizon, ++cycle) {
		const Index steps = std::min<Index>(cfg.horizon, T - origin);
		const Index window = std::min(cfg.window, origin);
		FittedModel model;
		try {
			model = forecaster->fit(ds.values().middleCols(origin - window, window), origin, cfg.jobs);
		} catch (const Error &e) {
			throw Error(e.code(), fmt::format("cycle {} (origin hour {}): {}", cycle, origin, e.what()));
		}
		run.retrain_points.push_back(origin);
		if (!persistence) {
			run.coefficients_log.push_back(model.stations[static_cast<std::size_t>(target)]);
		}
		for (auto &n : model.notes) {
			run.notes.push_back(fmt::format("cycle {}: {}", cycle, n));
		}

		const Index L = model.max_lag();
		// column k = hour origin - 1 - k
		Matrix history = ds.values().middleCols(origin - L, L).rowwise().reverse();
		for (Index h = 0; h < steps; ++h) {
			const Vector next = model.predict(history);
			run.points.push_back(
			    {origin + h, static_cast<int>(h + 1), ds.values()(target, origin + h), next[target]});
			if (L > 1) {
				Matrix shifted(P, L);
				shifted.col(0) = next;
				shifted.rightCols(L - 1) = history.leftCols(L - 1);
				history.swap(shifted);
			} else {
				history.col(0) = next;
			}
		}
	}
	return run;
}

} // namespace cstwsf

namespace cstwsf {

EvaluationReport evaluate_runs(const std::vector<ForecastRun> &runs, const std::string &target_id) {
	if (runs.empty()) {
		throw Error(ErrorCode::InvalidArgument, "no runs to evaluate");
	}
	const auto &reference = runs.front();
	if (reference.points.empty()) {
		throw Error(ErrorCode::InvalidArgument, "run has no predictions");
	}
	EvaluationReport report;
	report.target = target_id;
	report.span_begin = reference.points.front().hour;
	report.span_end = reference.points.back().hour + 1;
	const auto actuals = reference.actuals();
	report.observed_min = *std::min_element(actuals.begin(), actuals.end());
	report.observed_max = *std::max_element(actuals.begin(), actuals.end());
	for (const auto &run : runs) {
		if (run.points.size() != reference.points.size()) {
			throw Error(ErrorCode::InvalidArgument,
			            fmt::format("run '{}' covers a different span than '{}'", run.method, reference.method));
		}
		for (std::size_t k = 0; k < run.points.size(); ++k) {
			if (run.points[k].hour != reference.points[k].hour || run.points[k].actual != reference.points[k].actual) {
				throw Error(ErrorCode::InvalidArgument,
				            fmt::format("run '{}' is not aligned with '{}'", run.method, reference.method));
			}
		}
		report.rows.push_back(score_predictions(run.method, run.actuals(), run.predictions(), run.steps()));
	}
	report.notes.push_back(fmt::format("NRMSE range = max - min of observed {} over hours [{}, {}): {} m/s", target_id,
	                                   report.span_begin, report.span_end,
	                                   report.observed_max - report.observed_min));
	report.notes.push_back("metrics pool every prediction of the span; per_step splits them by horizon step");
	return report;
}

} // namespace cstwsf
