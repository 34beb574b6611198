#pragma once

#include "cstwsf/dataset.hpp"
#include "cstwsf/design.hpp"
#include "cstwsf/metrics.hpp"
#include "cstwsf/solver.hpp"
#include "cstwsf/types.hpp"

#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cstwsf {

namespace method {
struct Persistence {};
struct Ar {
	int order = 1;
};
struct LsMar {
	int order = 1;
};
struct CstUniform {
	int order = 1;
};
/// One layout per station; every station is refit each cycle.
struct CstNonuniform {
	std::vector<BlockLayout> layouts;
};
} // namespace method

using MethodSpec =
    std::variant<method::Persistence, method::Ar, method::LsMar, method::CstUniform, method::CstNonuniform>;

/// Canonical names: persistence, ar(p), ls_mar(n), cst_uniform(n), cst_nonuniform.
std::string method_name(const MethodSpec &spec);
/// Parses a canonical name. `cst_nonuniform` comes back with no layouts; the
/// caller resolves them from the training data.
MethodSpec parse_method(std::string_view name);
/// Filesystem-safe form of a method name (`ar(3)` -> `ar_3`).
std::string method_slug(std::string_view name);

/// Ridge applied to LS M-AR fits when the system has at least as many columns
/// as rows, or turns out rank deficient.
inline constexpr double kAutoRidge = 1e-8;

/// Coefficients for every station, each expressed over the full station set
/// (stations outside a model's support carry zero blocks).
struct FittedModel {
	std::vector<SparseCoefficients> stations;
	std::vector<std::string> notes;

	/// Largest lag any station model reads.
	int max_lag() const;
	/// One-step prediction for every station. Column k of `history` holds each
	/// station's value k+1 hours before the predicted hour.
	Vector predict(const Matrix &history) const;
};

/// Persistence as AR(1) with unit self coefficient.
FittedModel fit_persistence(Index stations, Index trained_at_hour);
/// Single-station AR(p) per station by least squares on its own lags.
FittedModel fit_ar(const Matrix &window, int order, Index trained_at_hour, int jobs = 1, bool intercept = true);
/// Dense least-squares M-AR of uniform order over all stations.
FittedModel fit_ls_mar(const Matrix &window, int order, Index trained_at_hour, int jobs = 1, bool intercept = true);
/// Block-sparse M-AR via BOMP, one layout per station.
FittedModel fit_cst(const Matrix &window, const std::vector<BlockLayout> &layouts, const SolverConfig &cfg,
                    Index trained_at_hour, int jobs = 1);

/// A forecasting method: fits per-station models on a P x W training window.
class Forecaster {
public:
	virtual ~Forecaster() = default;
	virtual std::string name() const = 0;
	/// Largest lag the method's models read.
	virtual int max_lag() const = 0;
	virtual FittedModel fit(const Matrix &window, Index trained_at_hour, int jobs) const = 0;
};

/// With `intercept`, every model-based method fits a constant term alongside
/// its lag coefficients (centered solves).
std::unique_ptr<Forecaster> make_forecaster(const MethodSpec &spec, const SolverConfig &solver, Index stations,
                                            bool intercept = true);

struct ForecastConfig {
	int horizon = 6;
	/// Training window in hours, lag history included (rows = window - n_max).
	Index window = 720;
	MethodSpec method = method::Persistence{};
	SolverConfig solver;
	/// Fit a constant term in every model-based method.
	bool intercept = true;
	int jobs = 1;
};

struct ForecastPoint {
	Index hour = 0;
	/// 1-based position inside its refresh cycle.
	int step = 0;
	double actual = 0.0;
	double predicted = 0.0;
};

struct ForecastRun {
	std::string method;
	Index target = 0;
	Index split = 0;
	std::vector<ForecastPoint> points;
	std::vector<Index> retrain_points;
	/// Target-station coefficients per refit; empty for persistence.
	std::vector<SparseCoefficients> coefficients_log;
	std::vector<std::string> notes;

	std::vector<double> actuals() const;
	std::vector<double> predictions() const;
	std::vector<int> steps() const;
};

/// Rolling recursive backtest over hours [split, T). Every `horizon` hours the
/// method is refit on the `window` hours preceding the cycle origin, then each
/// hour of the cycle is predicted for all stations, feeding predictions back
/// as lagged inputs until the next origin resets the history to observations.
ForecastRun backtest(const Dataset &ds, Index target, Index split, const ForecastConfig &cfg);

/// Scores runs that cover the same hours of one target station. The NRMSE
/// range is taken from the observed target values over that span.
EvaluationReport evaluate_runs(const std::vector<ForecastRun> &runs, const std::string &target_id);

} // namespace cstwsf
