#pragma once

#include "cstwsf/error.hpp"
#include "cstwsf/types.hpp"

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace cstwsf {

namespace detail {
template <typename DA, typename DP>
void check_pair(const Eigen::MatrixBase<DA> &actual, const Eigen::MatrixBase<DP> &predicted) {
	if (actual.size() != predicted.size()) {
		throw Error(ErrorCode::InvalidArgument, "actual and predicted lengths differ");
	}
	if (actual.size() == 0) {
		throw Error(ErrorCode::InvalidArgument, "metrics need at least one observation");
	}
}
} // namespace detail

/// Mean absolute error, in the units of the inputs.
template <typename DA, typename DP>
double mae(const Eigen::MatrixBase<DA> &actual, const Eigen::MatrixBase<DP> &predicted) {
	detail::check_pair(actual, predicted);
	return (actual.derived().array() - predicted.derived().array()).abs().sum() /
	       static_cast<double>(actual.size());
}

template <typename DA, typename DP>
double rmse(const Eigen::MatrixBase<DA> &actual, const Eigen::MatrixBase<DP> &predicted) {
	detail::check_pair(actual, predicted);
	return std::sqrt((actual.derived().array() - predicted.derived().array()).square().sum() /
	                 static_cast<double>(actual.size()));
}

/// RMSE as a percentage of the observed range max(actual) - min(actual).
template <typename DA, typename DP>
double nrmse(const Eigen::MatrixBase<DA> &actual, const Eigen::MatrixBase<DP> &predicted) {
	detail::check_pair(actual, predicted);
	const double range = actual.maxCoeff() - actual.minCoeff();
	if (!(range > 0.0)) {
		throw Error(ErrorCode::InvalidArgument, "NRMSE undefined for constant actuals (zero range)");
	}
	return 100.0 * rmse(actual, predicted) / range;
}

double mae(std::span<const double> actual, std::span<const double> predicted);
double rmse(std::span<const double> actual, std::span<const double> predicted);
double nrmse(std::span<const double> actual, std::span<const double> predicted);

/// Percent reduction of `improved` relative to `base`, rounded to one decimal.
double reduction(double base, double improved);

struct StepScore {
	int step = 0;
	Index count = 0;
	double mae = 0.0;
	double rmse = 0.0;
};

struct MethodScore {
	std::string method;
	double mae = 0.0;
	double rmse = 0.0;
	double nrmse = 0.0;
	std::vector<StepScore> per_step;
};

/// Table-shaped comparison for one target station over one validation span.
struct EvaluationReport {
	std::string target;
	Index span_begin = 0;
	Index span_end = 0;
	double observed_min = 0.0;
	double observed_max = 0.0;
	std::vector<MethodScore> rows;
	std::vector<std::string> notes;

	const MethodScore &row(const std::string &method) const;
};

/// Pooled scores over every prediction plus a per-horizon-step breakdown.
/// `steps[k]` is the 1-based step within its refresh cycle.
MethodScore score_predictions(const std::string &method, std::span<const double> actual,
                              std::span<const double> predicted, std::span<const int> steps);

} // namespace cstwsf
