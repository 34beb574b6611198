#include "cstwsf/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>

namespace cstwsf {

namespace {
using ConstMap = Eigen::Map<const Vector>;

ConstMap as_vector(std::span<const double> s) { return ConstMap(s.data(), static_cast<Index>(s.size())); }
} // namespace

double mae(std::span<const double> actual, std::span<const double> predicted) {
	return mae(as_vector(actual), as_vector(predicted));
}

double rmse(std::span<const double> actual, std::span<const double> predicted) {
	return rmse(as_vector(actual), as_vector(predicted));
}

double nrmse(std::span<const double> actual, std::span<const double> predicted) {
	return nrmse(as_vector(actual), as_vector(predicted));
}

double reduction(double base, double improved) {
	if (!(base > 0.0)) {
		throw Error(ErrorCode::InvalidArgument, "reduction needs a positive base");
	}
	return std::round(1000.0 * (base - improved) / base) / 10.0;
}

const MethodScore &EvaluationReport::row(const std::string &method) const {
	for (const auto &r : rows) {
		if (r.method == method) {
			return r;
		}
	}
	throw Error(ErrorCode::InvalidArgument, fmt::format("report has no row for method '{}'", method));
}

MethodScore score_predictions(const std::string &method, std::span<const double> actual,
                              std::span<const double> predicted, std::span<const int> steps) {
	if (steps.size() != actual.size()) {
		throw Error(ErrorCode::InvalidArgument, "step labels do not match predictions");
	}
	MethodScore score{method, mae(actual, predicted), rmse(actual, predicted), nrmse(actual, predicted), {}};
	std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_step;
	for (std::size_t i = 0; i < steps.size(); ++i) {
		auto &[a, p] = by_step[steps[i]];
		a.push_back(actual[i]);
		p.push_back(predicted[i]);
	}
	for (const auto &[step, pair] : by_step) {
		score.per_step.push_back(
		    {step, static_cast<Index>(pair.first.size()), mae(pair.first, pair.second), rmse(pair.first, pair.second)});
	}
	return score;
}

} // namespace cstwsf
