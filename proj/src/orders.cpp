#include "cstwsf/orders.hpp"

#include "cstwsf/error.hpp"
#include "cstwsf/metrics.hpp"
#include "parallel.hpp"

#include <fmt/format.h>

#include <cmath>

namespace cstwsf {

namespace {

double pearson(const Eigen::Ref<const RowVector> &x, const Eigen::Ref<const RowVector> &y) {
	const double n = static_cast<double>(x.size());
	const RowVector dx = x.array() - x.sum() / n;
	const RowVector dy = y.array() - y.sum() / n;
	const double sxx = dx.squaredNorm();
	const double syy = dy.squaredNorm();
	if (sxx == 0.0 || syy == 0.0) {
		return 0.0;
	}
	return std::clamp(dx.dot(dy) / std::sqrt(sxx * syy), -1.0, 1.0);
}

} // namespace

CorrelationProfile correlate(const Matrix &series, Index target, int max_lag) {
	const Index P = series.rows();
	const Index T = series.cols();
	if (target < 0 || target >= P) {
		throw Error(ErrorCode::InvalidArgument, "target station index out of range");
	}
	if (max_lag < 1) {
		throw Error(ErrorCode::InvalidArgument, "max_lag must be >= 1");
	}
	if (T - max_lag < 3) {
		throw Error(ErrorCode::InsufficientData,
		            fmt::format("correlation window too short (T={}, max_lag={})", T, max_lag));
	}
	const Index len = T - max_lag;
	CorrelationProfile profile{target, Matrix(P, max_lag), max_lag};
	const RowVector y = series.row(target).segment(max_lag, len);
	for (Index p = 0; p < P; ++p) {
		for (int lag = 1; lag <= max_lag; ++lag) {
			profile.rho(p, lag - 1) = pearson(y, series.row(p).segment(max_lag - lag, len));
		}
	}
	return profile;
}

CorrelationProfile correlate(const Dataset &ds, Index target, int max_lag) {
	return correlate(ds.values(), target, max_lag);
}

BlockLayout select_orders(const CorrelationProfile &profile, int n_max, double tau) {
	if (n_max < 1) {
		throw Error(ErrorCode::InvalidArgument, "n_max must be >= 1");
	}
	if (!(tau >= 0.0 && tau < 1.0)) {
		throw Error(ErrorCode::InvalidArgument, "tau must lie in [0, 1)");
	}
	const int scanned = std::min(n_max, profile.max_lag);
	std::vector<int> orders(static_cast<std::size_t>(profile.rho.rows()), 1);
	for (Index p = 0; p < profile.rho.rows(); ++p) {
		for (int lag = scanned; lag >= 1; --lag) {
			if (std::abs(profile.rho(p, lag - 1)) >= tau) {
				orders[static_cast<std::size_t>(p)] = lag;
				break;
			}
		}
	}
	return BlockLayout(std::move(orders), n_max);
}

std::vector<BlockLayout> select_layouts(const Matrix &train, int n_max, double tau) {
	std::vector<BlockLayout> layouts;
	layouts.reserve(static_cast<std::size_t>(train.rows()));
	for (Index i = 0; i < train.rows(); ++i) {
		layouts.push_back(select_orders(correlate(train, i, n_max), n_max, tau));
	}
	return layouts;
}

std::vector<OrderCandidate> default_order_grid() {
	std::vector<OrderCandidate> grid;
	for (const int n_max : {3, 4, 6, 8}) {
		for (const double tau : {0.2, 0.4, 0.6}) {
			grid.push_back({n_max, tau});
		}
	}
	return grid;
}

TunedOrders tune_orders(const Dataset &train, const Dataset &val, Index target,
                        const std::vector<OrderCandidate> &grid, const ForecastConfig &base) {
	if (grid.empty()) {
		throw Error(ErrorCode::InvalidArgument, "order grid is empty");
	}
	const Dataset combined = concatenate(train, val);
	const Index split = train.num_hours();

	std::vector<std::vector<BlockLayout>> layouts(grid.size());
	std::vector<double> scores(grid.size(), 0.0);
	detail::parallel_for(grid.size(), base.jobs, [&](std::size_t g) {
		layouts[g] = select_layouts(train.values(), grid[g].n_max, grid[g].tau);
		ForecastConfig cfg = base;
		cfg.method = method::CstNonuniform{layouts[g]};
		cfg.jobs = 1;
		const auto run = backtest(combined, target, split, cfg);
		scores[g] = rmse(run.actuals(), run.predictions());
	});

	std::size_t best = 0;
	for (std::size_t g = 1; g < grid.size(); ++g) {
		const auto width = layouts[g][static_cast<std::size_t>(target)].width();
		const auto best_width = layouts[best][static_cast<std::size_t>(target)].width();
		if (scores[g] < scores[best] || (scores[g] == scores[best] && width < best_width)) {
			best = g;
		}
	}
	return TunedOrders{grid[best], layouts[best][static_cast<std::size_t>(target)], layouts[best], scores[best],
	                   scores};
}

} // namespace cstwsf
