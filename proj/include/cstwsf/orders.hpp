#pragma once

#include "cstwsf/dataset.hpp"
#include "cstwsf/design.hpp"
#include "cstwsf/forecast.hpp"
#include "cstwsf/types.hpp"

#include <vector>

namespace cstwsf {

/// rho(p, l-1) = Pearson correlation between the target at hour t and
/// station p at hour t - l, for l = 1..max_lag, over t in [max_lag, T).
struct CorrelationProfile {
	Index target = 0;
	Matrix rho;
	int max_lag = 0;
};

/// Zero-variance series correlate as 0.
CorrelationProfile correlate(const Matrix &series, Index target, int max_lag);
CorrelationProfile correlate(const Dataset &ds, Index target, int max_lag);

/// n_p = largest lag l <= n_max with |rho(p, l)| >= tau, or 1 when none
/// qualifies. Lags beyond the profile's max_lag are treated as unscanned.
BlockLayout select_orders(const CorrelationProfile &profile, int n_max, double tau);

/// select_orders with every station taken in turn as the target.
std::vector<BlockLayout> select_layouts(const Matrix &train, int n_max, double tau);

struct OrderCandidate {
	int n_max = 6;
	double tau = 0.4;

	bool operator==(const OrderCandidate &) const = default;
};

/// n_max in {3, 4, 6, 8} crossed with tau in {0.2, 0.4, 0.6}.
std::vector<OrderCandidate> default_order_grid();

struct TunedOrders {
	OrderCandidate choice;
	/// Target station's layout under the chosen rule.
	BlockLayout layout;
	/// Layouts for every station under the chosen rule.
	std::vector<BlockLayout> layouts;
	double rmse = 0.0;
	/// Validation RMSE per grid entry, in grid order.
	std::vector<double> candidate_rmse;
};

/// Backtests cst_nonuniform on `val` (contiguous after `train`) for each grid
/// rule and keeps the one with the lowest validation RMSE; ties go to the
/// smaller target width, then to grid order. Correlations use `train` only.
TunedOrders tune_orders(const Dataset &train, const Dataset &val, Index target,
                        const std::vector<OrderCandidate> &grid, const ForecastConfig &base);

} // namespace cstwsf
