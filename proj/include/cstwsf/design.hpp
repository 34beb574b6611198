#pragma once

#include "cstwsf/dataset.hpp"
#include "cstwsf/error.hpp"
#include "cstwsf/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cstwsf {

/// Per-station lag counts of a (possibly nonuniform) block layout. Block p
/// occupies columns [offset(p), offset(p) + order(p)) and holds lags
/// 1..order(p) of station p, lag 1 first.
class BlockLayout {
public:
	BlockLayout(std::vector<int> orders, int n_max);

	static BlockLayout uniform(Index stations, int order);

	const std::vector<int> &orders() const { return orders_; }
	int order(Index block) const { return orders_[static_cast<std::size_t>(block)]; }
	Index offset(Index block) const { return offsets_[static_cast<std::size_t>(block)]; }
	Index num_blocks() const { return static_cast<Index>(orders_.size()); }
	Index width() const { return width_; }
	int n_max() const { return n_max_; }
	bool is_uniform() const;

	bool operator==(const BlockLayout &) const = default;

private:
	std::vector<int> orders_;
	std::vector<Index> offsets_;
	Index width_ = 0;
	int n_max_ = 0;
};

/// Regression pair for one target station: b(m) is the target's value at hour
/// origin_hour + m and row m of A holds the lagged regressors for it.
struct DesignSystem {
	Matrix A;
	Vector b;
	BlockLayout layout;
	Index target = 0;
	Index origin_hour = 0;

	Index rows() const { return A.rows(); }
};

/// Builds (A, b) from a P x T series matrix. Rows are aligned at n_max and
/// anchored at the end of the series: the last row predicts hour T-1. `rows`
/// defaults to all available rows, T - n_max.
template <typename Derived>
DesignSystem build_nonuniform(const Eigen::MatrixBase<Derived> &series, Index target, const BlockLayout &layout,
                              std::optional<Index> rows = std::nullopt) {
	const Index P = series.rows();
	const Index T = series.cols();
	if (layout.num_blocks() != P) {
		throw Error(ErrorCode::InvalidArgument, "layout block count does not match station count");
	}
	if (target < 0 || target >= P) {
		throw Error(ErrorCode::InvalidArgument, "target station index out of range");
	}
	const Index available = T - layout.n_max();
	const Index M = rows.value_or(available);
	if (M < 1 || M > available) {
		throw Error(ErrorCode::InsufficientData,
		            "insufficient history: need T >= n_max + M (T=" + std::to_string(T) +
		                ", n_max=" + std::to_string(layout.n_max()) + ", M=" + std::to_string(M) + ")");
	}
	const Index origin = T - M;
	DesignSystem sys{Matrix(M, layout.width()), series.row(target).segment(origin, M).transpose(), layout, target,
	                 origin};
	for (Index p = 0; p < P; ++p) {
		const Index offset = layout.offset(p);
		for (Index lag = 1; lag <= layout.order(p); ++lag) {
			sys.A.col(offset + lag - 1) = series.row(p).segment(origin - lag, M).transpose();
		}
	}
	return sys;
}

template <typename Derived>
DesignSystem build_uniform(const Eigen::MatrixBase<Derived> &series, Index target, int order,
                           std::optional<Index> rows = std::nullopt) {
	return build_nonuniform(series, target, BlockLayout::uniform(series.rows(), order), rows);
}

DesignSystem build_uniform(const Dataset &ds, Index target, int order, std::optional<Index> rows = std::nullopt);
DesignSystem build_nonuniform(const Dataset &ds, Index target, const BlockLayout &layout,
                              std::optional<Index> rows = std::nullopt);

/// Regressor row for a forecast. Column k of `history` holds each station's
/// value k hours before the forecast hour minus one (column 0 is the most
/// recent), whether observed or previously predicted.
template <typename Derived>
RowVector predict_row(const Eigen::MatrixBase<Derived> &history, const BlockLayout &layout) {
	if (history.rows() != layout.num_blocks()) {
		throw Error(ErrorCode::InvalidArgument, "history station count does not match layout");
	}
	RowVector row(layout.width());
	for (Index p = 0; p < layout.num_blocks(); ++p) {
		const int n = layout.order(p);
		if (history.cols() < n) {
			throw Error(ErrorCode::InsufficientData,
			            "history for station " + std::to_string(p) + " shorter than its lag order");
		}
		row.segment(layout.offset(p), n) = history.row(p).head(n);
	}
	return row;
}

} // namespace cstwsf
