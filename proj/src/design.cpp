#include "cstwsf/design.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace cstwsf {

BlockLayout::BlockLayout(std::vector<int> orders, int n_max) : orders_(std::move(orders)), n_max_(n_max) {
	if (orders_.empty()) {
		throw Error(ErrorCode::InvalidArgument, "layout needs at least one block");
	}
	offsets_.reserve(orders_.size());
	for (std::size_t p = 0; p < orders_.size(); ++p) {
		if (orders_[p] < 1) {
			throw Error(ErrorCode::InvalidArgument, fmt::format("block {} has order {} < 1", p, orders_[p]));
		}
		offsets_.push_back(width_);
		width_ += orders_[p];
	}
	const int largest = *std::max_element(orders_.begin(), orders_.end());
	if (n_max_ < largest) {
		throw Error(ErrorCode::InvalidArgument,
		            fmt::format("n_max {} is smaller than the largest block order {}", n_max_, largest));
	}
}

BlockLayout BlockLayout::uniform(Index stations, int order) {
	if (stations < 1) {
		throw Error(ErrorCode::InvalidArgument, "layout needs at least one station");
	}
	return BlockLayout(std::vector<int>(static_cast<std::size_t>(stations), order), order);
}

bool BlockLayout::is_uniform() const {
	return std::all_of(orders_.begin(), orders_.end(), [&](int n) { return n == n_max_; });
}

DesignSystem build_uniform(const Dataset &ds, Index target, int order, std::optional<Index> rows) {
	return build_uniform(ds.values(), target, order, rows);
}

DesignSystem build_nonuniform(const Dataset &ds, Index target, const BlockLayout &layout,
                              std::optional<Index> rows) {
	return build_nonuniform(ds.values(), target, layout, rows);
}

} // namespace cstwsf
