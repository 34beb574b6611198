#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace cstwsf::detail {

/// Runs fn(i) for i in [0, count) on up to `jobs` threads (strided). Results
/// written by index are independent of `jobs`.
/// The first exception (lowest index) is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn &&fn) {
	const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(jobs, 1)));
	if (workers <= 1) {
		for (std::size_t i = 0; i < count; ++i) {
			fn(i);
		}
		return;
	}
	std::vector<std::exception_ptr> errors(count);
	std::vector<std::thread> threads;
	threads.reserve(workers);
	for (std::size_t w = 0; w < workers; ++w) {
		threads.emplace_back([&, w] {
			for (std::size_t i = w; i < count; i += workers) {
				try {
					fn(i);
				} catch (...) {
					errors[i] = std::current_exception();
				}
			}
		});
	}
	for (auto &t : threads) {
		t.join();
	}
	for (auto &e : errors) {
		if (e) {
			std::rethrow_exception(e);
		}
	}
}

} // namespace cstwsf::detail
