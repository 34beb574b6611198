#include "cstwsf/synth.hpp"

#include "cstwsf/error.hpp"

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace cstwsf {

std::vector<Matrix> PlantedModel::lag_matrices() const {
	const Index P = num_stations();
	std::vector<Matrix> lags(static_cast<std::size_t>(layout.n_max()), Matrix::Zero(P, P));
	for (Index i = 0; i < P; ++i) {
		const auto &c = coefficients[static_cast<std::size_t>(i)];
		for (Index p = 0; p < P; ++p) {
			for (int l = 1; l <= c.layout.order(p); ++l) {
				lags[static_cast<std::size_t>(l - 1)](i, p) = c.values[c.layout.offset(p) + l - 1];
			}
		}
	}
	return lags;
}

Matrix PlantedModel::companion() const {
	const Index P = num_stations();
	const Index n = layout.n_max();
	Matrix C = Matrix::Zero(P * n, P * n);
	const auto lags = lag_matrices();
	for (Index l = 0; l < n; ++l) {
		C.block(0, l * P, P, P) = lags[static_cast<std::size_t>(l)];
	}
	if (n > 1) {
		C.block(P, 0, P * (n - 1), P * (n - 1)).setIdentity();
	}
	return C;
}

double PlantedModel::spectral_radius() const {
	Eigen::EigenSolver<Matrix> solver(companion(), false);
	return solver.eigenvalues().cwiseAbs().maxCoeff();
}

PlantedModel plant(Index stations, const BlockLayout &layout, Index K, std::uint64_t seed, double noise_sigma,
                   double baseline_level) {
	if (layout.num_blocks() != stations) {
		throw Error(ErrorCode::InvalidArgument, "layout block count does not match station count");
	}
	if (K < 1 || K >= stations) {
		throw Error(ErrorCode::InvalidArgument, fmt::format("need 1 <= K < P (K={}, P={})", K, stations));
	}
	if (!(noise_sigma >= 0.0)) {
		throw Error(ErrorCode::InvalidArgument, "noise_sigma must be >= 0");
	}
	std::mt19937_64 rng(seed);
	std::normal_distribution<double> gauss(0.0, 1.0);

	PlantedModel model{layout, {}, noise_sigma, seed, baseline_level};
	for (Index i = 0; i < stations; ++i) {
		std::vector<Index> others;
		for (Index p = 0; p < stations; ++p) {
			if (p != i) {
				others.push_back(p);
			}
		}
		std::shuffle(others.begin(), others.end(), rng);
		std::vector<Index> support{i};
		support.insert(support.end(), others.begin(), others.begin() + (K - 1));
		std::sort(support.begin(), support.end());

		SparseCoefficients c{layout, support, Vector::Zero(layout.width()), i, Vector::Ones(layout.width()), 0, {}};
		for (const Index p : support) {
			for (int l = 0; l < layout.order(p); ++l) {
				c.values[layout.offset(p) + l] = gauss(rng);
			}
		}
		model.coefficients.push_back(std::move(c));
	}

	// Scaling lag l by s^l scales every companion eigenvalue by s.
	const double radius = model.spectral_radius();
	if (radius > 0.0) {
		const double s = kPlantedSpectralRadius / radius;
		for (auto &c : model.coefficients) {
			for (Index p = 0; p < stations; ++p) {
				for (int l = 0; l < layout.order(p); ++l) {
					c.values[layout.offset(p) + l] *= std::pow(s, l + 1);
				}
			}
		}
	}
	return model;
}

Simulation simulate(const PlantedModel &model, Index hours, Index burn_in, const std::optional<Matrix> &initial_state,
                    Hour start) {
	const Index P = model.num_stations();
	const Index n = model.layout.n_max();
	if (hours < n + 1) {
		throw Error(ErrorCode::InvalidArgument, "simulation length must be at least n_max + 1");
	}
	if (burn_in < 100) {
		throw Error(ErrorCode::InvalidArgument, "burn_in must be >= 100");
	}
	Matrix state = Matrix::Zero(P, n);
	if (initial_state) {
		if (initial_state->rows() != P || initial_state->cols() != n) {
			throw Error(ErrorCode::InvalidArgument, "initial state must be P x n_max");
		}
		state = *initial_state;
	}
	const auto lags = model.lag_matrices();
	std::mt19937_64 rng(model.seed ^ 0x9e3779b97f4a7c15ULL);
	std::normal_distribution<double> gauss(0.0, 1.0);

	const Index total = burn_in + hours;
	Matrix values(P, hours);
	Index clipped = 0;
	for (Index t = 0; t < total; ++t) {
		Vector next = Vector::Zero(P);
		for (Index l = 0; l < n; ++l) {
			next.noalias() += lags[static_cast<std::size_t>(l)] * state.col(l);
		}
		if (model.noise_sigma > 0.0) {
			for (Index i = 0; i < P; ++i) {
				next[i] += model.noise_sigma * gauss(rng);
			}
		}
		if (!next.allFinite() || next.cwiseAbs().maxCoeff() > 1e6) {
			throw Error(ErrorCode::Unstable, fmt::format("simulation diverged at step {}", t));
		}
		if (n > 1) {
			Matrix shifted(P, n);
			shifted.col(0) = next;
			shifted.rightCols(n - 1) = state.leftCols(n - 1);
			state.swap(shifted);
		} else {
			state.col(0) = next;
		}
		if (t >= burn_in) {
			for (Index i = 0; i < P; ++i) {
				double speed = model.baseline_level + next[i];
				if (speed < 0.0) {
					speed = 0.0;
					++clipped;
				}
				values(i, t - burn_in) = speed;
			}
		}
	}
	const double rate = static_cast<double>(clipped) / static_cast<double>(P * hours);
	if (rate >= 0.01) {
		throw Error(ErrorCode::ExcessiveClipping,
		            fmt::format("{:.2f}% of simulated cells clipped at 0 m/s", 100.0 * rate));
	}
	std::vector<StationMeta> stations;
	for (Index i = 0; i < P; ++i) {
		stations.push_back({fmt::format("S{:02d}", i + 1), fmt::format("synthetic station {}", i + 1), {}, {}});
	}
	return {Dataset(std::move(stations), start, std::move(values)), rate};
}

} // namespace cstwsf
