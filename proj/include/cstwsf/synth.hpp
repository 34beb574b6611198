#pragma once

#include "cstwsf/dataset.hpp"
#include "cstwsf/design.hpp"
#include "cstwsf/solver.hpp"
#include "cstwsf/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace cstwsf {

/// Planted block-sparse M-AR system. coefficients[i] generates station i:
/// z_i(t) = sum_p sum_l block_p[l-1] * z_p(t - l) + e_i(t), and the emitted
/// speed is baseline_level + z.
struct PlantedModel {
	BlockLayout layout;
	std::vector<SparseCoefficients> coefficients;
	double noise_sigma = 0.5;
	std::uint64_t seed = 0;
	double baseline_level = 8.0;

	Index num_stations() const { return layout.num_blocks(); }
	/// X_1..X_{n_max} as P x P matrices; X_l(i, p) multiplies z_p(t - l) in z_i(t).
	std::vector<Matrix> lag_matrices() const;
	/// Stacked first-order form of the full system.
	Matrix companion() const;
	double spectral_radius() const;
};

inline constexpr double kPlantedSpectralRadius = 0.95;

/// Draws supports of K blocks per target (self block always included) and
/// Gaussian coefficients, then rescales lag l by s^l so the companion spectral
/// radius is exactly 0.95.
PlantedModel plant(Index stations, const BlockLayout &layout, Index K, std::uint64_t seed,
                   double noise_sigma = 0.5, double baseline_level = 8.0);

struct Simulation {
	Dataset data;
	/// Fraction of emitted cells clipped at 0 m/s.
	double clipping_rate = 0.0;
};

/// Forward simulation. `initial_state` (P x n_max, column k = z at k+1 hours
/// before the first simulated hour) defaults to zeros. The first `burn_in`
/// hours are discarded. Fails when |z| exceeds 1e6 or 1% or more of the
/// emitted cells would be clipped.
Simulation simulate(const PlantedModel &model, Index hours, Index burn_in,
                    const std::optional<Matrix> &initial_state = std::nullopt,
                    Hour start = Hour{std::chrono::sys_days{std::chrono::year{2014} / 1 / 6}});

} // namespace cstwsf
