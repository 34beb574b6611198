#pragma once

#include "cstwsf/design.hpp"
#include "cstwsf/types.hpp"

#include <string>
#include <vector>

namespace cstwsf {

struct SolverConfig {
	/// Block budget; clamped to the number of blocks at solve time.
	int k_max = 10;
	/// Stop once ||r|| <= residual_tol * ||b||.
	double residual_tol = 1e-6;
	bool normalize_columns = true;
	/// Center columns and b before solving; the mean offset is returned as
	/// SparseCoefficients::intercept.
	bool center = false;
	/// Jitter for rank-deficient support subproblems.
	double ridge = 1e-10;
	/// Stop once the relative residual decrease of an iteration drops below this.
	double min_gain = 0.01;

	void validate() const;
};

struct SolverDiagnostics {
	/// ||r|| after each iteration; entry 0 is ||b||.
	std::vector<double> residual_norms;
	/// Blocks whose columns are all zero (never selectable when normalizing).
	std::vector<Index> skipped_blocks;
	bool ridge_used = false;
	std::string stop_reason;
};

/// Block-sparse coefficient vector for one target. Block p of `values` holds
/// the coefficients of station p's lags 1..n_p; blocks outside `support` are
/// exactly zero.
struct SparseCoefficients {
	BlockLayout layout;
	/// Selected blocks in selection order.
	std::vector<Index> support;
	Vector values;
	Index target = 0;
	/// Column scale factors used during the solve (ones when disabled).
	Vector scaling;
	Index trained_at_hour = 0;
	SolverDiagnostics diagnostics;
	/// Constant term added to every prediction (zero for uncentered solves).
	double intercept = 0.0;

	auto block(Index p) const { return values.segment(layout.offset(p), layout.order(p)); }
	double residual_norm() const {
		return diagnostics.residual_norms.empty() ? 0.0 : diagnostics.residual_norms.back();
	}
};

/// Block orthogonal matching pursuit: greedily adds the block whose columns
/// correlate most with the residual (ties to the lowest index), refits least
/// squares on the selected blocks, and stops on the block budget, the
/// residual tolerance, or a stalled decrease.
SparseCoefficients bomp(const DesignSystem &sys, const SolverConfig &cfg);

/// argmin ||b - A x||^2 + ridge ||x||^2 via QR. With ridge == 0 the system must
/// have full column rank.
Vector least_squares(const Matrix &A, const Vector &b, double ridge);
Vector least_squares(const DesignSystem &sys, double ridge);

struct AffineFit {
	Vector x;
	double intercept = 0.0;
	bool ridge_used = false;
};

/// least_squares with a free constant term, solved on centered data; the ridge
/// penalty does not touch the intercept. Rank deficiency falls back to
/// `fallback_ridge` when it is positive.
AffineFit least_squares_affine(const Matrix &A, const Vector &b, double ridge, double fallback_ridge = 0.0);

/// Brute-force minimizer of ||b - A x|| over all supports of exactly k blocks
/// (k is clamped to the block count). Ties go to the lexicographically
/// smallest support.
SparseCoefficients exhaustive_oracle(const DesignSystem &sys, Index k, double ridge = 0.0);

/// Largest number of supports exhaustive_oracle will enumerate.
inline constexpr double kOracleSupportLimit = 1e5;

double binomial(Index n, Index k);

} // namespace cstwsf
