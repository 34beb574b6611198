#include "cstwsf/solver.hpp"

#include "cstwsf/error.hpp"

#include <Eigen/QR>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace cstwsf {

namespace {

struct SubproblemSolution {
	Vector x;
	bool ridge_used = false;
};

// Least squares on a column subset; falls back to the ridge-augmented system
// when the subset is rank deficient.
SubproblemSolution solve_columns(const Matrix &A, const Vector &b, const std::vector<Index> &cols, double ridge) {
	Matrix sub(A.rows(), static_cast<Index>(cols.size()));
	for (std::size_t j = 0; j < cols.size(); ++j) {
		sub.col(static_cast<Index>(j)) = A.col(cols[j]);
	}
	Eigen::ColPivHouseholderQR<Matrix> qr(sub);
	if (qr.rank() == sub.cols()) {
		return {qr.solve(b), false};
	}
	if (ridge <= 0.0) {
		throw Error(ErrorCode::RankDeficient, "rank-deficient support subproblem and ridge == 0");
	}
	return {least_squares(sub, b, ridge), true};
}

std::vector<Index> block_columns(const BlockLayout &layout, const std::vector<Index> &blocks) {
	std::vector<Index> cols;
	for (const Index p : blocks) {
		for (Index j = 0; j < layout.order(p); ++j) {
			cols.push_back(layout.offset(p) + j);
		}
	}
	return cols;
}

} // namespace

void SolverConfig::validate() const {
	if (k_max < 1) {
		throw Error(ErrorCode::InvalidArgument, "k_max must be >= 1");
	}
	if (!(residual_tol >= 0.0) || !(ridge >= 0.0) || !(min_gain >= 0.0)) {
		throw Error(ErrorCode::InvalidArgument, "residual_tol, ridge and min_gain must be >= 0");
	}
}

double binomial(Index n, Index k) {
	if (k < 0 || k > n) {
		return 0.0;
	}
	k = std::min(k, n - k);
	double result = 1.0;
	for (Index i = 1; i <= k; ++i) {
		result = result * static_cast<double>(n - k + i) / static_cast<double>(i);
	}
	return std::round(result);
}

Vector least_squares(const Matrix &A, const Vector &b, double ridge) {
	if (A.rows() < 1 || A.rows() != b.size()) {
		throw Error(ErrorCode::InvalidArgument, "least_squares needs M >= 1 rows matching b");
	}
	if (ridge < 0.0) {
		throw Error(ErrorCode::InvalidArgument, "ridge must be >= 0");
	}
	if (ridge == 0.0) {
		Eigen::ColPivHouseholderQR<Matrix> qr(A);
		if (qr.rank() < A.cols()) {
			throw Error(ErrorCode::RankDeficient,
			            fmt::format("design matrix is rank deficient (rank {} < {} columns); use ridge > 0",
			                        qr.rank(), A.cols()));
		}
		return qr.solve(b);
	}
	// [A; sqrt(ridge) I] x = [b; 0]
	const Index N = A.cols();
	Matrix augmented(A.rows() + N, N);
	augmented << A, std::sqrt(ridge) * Matrix::Identity(N, N);
	Vector rhs = Vector::Zero(A.rows() + N);
	rhs.head(A.rows()) = b;
	return augmented.householderQr().solve(rhs);
}

Vector least_squares(const DesignSystem &sys, double ridge) { return least_squares(sys.A, sys.b, ridge); }

AffineFit least_squares_affine(const Matrix &A, const Vector &b, double ridge, double fallback_ridge) {
	if (A.rows() < 1 || A.rows() != b.size()) {
		throw Error(ErrorCode::InvalidArgument, "least_squares needs M >= 1 rows matching b");
	}
	const RowVector column_mean = A.colwise().mean();
	const double b_mean = b.mean();
	const Matrix Ac = A.rowwise() - column_mean;
	const Vector bc = b.array() - b_mean;
	AffineFit fit;
	try {
		fit.x = least_squares(Ac, bc, ridge);
	} catch (const Error &e) {
		if (e.code() != ErrorCode::RankDeficient || fallback_ridge <= 0.0) {
			throw;
		}
		fit.x = least_squares(Ac, bc, fallback_ridge);
		fit.ridge_used = true;
	}
	fit.ridge_used = fit.ridge_used || ridge > 0.0;
	fit.intercept = b_mean - column_mean.dot(fit.x);
	return fit;
}

SparseCoefficients bomp(const DesignSystem &sys, const SolverConfig &cfg) {
	cfg.validate();
	const BlockLayout &layout = sys.layout;
	const Index P = layout.num_blocks();
	const Index N = layout.width();
	if (sys.A.cols() != N || sys.A.rows() != sys.b.size() || sys.A.rows() < 1) {
		throw Error(ErrorCode::InvalidArgument, "malformed design system");
	}

	SparseCoefficients out{layout, {}, Vector::Zero(N), sys.target, Vector::Ones(N), sys.origin_hour, {}};
	auto &diag = out.diagnostics;

	Matrix A = sys.A;
	Vector b = sys.b;
	RowVector column_mean = RowVector::Zero(N);
	double b_mean = 0.0;
	if (cfg.center) {
		column_mean = A.colwise().mean();
		b_mean = b.mean();
		A.rowwise() -= column_mean;
		b.array() -= b_mean;
	}
	std::vector<bool> selectable(static_cast<std::size_t>(P), true);
	if (cfg.normalize_columns || cfg.center) {
		for (Index j = 0; cfg.normalize_columns && j < N; ++j) {
			const double norm = A.col(j).norm();
			if (norm > 0.0) {
				out.scaling[j] = norm;
				A.col(j) /= norm;
			}
		}
		for (Index p = 0; p < P; ++p) {
			if (A.middleCols(layout.offset(p), layout.order(p)).cwiseAbs().maxCoeff() == 0.0) {
				selectable[static_cast<std::size_t>(p)] = false;
				diag.skipped_blocks.push_back(p);
			}
		}
	}

	out.intercept = b_mean;
	const double b_norm = b.norm();
	diag.residual_norms.push_back(b_norm);
	if (b_norm == 0.0) {
		diag.stop_reason = "zero_rhs";
		return out;
	}

	const Index k_max = std::min<Index>(cfg.k_max, P);
	Vector residual = b;
	Vector x_support;
	std::vector<Index> columns;
	while (true) {
		if (static_cast<Index>(out.support.size()) >= k_max) {
			diag.stop_reason = "k_max";
			break;
		}
		Index best = -1;
		double best_score = -1.0;
		const Vector correlation = A.transpose() * residual;
		for (Index p = 0; p < P; ++p) {
			if (!selectable[static_cast<std::size_t>(p)]) {
				continue;
			}
			const double score = correlation.segment(layout.offset(p), layout.order(p)).norm();
			if (score > best_score) {
				best_score = score;
				best = p;
			}
		}
		if (best < 0) {
			diag.stop_reason = "exhausted";
			break;
		}
		selectable[static_cast<std::size_t>(best)] = false;
		out.support.push_back(best);
		columns = block_columns(layout, out.support);

		auto solution = solve_columns(A, b, columns, cfg.ridge);
		diag.ridge_used = diag.ridge_used || solution.ridge_used;
		x_support = std::move(solution.x);
		residual = b;
		for (std::size_t j = 0; j < columns.size(); ++j) {
			residual.noalias() -= x_support[static_cast<Index>(j)] * A.col(columns[j]);
		}
		const double previous = diag.residual_norms.back();
		const double current = residual.norm();
		diag.residual_norms.push_back(current);

		if (current <= cfg.residual_tol * b_norm) {
			diag.stop_reason = "residual_tol";
			break;
		}
		if ((previous - current) / previous < cfg.min_gain) {
			diag.stop_reason = "min_gain";
			break;
		}
	}

	for (std::size_t j = 0; j < columns.size(); ++j) {
		const Index c = columns[j];
		out.values[c] = x_support[static_cast<Index>(j)] / out.scaling[c];
	}
	out.intercept = b_mean - column_mean.dot(out.values);
	return out;
}

SparseCoefficients exhaustive_oracle(const DesignSystem &sys, Index k, double ridge) {
	const BlockLayout &layout = sys.layout;
	const Index P = layout.num_blocks();
	if (k < 1) {
		throw Error(ErrorCode::InvalidArgument, "oracle block count must be >= 1");
	}
	k = std::min(k, P);
	if (binomial(P, k) > kOracleSupportLimit) {
		throw Error(ErrorCode::CombinatorialLimit,
		            fmt::format("C({}, {}) supports exceed the oracle limit of {}", P, k, kOracleSupportLimit));
	}

	SparseCoefficients best{layout, {}, Vector::Zero(layout.width()), sys.target, Vector::Ones(layout.width()),
	                        sys.origin_hour, {}};
	double best_norm = std::numeric_limits<double>::infinity();
	std::vector<Index> support(static_cast<std::size_t>(k));
	for (Index i = 0; i < k; ++i) {
		support[static_cast<std::size_t>(i)] = i;
	}
	while (true) {
		const auto cols = block_columns(layout, support);
		auto solution = solve_columns(sys.A, sys.b, cols, ridge);
		Vector residual = sys.b;
		for (std::size_t j = 0; j < cols.size(); ++j) {
			residual.noalias() -= solution.x[static_cast<Index>(j)] * sys.A.col(cols[j]);
		}
		const double norm = residual.norm();
		if (norm < best_norm) {
			best_norm = norm;
			best.support = support;
			best.values.setZero();
			for (std::size_t j = 0; j < cols.size(); ++j) {
				best.values[cols[j]] = solution.x[static_cast<Index>(j)];
			}
			best.diagnostics.ridge_used = solution.ridge_used;
		}
		// next combination in lexicographic order
		Index i = k - 1;
		while (i >= 0 && support[static_cast<std::size_t>(i)] == P - k + i) {
			--i;
		}
		if (i < 0) {
			break;
		}
		++support[static_cast<std::size_t>(i)];
		for (Index j = i + 1; j < k; ++j) {
			support[static_cast<std::size_t>(j)] = support[static_cast<std::size_t>(j - 1)] + 1;
		}
	}
	best.diagnostics.residual_norms = {sys.b.norm(), best_norm};
	best.diagnostics.stop_reason = "exhaustive";
	return best;
}

} // namespace cstwsf
