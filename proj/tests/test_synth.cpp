#include "cstwsf/error.hpp"
#include "cstwsf/synth.hpp"

#include <doctest.h>

#include <cmath>

using namespace cstwsf;

namespace {

// P = 1 model z(t) = a z(t-1) + e(t).
PlantedModel ar1_model(double a, double sigma, double baseline, std::uint64_t seed) {
	const BlockLayout layout({1}, 1);
	SparseCoefficients c{layout, {0}, Vector::Constant(1, a), 0, Vector::Ones(1), 0, {}};
	return PlantedModel{layout, {c}, sigma, seed, baseline};
}

ErrorCode code_of(auto &&fn) {
	try {
		fn();
	} catch (const Error &e) {
		return e.code();
	}
	FAIL("expected an error");
	return ErrorCode::InvalidArgument;
}

} // namespace

TEST_CASE("planted models sit at the target spectral radius") {
	for (std::uint64_t seed = 1; seed <= 8; ++seed) {
		const auto uniform = plant(20, BlockLayout::uniform(20, 3), 3, seed);
		CHECK(std::abs(uniform.spectral_radius() - 0.95) <= 1e-9);
		const auto mixed = plant(6, BlockLayout({1, 3, 2, 1, 2, 1}, 3), 2, seed);
		CHECK(std::abs(mixed.spectral_radius() - 0.95) <= 1e-9);
	}
}

TEST_CASE("planted supports") {
	const auto model = plant(10, BlockLayout::uniform(10, 2), 4, 3);
	for (Index i = 0; i < 10; ++i) {
		const auto &c = model.coefficients[static_cast<std::size_t>(i)];
		CHECK(c.target == i);
		CHECK(c.support.size() == 4);
		CHECK(std::find(c.support.begin(), c.support.end(), i) != c.support.end());
		for (Index p = 0; p < 10; ++p) {
			const bool in = std::find(c.support.begin(), c.support.end(), p) != c.support.end();
			CHECK(c.block(p).isZero(0.0) == !in);
		}
	}
}

TEST_CASE("one block per target decouples the stations") {
	const auto model = plant(5, BlockLayout::uniform(5, 2), 1, 9);
	for (const auto &X : model.lag_matrices()) {
		CHECK(Matrix(X.diagonal().asDiagonal()) == X);
	}
}

TEST_CASE("plant and simulate are deterministic") {
	const auto a = plant(6, BlockLayout::uniform(6, 2), 2, 42);
	const auto b = plant(6, BlockLayout::uniform(6, 2), 2, 42);
	for (std::size_t i = 0; i < 6; ++i) {
		CHECK(a.coefficients[i].values == b.coefficients[i].values);
		CHECK(a.coefficients[i].support == b.coefficients[i].support);
	}
	CHECK(simulate(a, 200, 100).data == simulate(b, 200, 100).data);
	CHECK_FALSE(simulate(a, 200, 100).data == simulate(plant(6, BlockLayout::uniform(6, 2), 2, 43), 200, 100).data);
}

TEST_CASE("zero noise, zero state and zero baseline stay at zero") {
	auto model = plant(4, BlockLayout::uniform(4, 2), 2, 5, 0.0, 0.0);
	const auto sim = simulate(model, 50, 100);
	CHECK(sim.data.values().isZero(0.0));
	CHECK(sim.clipping_rate == 0.0);
}

TEST_CASE("noiseless simulations satisfy the planted regression exactly") {
	for (const auto &layout : {BlockLayout::uniform(5, 3), BlockLayout({2, 1, 3, 1, 2}, 3)}) {
		auto model = plant(5, layout, 2, 17, 0.0, 8.0);
		Matrix init(5, 3);
		init << 2, -1, 1, 0.5, 1, -2, -1, 2, 1, 3, 0, -1, 1, 1, 2;
		const auto sim = simulate(model, 200, 100, init);
		const Matrix z = sim.data.values().array() - model.baseline_level;
		for (Index i = 0; i < 5; ++i) {
			const auto sys = build_nonuniform(z, i, layout);
			const auto &x = model.coefficients[static_cast<std::size_t>(i)].values;
			CHECK((sys.b - sys.A * x).norm() < 1e-9);
		}
	}
}

TEST_CASE("long AR(1) simulation matches the theoretical autocovariance") {
	const double a = 0.7;
	const double sigma = 1.0;
	const auto sim = simulate(ar1_model(a, sigma, 50.0, 123), 50000, 200);
	const RowVector y = sim.data.values().row(0).array() - sim.data.values().row(0).mean();
	const double T = static_cast<double>(y.size());
	for (int lag = 0; lag <= 3; ++lag) {
		const double sample = y.head(y.size() - lag).dot(y.tail(y.size() - lag)) / T;
		const double expected = std::pow(a, lag) * sigma * sigma / (1.0 - a * a);
		CHECK(std::abs(sample - expected) <= 0.05 * expected);
	}
}

TEST_CASE("simulation failures") {
	CHECK(code_of([] { plant(5, BlockLayout::uniform(5, 1), 5, 1); }) == ErrorCode::InvalidArgument);
	CHECK(code_of([] { plant(5, BlockLayout::uniform(5, 1), 0, 1); }) == ErrorCode::InvalidArgument);
	CHECK(code_of([] { plant(4, BlockLayout::uniform(5, 1), 2, 1); }) == ErrorCode::InvalidArgument);
	const auto model = plant(3, BlockLayout::uniform(3, 2), 2, 1);
	CHECK(code_of([&] { simulate(model, 100, 99); }) == ErrorCode::InvalidArgument);
	CHECK(code_of([&] { simulate(model, 2, 100); }) == ErrorCode::InvalidArgument);
	CHECK(code_of([] { simulate(ar1_model(0.5, 1.0, 0.0, 1), 500, 100); }) == ErrorCode::ExcessiveClipping);
	CHECK(code_of([] { simulate(ar1_model(1.5, 1.0, 8.0, 1), 500, 100); }) == ErrorCode::Unstable);
}
