#include "cstwsf/error.hpp"
#include "cstwsf/forecast.hpp"
#include "cstwsf/serialize.hpp"
#include "cstwsf/synth.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace cstwsf;
using cstwsf::test::make_dataset;

namespace {

ForecastConfig config(MethodSpec method, int horizon, Index window) {
	ForecastConfig cfg;
	cfg.method = std::move(method);
	cfg.horizon = horizon;
	cfg.window = window;
	return cfg;
}

// Three coupled stations with some persistence, speeds around 8 m/s.
Matrix coupled_series(Index T, std::uint64_t seed) {
	const auto model = plant(3, BlockLayout::uniform(3, 2), 2, seed);
	return simulate(model, T, 150).data.values();
}

} // namespace

TEST_CASE("persistence repeats the last observation") {
	Matrix y(1, 8);
	y << 1, 2, 3, 4, 7, 9, 9, 9;
	const auto run = backtest(make_dataset(y), 0, 5, config(method::Persistence{}, 3, 720));
	REQUIRE(run.points.size() == 3);
	for (const auto &p : run.points) {
		CHECK(p.predicted == 7.0);
	}
	CHECK(run.coefficients_log.empty());
	CHECK(run.method == "persistence");
}

TEST_CASE("ar(1) follows the geometric recursion") {
	Matrix y(1, 13);
	for (Index t = 0; t < 10; ++t) {
		y(0, t) = 8.0 * std::pow(2.0, static_cast<double>(9 - t));
	}
	y(0, 10) = 4.0;
	y(0, 11) = 2.0;
	y(0, 12) = 1.0;
	for (const bool intercept : {false, true}) {
		auto cfg = config(method::Ar{1}, 3, 10);
		cfg.intercept = intercept;
		const auto run = backtest(make_dataset(y), 0, 10, cfg);
		REQUIRE(run.points.size() == 3);
		CHECK(run.points[0].predicted == doctest::Approx(4.0).epsilon(1e-9));
		CHECK(run.points[1].predicted == doctest::Approx(2.0).epsilon(1e-9));
		CHECK(run.points[2].predicted == doctest::Approx(1.0).epsilon(1e-9));
		CHECK(run.coefficients_log.front().block(0)[0] == doctest::Approx(0.5).epsilon(1e-12));
	}
}

TEST_CASE("cst_uniform reproduces a noiseless planted system one step ahead") {
	auto model = plant(5, BlockLayout::uniform(5, 2), 2, 77);
	model.noise_sigma = 0.0;
	Matrix init(5, 2);
	init << 3, -2, 1, 2, -3, 1, 2, 2, -1, 3;
	const auto sim = simulate(model, 260, 100, init);
	const auto run = backtest(sim.data, 0, 230, config(method::CstUniform{2}, 6, 200));
	REQUIRE(run.points.size() == 30);
	for (const auto &p : run.points) {
		if (p.step == 1) {
			CHECK(std::abs(p.predicted - p.actual) <= 1e-6);
		}
	}
}

TEST_CASE("single-station ar equals ls_mar") {
	Matrix y = coupled_series(300, 5).topRows(1);
	for (const bool intercept : {false, true}) {
		const auto ar = fit_ar(y, 3, 300, 1, intercept);
		const auto ls = fit_ls_mar(y, 3, 300, 1, intercept);
		CHECK((ar.stations[0].values - ls.stations[0].values).cwiseAbs().maxCoeff() < 1e-12);
		CHECK(ar.stations[0].intercept == doctest::Approx(ls.stations[0].intercept).epsilon(1e-12));
	}
}

TEST_CASE("cst with every block selected equals dense least squares") {
	const Matrix y = coupled_series(400, 9);
	SolverConfig cfg;
	cfg.k_max = 3;
	cfg.residual_tol = 0.0;
	cfg.min_gain = 0.0;
	for (const bool center : {false, true}) {
		cfg.center = center;
		const auto cst = fit_cst(y, std::vector<BlockLayout>(3, BlockLayout::uniform(3, 2)), cfg, 400);
		const auto ls = fit_ls_mar(y, 2, 400, 1, center);
		for (std::size_t i = 0; i < 3; ++i) {
			CHECK(cst.stations[i].support.size() == 3);
			CHECK((cst.stations[i].values - ls.stations[i].values).cwiseAbs().maxCoeff() < 1e-8);
			CHECK(std::abs(cst.stations[i].intercept - ls.stations[i].intercept) < 1e-8);
		}
	}
}

TEST_CASE("persistence ignores the window") {
	const auto ds = make_dataset(coupled_series(120, 3));
	const auto a = backtest(ds, 1, 100, config(method::Persistence{}, 6, 10));
	const auto b = backtest(ds, 1, 100, config(method::Persistence{}, 6, 90));
	CHECK(a.predictions() == b.predictions());
	CHECK(fit_persistence(3, 0).stations[2].values == fit_persistence(3, 50).stations[2].values);
}

TEST_CASE("no prediction depends on later observations") {
	const Matrix y = coupled_series(200, 13);
	const auto cfg = config(method::CstUniform{2}, 6, 120);
	const auto base = backtest(make_dataset(y), 0, 150, cfg);
	for (const Index t : {150, 153, 161, 175, 199}) {
		Matrix mutated = y;
		mutated(t % 3, t) += 5.0;
		mutated(0, t) += 3.0;
		const auto run = backtest(make_dataset(mutated), 0, 150, cfg);
		for (std::size_t k = 0; k < run.points.size(); ++k) {
			if (run.points[k].hour <= t) {
				CHECK(run.points[k].predicted == base.points[k].predicted);
			}
		}
	}
}

TEST_CASE("retrain cadence and final partial cycle") {
	const auto ds = make_dataset(coupled_series(170, 4));
	const auto run = backtest(ds, 2, 150, config(method::LsMar{2}, 6, 100));
	CHECK(run.points.size() == 20);
	CHECK(run.coefficients_log.size() == 4);
	CHECK(run.retrain_points == std::vector<Index>{150, 156, 162, 168});
	CHECK(run.points.back().step == 2);
	CHECK(run.points[6].step == 1);
	CHECK(run.points.front().hour == 150);
	CHECK(run.points.back().hour == 169);
	for (const auto &c : run.coefficients_log) {
		CHECK(c.target == 2);
	}
}

TEST_CASE("horizon one matches the first step of longer cycles") {
	const auto ds = make_dataset(coupled_series(200, 21));
	for (const auto &m : std::vector<MethodSpec>{method::Ar{2}, method::LsMar{2}, method::CstUniform{2}}) {
		const auto one = backtest(ds, 0, 150, config(m, 1, 120));
		const auto six = backtest(ds, 0, 150, config(m, 6, 120));
		REQUIRE(one.points.size() == six.points.size());
		for (std::size_t k = 0; k < six.points.size(); ++k) {
			if (six.points[k].step == 1) {
				CHECK(one.points[k].predicted == six.points[k].predicted);
			}
		}
	}
}

TEST_CASE("parallel fits are bit-identical") {
	const auto ds = make_dataset(coupled_series(200, 18));
	for (const auto &m : std::vector<MethodSpec>{method::Ar{3}, method::LsMar{2}, method::CstUniform{3}}) {
		auto cfg = config(m, 6, 120);
		const auto serial = backtest(ds, 1, 160, cfg);
		cfg.jobs = 4;
		const auto parallel = backtest(ds, 1, 160, cfg);
		CHECK(serial.predictions() == parallel.predictions());
	}
}

TEST_CASE("backtest preconditions") {
	const auto ds = make_dataset(coupled_series(100, 2));
	try {
		backtest(ds, 0, 50, config(method::LsMar{2}, 6, 60));
		FAIL("short training span accepted");
	} catch (const Error &e) {
		CHECK(e.code() == ErrorCode::InsufficientData);
	}
	CHECK_THROWS_AS(backtest(ds, 0, 97, config(method::Persistence{}, 6, 60)), Error);
	CHECK_THROWS_AS(backtest(ds, 0, 80, config(method::Persistence{}, 0, 60)), Error);
	CHECK_THROWS_AS(backtest(ds, 5, 80, config(method::Persistence{}, 6, 60)), Error);
}

TEST_CASE("ls_mar with more columns than rows falls back to ridge") {
	const auto ds = make_dataset(coupled_series(60, 6));
	const auto run = backtest(ds, 0, 50, config(method::LsMar{4}, 5, 14));
	CHECK(run.coefficients_log.front().diagnostics.ridge_used);
	CHECK_FALSE(run.notes.empty());
}

TEST_CASE("method names") {
	CHECK(method_name(parse_method("ar(3)")) == "ar(3)");
	CHECK(method_name(parse_method("ls_mar(12)")) == "ls_mar(12)");
	CHECK(method_name(parse_method("cst_uniform(2)")) == "cst_uniform(2)");
	CHECK(method_name(parse_method("cst_nonuniform")) == "cst_nonuniform");
	CHECK(method_slug("cst_uniform(3)") == "cst_uniform_3");
	for (const char *bad : {"ar", "ar()", "ar(0)", "ar(x)", "lasso(2)", "ls_mar(3", ""}) {
		try {
			parse_method(bad);
			FAIL("accepted " << bad);
		} catch (const Error &e) {
			CHECK(e.code() == ErrorCode::ConfigError);
		}
	}
}

TEST_CASE("run serialization round-trips") {
	const auto ds = make_dataset(coupled_series(140, 12));
	const auto run = backtest(ds, 1, 128, config(method::CstUniform{2}, 6, 100));
	const auto back = run_from_json(run_to_json(run));
	CHECK(back.predictions() == run.predictions());
	CHECK(back.actuals() == run.actuals());
	CHECK(back.retrain_points == run.retrain_points);
	REQUIRE(back.coefficients_log.size() == run.coefficients_log.size());
	CHECK(back.coefficients_log[1].values == run.coefficients_log[1].values);
	CHECK(back.coefficients_log[1].support == run.coefficients_log[1].support);
	CHECK(back.coefficients_log[1].intercept == run.coefficients_log[1].intercept);

	std::ostringstream csv;
	write_run_csv(run, csv);
	std::istringstream in(csv.str());
	const auto parsed = read_run_csv(in);
	CHECK(parsed.predictions() == run.predictions());
	CHECK(parsed.method == run.method);
}
