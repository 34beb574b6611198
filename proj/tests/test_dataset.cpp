#include "cstwsf/dataset.hpp"
#include "cstwsf/error.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <fmt/format.h>

#include <fstream>
#include <sstream>

using namespace cstwsf;
using cstwsf::test::make_dataset;

namespace {

Dataset parse(const std::string &text, int gap_limit = 3) {
	std::istringstream in(text);
	return parse_csv(in, gap_limit);
}

ErrorCode code_of(const std::string &text, int gap_limit = 3) {
	try {
		parse(text, gap_limit);
	} catch (const Error &e) {
		return e.code();
	}
	FAIL("expected an error");
	return ErrorCode::InvalidArgument;
}

} // namespace

TEST_CASE("timestamps round-trip and reject malformed input") {
	const auto t = parse_timestamp("2014-02-06T23:00:00Z");
	CHECK(format_timestamp(t) == "2014-02-06T23:00:00Z");
	CHECK(format_timestamp(t + std::chrono::hours(1)) == "2014-02-07T00:00:00Z");
	CHECK_THROWS_AS(parse_timestamp("2014-02-30T00:00:00Z"), Error);
	CHECK_THROWS_AS(parse_timestamp("2014-02-06T24:00:00Z"), Error);
	CHECK_THROWS_AS(parse_timestamp("2014-02-06T10:30:00Z"), Error);
	CHECK_THROWS_AS(parse_timestamp("2014-02-06 10:00:00"), Error);
}

TEST_CASE("single missing cell is interpolated and flagged") {
	const auto ds = parse("timestamp,A\n"
	                      "2014-01-06T00:00:00Z,1.0\n"
	                      "2014-01-06T01:00:00Z,\n"
	                      "2014-01-06T02:00:00Z,3.0\n",
	                      1);
	REQUIRE(ds.num_hours() == 3);
	CHECK(ds.values()(0, 1) == 2.0);
	CHECK(ds.filled_mask()(0, 1));
	CHECK_FALSE(ds.filled_mask()(0, 0));
	CHECK_FALSE(ds.filled_mask()(0, 2));
}

TEST_CASE("gap longer than the limit is rejected") {
	const std::string text = "timestamp,A\n"
	                         "2014-01-06T00:00:00Z,5.0\n"
	                         "2014-01-06T01:00:00Z,\n"
	                         "2014-01-06T02:00:00Z,\n"
	                         "2014-01-06T03:00:00Z,8.0\n";
	CHECK(code_of(text, 1) == ErrorCode::GapExceedsLimit);
	const auto ds = parse(text, 2);
	CHECK(ds.values()(0, 1) == doctest::Approx(6.0).epsilon(1e-15));
	CHECK(ds.values()(0, 2) == doctest::Approx(7.0).epsilon(1e-15));
}

TEST_CASE("boundary gaps are never interpolated") {
	CHECK(code_of("timestamp,A\n2014-01-06T00:00:00Z,\n2014-01-06T01:00:00Z,1\n") == ErrorCode::GapExceedsLimit);
	CHECK(code_of("timestamp,A\n2014-01-06T00:00:00Z,1\n2014-01-06T01:00:00Z,\n") == ErrorCode::GapExceedsLimit);
}

TEST_CASE("malformed CSV inputs") {
	CHECK(code_of("time,A\n2014-01-06T00:00:00Z,1\n") == ErrorCode::MalformedInput);
	CHECK(code_of("timestamp,A,B\n2014-01-06T00:00:00Z,1\n") == ErrorCode::MalformedInput);
	CHECK(code_of("timestamp,A\n2014-01-06T00:00:00Z,abc\n") == ErrorCode::MalformedInput);
	CHECK(code_of("timestamp,A\n2014-01-06T00:00:00Z,-0.5\n") == ErrorCode::MalformedInput);
	// skipped hour
	CHECK(code_of("timestamp,A\n2014-01-06T00:00:00Z,1\n2014-01-06T02:00:00Z,1\n") == ErrorCode::MalformedInput);
	// backwards
	CHECK(code_of("timestamp,A\n2014-01-06T01:00:00Z,1\n2014-01-06T00:00:00Z,1\n") == ErrorCode::MalformedInput);
	CHECK(code_of("timestamp,A\n2014-01-06T00:00:00Z,1\n2014-01-06T01:00:00Z,1\n", -1) == ErrorCode::InvalidArgument);
}

TEST_CASE("complete 3 x 48 input passes through") {
	std::ostringstream csv;
	csv << "timestamp,A,B,C\n";
	for (int t = 0; t < 48; ++t) {
		csv << format_timestamp(test::t0() + std::chrono::hours(t)) << ',' << t << ',' << 2 * t << ",0.5\n";
	}
	const auto ds = parse(csv.str());
	CHECK(ds.num_stations() == 3);
	CHECK(ds.num_hours() == 48);
	CHECK(ds.filled_mask().count() == 0);
	CHECK(ds.values()(1, 47) == 94.0);
	CHECK(ds.station_index("C") == 2);
	CHECK_THROWS_AS(ds.station_index("D"), Error);
}

TEST_CASE("dataset invariants") {
	CHECK_THROWS_AS(Dataset(test::station_ids(2), test::t0(), Matrix::Ones(3, 4)), Error);
	CHECK_THROWS_AS(Dataset({{"A", "", {}, {}}, {"A", "", {}, {}}}, test::t0(), Matrix::Ones(2, 4)), Error);
	CHECK_THROWS_AS(Dataset({{"A", "", 91.0, {}}}, test::t0(), Matrix::Ones(1, 4)), Error);
	CHECK_THROWS_AS(Dataset({{"A", "", {}, -181.0}}, test::t0(), Matrix::Ones(1, 4)), Error);
	CHECK_THROWS_AS(Dataset({{"", "", {}, {}}}, test::t0(), Matrix::Ones(1, 4)), Error);
	CHECK_THROWS_AS(make_dataset(-Matrix::Ones(1, 4)), Error);
}

TEST_CASE("slice") {
	std::mt19937_64 rng(1);
	const auto ds = make_dataset(test::random_speeds(2, 1080, rng));
	const auto train = slice(ds, 0, 720);
	const auto val = slice(ds, 720, 1080);
	CHECK(train.num_hours() == 720);
	CHECK(val.num_hours() == 360);
	CHECK(val.start() == ds.timestamp(720));
	CHECK(val.values()(1, 0) == ds.values()(1, 720));
	CHECK(slice(ds, 0, ds.num_hours()) == ds);
	CHECK_THROWS_AS(slice(ds, 5, 5), Error);
	CHECK_THROWS_AS(slice(ds, -1, 5), Error);
	CHECK_THROWS_AS(slice(ds, 0, 1081), Error);
	CHECK(concatenate(train, val) == ds);
	CHECK_THROWS_AS(concatenate(val, train), Error);
}

TEST_CASE("slice composition property") {
	std::mt19937_64 rng(2);
	const auto ds = make_dataset(test::random_speeds(3, 50, rng));
	std::uniform_int_distribution<Index> pick(0, 50);
	for (int trial = 0; trial < 200; ++trial) {
		Index a = pick(rng), b = pick(rng);
		if (a == b) {
			continue;
		}
		if (a > b) {
			std::swap(a, b);
		}
		const Index len = b - a;
		std::uniform_int_distribution<Index> inner(0, len);
		Index c = inner(rng), d = inner(rng);
		if (c == d) {
			continue;
		}
		if (c > d) {
			std::swap(c, d);
		}
		CHECK(slice(slice(ds, a, b), c, d) == slice(ds, a + c, a + d));
	}
}

TEST_CASE("interpolated runs stay between their bracketing observations") {
	std::mt19937_64 rng(3);
	std::uniform_real_distribution<double> u(0.0, 20.0);
	std::bernoulli_distribution gap(0.25);
	for (int trial = 0; trial < 50; ++trial) {
		std::ostringstream csv;
		csv << "timestamp,A\n";
		std::vector<double> observed;
		int run = 0;
		for (int t = 0; t < 60; ++t) {
			const bool missing = t > 0 && t < 59 && run < 3 && gap(rng);
			run = missing ? run + 1 : 0;
			const double v = u(rng);
			observed.push_back(missing ? -1.0 : v);
			csv << format_timestamp(test::t0() + std::chrono::hours(t)) << ',';
			if (!missing) {
				csv << fmt::format("{}", v);
			}
			csv << '\n';
		}
		const auto ds = parse(csv.str(), 3);
		for (Index t = 0; t < 60; ++t) {
			if (!ds.filled_mask()(0, t)) {
				continue;
			}
			Index l = t, r = t;
			while (ds.filled_mask()(0, l)) {
				--l;
			}
			while (ds.filled_mask()(0, r)) {
				++r;
			}
			const double lo = std::min(ds.values()(0, l), ds.values()(0, r));
			const double hi = std::max(ds.values()(0, l), ds.values()(0, r));
			CHECK(ds.values()(0, t) >= lo);
			CHECK(ds.values()(0, t) <= hi);
		}
	}
}

TEST_CASE("CSV round-trip preserves values exactly") {
	std::mt19937_64 rng(4);
	for (int trial = 0; trial < 10; ++trial) {
		const auto ds = make_dataset(test::random_speeds(4, 30, rng));
		std::ostringstream out;
		write_csv(ds, out);
		CHECK(parse(out.str()) == ds);
	}
}

TEST_CASE("sidecar restores metadata and filled mask") {
	const auto dir = test::temp_dir("sidecar");
	const auto raw = dir / "raw.csv";
	{
		std::ofstream f(raw);
		f << "timestamp,ACK,BOS\n"
		  << "2014-01-06T00:00:00Z,4,5\n"
		  << "2014-01-06T01:00:00Z,,6\n"
		  << "2014-01-06T02:00:00Z,6,\n"
		  << "2014-01-06T03:00:00Z,7,8\n";
	}
	const auto ds = ingest_csv(raw, 3);
	Dataset named({{"ACK", "Nantucket", 41.25, -70.06}, {"BOS", "Boston", 42.36, -71.01}}, ds.start(), ds.values(),
	              ds.filled_mask());
	write_dataset(named, dir / "canonical.csv");
	const auto back = read_dataset(dir / "canonical.csv");
	CHECK(back == named);
	CHECK(back.filled_mask().count() == 2);
	// without the sidecar the CSV alone still parses, with an empty mask
	std::filesystem::remove(dir / "canonical.csv.meta.json");
	const auto bare = read_dataset(dir / "canonical.csv");
	CHECK(bare.values() == named.values());
	CHECK(bare.filled_mask().count() == 0);
}
