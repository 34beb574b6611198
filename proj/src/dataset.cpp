#include "cstwsf/dataset.hpp"

#include "cstwsf/error.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

namespace cstwsf {

namespace {

using nlohmann::json;

std::vector<std::string_view> split_fields(std::string_view line) {
	std::vector<std::string_view> fields;
	std::size_t begin = 0;
	while (true) {
		const auto comma = line.find(',', begin);
		if (comma == std::string_view::npos) {
			fields.push_back(line.substr(begin));
			return fields;
		}
		fields.push_back(line.substr(begin, comma - begin));
		begin = comma + 1;
	}
}

int parse_digits(std::string_view text, std::size_t pos, std::size_t len) {
	int value = 0;
	const auto *first = text.data() + pos;
	const auto *last = first + len;
	auto [ptr, ec] = std::from_chars(first, last, value);
	if (ec != std::errc() || ptr != last) {
		throw Error(ErrorCode::MalformedInput, fmt::format("bad timestamp '{}'", text));
	}
	return value;
}

double parse_speed(std::string_view cell, std::size_t line_no) {
	double value = 0.0;
	const auto *last = cell.data() + cell.size();
	auto [ptr, ec] = std::from_chars(cell.data(), last, value);
	if (ec != std::errc() || ptr != last) {
		throw Error(ErrorCode::MalformedInput,
		            fmt::format("line {}: cannot parse value '{}'", line_no, cell));
	}
	if (!std::isfinite(value)) {
		throw Error(ErrorCode::MalformedInput, fmt::format("line {}: non-finite value", line_no));
	}
	if (value < 0.0) {
		throw Error(ErrorCode::MalformedInput,
		            fmt::format("line {}: negative speed {}", line_no, value));
	}
	return value;
}

// Fills NaN runs in one station series in place.
void fill_gaps(Eigen::Ref<RowVector> series, Eigen::Ref<Eigen::Matrix<bool, 1, Eigen::Dynamic>> mask,
               int gap_limit, const std::string &station) {
	const Index T = series.size();
	Index t = 0;
	while (t < T) {
		if (!std::isnan(series[t])) {
			++t;
			continue;
		}
		const Index begin = t;
		while (t < T && std::isnan(series[t])) {
			++t;
		}
		const Index end = t;
		if (begin == 0 || end == T) {
			throw Error(ErrorCode::GapExceedsLimit,
			            fmt::format("station {}: missing values at series boundary (hours {}..{})",
			                        station, begin, end - 1));
		}
		if (end - begin > gap_limit) {
			throw Error(ErrorCode::GapExceedsLimit,
			            fmt::format("station {}: gap exceeds limit ({} > {} hours at hour {})", station,
			                        end - begin, gap_limit, begin));
		}
		const double left = series[begin - 1];
		const double right = series[end];
		const double span = static_cast<double>(end - begin + 1);
		for (Index k = begin; k < end; ++k) {
			const double w = static_cast<double>(k - begin + 1) / span;
			series[k] = left + w * (right - left);
			mask[k] = true;
		}
	}
}

json encode_mask_runs(const MaskMatrix &mask, Index row) {
	json runs = json::array();
	Index t = 0;
	while (t < mask.cols()) {
		if (!mask(row, t)) {
			++t;
			continue;
		}
		const Index begin = t;
		while (t < mask.cols() && mask(row, t)) {
			++t;
		}
		runs.push_back({begin, t - begin});
	}
	return runs;
}

} // namespace

Hour parse_timestamp(std::string_view text) {
	// YYYY-MM-DDTHH:00:00Z
	if (text.size() != 20 || text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':' ||
	    text.substr(14) != "00:00Z") {
		throw Error(ErrorCode::MalformedInput, fmt::format("bad timestamp '{}'", text));
	}
	using namespace std::chrono;
	const int y = parse_digits(text, 0, 4);
	const int m = parse_digits(text, 5, 2);
	const int d = parse_digits(text, 8, 2);
	const int h = parse_digits(text, 11, 2);
	const year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
	if (!ymd.ok() || h < 0 || h > 23) {
		throw Error(ErrorCode::MalformedInput, fmt::format("bad timestamp '{}'", text));
	}
	return Hour{sys_days{ymd}} + hours{h};
}

std::string format_timestamp(Hour t) {
	using namespace std::chrono;
	const auto day_start = floor<days>(t);
	const year_month_day ymd{day_start};
	const auto h = (t - day_start).count();
	return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:00:00Z", static_cast<int>(ymd.year()),
	                   static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), h);
}

Dataset::Dataset(std::vector<StationMeta> stations, Hour start, Matrix values, MaskMatrix filled_mask)
    : stations_(std::move(stations)), start_(start), values_(std::move(values)),
      filled_(std::move(filled_mask)) {
	if (static_cast<Index>(stations_.size()) != values_.rows()) {
		throw Error(ErrorCode::InvalidArgument, "station list does not match value rows");
	}
	if (filled_.rows() != values_.rows() || filled_.cols() != values_.cols()) {
		throw Error(ErrorCode::InvalidArgument, "filled mask shape does not match values");
	}
	std::set<std::string, std::less<>> seen;
	for (const auto &s : stations_) {
		if (s.id.empty()) {
			throw Error(ErrorCode::InvalidArgument, "empty station id");
		}
		if (!seen.insert(s.id).second) {
			throw Error(ErrorCode::InvalidArgument, fmt::format("duplicate station id '{}'", s.id));
		}
		if (s.latitude && (*s.latitude < -90.0 || *s.latitude > 90.0)) {
			throw Error(ErrorCode::InvalidArgument, fmt::format("station {}: latitude out of range", s.id));
		}
		if (s.longitude && (*s.longitude < -180.0 || *s.longitude > 180.0)) {
			throw Error(ErrorCode::InvalidArgument, fmt::format("station {}: longitude out of range", s.id));
		}
	}
	if (!values_.allFinite()) {
		throw Error(ErrorCode::InvalidArgument, "dataset contains non-finite values");
	}
	if (values_.size() > 0 && values_.minCoeff() < 0.0) {
		throw Error(ErrorCode::InvalidArgument, "dataset contains negative speeds");
	}
}

Dataset::Dataset(std::vector<StationMeta> stations, Hour start, Matrix values)
    : Dataset(std::move(stations), start, values, MaskMatrix::Constant(values.rows(), values.cols(), false)) {}

Index Dataset::station_index(std::string_view id) const {
	for (std::size_t i = 0; i < stations_.size(); ++i) {
		if (stations_[i].id == id) {
			return static_cast<Index>(i);
		}
	}
	throw Error(ErrorCode::InvalidArgument, fmt::format("unknown station id '{}'", id));
}

bool Dataset::operator==(const Dataset &other) const {
	return stations_ == other.stations_ && start_ == other.start_ && values_.rows() == other.values_.rows() &&
	       values_.cols() == other.values_.cols() && values_ == other.values_ && filled_ == other.filled_;
}

Dataset parse_csv(std::istream &in, int gap_limit) {
	if (gap_limit < 0) {
		throw Error(ErrorCode::InvalidArgument, "gap_limit must be >= 0");
	}
	std::string line;
	if (!std::getline(in, line)) {
		throw Error(ErrorCode::MalformedInput, "empty CSV");
	}
	if (!line.empty() && line.back() == '\r') {
		line.pop_back();
	}
	const auto header = split_fields(line);
	if (header.size() < 2 || header[0] != "timestamp") {
		throw Error(ErrorCode::MalformedInput, "header must be 'timestamp,<id1>,...'");
	}
	std::vector<StationMeta> stations;
	for (std::size_t i = 1; i < header.size(); ++i) {
		stations.push_back(StationMeta{std::string(header[i]), std::string(header[i]), {}, {}});
	}
	const auto P = static_cast<Index>(stations.size());

	std::vector<std::vector<double>> columns;
	std::optional<Hour> start;
	std::size_t line_no = 1;
	while (std::getline(in, line)) {
		++line_no;
		if (!line.empty() && line.back() == '\r') {
			line.pop_back();
		}
		if (line.empty()) {
			continue;
		}
		const auto fields = split_fields(line);
		if (static_cast<Index>(fields.size()) != P + 1) {
			throw Error(ErrorCode::MalformedInput,
			            fmt::format("line {}: expected {} fields, got {}", line_no, P + 1, fields.size()));
		}
		const Hour ts = parse_timestamp(fields[0]);
		if (!start) {
			start = ts;
		} else if (ts != *start + std::chrono::hours(static_cast<long>(columns.size()))) {
			throw Error(ErrorCode::MalformedInput,
			            fmt::format("line {}: timestamp {} breaks the hourly sequence", line_no, fields[0]));
		}
		std::vector<double> column(static_cast<std::size_t>(P));
		for (Index p = 0; p < P; ++p) {
			const auto cell = fields[static_cast<std::size_t>(p) + 1];
			column[static_cast<std::size_t>(p)] =
			    cell.empty() ? std::numeric_limits<double>::quiet_NaN() : parse_speed(cell, line_no);
		}
		columns.push_back(std::move(column));
	}
	if (columns.empty()) {
		throw Error(ErrorCode::MalformedInput, "CSV has no data rows");
	}
	const auto T = static_cast<Index>(columns.size());
	Matrix values(P, T);
	for (Index t = 0; t < T; ++t) {
		for (Index p = 0; p < P; ++p) {
			values(p, t) = columns[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
		}
	}
	MaskMatrix mask = MaskMatrix::Constant(P, T, false);
	for (Index p = 0; p < P; ++p) {
		RowVector row = values.row(p);
		Eigen::Matrix<bool, 1, Eigen::Dynamic> mrow = mask.row(p);
		fill_gaps(row, mrow, gap_limit, stations[static_cast<std::size_t>(p)].id);
		values.row(p) = row;
		mask.row(p) = mrow;
	}
	return Dataset(std::move(stations), *start, std::move(values), std::move(mask));
}

Dataset ingest_csv(const std::filesystem::path &path, int gap_limit) {
	std::ifstream in(path);
	if (!in) {
		throw Error(ErrorCode::IoError, fmt::format("cannot open {}", path.string()));
	}
	return parse_csv(in, gap_limit);
}

Dataset slice(const Dataset &ds, Index from_hour, Index to_hour) {
	if (from_hour < 0 || to_hour > ds.num_hours() || from_hour >= to_hour) {
		throw Error(ErrorCode::InvalidArgument,
		            fmt::format("slice [{}, {}) out of range for T={}", from_hour, to_hour, ds.num_hours()));
	}
	const Index len = to_hour - from_hour;
	return Dataset(ds.stations(), ds.timestamp(from_hour), ds.values().middleCols(from_hour, len),
	               ds.filled_mask().middleCols(from_hour, len));
}

Dataset concatenate(const Dataset &head, const Dataset &tail) {
	if (head.num_stations() != tail.num_stations()) {
		throw Error(ErrorCode::InvalidArgument, "cannot concatenate datasets with different station counts");
	}
	for (Index p = 0; p < head.num_stations(); ++p) {
		if (head.stations()[static_cast<std::size_t>(p)].id != tail.stations()[static_cast<std::size_t>(p)].id) {
			throw Error(ErrorCode::InvalidArgument, "cannot concatenate datasets with different station ids");
		}
	}
	if (tail.start() != head.timestamp(head.num_hours())) {
		throw Error(ErrorCode::InvalidArgument, "datasets are not contiguous in time");
	}
	Matrix values(head.num_stations(), head.num_hours() + tail.num_hours());
	values << head.values(), tail.values();
	MaskMatrix mask(values.rows(), values.cols());
	mask << head.filled_mask(), tail.filled_mask();
	return Dataset(head.stations(), head.start(), std::move(values), std::move(mask));
}

void write_csv(const Dataset &ds, std::ostream &out) {
	std::string buf = "timestamp";
	for (const auto &s : ds.stations()) {
		buf += ',';
		buf += s.id;
	}
	buf += '\n';
	for (Index t = 0; t < ds.num_hours(); ++t) {
		buf += format_timestamp(ds.timestamp(t));
		for (Index p = 0; p < ds.num_stations(); ++p) {
			fmt::format_to(std::back_inserter(buf), ",{}", ds.values()(p, t));
		}
		buf += '\n';
	}
	out << buf;
}

void write_dataset(const Dataset &ds, const std::filesystem::path &path) {
	{
		std::ofstream out(path, std::ios::binary);
		if (!out) {
			throw Error(ErrorCode::IoError, fmt::format("cannot write {}", path.string()));
		}
		write_csv(ds, out);
	}
	json meta;
	meta["start"] = format_timestamp(ds.start());
	meta["hours"] = ds.num_hours();
	meta["units"] = "m/s";
	json stations = json::array();
	json filled = json::object();
	for (Index p = 0; p < ds.num_stations(); ++p) {
		const auto &s = ds.stations()[static_cast<std::size_t>(p)];
		json entry{{"id", s.id}, {"name", s.name}};
		entry["latitude"] = s.latitude ? json(*s.latitude) : json(nullptr);
		entry["longitude"] = s.longitude ? json(*s.longitude) : json(nullptr);
		stations.push_back(std::move(entry));
		filled[s.id] = encode_mask_runs(ds.filled_mask(), p);
	}
	meta["stations"] = std::move(stations);
	meta["filled_runs"] = std::move(filled);

	auto sidecar = path;
	sidecar += ".meta.json";
	std::ofstream out(sidecar, std::ios::binary);
	if (!out) {
		throw Error(ErrorCode::IoError, fmt::format("cannot write {}", sidecar.string()));
	}
	out << meta.dump(2) << '\n';
}

Dataset read_dataset(const std::filesystem::path &path, int gap_limit) {
	Dataset ds = ingest_csv(path, gap_limit);
	auto sidecar = path;
	sidecar += ".meta.json";
	if (!std::filesystem::exists(sidecar)) {
		return ds;
	}
	std::ifstream in(sidecar);
	json meta;
	try {
		meta = json::parse(in);
	} catch (const json::exception &e) {
		throw Error(ErrorCode::MalformedInput, fmt::format("{}: {}", sidecar.string(), e.what()));
	}
	try {
		if (meta.at("hours").get<Index>() != ds.num_hours() ||
		    parse_timestamp(meta.at("start").get<std::string>()) != ds.start()) {
			throw Error(ErrorCode::MalformedInput, "sidecar does not match CSV extent");
		}
		const auto &entries = meta.at("stations");
		if (static_cast<Index>(entries.size()) != ds.num_stations()) {
			throw Error(ErrorCode::MalformedInput, "sidecar station count does not match CSV");
		}
		std::vector<StationMeta> stations;
		MaskMatrix mask = ds.filled_mask();
		for (Index p = 0; p < ds.num_stations(); ++p) {
			const auto &e = entries[static_cast<std::size_t>(p)];
			StationMeta s;
			s.id = e.at("id").get<std::string>();
			if (s.id != ds.stations()[static_cast<std::size_t>(p)].id) {
				throw Error(ErrorCode::MalformedInput, "sidecar station order does not match CSV");
			}
			s.name = e.value("name", s.id);
			if (e.contains("latitude") && !e["latitude"].is_null()) {
				s.latitude = e["latitude"].get<double>();
			}
			if (e.contains("longitude") && !e["longitude"].is_null()) {
				s.longitude = e["longitude"].get<double>();
			}
			for (const auto &run : meta.at("filled_runs").at(s.id)) {
				const auto begin = run.at(0).get<Index>();
				const auto len = run.at(1).get<Index>();
				if (begin < 0 || len < 0 || begin + len > ds.num_hours()) {
					throw Error(ErrorCode::MalformedInput, "sidecar filled run out of range");
				}
				mask.row(p).segment(begin, len).setConstant(true);
			}
			stations.push_back(std::move(s));
		}
		return Dataset(std::move(stations), ds.start(), ds.values(), std::move(mask));
	} catch (const json::exception &e) {
		throw Error(ErrorCode::MalformedInput, fmt::format("{}: {}", sidecar.string(), e.what()));
	}
}

} // namespace cstwsf
