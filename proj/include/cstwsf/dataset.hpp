#pragma once

#include "cstwsf/types.hpp"

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cstwsf {

using Hour = std::chrono::sys_time<std::chrono::hours>;

/// Parses `YYYY-MM-DDTHH:00:00Z`. Throws Error(MalformedInput) otherwise.
Hour parse_timestamp(std::string_view text);
std::string format_timestamp(Hour t);

struct StationMeta {
	std::string id;
	std::string name;
	std::optional<double> latitude;
	std::optional<double> longitude;

	bool operator==(const StationMeta &) const = default;
};

/// P aligned hourly wind-speed series (m/s). Row p of `values()` is station p,
/// column t is hour `start() + t`. Immutable after construction.
class Dataset {
public:
	Dataset(std::vector<StationMeta> stations, Hour start, Matrix values, MaskMatrix filled_mask);
	Dataset(std::vector<StationMeta> stations, Hour start, Matrix values);

	const std::vector<StationMeta> &stations() const { return stations_; }
	Hour start() const { return start_; }
	Hour timestamp(Index hour) const { return start_ + std::chrono::hours(hour); }
	const Matrix &values() const { return values_; }
	const MaskMatrix &filled_mask() const { return filled_; }

	Index num_stations() const { return values_.rows(); }
	Index num_hours() const { return values_.cols(); }

	/// Index of the station with the given id; throws InvalidArgument if absent.
	Index station_index(std::string_view id) const;

	bool operator==(const Dataset &other) const;

private:
	std::vector<StationMeta> stations_;
	Hour start_;
	Matrix values_;
	MaskMatrix filled_;
};

/// Reads the wide CSV format (`timestamp,<id1>,<id2>,...`). Runs of missing
/// cells no longer than `gap_limit` hours are linearly interpolated and flagged
/// in the filled mask; longer runs, or missing cells at either end, reject
/// the input.
Dataset parse_csv(std::istream &in, int gap_limit = 3);
Dataset ingest_csv(const std::filesystem::path &path, int gap_limit = 3);

/// Hours [from_hour, to_hour).
Dataset slice(const Dataset &ds, Index from_hour, Index to_hour);

/// Appends `tail` to `head`. Both must have the same station ids and `tail`
/// must start exactly one hour after the last hour of `head`.
Dataset concatenate(const Dataset &head, const Dataset &tail);

void write_csv(const Dataset &ds, std::ostream &out);

/// Writes `<path>` (CSV) and `<path>.meta.json` (station metadata and the
/// run-length encoded filled mask).
void write_dataset(const Dataset &ds, const std::filesystem::path &path);

/// Reads a CSV and, when a `.meta.json` sidecar sits next to it, restores
/// station metadata and the filled mask from it.
Dataset read_dataset(const std::filesystem::path &path, int gap_limit = 3);

} // namespace cstwsf
