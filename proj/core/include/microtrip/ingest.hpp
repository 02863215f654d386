#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "microtrip/trajectory.hpp"

namespace microtrip {

inline constexpr double kDefaultStopSpeed = 0.5;
inline constexpr double kDefaultMinDuration = 34.0;
inline constexpr int kDatasetFormatVersion = 1;

struct RawTrace {
    std::string trip_id;
    std::vector<double> timestamps;
    std::vector<double> speeds;
};

struct SourceDigest {
    std::string source;
    std::string sha256;
};

struct Dataset {
    std::vector<MicroTrip> micro_trips;
    std::vector<SourceDigest> sources;
    std::string created_at;
    std::string config_digest;
};

/// Parses `trip_id,t,speed_mps` CSV. Traces come back in first-appearance
/// order of trip_id, each sorted by t. Negative speeds are clipped to 0.
std::vector<RawTrace> parse_trace_csv(std::istream& in);

/// Linear interpolation onto the integer grid [ceil(t_first), floor(t_last)].
SpeedTrajectory resample_1hz(const RawTrace& raw);

/// Splits at rest points (speed <= stop_speed). Each segment spans one rest
/// sample on each side of a run of motion; its endpoints are forced to 0.
/// Motion runs touching the start or end of the trace have no bracketing rest
/// and are dropped. Segments shorter than min_duration seconds are dropped.
std::vector<MicroTrip> segment_micro_trips(const SpeedTrajectory& traj,
                                           double stop_speed = kDefaultStopSpeed,
                                           double min_duration = kDefaultMinDuration);

struct SummaryRow {
    std::string attribute;
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double median = 0.0;
};

/// Six rows: duration (s, min), distance (m, km), avg speed (m/s, km/h).
std::vector<SummaryRow> dataset_summary(const std::vector<MicroTrip>& trips);

/// Current UTC time as ISO-8601, or SOURCE_DATE_EPOCH (seconds) when set.
std::string utc_timestamp();

void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// Serialized form used by save_dataset; exposed for tests.
std::string serialize_dataset(const Dataset& ds);
Dataset deserialize_dataset(const std::string& text);

} // namespace microtrip
