#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace microtrip {

/// Fixed diffusion window length in seconds (samples at 1 Hz).
inline constexpr std::size_t kWindowLength = 512;

/// Endpoint tolerance used by the evaluation-side boundary metric (m/s).
inline constexpr double kEvalBoundaryTolerance = 0.1;

/// 1 Hz speed samples in m/s. Every sample is finite and non-negative and
/// there are at least two samples.
class SpeedTrajectory {
public:
    explicit SpeedTrajectory(std::vector<double> samples);

    std::span<const double> samples() const { return samples_; }
    std::size_t size() const { return samples_.size(); }
    double operator[](std::size_t i) const { return samples_[i]; }

private:
    std::vector<double> samples_;
};

/// a_t = v_{t+1} - v_t; one element shorter than its speed source.
using AccelSeries = std::vector<double>;

struct TripStats {
    double duration_s = 0.0;   ///< samples - 1
    double distance_m = 0.0;   ///< rectangle rule: sum of v_t for t < T
    double avg_speed_mps = 0.0;
    double max_speed_mps = 0.0;
    double accel_std = 0.0;    ///< population std of the acceleration series
};

/// A speed trajectory that starts and ends exactly at rest.
class MicroTrip {
public:
    explicit MicroTrip(std::vector<double> samples);
    explicit MicroTrip(SpeedTrajectory trajectory);

    const SpeedTrajectory& trajectory() const { return trajectory_; }
    std::span<const double> speeds() const { return trajectory_.samples(); }
    std::size_t size() const { return trajectory_.size(); }
    const TripStats& stats() const { return stats_; }

private:
    SpeedTrajectory trajectory_;
    TripStats stats_;
};

AccelSeries derive_acceleration(std::span<const double> speeds);

/// Second difference of speed: j_t = a_{t+1} - a_t.
std::vector<double> derive_jerk(std::span<const double> accel);

TripStats trip_stats(std::span<const double> speeds);
inline TripStats trip_stats(const MicroTrip& trip) { return trip.stats(); }

/// Fixed-length (512) window with one (speed) or two (speed, acceleration)
/// channels stored channel-major. Pad samples are exactly zero.
struct PaddedWindow {
    int channels = 1;
    std::size_t valid_length = 0;
    std::vector<double> values;          ///< channels * kWindowLength
    std::vector<std::uint8_t> valid_mask;  ///< kWindowLength entries

    std::span<double> channel(int c) {
        return std::span<double>(values).subspan(static_cast<std::size_t>(c) * kWindowLength,
                                                 kWindowLength);
    }
    std::span<const double> channel(int c) const {
        return std::span<const double>(values).subspan(
            static_cast<std::size_t>(c) * kWindowLength, kWindowLength);
    }
};

/// Right-pads with zeros (or keeps the first 512 samples). With two channels
/// the second holds a_t over the valid region; its last valid slot is 0.
PaddedWindow pad_or_truncate(std::span<const double> speeds, int channels = 1);

/// Recomputes channel 1 from channel 0 over the valid region.
void refresh_acceleration_channel(PaddedWindow& window);

enum class ViolationKind { TooShort, NonFinite, Negative, Boundary };

struct Violation {
    ViolationKind kind;
    std::size_t index = 0;
    double value = 0.0;
};

struct ValidityReport {
    bool valid = true;
    std::vector<Violation> violations;
};

/// Checks length, finiteness, non-negativity, and |v_0|, |v_T| <= tolerance.
ValidityReport validate_micro_trip(std::span<const double> speeds, double boundary_tolerance = 0.0);

std::string to_string(ViolationKind kind);

} // namespace microtrip
