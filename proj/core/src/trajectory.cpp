#include "microtrip/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "microtrip/error.hpp"

namespace microtrip {

namespace {

double population_std(std::span<const double> xs) {
    if (xs.empty()) {
        return 0.0;
    }
    double mean = 0.0;
    for (double x : xs) {
        mean += x;
    }
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) {
        ss += (x - mean) * (x - mean);
    }
    return std::sqrt(ss / static_cast<double>(xs.size()));
}

} // namespace

SpeedTrajectory::SpeedTrajectory(std::vector<double> samples) : samples_(std::move(samples)) {
    if (samples_.size() < 2) {
        fail(ErrorCode::DegenerateInput, "speed trajectory needs at least 2 samples");
    }
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        if (!std::isfinite(samples_[i]) || samples_[i] < 0.0) {
            std::ostringstream msg;
            msg << "speed sample " << i << " is " << samples_[i] << " (must be finite and >= 0)";
            fail(ErrorCode::InvalidArgument, msg.str());
        }
    }
}

MicroTrip::MicroTrip(std::vector<double> samples) : MicroTrip(SpeedTrajectory(std::move(samples))) {}

MicroTrip::MicroTrip(SpeedTrajectory trajectory) : trajectory_(std::move(trajectory)) {
    const auto v = trajectory_.samples();
    if (v.front() != 0.0 || v.back() != 0.0) {
        fail(ErrorCode::InvalidArgument, "micro-trip must start and end at exactly 0 m/s");
    }
    stats_ = trip_stats(v);
}

AccelSeries derive_acceleration(std::span<const double> speeds) {
    if (speeds.size() < 2) {
        fail(ErrorCode::DegenerateInput, "acceleration needs at least 2 speed samples");
    }
    AccelSeries a(speeds.size() - 1);
    for (std::size_t t = 0; t + 1 < speeds.size(); ++t) {
        a[t] = speeds[t + 1] - speeds[t];
    }
    return a;
}

std::vector<double> derive_jerk(std::span<const double> accel) {
    if (accel.size() < 2) {
        fail(ErrorCode::DegenerateInput, "jerk needs at least 2 acceleration samples");
    }
    std::vector<double> j(accel.size() - 1);
    for (std::size_t t = 0; t + 1 < accel.size(); ++t) {
        j[t] = accel[t + 1] - accel[t];
    }
    return j;
}

TripStats trip_stats(std::span<const double> speeds) {
    if (speeds.size() < 2) {
        fail(ErrorCode::DegenerateInput, "trip statistics need at least 2 samples");
    }
    TripStats s;
    s.duration_s = static_cast<double>(speeds.size() - 1);
    for (std::size_t t = 0; t + 1 < speeds.size(); ++t) {
        s.distance_m += speeds[t];
    }
    s.avg_speed_mps = s.distance_m / s.duration_s;
    s.max_speed_mps = *std::max_element(speeds.begin(), speeds.end());
    const auto a = derive_acceleration(speeds);
    s.accel_std = population_std(a);
    return s;
}

PaddedWindow pad_or_truncate(std::span<const double> speeds, int channels) {
    if (speeds.size() < 2) {
        fail(ErrorCode::DegenerateInput, "window needs at least 2 samples");
    }
    if (channels != 1 && channels != 2) {
        fail(ErrorCode::InvalidArgument, "window channels must be 1 or 2");
    }
    PaddedWindow w;
    w.channels = channels;
    w.valid_length = std::min(speeds.size(), kWindowLength);
    w.values.assign(static_cast<std::size_t>(channels) * kWindowLength, 0.0);
    w.valid_mask.assign(kWindowLength, 0);
    auto speed = w.channel(0);
    for (std::size_t t = 0; t < w.valid_length; ++t) {
        speed[t] = speeds[t];
        w.valid_mask[t] = 1;
    }
    if (channels == 2) {
        refresh_acceleration_channel(w);
    }
    return w;
}

void refresh_acceleration_channel(PaddedWindow& window) {
    if (window.channels != 2) {
        return;
    }
    auto speed = window.channel(0);
    auto accel = window.channel(1);
    std::fill(accel.begin(), accel.end(), 0.0);
    for (std::size_t t = 0; t + 1 < window.valid_length; ++t) {
        accel[t] = speed[t + 1] - speed[t];
    }
}

ValidityReport validate_micro_trip(std::span<const double> speeds, double boundary_tolerance) {
    ValidityReport report;
    auto add = [&](ViolationKind kind, std::size_t index, double value) {
        report.valid = false;
        report.violations.push_back({kind, index, value});
    };
    if (speeds.size() < 2) {
        add(ViolationKind::TooShort, 0, static_cast<double>(speeds.size()));
        return report;
    }
    for (std::size_t i = 0; i < speeds.size(); ++i) {
        if (!std::isfinite(speeds[i])) {
            add(ViolationKind::NonFinite, i, speeds[i]);
        } else if (speeds[i] < 0.0) {
            add(ViolationKind::Negative, i, speeds[i]);
        }
    }
    const std::size_t last = speeds.size() - 1;
    for (std::size_t i : {std::size_t{0}, last}) {
        if (std::isfinite(speeds[i]) && std::abs(speeds[i]) > boundary_tolerance) {
            add(ViolationKind::Boundary, i, speeds[i]);
        }
    }
    return report;
}

std::string to_string(ViolationKind kind) {
    switch (kind) {
    case ViolationKind::TooShort: return "too_short";
    case ViolationKind::NonFinite: return "non_finite";
    case ViolationKind::Negative: return "negative";
    case ViolationKind::Boundary: return "boundary";
    }
    return "unknown";
}

} // namespace microtrip
