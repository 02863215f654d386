#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <vector>

#include "microtrip/ingest.hpp"

namespace microtrip {

/// Driving regimes used by the synthetic fixture, in the cluster order of the
/// reference dataset: arterial, highway, congested city, free-flow arterial.
inline constexpr std::array<double, 4> kRegimeWeights = {2224.0, 1020.0, 636.0, 2487.0};

struct FixtureConfig {
    std::size_t n_trips = 200;
    std::uint64_t seed = 7;
    double min_duration = 34.0;
    double max_duration = 12841.0;
    double log_duration_mu = 5.231108616854587;  ///< ln 187
    double log_duration_sigma = 0.986;
    double min_avg_speed = 5.18;
    double max_avg_speed = 31.57;
    std::size_t trips_per_trace = 4;  ///< trips chained per raw trace, separated by idle gaps
};

struct Fixture {
    std::vector<MicroTrip> trips;
    std::vector<int> regimes;
    /// Mean of the lognormal duration law truncated to [min, max] duration.
    double analytic_mean_duration = 0.0;
    /// Raw traces that segment back into exactly `trips`.
    std::vector<RawTrace> traces;
};

Fixture generate_fixture(const FixtureConfig& config);

double truncated_lognormal_mean(double mu, double sigma, double lo, double hi);

/// Writes traces as `trip_id,t,speed_mps` CSV.
void write_trace_csv(const std::vector<RawTrace>& traces, std::ostream& out);

} // namespace microtrip
