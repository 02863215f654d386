#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "microtrip/diffusion.hpp"
#include "microtrip/markov.hpp"
#include "microtrip/network.hpp"
#include "microtrip/rng.hpp"
#include "microtrip/trajectory.hpp"

namespace microtrip {

/// Condition sampling weights and post-processing constants.
struct GenerationConfig {
    /// P(c) proportional to avg_speed^boost_speed * duration^boost_duration.
    /// Zero exponents give uniform sampling over the pool.
    double boost_speed = 0.0;
    double boost_duration = 0.0;
    double smooth_sigma = 1.5;
    std::size_t smooth_kernel = 7;
    double ramp_threshold = 0.5;  ///< m/s
    std::size_t ramp_seconds = 3;
    double heavy_vehicle_cutoff = 0.4;
    std::size_t heavy_kernel = 9;
    double heavy_sigma = 1.5;
    double corr_sigma = 0.0;  ///< m/s
    double corr_length = 10.0;  ///< s
    bool rescale_to_target = true;
    double unet_guidance = 3.0;
    double csdi_guidance = 0.0;
    bool stochastic = true;

    nlohmann::json to_json() const;
    static GenerationConfig from_json(const nlohmann::json& j);
    void validate() const;
};

/// Physical conditioning values of one trip.
struct TripCondition {
    double avg_speed_mps = 0.0;
    double duration_s = 0.0;
    double max_speed_mps = 0.0;
    double d_veh = 0.0;
};

TripCondition condition_of(const MicroTrip& trip);

/// Normalized condition vector for the given denoiser architecture.
ConditionVector condition_vector(const TripCondition& c, Architecture kind);

/// n pool indices drawn with replacement. Non-positive weights become 1e-12.
std::vector<std::size_t> sample_condition_indices(std::span<const TripCondition> pool,
                                                  double boost_speed, double boost_duration,
                                                  std::size_t n, Rng& rng);

std::vector<TripCondition> sample_conditions(std::span<const TripCondition> pool,
                                             double boost_speed, double boost_duration,
                                             std::size_t n, Rng& rng);

/// Normalized Gaussian taps; half-width min((k - 1) / 2, ceil(3 sigma)).
/// sigma = 0 gives the single tap {1}. Throws InvalidArgument for even k.
std::vector<double> gaussian_kernel(double sigma, std::size_t k);

/// Convolution with gaussian_kernel(sigma, k). Indices outside the signal
/// reflect about the half-sample points (x[-1] = x[0]).
std::vector<double> gaussian_smooth(std::span<const double> v, double sigma, std::size_t k);

/// Endpoints above threshold become linear ramps from 0 over ramp_s seconds;
/// otherwise only the endpoint is set to 0. Inputs with at most 2 ramp_s
/// samples only get their endpoints pinned.
std::vector<double> boundary_ramp(std::span<const double> v, double threshold,
                                  std::size_t ramp_s);

/// Extra smoothing for gentle vehicles (d_veh strictly below the cutoff).
std::vector<double> vehicle_smooth(std::span<const double> v, double d_veh,
                                   const GenerationConfig& cfg);

/// Adds white noise smoothed at scale corr_len and rescaled to std sigma_corr,
/// then re-zeros the endpoints and clamps at 0.
std::vector<double> correlated_noise(std::span<const double> v, double sigma_corr,
                                     double corr_len, Rng& rng);

/// Scales the series so its mean equals target. Throws InvalidArgument when
/// the current mean is not positive.
std::vector<double> rescale_to_target(std::span<const double> v, double target);

/// Turns a sampled window into a trip. Transformer mode: smooth, ramps,
/// vehicle smoothing, noise; U-Net mode: ramps. Both then optionally rescale
/// to the target mean, trim to the condition's duration, clamp at 0 and pin
/// the endpoints.
MicroTrip postprocess_pipeline(const PaddedWindow& window, const TripCondition& c,
                               Architecture mode, const GenerationConfig& cfg, Rng& rng);

/// Same steps on a speed series in m/s.
MicroTrip postprocess_speeds(std::span<const double> speeds, const TripCondition& c,
                             Architecture mode, const GenerationConfig& cfg, Rng& rng);

/// Window length used for a condition: duration + 1 samples, capped at 512.
std::size_t generation_length(const TripCondition& c);

/// One trip per condition; trip i uses the stream (seed, i).
std::vector<MicroTrip> generate_diffusion(const DenoiserNet& net, const NoiseSchedule& sched,
                                          const std::vector<TripCondition>& conditions,
                                          const GenerationConfig& cfg, std::uint64_t seed);

/// Bridge samples with the requested durations, then smoothed.
std::vector<MicroTrip> generate_markov(const TransitionModel& model,
                                       const std::vector<TripCondition>& conditions,
                                       std::uint64_t seed);

} // namespace microtrip
