#include "microtrip/postgen.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>

#include "microtrip/error.hpp"
#include "microtrip/parallel.hpp"

namespace microtrip {

namespace {

constexpr double kMinWeight = 1e-12;

// Index into the half-sample symmetric periodic extension of [0, n).
std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
    const auto period = static_cast<std::ptrdiff_t>(2 * n);
    std::ptrdiff_t m = i % period;
    if (m < 0) {
        m += period;
    }
    return static_cast<std::size_t>(m < static_cast<std::ptrdiff_t>(n) ? m : period - 1 - m);
}

std::vector<double> convolve(std::span<const double> v, std::span<const double> taps) {
    const auto half = static_cast<std::ptrdiff_t>(taps.size() / 2);
    std::vector<double> out(v.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        double s = 0.0;
        for (std::ptrdiff_t j = -half; j <= half; ++j) {
            s += taps[static_cast<std::size_t>(j + half)] *
                 v[reflect(static_cast<std::ptrdiff_t>(i) + j, v.size())];
        }
        out[i] = s;
    }
    return out;
}

void pin_and_clamp(std::vector<double>& v) {
    for (double& x : v) {
        x = std::max(0.0, x);
    }
    if (!v.empty()) {
        v.front() = 0.0;
        v.back() = 0.0;
    }
}

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

} // namespace

nlohmann::json GenerationConfig::to_json() const {
    return {{"boost_speed", boost_speed},
            {"boost_duration", boost_duration},
            {"smooth_sigma", smooth_sigma},
            {"smooth_kernel", smooth_kernel},
            {"ramp_threshold", ramp_threshold},
            {"ramp_seconds", ramp_seconds},
            {"heavy_vehicle_cutoff", heavy_vehicle_cutoff},
            {"heavy_kernel", heavy_kernel},
            {"heavy_sigma", heavy_sigma},
            {"corr_sigma", corr_sigma},
            {"corr_length", corr_length},
            {"rescale_to_target", rescale_to_target},
            {"unet_guidance", unet_guidance},
            {"csdi_guidance", csdi_guidance},
            {"stochastic", stochastic}};
}

GenerationConfig GenerationConfig::from_json(const nlohmann::json& j) {
    GenerationConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "boost_speed") {
                c.boost_speed = value.get<double>();
            } else if (key == "boost_duration") {
                c.boost_duration = value.get<double>();
            } else if (key == "smooth_sigma") {
                c.smooth_sigma = value.get<double>();
            } else if (key == "smooth_kernel") {
                c.smooth_kernel = value.get<std::size_t>();
            } else if (key == "ramp_threshold") {
                c.ramp_threshold = value.get<double>();
            } else if (key == "ramp_seconds") {
                c.ramp_seconds = value.get<std::size_t>();
            } else if (key == "heavy_vehicle_cutoff") {
                c.heavy_vehicle_cutoff = value.get<double>();
            } else if (key == "heavy_kernel") {
                c.heavy_kernel = value.get<std::size_t>();
            } else if (key == "heavy_sigma") {
                c.heavy_sigma = value.get<double>();
            } else if (key == "corr_sigma") {
                c.corr_sigma = value.get<double>();
            } else if (key == "corr_length") {
                c.corr_length = value.get<double>();
            } else if (key == "rescale_to_target") {
                c.rescale_to_target = value.get<bool>();
            } else if (key == "unet_guidance") {
                c.unet_guidance = value.get<double>();
            } else if (key == "csdi_guidance") {
                c.csdi_guidance = value.get<double>();
            } else if (key == "stochastic") {
                c.stochastic = value.get<bool>();
            } else {
                fail(ErrorCode::Config, "generation: unknown key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Config, std::string("generation: ") + e.what());
    }
    c.validate();
    return c;
}

void GenerationConfig::validate() const {
    if (boost_speed < 0 || boost_speed > 2 || boost_duration < 0 || boost_duration > 2) {
        fail(ErrorCode::Config, "generation: boost exponents must lie in [0, 2]");
    }
    if (smooth_kernel % 2 == 0 || heavy_kernel % 2 == 0) {
        fail(ErrorCode::Config, "generation: smoothing kernels must be odd");
    }
    if (smooth_sigma < 0 || heavy_sigma < 0 || corr_sigma < 0 || corr_length < 0) {
        fail(ErrorCode::Config, "generation: sigmas and lengths must be >= 0");
    }
    if (ramp_threshold < 0) {
        fail(ErrorCode::Config, "generation: ramp_threshold must be >= 0");
    }
    if (unet_guidance < 0 || csdi_guidance < 0) {
        fail(ErrorCode::Config, "generation: guidance must be >= 0");
    }
}

TripCondition condition_of(const MicroTrip& trip) {
    const auto& s = trip.stats();
    return {s.avg_speed_mps, s.duration_s, s.max_speed_mps, vehicle_dynamics_index(trip.speeds())};
}

ConditionVector condition_vector(const TripCondition& c, Architecture kind) {
    return kind == Architecture::Unet
               ? unet_condition(c.avg_speed_mps, c.duration_s)
               : csdi_condition(c.avg_speed_mps, c.duration_s, c.max_speed_mps, c.d_veh);
}

std::vector<std::size_t> sample_condition_indices(std::span<const TripCondition> pool,
                                                  double boost_speed, double boost_duration,
                                                  std::size_t n, Rng& rng) {
    if (pool.empty()) {
        fail(ErrorCode::InvalidArgument, "sample_conditions: empty pool");
    }
    std::vector<double> w(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const double s = pool[i].avg_speed_mps;
        const double d = pool[i].duration_s;
        double x = 1.0;
        if (boost_speed != 0.0) {
            x *= s > 0 ? std::pow(s, boost_speed) : 0.0;
        }
        if (boost_duration != 0.0) {
            x *= d > 0 ? std::pow(d, boost_duration) : 0.0;
        }
        w[i] = std::isfinite(x) && x > 0 ? x : kMinWeight;
    }
    std::discrete_distribution<std::size_t> dist(w.begin(), w.end());
    std::vector<std::size_t> out(n);
    for (auto& idx : out) {
        idx = dist(rng.engine());
    }
    return out;
}

std::vector<TripCondition> sample_conditions(std::span<const TripCondition> pool,
                                             double boost_speed, double boost_duration,
                                             std::size_t n, Rng& rng) {
    const auto idx = sample_condition_indices(pool, boost_speed, boost_duration, n, rng);
    std::vector<TripCondition> out;
    out.reserve(n);
    for (auto i : idx) {
        out.push_back(pool[i]);
    }
    return out;
}

std::vector<double> gaussian_kernel(double sigma, std::size_t k) {
    if (k % 2 == 0) {
        fail(ErrorCode::InvalidArgument, "gaussian kernel size must be odd, got " + std::to_string(k));
    }
    if (sigma < 0) {
        fail(ErrorCode::InvalidArgument, "gaussian sigma must be >= 0");
    }
    if (sigma == 0.0) {
        return {1.0};
    }
    const auto half = std::min((k - 1) / 2, static_cast<std::size_t>(std::ceil(3.0 * sigma)));
    std::vector<double> taps(2 * half + 1);
    double total = 0.0;
    for (std::size_t i = 0; i < taps.size(); ++i) {
        const double x = static_cast<double>(i) - static_cast<double>(half);
        taps[i] = std::exp(-0.5 * x * x / (sigma * sigma));
        total += taps[i];
    }
    for (double& t : taps) {
        t /= total;
    }
    return taps;
}

std::vector<double> gaussian_smooth(std::span<const double> v, double sigma, std::size_t k) {
    const auto taps = gaussian_kernel(sigma, k);
    return convolve(v, taps);
}

std::vector<double> boundary_ramp(std::span<const double> v, double threshold,
                                  std::size_t ramp_s) {
    std::vector<double> out(v.begin(), v.end());
    const std::size_t n = out.size();
    if (n == 0) {
        return out;
    }
    if (ramp_s == 0 || n <= 2 * ramp_s) {
        out.front() = 0.0;
        out.back() = 0.0;
        return out;
    }
    const double r = static_cast<double>(ramp_s);
    if (out.front() > threshold) {
        const double anchor = out[ramp_s];
        for (std::size_t i = 0; i < ramp_s; ++i) {
            out[i] = anchor * static_cast<double>(i) / r;
        }
    } else {
        out.front() = 0.0;
    }
    if (out.back() > threshold) {
        const double anchor = out[n - 1 - ramp_s];
        for (std::size_t i = 0; i < ramp_s; ++i) {
            out[n - 1 - i] = anchor * static_cast<double>(i) / r;
        }
    } else {
        out.back() = 0.0;
    }
    return out;
}

std::vector<double> vehicle_smooth(std::span<const double> v, double d_veh,
                                   const GenerationConfig& cfg) {
    if (d_veh < cfg.heavy_vehicle_cutoff) {
        return gaussian_smooth(v, cfg.heavy_sigma, cfg.heavy_kernel);
    }
    return {v.begin(), v.end()};
}

std::vector<double> correlated_noise(std::span<const double> v, double sigma_corr,
                                     double corr_len, Rng& rng) {
    if (sigma_corr < 0) {
        fail(ErrorCode::InvalidArgument, "correlated_noise: sigma must be >= 0");
    }
    std::vector<double> out(v.begin(), v.end());
    if (sigma_corr == 0.0 || out.size() < 3) {
        return out;
    }
    const auto white = rng.normals(out.size());
    const std::size_t half = static_cast<std::size_t>(std::ceil(3.0 * corr_len));
    auto noise = convolve(white, gaussian_kernel(corr_len, 2 * half + 1));
    const double m = mean_of(noise);
    double var = 0.0;
    for (double x : noise) {
        var += (x - m) * (x - m);
    }
    const double sd = std::sqrt(var / static_cast<double>(noise.size()));
    const double gain = sd > 0 ? sigma_corr / sd : 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += gain * (noise[i] - m);
    }
    pin_and_clamp(out);
    return out;
}

std::vector<double> rescale_to_target(std::span<const double> v, double target) {
    const double m = mean_of(v);
    if (!(m > 0)) {
        fail(ErrorCode::InvalidArgument, "rescale_to_target: mean speed is not positive");
    }
    std::vector<double> out(v.begin(), v.end());
    const double f = target / m;
    for (double& x : out) {
        x *= f;
    }
    return out;
}

std::size_t generation_length(const TripCondition& c) {
    const double d = std::round(c.duration_s);
    if (!(d >= 1)) {
        fail(ErrorCode::InvalidArgument, "condition duration must be at least 1 s");
    }
    return std::min<std::size_t>(static_cast<std::size_t>(d) + 1, kWindowLength);
}

MicroTrip postprocess_speeds(std::span<const double> speeds, const TripCondition& c,
                             Architecture mode, const GenerationConfig& cfg, Rng& rng) {
    const std::size_t len = std::min(speeds.size(), generation_length(c));
    if (len < 2) {
        fail(ErrorCode::InvalidArgument, "postprocess: fewer than 2 samples");
    }
    std::vector<double> v(speeds.begin(), speeds.begin() + static_cast<std::ptrdiff_t>(len));
    for (double& x : v) {
        x = std::max(0.0, x);
    }
    if (mode == Architecture::Transformer) {
        v = gaussian_smooth(v, cfg.smooth_sigma, cfg.smooth_kernel);
        v = boundary_ramp(v, cfg.ramp_threshold, cfg.ramp_seconds);
        v = vehicle_smooth(v, c.d_veh, cfg);
        v = correlated_noise(v, cfg.corr_sigma, cfg.corr_length, rng);
    } else {
        v = boundary_ramp(v, cfg.ramp_threshold, cfg.ramp_seconds);
    }
    pin_and_clamp(v);
    if (cfg.rescale_to_target) {
        // Trip stats average over the first n - 1 samples; the last one is 0.
        const double n = static_cast<double>(v.size());
        v = rescale_to_target(v, c.avg_speed_mps * (n - 1.0) / n);
    }
    pin_and_clamp(v);
    return MicroTrip(std::move(v));
}

MicroTrip postprocess_pipeline(const PaddedWindow& window, const TripCondition& c,
                               Architecture mode, const GenerationConfig& cfg, Rng& rng) {
    const auto speeds = speeds_from_state(window);
    return postprocess_speeds(speeds, c, mode, cfg, rng);
}

std::vector<MicroTrip> generate_diffusion(const DenoiserNet& net, const NoiseSchedule& sched,
                                          const std::vector<TripCondition>& conditions,
                                          const GenerationConfig& cfg, std::uint64_t seed) {
    const auto& arch = net.arch();
    if (arch.length != kWindowLength) {
        fail(ErrorCode::InvalidArgument, "generation needs a denoiser of length 512");
    }
    cfg.validate();
    SampleOptions opts;
    opts.guidance = arch.kind == Architecture::Unet ? cfg.unet_guidance : cfg.csdi_guidance;
    opts.stochastic = cfg.stochastic;
    std::vector<std::optional<MicroTrip>> slots(conditions.size());
    parallel_for(conditions.size(), [&](std::size_t i) {
        Rng rng(seed, {i});
        const auto cv = condition_vector(conditions[i], arch.kind);
        const auto window = sample_loop(net, &cv, sched, generation_length(conditions[i]), rng, opts);
        slots[i] = postprocess_pipeline(window, conditions[i], arch.kind, cfg, rng);
    });
    std::vector<MicroTrip> out;
    out.reserve(slots.size());
    for (auto& s : slots) {
        out.push_back(std::move(*s));
    }
    return out;
}

std::vector<MicroTrip> generate_markov(const TransitionModel& model,
                                       const std::vector<TripCondition>& conditions,
                                       std::uint64_t seed) {
    std::vector<std::size_t> durations;
    durations.reserve(conditions.size());
    std::size_t horizon = 1;
    for (const auto& c : conditions) {
        const double d = std::round(c.duration_s);
        if (!(d >= 1)) {
            fail(ErrorCode::InvalidArgument, "condition duration must be at least 1 s");
        }
        durations.push_back(static_cast<std::size_t>(d));
        horizon = std::max(horizon, durations.back());
    }
    const auto table = backward_messages(model, horizon);
    auto trips = sample_bridges(model, table, durations, seed);
    for (auto& t : trips) {
        t = smooth_markov(t);
    }
    return trips;
}

} // namespace microtrip
