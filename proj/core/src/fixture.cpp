#include "microtrip/fixture.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "microtrip/error.hpp"
#include "microtrip/rng.hpp"

namespace microtrip {

namespace {

struct RegimeShape {
    double cruise_mean;    // m/s
    double cruise_sd;
    double fluct_sd;       // slow AR(1) speed wander
    double wave_depth;     // stop-and-go modulation as a fraction of cruise
    double jitter_sd;      // per-second noise
    double accel;          // launch/brake rate, m/s^2
};

constexpr std::array<RegimeShape, 4> kShapes = {{
    {17.0, 2.5, 1.6, 0.10, 0.15, 1.3},
    {24.0, 2.5, 1.0, 0.00, 0.08, 1.1},
    {15.5, 2.5, 2.2, 0.45, 0.30, 1.8},
    {18.0, 2.0, 1.1, 0.03, 0.10, 1.2},
}};

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

int pick_regime(Rng& rng) {
    const double total = std::accumulate(kRegimeWeights.begin(), kRegimeWeights.end(), 0.0);
    double u = rng.uniform() * total;
    for (int r = 0; r < 4; ++r) {
        u -= kRegimeWeights[static_cast<std::size_t>(r)];
        if (u < 0.0) {
            return r;
        }
    }
    return 3;
}

double average_speed(const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t t = 0; t + 1 < v.size(); ++t) {
        s += v[t];
    }
    return s / static_cast<double>(v.size() - 1);
}

std::vector<double> make_profile(Rng& rng, const RegimeShape& shape, std::size_t duration,
                                 const FixtureConfig& cfg) {
    const std::size_t n = duration + 1;
    const double cruise = std::clamp(rng.normal(shape.cruise_mean, shape.cruise_sd), 4.0, 34.0);
    const double ramp_up = std::max(2.0, cruise / shape.accel);
    const double ramp_down = std::max(2.0, cruise / (shape.accel * 1.2));
    const double period = rng.uniform(60.0, 140.0);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double rho = 0.97;
    const double innov = std::sqrt(1.0 - rho * rho) * shape.fluct_sd;

    std::vector<double> v(n, 0.0);
    double wander = rng.normal(0.0, shape.fluct_sd);
    for (std::size_t t = 1; t + 1 < n; ++t) {
        wander = rho * wander + innov * rng.normal();
        const double td = static_cast<double>(t);
        const double envelope =
            std::min({1.0, td / ramp_up, static_cast<double>(duration - t) / ramp_down});
        const double wave =
            1.0 - shape.wave_depth * 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * td / period + phase));
        const double base = envelope * (cruise * wave + wander);
        v[t] = std::max(0.6, base + shape.jitter_sd * rng.normal());
    }

    for (int pass = 0; pass < 4; ++pass) {
        const double avg = average_speed(v);
        double target = avg;
        if (avg < cfg.min_avg_speed) {
            target = cfg.min_avg_speed * 1.001;
        } else if (avg > cfg.max_avg_speed) {
            target = cfg.max_avg_speed * 0.999;
        }
        if (target == avg) {
            break;
        }
        const double k = target / avg;
        for (std::size_t t = 1; t + 1 < n; ++t) {
            v[t] = std::max(0.6, v[t] * k);
        }
    }
    return v;
}

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

} // namespace

double truncated_lognormal_mean(double mu, double sigma, double lo, double hi) {
    const double a = (std::log(lo) - mu) / sigma;
    const double b = (std::log(hi) - mu) / sigma;
    const double mass = normal_cdf(b) - normal_cdf(a);
    const double partial = normal_cdf(b - sigma) - normal_cdf(a - sigma);
    return std::exp(mu + 0.5 * sigma * sigma) * partial / mass;
}

Fixture generate_fixture(const FixtureConfig& cfg) {
    if (cfg.min_duration < 2.0 || cfg.max_duration < cfg.min_duration) {
        fail(ErrorCode::InvalidArgument, "fixture duration bounds are invalid");
    }
    if (cfg.trips_per_trace == 0) {
        fail(ErrorCode::InvalidArgument, "trips_per_trace must be >= 1");
    }
    Fixture fx;
    fx.analytic_mean_duration = truncated_lognormal_mean(cfg.log_duration_mu, cfg.log_duration_sigma,
                                                         cfg.min_duration, cfg.max_duration);
    fx.trips.reserve(cfg.n_trips);
    fx.regimes.reserve(cfg.n_trips);
    for (std::size_t i = 0; i < cfg.n_trips; ++i) {
        Rng rng(cfg.seed, {i});
        const int regime = pick_regime(rng);
        double d = 0.0;
        do {
            d = std::round(std::exp(rng.normal(cfg.log_duration_mu, cfg.log_duration_sigma)));
        } while (d < cfg.min_duration || d > cfg.max_duration);
        auto v = make_profile(rng, kShapes[static_cast<std::size_t>(regime)],
                              static_cast<std::size_t>(d), cfg);
        fx.trips.emplace_back(std::move(v));
        fx.regimes.push_back(regime);
    }

    Rng gap_rng(cfg.seed, {0xfeedULL});
    for (std::size_t start = 0; start < fx.trips.size(); start += cfg.trips_per_trace) {
        RawTrace trace;
        trace.trip_id = "veh" + std::to_string(start / cfg.trips_per_trace);
        double t = 0.0;
        const std::size_t end = std::min(fx.trips.size(), start + cfg.trips_per_trace);
        for (std::size_t k = start; k < end; ++k) {
            if (k > start) {
                const auto idle = 3 + gap_rng.below(25);
                for (std::uint64_t g = 0; g < idle; ++g) {
                    trace.timestamps.push_back(t);
                    trace.speeds.push_back(0.0);
                    t += 1.0;
                }
            }
            for (double s : fx.trips[k].speeds()) {
                trace.timestamps.push_back(t);
                trace.speeds.push_back(s);
                t += 1.0;
            }
        }
        fx.traces.push_back(std::move(trace));
    }
    return fx;
}

void write_trace_csv(const std::vector<RawTrace>& traces, std::ostream& out) {
    out << "trip_id,t,speed_mps\n";
    for (const auto& tr : traces) {
        for (std::size_t i = 0; i < tr.timestamps.size(); ++i) {
            out << tr.trip_id << ',' << format_double(tr.timestamps[i]) << ','
                << format_double(tr.speeds[i]) << '\n';
        }
    }
}

} // namespace microtrip
