#include "microtrip/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "microtrip/error.hpp"

namespace microtrip {

namespace {

void finish_schedule(NoiseSchedule& s) {
    const std::size_t T = s.steps;
    s.alpha.assign(T + 1, 1.0);
    s.alpha_bar.assign(T + 1, 1.0);
    s.sigma.assign(T + 1, 0.0);
    for (std::size_t t = 1; t <= T; ++t) {
        s.alpha[t] = 1.0 - s.beta[t];
        s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
        s.sigma[t] = std::sqrt((1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]) * s.beta[t]);
    }
}

void check_same(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        fail(ErrorCode::InvalidArgument, std::string(what) + ": shape mismatch (" +
                                             std::to_string(a) + " vs " + std::to_string(b) + ")");
    }
}

void check_t(std::size_t t, const NoiseSchedule& s, std::size_t lo) {
    if (t < lo || t > s.steps) {
        fail(ErrorCode::InvalidArgument, "diffusion step " + std::to_string(t) + " out of range [" +
                                             std::to_string(lo) + ", " + std::to_string(s.steps) +
                                             "]");
    }
}

} // namespace

std::string to_string(ScheduleKind kind) {
    return kind == ScheduleKind::Linear ? "linear" : "cosine";
}

ScheduleKind parse_schedule_kind(const std::string& name) {
    if (name == "linear") {
        return ScheduleKind::Linear;
    }
    if (name == "cosine") {
        return ScheduleKind::Cosine;
    }
    fail(ErrorCode::InvalidArgument, "unknown schedule '" + name + "' (linear|cosine)");
}

NoiseSchedule linear_schedule(std::size_t steps, double beta_1, double beta_T) {
    if (steps < 2) {
        fail(ErrorCode::InvalidArgument, "schedule needs at least 2 steps");
    }
    NoiseSchedule s;
    s.kind = ScheduleKind::Linear;
    s.steps = steps;
    s.beta.assign(steps + 1, 0.0);
    for (std::size_t t = 1; t <= steps; ++t) {
        const double frac = static_cast<double>(t - 1) / static_cast<double>(steps - 1);
        s.beta[t] = beta_1 + (beta_T - beta_1) * frac;
    }
    s.beta[steps] = beta_T;
    finish_schedule(s);
    return s;
}

NoiseSchedule cosine_schedule(std::size_t steps, double offset) {
    if (steps < 2) {
        fail(ErrorCode::InvalidArgument, "schedule needs at least 2 steps");
    }
    auto f = [&](double t) {
        const double c =
            std::cos((t / static_cast<double>(steps) + offset) / (1.0 + offset) * std::numbers::pi / 2);
        return c * c;
    };
    NoiseSchedule s;
    s.kind = ScheduleKind::Cosine;
    s.steps = steps;
    s.beta.assign(steps + 1, 0.0);
    const double f0 = f(0.0);
    for (std::size_t t = 1; t <= steps; ++t) {
        const double ab = f(static_cast<double>(t)) / f0;
        const double ab_prev = f(static_cast<double>(t - 1)) / f0;
        s.beta[t] = std::min(0.999, 1.0 - ab / ab_prev);
    }
    finish_schedule(s);
    return s;
}

NoiseSchedule make_schedule(ScheduleKind kind, std::size_t steps) {
    return kind == ScheduleKind::Linear ? linear_schedule(steps) : cosine_schedule(steps);
}

std::vector<double> forward_sample(std::span<const double> x0, std::size_t t,
                                   std::span<const double> eps, const NoiseSchedule& sched) {
    check_same(x0.size(), eps.size(), "forward_sample");
    check_t(t, sched, 0);
    const double a = std::sqrt(sched.alpha_bar[t]);
    const double b = std::sqrt(1.0 - sched.alpha_bar[t]);
    std::vector<double> out(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) {
        out[i] = a * x0[i] + b * eps[i];
    }
    return out;
}

std::vector<double> predict_x0(std::span<const double> xt, std::size_t t,
                               std::span<const double> eps_hat, const NoiseSchedule& sched) {
    check_same(xt.size(), eps_hat.size(), "predict_x0");
    check_t(t, sched, 1);
    const double a = std::sqrt(sched.alpha_bar[t]);
    const double b = std::sqrt(1.0 - sched.alpha_bar[t]);
    std::vector<double> out(xt.size());
    for (std::size_t i = 0; i < xt.size(); ++i) {
        out[i] = (xt[i] - b * eps_hat[i]) / a;
    }
    return out;
}

std::vector<double> reverse_step(std::span<const double> xt, std::size_t t,
                                 std::span<const double> eps_hat, const NoiseSchedule& sched,
                                 std::span<const double> z, bool stochastic) {
    check_same(xt.size(), eps_hat.size(), "reverse_step");
    if (t == 0) {
        fail(ErrorCode::InvalidArgument, "reverse_step called at t = 0");
    }
    check_t(t, sched, 1);
    const bool add_noise = stochastic && t > 1;
    if (add_noise) {
        check_same(xt.size(), z.size(), "reverse_step noise");
    }
    const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha[t]);
    const double coef = (1.0 - sched.alpha[t]) / std::sqrt(1.0 - sched.alpha_bar[t]);
    const double sigma = sched.sigma[t];
    std::vector<double> out(xt.size());
    for (std::size_t i = 0; i < xt.size(); ++i) {
        out[i] = inv_sqrt_alpha * (xt[i] - coef * eps_hat[i]) + (add_noise ? sigma * z[i] : 0.0);
    }
    return out;
}

InpaintMask boundary_mask(int channels, std::size_t valid_length) {
    if (channels < 1 || valid_length < 2 || valid_length > kWindowLength) {
        fail(ErrorCode::InvalidArgument, "boundary mask needs 1 or more channels and a valid "
                                         "length in [2, 512]");
    }
    InpaintMask m;
    const std::size_t n = static_cast<std::size_t>(channels) * kWindowLength;
    m.mask.assign(n, 0);
    m.known.assign(n, 0.0);
    m.mask[0] = 1;
    m.mask[valid_length - 1] = 1;
    for (int c = 0; c < channels; ++c) {
        for (std::size_t i = valid_length; i < kWindowLength; ++i) {
            m.mask[static_cast<std::size_t>(c) * kWindowLength + i] = 1;
        }
    }
    return m;
}

void apply_inpainting(std::span<double> x, const InpaintMask& m) {
    check_same(x.size(), m.mask.size(), "apply_inpainting");
    check_same(x.size(), m.known.size(), "apply_inpainting");
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (m.mask[i]) {
            x[i] = m.known[i];
        }
    }
}

std::vector<double> cfg_blend(std::span<const double> eps_cond, std::span<const double> eps_uncond,
                              double w) {
    check_same(eps_cond.size(), eps_uncond.size(), "cfg_blend");
    std::vector<double> out(eps_cond.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = (1.0 + w) * eps_cond[i] - w * eps_uncond[i];
    }
    return out;
}

double vehicle_dynamics_index(std::span<const double> speeds) {
    double max_accel = 0.0;
    for (std::size_t t = 0; t + 1 < speeds.size(); ++t) {
        max_accel = std::max(max_accel, speeds[t + 1] - speeds[t]);
    }
    return std::clamp(max_accel / 4.0, 0.0, 1.0);
}

PaddedWindow to_diffusion_state(std::span<const double> speeds, int channels) {
    auto w = pad_or_truncate(speeds, channels);
    for (double& v : w.channel(0)) {
        v /= kSpeedScale;
    }
    if (channels == 2) {
        for (double& a : w.channel(1)) {
            a /= kAccelScale;
        }
    }
    return w;
}

std::vector<double> speeds_from_state(const PaddedWindow& window) {
    const auto s = window.channel(0);
    std::vector<double> out(window.valid_length);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = s[i] * kSpeedScale;
    }
    return out;
}

ConditionVector unet_condition(double avg_speed_mps, double duration_s) {
    return {{avg_speed_mps / 30.0, duration_s / 1000.0}};
}

ConditionVector csdi_condition(double avg_speed_mps, double duration_s, double max_speed_mps,
                               double d_veh) {
    return {{avg_speed_mps / 30.0, duration_s / 1000.0, max_speed_mps / 40.0,
             std::clamp(d_veh, 0.0, 1.0)}};
}

PaddedWindow sample_loop(const Denoiser& denoiser, const ConditionVector* c,
                         const NoiseSchedule& sched, std::size_t valid_length, Rng& rng,
                         const SampleOptions& options) {
    const int channels = denoiser.channels();
    const auto mask = boundary_mask(channels, valid_length);
    const std::size_t n = static_cast<std::size_t>(channels) * kWindowLength;
    std::vector<double> x = rng.normals(n);
    apply_inpainting(x, mask);
    std::vector<double> z(n);
    for (std::size_t t = sched.steps; t >= 1; --t) {
        std::vector<double> eps;
        if (c == nullptr) {
            eps = denoiser.predict(x, t, nullptr);
        } else if (options.guidance != 0.0) {
            const auto ec = denoiser.predict(x, t, c);
            const auto eu = denoiser.predict(x, t, nullptr);
            eps = cfg_blend(ec, eu, options.guidance);
        } else {
            eps = denoiser.predict(x, t, c);
        }
        if (options.stochastic && t > 1) {
            rng.fill_normal(z);
        }
        x = reverse_step(x, t, eps, sched, z, options.stochastic);
        apply_inpainting(x, mask);
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(x[i])) {
                fail(ErrorCode::Numerical, "non-finite value at diffusion step " + std::to_string(t) +
                                               ", index " + std::to_string(i));
            }
        }
        if (options.observer) {
            options.observer(t - 1, x);
        }
    }
    PaddedWindow w;
    w.channels = channels;
    w.valid_length = valid_length;
    w.values = std::move(x);
    w.valid_mask.assign(kWindowLength, 0);
    std::fill(w.valid_mask.begin(), w.valid_mask.begin() + static_cast<std::ptrdiff_t>(valid_length),
              1);
    return w;
}

} // namespace microtrip
