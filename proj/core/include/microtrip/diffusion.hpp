#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "microtrip/rng.hpp"
#include "microtrip/trajectory.hpp"

namespace microtrip {

enum class ScheduleKind { Linear, Cosine };

std::string to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(const std::string& name);

/// Tables over t = 0..T. Index 0 is the clean state: beta[0] = 0,
/// alpha_bar[0] = 1, sigma[0] = 0.
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::Linear;
    std::size_t steps = 0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;
    std::vector<double> sigma;
};

NoiseSchedule linear_schedule(std::size_t steps, double beta_1 = 1e-4, double beta_T = 0.02);
NoiseSchedule cosine_schedule(std::size_t steps, double s = 0.008);
NoiseSchedule make_schedule(ScheduleKind kind, std::size_t steps);

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
std::vector<double> forward_sample(std::span<const double> x0, std::size_t t,
                                   std::span<const double> eps, const NoiseSchedule& sched);

/// Estimate of x0 implied by a noise prediction.
std::vector<double> predict_x0(std::span<const double> xt, std::size_t t,
                               std::span<const double> eps_hat, const NoiseSchedule& sched);

/// x_{t-1} = (x_t - (1 - alpha_t) / sqrt(1 - abar_t) eps_hat) / sqrt(alpha_t) + sigma_t z.
/// z is ignored (treated as 0) when stochastic is false or t == 1.
std::vector<double> reverse_step(std::span<const double> xt, std::size_t t,
                                 std::span<const double> eps_hat, const NoiseSchedule& sched,
                                 std::span<const double> z, bool stochastic = true);

/// Positions with mask 1 take the known value.
struct InpaintMask {
    std::vector<std::uint8_t> mask;
    std::vector<double> known;
};

/// Speed channel pinned to 0 at index 0 and valid_length - 1; every channel
/// pinned to 0 over the pad region.
InpaintMask boundary_mask(int channels, std::size_t valid_length);

void apply_inpainting(std::span<double> x, const InpaintMask& m);

/// (1 + w) eps_cond - w eps_uncond.
std::vector<double> cfg_blend(std::span<const double> eps_cond, std::span<const double> eps_uncond,
                              double w);

/// Normalized conditioning: [avg/30, T/1000] (2 entries) or
/// [avg/30, T/1000, vmax/40, d_veh] (4 entries).
struct ConditionVector {
    std::vector<double> entries;
};

/// clamp(max positive acceleration / 4, 0, 1): 0 for gentle, 1 for agile trips.
double vehicle_dynamics_index(std::span<const double> speeds);

/// Diffusion state scaling: speed / 30, acceleration / 2.
inline constexpr double kSpeedScale = 30.0;
inline constexpr double kAccelScale = 2.0;

/// Padded, scaled window of a trip (channel 1, if any, is acceleration).
PaddedWindow to_diffusion_state(std::span<const double> speeds, int channels);

/// Speed channel over the valid region, back in m/s.
std::vector<double> speeds_from_state(const PaddedWindow& window);

ConditionVector unet_condition(double avg_speed_mps, double duration_s);
ConditionVector csdi_condition(double avg_speed_mps, double duration_s, double max_speed_mps,
                               double d_veh);

/// eps_theta(x_t, t, c). A null condition requests the unconditional branch.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual int channels() const = 0;
    virtual std::vector<double> predict(std::span<const double> xt, std::size_t t,
                                        const ConditionVector* c) const = 0;
};

struct SampleOptions {
    double guidance = 0.0;  ///< CFG scale w; 0 skips the unconditional pass
    bool stochastic = true;
    /// Called with (t_after_step, x) after inpainting at every step.
    std::function<void(std::size_t, std::span<const double>)> observer;
};

/// Full reverse chain from standard-normal noise with inpainting after every
/// step. Throws Numerical on non-finite values.
PaddedWindow sample_loop(const Denoiser& denoiser, const ConditionVector* c,
                         const NoiseSchedule& sched, std::size_t valid_length, Rng& rng,
                         const SampleOptions& options = {});

} // namespace microtrip
