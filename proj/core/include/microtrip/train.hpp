#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "microtrip/diffusion.hpp"
#include "microtrip/losses.hpp"
#include "microtrip/network.hpp"
#include "microtrip/trajectory.hpp"

namespace microtrip {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
};

/// One bias-corrected Adam update in place. State is sized on first use.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg);

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    AdamConfig adam;
    double cond_dropout = 0.1;
    PhysicsConfig physics;
    /// Drops the physics terms in transformer mode. The U-Net is always
    /// trained on the noise MSE alone.
    bool mse_only = false;
    /// "sum" over time steps as written, or "mean" (sum / number of terms).
    std::string physics_reduction = "mean";
    /// "none", or "alpha_bar": physics terms scaled by abar_t so that
    /// x0-estimates from nearly pure noise carry little weight.
    std::string physics_weighting = "alpha_bar";
    ScheduleKind schedule = ScheduleKind::Cosine;
    std::size_t diffusion_steps = 1000;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
    void validate() const;
};

/// One training example: scaled padded x0 plus its condition.
struct TrainingItem {
    std::vector<double> x0;  ///< channels * length
    std::size_t valid_length = 0;
    ConditionVector cond;
};

TrainingItem make_training_item(const MicroTrip& trip, const ArchConfig& arch);

/// Per-item null-condition flags of one batch, drawn with probability p
/// from streams keyed by (seed, epoch, batch, item).
std::vector<bool> condition_dropout_mask(std::uint64_t seed, std::size_t epoch, std::size_t batch,
                                         std::size_t batch_size, double p);

struct EpochRecord {
    std::size_t epoch = 0;
    LossTerms mean;  ///< averaged over every item of the epoch
};

struct TrainResult {
    std::vector<EpochRecord> history;
};

/// Loss of one item at a fixed step and noise draw, as used by train().
CsdiLoss item_loss(const DenoiserNet& net, const Binder& p, const TrainingItem& item,
                   std::size_t t, std::span<const double> eps, bool drop_condition,
                   const NoiseSchedule& sched, const TrainConfig& cfg);

/// Minibatch training. Throws Numerical naming the batch on a non-finite loss.
TrainResult train(DenoiserNet& net, const std::vector<TrainingItem>& items,
                  const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

void write_loss_csv(const std::vector<EpochRecord>& history, const PhysicsConfig& physics,
                    std::ostream& out);

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped_kinks = 0;
};

/// Central differences (step h) against autodiff on `coords` randomly chosen
/// parameter coordinates. Coordinates whose one-sided slopes disagree (a
/// ReLU kink inside the stencil) are skipped.
GradCheckResult grad_check(const std::function<ad::Var(const Binder&)>& loss, ParamStore& params,
                           std::size_t coords, std::uint64_t seed, double h = 1e-4);

} // namespace microtrip
