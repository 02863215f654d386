#pragma once

#include <span>

#include <nlohmann/json.hpp>

#include "microtrip/autodiff.hpp"

namespace microtrip {

struct PhysicsConfig {
    double w_smooth = 0.1;
    double w_accel = 0.03;
    double w_jerk = 0.02;
    double w_accel_dist = 0.05;
    double accel_cap = 4.0;   ///< m/s^2
    double brake_cap = 5.0;   ///< m/s^2
    double jerk_cap = 2.0;    ///< m/s^3
    double sigma_a_target = 0.5;

    nlohmann::json to_json() const;
    static PhysicsConfig from_json(const nlohmann::json& j);
    void validate() const;
};

/// Mean squared error over all elements.
double loss_simple(std::span<const double> eps, std::span<const double> eps_hat);

// Physics penalties on a 1 Hz speed series in m/s.
double loss_smooth(std::span<const double> v);
double loss_accel(std::span<const double> v, double accel_cap = 4.0, double brake_cap = 5.0);
double loss_jerk(std::span<const double> v, double jerk_cap = 2.0);
double loss_accel_dist(std::span<const double> v, double sigma_target = 0.5);

// Differentiable versions; v is 1 x n.
ad::Var loss_smooth(const ad::Var& v);
ad::Var loss_accel(const ad::Var& v, double accel_cap = 4.0, double brake_cap = 5.0);
ad::Var loss_jerk(const ad::Var& v, double jerk_cap = 2.0);
ad::Var loss_accel_dist(const ad::Var& v, double sigma_target = 0.5);

/// Unweighted components plus the weighted total.
struct LossTerms {
    double mse = 0.0;
    double smooth = 0.0;
    double accel = 0.0;
    double jerk = 0.0;
    double accel_dist = 0.0;
    double total = 0.0;
};

/// mse + w_smooth smooth + w_accel accel + w_jerk jerk + w_accel_dist accel_dist.
double weighted_total(const LossTerms& t, const PhysicsConfig& cfg);

struct CsdiLoss {
    ad::Var total;
    LossTerms terms;
};

/// Full objective. v0_hat is the x0 estimate over the valid region in m/s.
/// With mean_reduction the smooth, accel and jerk sums are divided by their
/// term counts. Every physics term is then multiplied by physics_scale;
/// the reported components are these scaled values, before the weights.
CsdiLoss loss_csdi(const ad::Var& eps, const ad::Var& eps_hat, const ad::Var& v0_hat,
                   const PhysicsConfig& cfg, double physics_scale = 1.0,
                   bool mean_reduction = false);

} // namespace microtrip
