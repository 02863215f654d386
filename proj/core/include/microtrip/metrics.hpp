#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "microtrip/analysis.hpp"
#include "microtrip/forest.hpp"
#include "microtrip/trajectory.hpp"

namespace microtrip {

/// W1 between equal-weight empirical measures, computed exactly as the
/// integral of |F_a - F_b| (quantile coupling for any sample sizes).
double wasserstein_1d(std::span<const double> a, std::span<const double> b);

/// W1 between weighted point masses; each weight vector is normalized.
double wasserstein_1d_weighted(std::span<const double> xa, std::span<const double> wa,
                               std::span<const double> xb, std::span<const double> wb);

struct SafdGrid {
    double v_min = 0.0;
    double v_max = 40.0;
    std::size_t v_bins = 40;
    double a_min = -4.0;
    double a_max = 4.0;
    std::size_t a_bins = 32;

    double v_width() const { return (v_max - v_min) / static_cast<double>(v_bins); }
    double a_width() const { return (a_max - a_min) / static_cast<double>(a_bins); }
    double v_center(std::size_t i) const { return v_min + (static_cast<double>(i) + 0.5) * v_width(); }
    double a_center(std::size_t j) const { return a_min + (static_cast<double>(j) + 0.5) * a_width(); }
    bool operator==(const SafdGrid&) const = default;

    nlohmann::json to_json() const;
    static SafdGrid from_json(const nlohmann::json& j);
    void validate() const;
};

/// Joint (speed, acceleration) occupancy. mass[i * a_bins + j] is the share
/// of samples in speed bin i and acceleration bin j; values outside the grid
/// land in the edge bins.
struct SafdHistogram {
    SafdGrid grid;
    std::vector<double> mass;
};

SafdHistogram safd_from_pairs(std::span<const double> v, std::span<const double> a,
                              const SafdGrid& grid);

/// Pairs (v_t, a_t) for t < T over every trip.
SafdHistogram safd_histogram(const std::vector<MicroTrip>& trips, const SafdGrid& grid);

/// Weighted 2D point cloud.
struct WeightedPoints {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> w;
};

/// Sliced W1: mean projected W1 over `directions` stratified angles in
/// [0, pi), times pi / 2 so that a translation by d scores |d|.
double sliced_wasserstein_2d(const WeightedPoints& a, const WeightedPoints& b,
                             std::size_t directions = 64, std::uint64_t seed = 0);

/// Sliced W1 between bin-centre clouds. Throws InvalidArgument on a grid mismatch.
double wasserstein_2d_safd(const SafdHistogram& real, const SafdHistogram& synth,
                           std::size_t directions = 64, std::uint64_t seed = 0);

/// Unbiased MMD^2 with kernel exp(-|x - y|^2 / (2 bandwidth^2)), floored at 0.
double mmd_rbf(const Matrix& a, const Matrix& b, double bandwidth = 1.0);

/// VSP in kW/ton: v (1.1 a + 9.81 grade + 0.132) + 0.000302 v^3.
std::vector<double> vsp(std::span<const double> v, std::span<const double> a, double grade = 0.0);

/// VSP over t < T of a trip.
std::vector<double> trip_vsp(std::span<const double> speeds);

/// Sup distance between the empirical CDFs.
double ks_statistic(std::span<const double> a, std::span<const double> b);

/// ln((T^3 / v_peak^2) sum_t j_t^2), T = samples - 1 and j the second
/// difference of speed. Lower is smoother. Throws DegenerateInput for a zero
/// peak, zero jerk, or T < 3.
double ldlj(std::span<const double> v);

/// Percent of series whose first or last sample exceeds thresh.
double boundary_violation_rate(std::span<const SpeedTrajectory> set, double thresh = 0.1);
double boundary_violation_rate(const std::vector<MicroTrip>& set, double thresh = 0.1);

inline constexpr std::size_t kSummaryDims = 8;

/// The six analysis features, duration and mean VSP. Zero-distance trips get
/// zero features with idle ratio 1.
std::vector<double> trip_summary(const MicroTrip& trip);
Matrix summary_matrix(const std::vector<MicroTrip>& trips);

/// Standardizes both matrices in place with the pooled column mean and std.
void zscore_pooled(Matrix& a, Matrix& b);

/// Held-out accuracy of a bagged-tree real-vs-synthetic classifier on trip
/// summaries. Classes are balanced by subsampling, then split train_frac /
/// rest with identical trips kept on one side. Needs 20 trips per side.
double discriminative_score(const std::vector<MicroTrip>& real, const std::vector<MicroTrip>& synth,
                            const ForestConfig& forest, double train_frac = 0.7);

struct TstrResult {
    double mae_kmh = 0.0;
    double baseline_mae_kmh = 0.0;  ///< predicting the training-set mean
};

/// Regresses trip average speed (km/h) from the first `prefix` speed samples
/// (zero padded) plus duration. Trains on synth_train, scores on real_test.
TstrResult tstr_mae(const std::vector<MicroTrip>& synth_train,
                    const std::vector<MicroTrip>& real_test, const ForestConfig& forest,
                    std::size_t prefix = 30);

struct MetricsConfig {
    SafdGrid safd;
    std::size_t sliced_directions = 64;
    double mmd_bandwidth = 1.0;
    double boundary_threshold = 0.1;
    std::size_t forest_trees = 50;
    std::size_t forest_depth = 6;
    std::size_t forest_min_leaf = 1;
    double train_frac = 0.7;
    std::size_t tstr_prefix = 30;
    std::uint64_t seed = 0;

    ForestConfig forest() const { return {forest_trees, forest_depth, forest_min_leaf, seed}; }
    nlohmann::json to_json() const;
    static MetricsConfig from_json(const nlohmann::json& j);
    void validate() const;
};

struct MetricsReport {
    // Distributional fidelity.
    double wd_speed = 0.0;
    double wd_accel = 0.0;
    double wd_vsp = 0.0;
    double wd_safd_2d = 0.0;
    double mmd = 0.0;
    double ks_vsp = 0.0;
    // Kinematic validity (synthetic set, with the real set for reference).
    double boundary_violation_pct = 0.0;
    double ldlj_mean = 0.0;
    double max_speed = 0.0;
    double accel_std = 0.0;
    double real_ldlj_mean = 0.0;
    double real_max_speed = 0.0;
    double real_accel_std = 0.0;
    // Utility.
    double discriminative_score = 0.0;
    double tstr_mae_kmh = 0.0;
    double tstr_baseline_mae_kmh = 0.0;

    std::size_t n_real = 0;
    std::size_t n_synth = 0;
    std::size_t ldlj_skipped = 0;
    MetricsConfig config;

    nlohmann::json to_json() const;
    void write_csv(std::ostream& out) const;
};

MetricsReport full_report(const std::vector<MicroTrip>& real, const std::vector<MicroTrip>& synth,
                          const MetricsConfig& cfg = {});

} // namespace microtrip
