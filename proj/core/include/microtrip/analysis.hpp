#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "microtrip/trajectory.hpp"

namespace microtrip {

inline constexpr double kIdleSpeed = 0.5;
inline constexpr std::size_t kFeatureCount = 6;

struct FeatureVector {
    double avg_speed = 0.0;
    double max_speed = 0.0;
    double speed_std = 0.0;
    double idle_ratio = 0.0;
    double stops_per_km = 0.0;
    double accel_noise = 0.0;

    std::array<double, kFeatureCount> as_array() const {
        return {avg_speed, max_speed, speed_std, idle_ratio, stops_per_km, accel_noise};
    }
};

extern const std::array<const char*, kFeatureCount> kFeatureNames;

/// Number of stop events: the initial rest (if any) plus every v >= 0.5 to
/// v < 0.5 transition.
std::size_t count_stops(std::span<const double> speeds);

/// Throws DegenerateInput for a zero-distance trip.
FeatureVector extract_features(std::span<const double> speeds);
inline FeatureVector extract_features(const MicroTrip& trip) {
    return extract_features(trip.speeds());
}

using Matrix = std::vector<std::vector<double>>;  ///< row-major, one row per point

Matrix feature_matrix(const std::vector<FeatureVector>& features);

struct KMeansResult {
    std::size_t k = 0;
    Matrix centroids;
    std::vector<int> assignments;
    std::vector<double> inertia_history;  ///< objective after each Lloyd iteration
    std::size_t iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding on raw points.
KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iter = 300, double tol = 1e-8);

struct ClusterModel {
    std::size_t k = 0;
    Matrix centroids;  ///< z-score space
    std::vector<double> feature_means;
    std::vector<double> feature_stds;
    std::vector<int> assignments;
    std::vector<double> inertia_history;
    std::size_t iterations = 0;
};

/// z-scores the features (zero-variance columns use std 1) then clusters.
ClusterModel kmeans_fit(const std::vector<FeatureVector>& features, std::size_t k,
                        std::uint64_t seed);

int kmeans_predict(const ClusterModel& model, const FeatureVector& f);

nlohmann::json cluster_model_to_json(const ClusterModel& model);
/// Throws Parse or Version on malformed input.
ClusterModel cluster_model_from_json(const nlohmann::json& j);

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

struct PcaResult {
    std::vector<std::size_t> kept_features;
    Matrix components;              ///< dims rows over kept features (z-space)
    std::vector<double> eigenvalues;  ///< all, descending
    std::vector<double> explained_variance_ratio;  ///< first dims
    Matrix projections;
    std::vector<double> means;
    std::vector<double> stds;
    std::vector<std::string> warnings;
};

/// Projects z-scored rows onto the top eigenvectors of their covariance.
/// Zero-variance columns are dropped with a warning.
PcaResult pca_project(const Matrix& points, std::size_t dims = 2);

struct SplitResult {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::vector<std::string> warnings;
};

/// Per-cluster random split. Clusters with fewer than two members go wholly to
/// train. Quotas use largest-remainder rounding so the train size is
/// round(frac * n_eligible) plus the small clusters.
SplitResult stratified_split(const std::vector<int>& assignments, double train_frac,
                             std::uint64_t seed);

struct ClusterSummaryRow {
    int cluster = 0;
    std::size_t count = 0;
    double avg_speed = 0.0;
    double max_speed = 0.0;
    double stops_per_km = 0.0;
    double idle_ratio_pct = 0.0;
};

std::vector<ClusterSummaryRow> cluster_summary(const std::vector<FeatureVector>& features,
                                               const std::vector<int>& assignments,
                                               std::size_t k);

} // namespace microtrip
