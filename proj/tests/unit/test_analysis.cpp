#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "microtrip/analysis.hpp"
#include "microtrip/error.hpp"
#include "microtrip/fixture.hpp"
#include "microtrip/rng.hpp"
#include "oracles.hpp"

using namespace microtrip;

namespace {

struct Blobs {
    Matrix points;
    std::vector<int> labels;
};

Blobs make_blobs(std::size_t per_blob, std::uint64_t seed) {
    const double centers[4][3] = {{0, 0, 0}, {8, 0, 0}, {0, 8, 0}, {0, 0, 8}};
    Rng rng(seed);
    Blobs b;
    for (int c = 0; c < 4; ++c) {
        for (std::size_t i = 0; i < per_blob; ++i) {
            b.points.push_back({centers[c][0] + rng.normal(), centers[c][1] + rng.normal(),
                                centers[c][2] + rng.normal()});
            b.labels.push_back(c);
        }
    }
    return b;
}

} // namespace

TEST(ExtractFeatures, HandCounts) {
    const auto f = extract_features(std::vector<double>{0, 10, 10, 10, 0});
    EXPECT_DOUBLE_EQ(f.idle_ratio, 0.4);
    EXPECT_DOUBLE_EQ(f.avg_speed, 7.5);
    EXPECT_DOUBLE_EQ(f.max_speed, 10.0);
    // initial rest + one 10 -> 0 transition over 30 m
    EXPECT_EQ(count_stops(std::vector<double>{0, 10, 10, 10, 0}), 2u);
    EXPECT_NEAR(f.stops_per_km, 2.0 / 0.03, 1e-9);
    EXPECT_NEAR(f.accel_noise, std::sqrt(50.0), 1e-12);
}

TEST(ExtractFeatures, SpeedStdMatchesTextbookFormula) {
    std::vector<double> v(60, 12.0);
    v.front() = 0.0;
    v.back() = 0.0;
    const double n = 60.0;
    const double mean = 12.0 * 58.0 / n;
    const double var = (58.0 * (12.0 - mean) * (12.0 - mean) + 2.0 * mean * mean) / n;
    EXPECT_NEAR(extract_features(v).speed_std, std::sqrt(var), 1e-12);
}

TEST(ExtractFeatures, ZeroDistanceIsError) {
    EXPECT_THROW(extract_features(std::vector<double>{0, 0, 0}), Error);
}

TEST(ExtractFeatures, HighwayRegimeHasFewerStopsPerKmThanCity) {
    FixtureConfig cfg;
    cfg.n_trips = 400;
    cfg.max_duration = 1500.0;
    const auto fx = generate_fixture(cfg);
    double sum[4] = {0, 0, 0, 0};
    double cnt[4] = {0, 0, 0, 0};
    for (std::size_t i = 0; i < fx.trips.size(); ++i) {
        const auto f = extract_features(fx.trips[i]);
        EXPECT_GE(f.idle_ratio, 0.0);
        EXPECT_LE(f.idle_ratio, 1.0);
        EXPECT_GE(f.stops_per_km, 0.0);
        sum[fx.regimes[i]] += f.stops_per_km;
        cnt[fx.regimes[i]] += 1.0;
    }
    ASSERT_GT(cnt[1], 0.0);
    ASSERT_GT(cnt[2], 0.0);
    EXPECT_LT(sum[1] / cnt[1], sum[2] / cnt[2]);
}

TEST(KMeans, RecoversFourBlobs) {
    const auto blobs = make_blobs(60, 1);
    const auto res = kmeans(blobs.points, 4, 42);
    EXPECT_GT(adjusted_rand_index(res.assignments, blobs.labels), 0.9);
}

TEST(KMeans, ObjectiveNonIncreasing) {
    Rng rng(9);
    Matrix pts;
    for (int i = 0; i < 300; ++i) {
        pts.push_back({rng.normal(), rng.normal(), rng.uniform()});
    }
    const auto res = kmeans(pts, 6, 3);
    for (std::size_t i = 1; i < res.inertia_history.size(); ++i) {
        EXPECT_LE(res.inertia_history[i], res.inertia_history[i - 1] * (1.0 + 1e-12));
    }
}

TEST(KMeans, SingleClusterIsMean) {
    const Matrix pts = {{1, 2}, {3, 4}, {5, 9}};
    const auto res = kmeans(pts, 1, 0);
    EXPECT_NEAR(res.centroids[0][0], 3.0, 1e-12);
    EXPECT_NEAR(res.centroids[0][1], 5.0, 1e-12);
}

TEST(KMeans, DuplicatePointsGiveZeroWithinVariance) {
    const Matrix pts = {{1, 1}, {1, 1}, {5, 5}, {5, 5}, {9, 0}, {9, 0}};
    const auto res = kmeans(pts, 3, 4);
    EXPECT_NEAR(res.inertia_history.back(), 0.0, 1e-20);
}

TEST(KMeans, DeterministicGivenSeedAndRejectsTooFewPoints) {
    const auto blobs = make_blobs(30, 2);
    EXPECT_EQ(kmeans(blobs.points, 4, 5).assignments, kmeans(blobs.points, 4, 5).assignments);
    EXPECT_THROW(kmeans(Matrix{{1.0}}, 2, 0), Error);
}

TEST(KMeansFit, FeatureModelPredictsOwnAssignments) {
    FixtureConfig cfg;
    cfg.n_trips = 120;
    cfg.max_duration = 900.0;
    const auto fx = generate_fixture(cfg);
    std::vector<FeatureVector> feats;
    for (const auto& t : fx.trips) {
        feats.push_back(extract_features(t));
    }
    const auto model = kmeans_fit(feats, 4, 11);
    ASSERT_EQ(model.assignments.size(), feats.size());
    for (std::size_t i = 0; i < feats.size(); ++i) {
        EXPECT_EQ(kmeans_predict(model, feats[i]), model.assignments[i]);
    }
}

TEST(KMeansFit, ModelJsonRoundTripPredictsIdentically) {
    FixtureConfig cfg;
    cfg.n_trips = 60;
    cfg.max_duration = 600.0;
    const auto fx = generate_fixture(cfg);
    std::vector<FeatureVector> feats;
    for (const auto& t : fx.trips) {
        feats.push_back(extract_features(t));
    }
    const auto model = kmeans_fit(feats, 3, 2);
    const auto text = cluster_model_to_json(model).dump();
    const auto back = cluster_model_from_json(nlohmann::json::parse(text));
    EXPECT_EQ(back.centroids, model.centroids);
    EXPECT_EQ(back.assignments, model.assignments);
    for (const auto& f : feats) {
        EXPECT_EQ(kmeans_predict(back, f), kmeans_predict(model, f));
    }
    auto bad = cluster_model_to_json(model);
    bad["version"] = 9;
    EXPECT_THROW(cluster_model_from_json(bad), Error);
    bad = cluster_model_to_json(model);
    bad.erase("centroids");
    EXPECT_THROW(cluster_model_from_json(bad), Error);
}

TEST(AdjustedRandIndex, FrozenValuesAndOracleAgreement) {
    EXPECT_NEAR(adjusted_rand_index({0, 0, 0, 1, 1, 1}, {0, 0, 1, 1, 2, 2}), 0.24242424242424243,
                1e-12);
    EXPECT_NEAR(adjusted_rand_index({0, 0, 1, 1, 2, 2, 3, 3}, {1, 1, 0, 0, 3, 3, 2, 2}), 1.0, 1e-12);
    Rng rng(17);
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<int> a(80);
        std::vector<int> b(80);
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = static_cast<int>(rng.below(4));
            b[i] = rng.uniform() < 0.7 ? a[i] : static_cast<int>(rng.below(5));
        }
        EXPECT_NEAR(adjusted_rand_index(a, b), oracle::pairwise_ari(a, b), 1e-12);
    }
}

TEST(Pca, LineExplainsEverything) {
    Matrix pts;
    for (int i = 0; i < 50; ++i) {
        const double s = i * 0.3;
        pts.push_back({s, 2.0 * s + 1.0, -s});
    }
    const auto res = pca_project(pts, 2);
    EXPECT_NEAR(res.explained_variance_ratio[0], 1.0, 1e-12);
}

TEST(Pca, IsotropicGaussianSplitsVarianceEvenly) {
    Rng rng(23);
    Matrix pts;
    for (int i = 0; i < 20000; ++i) {
        std::vector<double> row(6);
        for (auto& x : row) {
            x = rng.normal();
        }
        pts.push_back(row);
    }
    const auto res = pca_project(pts, 2);
    EXPECT_NEAR(res.explained_variance_ratio[0], 1.0 / 6.0, 0.05);
    EXPECT_NEAR(res.explained_variance_ratio[1], 1.0 / 6.0, 0.05);
}

TEST(Pca, ReconstructionErrorEqualsDiscardedEigenvalues) {
    Rng rng(31);
    Matrix pts;
    for (int i = 0; i < 500; ++i) {
        const double a = rng.normal();
        const double b = rng.normal();
        pts.push_back({a + 0.1 * rng.normal(), 2 * a - b, b + 0.3 * rng.normal(), rng.normal(), a * 0.5});
    }
    const auto res = pca_project(pts, 2);
    double err = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = 0; j < res.kept_features.size(); ++j) {
            const double z = (pts[i][j] - res.means[j]) / res.stds[j];
            double rec = 0.0;
            for (std::size_t d = 0; d < 2; ++d) {
                rec += res.projections[i][d] * res.components[d][j];
            }
            err += (z - rec) * (z - rec);
        }
    }
    err /= static_cast<double>(pts.size() - 1);
    double discarded = 0.0;
    for (std::size_t d = 2; d < res.eigenvalues.size(); ++d) {
        discarded += res.eigenvalues[d];
    }
    EXPECT_NEAR(err, discarded, 1e-9);
}

TEST(Pca, ComponentsOrthonormalAndZeroVarianceDropped) {
    Rng rng(41);
    Matrix pts;
    for (int i = 0; i < 200; ++i) {
        pts.push_back({rng.normal(), 3.0, rng.normal() + rng.normal(), rng.uniform()});
    }
    const auto res = pca_project(pts, 3);
    ASSERT_EQ(res.warnings.size(), 1u);
    EXPECT_EQ(res.kept_features, (std::vector<std::size_t>{0, 2, 3}));
    for (std::size_t a = 0; a < res.components.size(); ++a) {
        for (std::size_t b = 0; b < res.components.size(); ++b) {
            double dot = 0.0;
            for (std::size_t j = 0; j < res.components[a].size(); ++j) {
                dot += res.components[a][j] * res.components[b][j];
            }
            EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-10);
        }
    }
    double sum = 0.0;
    for (double r : res.explained_variance_ratio) {
        sum += r;
    }
    EXPECT_LE(sum, 1.0 + 1e-12);
}

TEST(StratifiedSplit, EqualClusters) {
    std::vector<int> labels;
    for (int c = 0; c < 4; ++c) {
        for (int i = 0; i < 25; ++i) {
            labels.push_back(c);
        }
    }
    const auto split = stratified_split(labels, 0.8, 1);
    EXPECT_EQ(split.train.size(), 80u);
    int per[4] = {0, 0, 0, 0};
    for (auto i : split.train) {
        ++per[labels[i]];
    }
    for (int c = 0; c < 4; ++c) {
        EXPECT_EQ(per[c], 20);
    }
}

TEST(StratifiedSplit, ReferenceDatasetSizes) {
    const int counts[4] = {2224, 1020, 636, 2487};
    std::vector<int> labels;
    for (int c = 0; c < 4; ++c) {
        for (int i = 0; i < counts[c]; ++i) {
            labels.push_back(c);
        }
    }
    const auto split = stratified_split(labels, 0.8, 2);
    EXPECT_EQ(split.train.size(), 5094u);
    EXPECT_EQ(split.test.size(), 1273u);
    int per[4] = {0, 0, 0, 0};
    for (auto i : split.train) {
        ++per[labels[i]];
    }
    for (int c = 0; c < 4; ++c) {
        EXPECT_LE(std::abs(per[c] - 0.8 * counts[c]), 1.0);
    }
}

TEST(StratifiedSplit, PartitionDeterminismAndSmallClusters) {
    Rng rng(3);
    std::vector<int> labels(301);
    for (auto& l : labels) {
        l = static_cast<int>(rng.below(5));
    }
    labels.push_back(9);  // singleton cluster
    const auto a = stratified_split(labels, 0.8, 77);
    const auto b = stratified_split(labels, 0.8, 77);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);
    ASSERT_EQ(a.warnings.size(), 1u);
    std::set<std::size_t> all(a.train.begin(), a.train.end());
    for (auto i : a.test) {
        EXPECT_TRUE(all.insert(i).second) << "index in both train and test";
    }
    EXPECT_EQ(all.size(), labels.size());
    EXPECT_TRUE(std::binary_search(a.train.begin(), a.train.end(), labels.size() - 1));
}
