#include "microtrip/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <Eigen/Dense>

#include "microtrip/error.hpp"
#include "microtrip/parallel.hpp"
#include "microtrip/rng.hpp"

namespace microtrip {

const std::array<const char*, kFeatureCount> kFeatureNames = {
    "avg_speed", "max_speed", "speed_std", "idle_ratio", "stops_per_km", "accel_noise"};

namespace {

double population_std(std::span<const double> xs) {
    double mean = 0.0;
    for (double x : xs) {
        mean += x;
    }
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) {
        ss += (x - mean) * (x - mean);
    }
    return std::sqrt(ss / static_cast<double>(xs.size()));
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double d = a[j] - b[j];
        s += d * d;
    }
    return s;
}

int nearest(const Matrix& centroids, const std::vector<double>& p, double* dist = nullptr) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = sq_dist(centroids[c], p);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    if (dist) {
        *dist = best_d;
    }
    return best;
}

Matrix plus_plus_seed(const Matrix& points, std::size_t k, Rng& rng) {
    const std::size_t n = points.size();
    Matrix centroids;
    centroids.push_back(points[rng.below(n)]);
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) {
        d2[i] = sq_dist(points[i], centroids[0]);
    }
    while (centroids.size() < k) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t pick = 0;
        if (total <= 0.0) {
            pick = rng.below(n);
        } else {
            double u = rng.uniform() * total;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                u -= d2[i];
                if (u < 0.0) {
                    pick = i;
                    break;
                }
            }
        }
        centroids.push_back(points[pick]);
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], sq_dist(points[i], centroids.back()));
        }
    }
    return centroids;
}

void zscore_columns(const Matrix& points, std::vector<double>& means, std::vector<double>& stds) {
    const std::size_t n = points.size();
    const std::size_t p = points.front().size();
    means.assign(p, 0.0);
    stds.assign(p, 0.0);
    for (const auto& row : points) {
        for (std::size_t j = 0; j < p; ++j) {
            means[j] += row[j];
        }
    }
    for (auto& m : means) {
        m /= static_cast<double>(n);
    }
    for (const auto& row : points) {
        for (std::size_t j = 0; j < p; ++j) {
            stds[j] += (row[j] - means[j]) * (row[j] - means[j]);
        }
    }
    for (auto& s : stds) {
        s = std::sqrt(s / static_cast<double>(n));
    }
}

} // namespace

std::size_t count_stops(std::span<const double> speeds) {
    std::size_t stops = (!speeds.empty() && speeds[0] < kIdleSpeed) ? 1 : 0;
    for (std::size_t t = 1; t < speeds.size(); ++t) {
        if (speeds[t - 1] >= kIdleSpeed && speeds[t] < kIdleSpeed) {
            ++stops;
        }
    }
    return stops;
}

FeatureVector extract_features(std::span<const double> speeds) {
    const auto stats = trip_stats(speeds);
    if (stats.distance_m <= 0.0) {
        fail(ErrorCode::DegenerateInput, "stops per km undefined for a zero-distance trip");
    }
    FeatureVector f;
    f.avg_speed = stats.avg_speed_mps;
    f.max_speed = stats.max_speed_mps;
    f.speed_std = population_std(speeds);
    std::size_t idle = 0;
    for (double v : speeds) {
        idle += v < kIdleSpeed ? 1 : 0;
    }
    f.idle_ratio = static_cast<double>(idle) / static_cast<double>(speeds.size());
    f.stops_per_km = static_cast<double>(count_stops(speeds)) / (stats.distance_m / 1000.0);
    f.accel_noise = stats.accel_std;
    return f;
}

Matrix feature_matrix(const std::vector<FeatureVector>& features) {
    Matrix m;
    m.reserve(features.size());
    for (const auto& f : features) {
        const auto a = f.as_array();
        m.emplace_back(a.begin(), a.end());
    }
    return m;
}

KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, std::size_t max_iter,
                    double tol) {
    const std::size_t n = points.size();
    if (k == 0 || n < k) {
        fail(ErrorCode::InvalidArgument, "k-means needs at least k points (n=" + std::to_string(n) +
                                             ", k=" + std::to_string(k) + ")");
    }
    Rng rng(seed);
    KMeansResult res;
    res.k = k;
    res.centroids = plus_plus_seed(points, k, rng);
    res.assignments.assign(n, 0);
    std::vector<double> dist(n, 0.0);
    const std::size_t p = points.front().size();

    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        parallel_for(n, [&](std::size_t i) {
            res.assignments[i] = nearest(res.centroids, points[i], &dist[i]);
        });
        Matrix next(k, std::vector<double>(p, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(res.assignments[i]);
            ++counts[c];
            for (std::size_t j = 0; j < p; ++j) {
                next[c][j] += points[i][j];
            }
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // Re-seed an empty cluster at the point worst served so far.
                const auto far = static_cast<std::size_t>(
                    std::max_element(dist.begin(), dist.end()) - dist.begin());
                next[c] = points[far];
                dist[far] = 0.0;
                continue;
            }
            for (auto& x : next[c]) {
                x /= static_cast<double>(counts[c]);
            }
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            shift = std::max(shift, std::sqrt(sq_dist(next[c], res.centroids[c])));
        }
        res.centroids = std::move(next);
        res.iterations = iter + 1;
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = 0.0;
            res.assignments[i] = nearest(res.centroids, points[i], &d);
            inertia += d;
        }
        res.inertia_history.push_back(inertia);
        if (shift < tol) {
            break;
        }
    }
    return res;
}

ClusterModel kmeans_fit(const std::vector<FeatureVector>& features, std::size_t k,
                        std::uint64_t seed) {
    if (features.size() < k || k == 0) {
        fail(ErrorCode::InvalidArgument, "k-means needs at least k trips");
    }
    auto points = feature_matrix(features);
    ClusterModel model;
    zscore_columns(points, model.feature_means, model.feature_stds);
    for (auto& s : model.feature_stds) {
        if (s <= 0.0) {
            s = 1.0;
        }
    }
    for (auto& row : points) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            row[j] = (row[j] - model.feature_means[j]) / model.feature_stds[j];
        }
    }
    auto res = kmeans(points, k, seed);
    model.k = k;
    model.centroids = std::move(res.centroids);
    model.assignments = std::move(res.assignments);
    model.inertia_history = std::move(res.inertia_history);
    model.iterations = res.iterations;
    return model;
}

int kmeans_predict(const ClusterModel& model, const FeatureVector& f) {
    const auto a = f.as_array();
    std::vector<double> z(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
        z[j] = (a[j] - model.feature_means[j]) / model.feature_stds[j];
    }
    return nearest(model.centroids, z);
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size() || a.empty()) {
        fail(ErrorCode::InvalidArgument, "ARI needs two equal-length non-empty labelings");
    }
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> ra;
    std::map<int, double> rb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1.0;
        ra[a[i]] += 1.0;
        rb[b[i]] += 1.0;
    }
    auto c2 = [](double x) { return x * (x - 1.0) / 2.0; };
    double sum_joint = 0.0;
    for (const auto& [key, c] : joint) {
        sum_joint += c2(c);
    }
    double sum_a = 0.0;
    for (const auto& [key, c] : ra) {
        sum_a += c2(c);
    }
    double sum_b = 0.0;
    for (const auto& [key, c] : rb) {
        sum_b += c2(c);
    }
    const double total = c2(static_cast<double>(a.size()));
    const double expected = sum_a * sum_b / total;
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) {
        return 1.0;
    }
    return (sum_joint - expected) / (max_index - expected);
}

PcaResult pca_project(const Matrix& points, std::size_t dims) {
    const std::size_t n = points.size();
    if (n < 2) {
        fail(ErrorCode::DegenerateInput, "PCA needs at least 2 points");
    }
    const std::size_t p = points.front().size();
    PcaResult res;
    std::vector<double> means;
    std::vector<double> stds;
    zscore_columns(points, means, stds);
    for (std::size_t j = 0; j < p; ++j) {
        if (stds[j] > 1e-12 * std::max(1.0, std::abs(means[j]))) {
            res.kept_features.push_back(j);
            res.means.push_back(means[j]);
            res.stds.push_back(stds[j]);
        } else {
            res.warnings.push_back("feature " + std::to_string(j) +
                                   " has zero variance; dropped from PCA");
        }
    }
    const std::size_t q = res.kept_features.size();
    if (q == 0) {
        fail(ErrorCode::DegenerateInput, "PCA: every feature has zero variance");
    }
    dims = std::min(dims, q);

    Eigen::MatrixXd z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(q));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < q; ++j) {
            z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                (points[i][res.kept_features[j]] - res.means[j]) / res.stds[j];
        }
    }
    const Eigen::MatrixXd cov = (z.transpose() * z) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) {
        fail(ErrorCode::Numerical, "PCA eigendecomposition failed");
    }
    // Eigen returns ascending eigenvalues.
    const auto& evals = solver.eigenvalues();
    const auto& evecs = solver.eigenvectors();
    double total = 0.0;
    for (Eigen::Index j = 0; j < evals.size(); ++j) {
        total += std::max(0.0, evals(j));
    }
    for (Eigen::Index j = evals.size() - 1; j >= 0; --j) {
        res.eigenvalues.push_back(std::max(0.0, evals(j)));
    }
    for (std::size_t d = 0; d < dims; ++d) {
        const Eigen::Index col = evals.size() - 1 - static_cast<Eigen::Index>(d);
        Eigen::VectorXd v = evecs.col(col);
        // Sign convention: largest-magnitude loading is positive.
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) {
            v = -v;
        }
        res.components.emplace_back(v.data(), v.data() + v.size());
        res.explained_variance_ratio.push_back(total > 0.0 ? res.eigenvalues[d] / total : 0.0);
    }
    res.projections.assign(n, std::vector<double>(dims, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 0; d < dims; ++d) {
            double s = 0.0;
            for (std::size_t j = 0; j < q; ++j) {
                s += z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
                     res.components[d][j];
            }
            res.projections[i][d] = s;
        }
    }
    return res;
}

SplitResult stratified_split(const std::vector<int>& assignments, double train_frac,
                             std::uint64_t seed) {
    if (!(train_frac >= 0.0 && train_frac <= 1.0)) {
        fail(ErrorCode::InvalidArgument, "train fraction must lie in [0, 1]");
    }
    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        members[assignments[i]].push_back(i);
    }
    SplitResult res;
    std::vector<int> eligible;
    std::size_t n_eligible = 0;
    for (const auto& [c, ids] : members) {
        if (ids.size() < 2) {
            res.warnings.push_back("cluster " + std::to_string(c) + " has " +
                                   std::to_string(ids.size()) +
                                   " member(s); placed wholly in train");
            res.train.insert(res.train.end(), ids.begin(), ids.end());
        } else {
            eligible.push_back(c);
            n_eligible += ids.size();
        }
    }

    const auto target =
        static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n_eligible)));
    std::vector<std::size_t> quota(eligible.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t e = 0; e < eligible.size(); ++e) {
        const double exact = train_frac * static_cast<double>(members[eligible[e]].size());
        quota[e] = static_cast<std::size_t>(std::floor(exact));
        assigned += quota[e];
        remainders.push_back({exact - std::floor(exact), e});
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& x, const auto& y) { return x.first > y.first; });
    for (std::size_t r = 0; assigned < target && r < remainders.size(); ++r) {
        ++quota[remainders[r].second];
        ++assigned;
    }

    for (std::size_t e = 0; e < eligible.size(); ++e) {
        auto ids = members[eligible[e]];
        Rng rng(seed, {static_cast<std::uint64_t>(static_cast<std::uint32_t>(eligible[e]))});
        rng.shuffle(ids.begin(), ids.end());
        res.train.insert(res.train.end(), ids.begin(),
                         ids.begin() + static_cast<std::ptrdiff_t>(quota[e]));
        res.test.insert(res.test.end(), ids.begin() + static_cast<std::ptrdiff_t>(quota[e]),
                        ids.end());
    }
    std::sort(res.train.begin(), res.train.end());
    std::sort(res.test.begin(), res.test.end());
    return res;
}

std::vector<ClusterSummaryRow> cluster_summary(const std::vector<FeatureVector>& features,
                                               const std::vector<int>& assignments,
                                               std::size_t k) {
    std::vector<ClusterSummaryRow> rows(k);
    for (std::size_t c = 0; c < k; ++c) {
        rows[c].cluster = static_cast<int>(c);
    }
    for (std::size_t i = 0; i < features.size(); ++i) {
        auto& r = rows.at(static_cast<std::size_t>(assignments[i]));
        ++r.count;
        r.avg_speed += features[i].avg_speed;
        r.max_speed += features[i].max_speed;
        r.stops_per_km += features[i].stops_per_km;
        r.idle_ratio_pct += 100.0 * features[i].idle_ratio;
    }
    for (auto& r : rows) {
        if (r.count > 0) {
            const double n = static_cast<double>(r.count);
            r.avg_speed /= n;
            r.max_speed /= n;
            r.stops_per_km /= n;
            r.idle_ratio_pct /= n;
        }
    }
    return rows;
}

nlohmann::json cluster_model_to_json(const ClusterModel& model) {
    return {
        {"kind", "kmeans"},
        {"version", 1},
        {"k", model.k},
        {"features", std::vector<std::string>(kFeatureNames.begin(), kFeatureNames.end())},
        {"centroids", model.centroids},
        {"feature_means", model.feature_means},
        {"feature_stds", model.feature_stds},
        {"assignments", model.assignments},
        {"inertia_history", model.inertia_history},
        {"iterations", model.iterations},
    };
}

ClusterModel cluster_model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("kind").get<std::string>() != "kmeans") {
            fail(ErrorCode::Parse, "model file is not a k-means model");
        }
        if (j.at("version").get<int>() != 1) {
            fail(ErrorCode::Version, "unsupported k-means model version");
        }
        ClusterModel m;
        m.k = j.at("k").get<std::size_t>();
        m.centroids = j.at("centroids").get<Matrix>();
        m.feature_means = j.at("feature_means").get<std::vector<double>>();
        m.feature_stds = j.at("feature_stds").get<std::vector<double>>();
        m.assignments = j.at("assignments").get<std::vector<int>>();
        m.inertia_history = j.at("inertia_history").get<std::vector<double>>();
        m.iterations = j.at("iterations").get<std::size_t>();
        if (m.centroids.size() != m.k || m.feature_means.size() != kFeatureCount ||
            m.feature_stds.size() != kFeatureCount) {
            fail(ErrorCode::Parse, "k-means model has inconsistent dimensions");
        }
        for (const auto& c : m.centroids) {
            if (c.size() != kFeatureCount) {
                fail(ErrorCode::Parse, "k-means centroid has the wrong dimension");
            }
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Parse, std::string("malformed k-means model: ") + e.what());
    }
}

} // namespace microtrip
